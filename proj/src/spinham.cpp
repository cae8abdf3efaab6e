#include "esrstm/spinham.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "esrstm/errors.hpp"

namespace esrstm::spinham {
namespace {

using linalg::Matrix;

bool half_integer(double j) {
    const double twoj = 2.0 * j;
    return std::isfinite(j) && j >= 0.0 && std::abs(twoj - std::round(twoj)) < 1e-9;
}

void check_field_finite(MagneticField b) {
    if (!std::isfinite(b.value())) throw DomainError("magnetic field must be finite");
}

// Diagonal of I x Jz in whichever model space cfg selects. Both modes keep
// Jz diagonal, which esr_lines exploits when labelling sectors.
std::vector<double> ion_jz_diagonal(const SpinSystemConfig& cfg) {
    if (cfg.mode == ModelMode::kProjected) return {6.0, -6.0, 6.0, -6.0};
    std::vector<double> d;
    d.reserve(26);
    for (int s = 0; s < 2; ++s)
        for (int i = 0; i < 13; ++i) d.push_back(6.0 - i);
    return d;
}

} // namespace

SpinSpace SpinSpace::of(double j) {
    if (!half_integer(j)) throw DomainError("spin quantum number must be a non-negative half-integer");
    SpinSpace s;
    s.j = j;
    s.dim = static_cast<int>(std::lround(2.0 * j)) + 1;
    return s;
}

LadderSet ladder_matrices(double j) {
    const SpinSpace space = SpinSpace::of(j);
    const auto n = static_cast<std::size_t>(space.dim);
    LadderSet out{Matrix(n), Matrix(n), Matrix(n), Matrix(n)};
    for (std::size_t i = 0; i < n; ++i) out.jz.at(i, i) = j - static_cast<double>(i);
    for (std::size_t i = 1; i < n; ++i) {
        const double m = j - static_cast<double>(i); // J+ sends m to m+1, one row up
        out.jplus.at(i - 1, i) = std::sqrt(j * (j + 1.0) - m * (m + 1.0));
    }
    out.jminus = out.jplus.transposed();
    out.jx = 0.5 * (out.jplus + out.jminus);
    return out;
}

void SpinSystemConfig::validate() const {
    if (!std::isfinite(g_s) || g_s < 0.0) throw DomainError("radical g-factor must be finite and non-negative");
    if (!std::isfinite(g_j) || g_j < 0.0) throw DomainError("ion g-factor must be finite and non-negative");
    if (!std::isfinite(exchange.value())) throw DomainError("exchange energy must be finite");
    if (!std::isfinite(anisotropy.value()) || anisotropy.value() < 0.0)
        throw DomainError("anisotropy magnitude must be finite and non-negative");
}

linalg::Matrix build_hamiltonian(const SpinSystemConfig& cfg, MagneticField b) {
    cfg.validate();
    check_field_finite(b);

    const double mu_b = constants::kBohrMagnetonJPerT;
    const double bz = b.value();
    const double j_ex = cfg.exchange.value();
    const double a_mag = std::abs(cfg.anisotropy.value());

    const LadderSet s_ops = ladder_matrices(SpinSystemConfig::kRadicalSpin);

    if (cfg.mode == ModelMode::kProjected) {
        // mJ = +-6 doublet only. Jz is diagonal there and J+- leave the
        // doublet entirely, so the flip-flop term has no matrix elements and
        // both exchange forms give the same (diagonal) Hamiltonian.
        Matrix jz(2);
        jz.at(0, 0) = 6.0;
        jz.at(1, 1) = -6.0;
        Matrix jz2(2);
        jz2.at(0, 0) = 36.0;
        jz2.at(1, 1) = 36.0;
        const Matrix id2 = Matrix::identity(2);

        Matrix h = kron(mu_b * bz * cfg.g_s * s_ops.jz, id2);
        h.add_scaled(mu_b * bz * cfg.g_j, kron(id2, jz));
        h.add_scaled(j_ex, kron(s_ops.jz, jz));
        h.add_scaled(-a_mag, kron(id2, jz2));
        return h;
    }

    const LadderSet j_ops = ladder_matrices(SpinSystemConfig::kIonMomentum);
    const Matrix id_s = Matrix::identity(2);
    const Matrix id_j = Matrix::identity(13);

    Matrix h = kron(mu_b * bz * cfg.g_s * s_ops.jz, id_j);
    h.add_scaled(mu_b * bz * cfg.g_j, kron(id_s, j_ops.jz));
    h.add_scaled(j_ex, kron(s_ops.jz, j_ops.jz));
    if (cfg.exchange_form == ExchangeForm::kHeisenberg) {
        h.add_scaled(0.5 * j_ex, kron(s_ops.jplus, j_ops.jminus));
        h.add_scaled(0.5 * j_ex, kron(s_ops.jminus, j_ops.jplus));
    }
    h.add_scaled(-a_mag, kron(id_s, j_ops.jz * j_ops.jz));
    return h;
}

linalg::Matrix radical_sx_operator(const SpinSystemConfig& cfg) {
    cfg.validate();
    const LadderSet s_ops = ladder_matrices(SpinSystemConfig::kRadicalSpin);
    const std::size_t ion_dim = cfg.mode == ModelMode::kProjected ? 2 : 13;
    return kron(s_ops.jx, Matrix::identity(ion_dim));
}

linalg::Matrix ion_jz_operator(const SpinSystemConfig& cfg) {
    cfg.validate();
    const std::vector<double> diag = ion_jz_diagonal(cfg);
    Matrix out(diag.size());
    for (std::size_t i = 0; i < diag.size(); ++i) out.at(i, i) = diag[i];
    return out;
}

std::vector<EsrLine> esr_lines(const SpinSystemConfig& cfg, MagneticField b,
                               double intensity_floor, Energy occupation_window) {
    cfg.validate();
    check_field_finite(b);
    if (!std::isfinite(intensity_floor) || intensity_floor <= 0.0 || intensity_floor >= 0.25)
        throw DomainError("intensity floor must lie strictly between 0 and 0.25");
    if (!std::isfinite(occupation_window.value()) || occupation_window.value() < 0.0)
        throw DomainError("occupation window must be finite and non-negative");

    const linalg::EighResult eig = linalg::eigh(build_hamiltonian(cfg, b));
    const std::size_t n = eig.eigenvalues.size();
    const Matrix& v = eig.eigenvectors;

    // Sx x I in the eigenbasis; Jz expectation per eigenstate (Jz stays
    // diagonal in the product basis for every supported mode).
    const Matrix sx_eig = v.transposed() * radical_sx_operator(cfg) * v;
    const std::vector<double> jz_diag = ion_jz_diagonal(cfg);
    std::vector<double> jz_mean(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += v.at(i, k) * v.at(i, k) * jz_diag[i];
        jz_mean[k] = acc;
    }

    const double e_ground = eig.eigenvalues.front();
    const double h_planck = constants::kPlanckJs;

    std::vector<EsrLine> lines;
    for (std::size_t a = 0; a < n; ++a) {
        if (eig.eigenvalues[a] - e_ground > occupation_window.value()) break; // ascending order
        for (std::size_t bb = a + 1; bb < n; ++bb) {
            const double freq = (eig.eigenvalues[bb] - eig.eigenvalues[a]) / h_planck;
            if (freq <= 1.0) continue;
            const double amp = sx_eig.at(a, bb);
            const double intensity = amp * amp;
            if (intensity <= intensity_floor) continue;
            EsrLine line;
            line.freq = Frequency{freq};
            line.intensity = intensity;
            line.sector_mj = static_cast<int>(std::lround(0.5 * (jz_mean[a] + jz_mean[bb])));
            line.level_a = static_cast<int>(a);
            line.level_b = static_cast<int>(bb);
            lines.push_back(line);
        }
    }

    std::sort(lines.begin(), lines.end(),
              [](const EsrLine& x, const EsrLine& y) { return x.freq.value() < y.freq.value(); });

    // Collapse numerically degenerate lines, keeping the strongest member so
    // the <= 1/4 intensity bound survives the merge.
    std::vector<EsrLine> merged;
    for (const EsrLine& line : lines) {
        if (!merged.empty()) {
            const double tol = std::max(1e-9 * line.freq.value(), 1.0);
            if (line.freq.value() - merged.back().freq.value() <= tol) {
                if (line.intensity > merged.back().intensity) merged.back() = line;
                continue;
            }
        }
        merged.push_back(line);
    }
    return merged;
}

Frequency zeeman_line(double g, Frequency f0, MagneticField b) {
    if (!std::isfinite(g)) throw DomainError("g-factor must be finite");
    if (!std::isfinite(f0.value())) throw DomainError("intercept frequency must be finite");
    if (!std::isfinite(b.value()) || b.value() < 0.0)
        throw DomainError("field must be finite and non-negative");
    return Frequency{g * constants::kMuBOverHHzPerT * b.value() + f0.value()};
}

Frequency f0_from_exchange(Energy j_ex) {
    if (!std::isfinite(j_ex.value())) throw DomainError("exchange energy must be finite");
    return Frequency{6.0 * std::abs(j_ex.value()) / constants::kPlanckJs};
}

Energy exchange_from_f0(Frequency f0) {
    if (!std::isfinite(f0.value()) || f0.value() < 0.0)
        throw DomainError("intercept frequency must be finite and non-negative");
    return Energy{constants::kPlanckJs * f0.value() / 6.0};
}

} // namespace esrstm::spinham
