#include "esrstm/spectrometer.hpp"

#include <bit>
#include <cmath>
#include <random>
#include <string>

#include "esrstm/errors.hpp"

namespace esrstm::spectrometer {

namespace {

void require_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw DomainError(std::string(what) + " must be finite");
}

/// Lines weaker than this fraction of the maximum matrix element are noise
/// of the diagonalization, not resonances.
constexpr double kIntensityFloor = 1e-3;

} // namespace

BlochSteadyState bloch_peak(double omega_rad_per_s, double t1_s, double t2_s) {
    if (!(omega_rad_per_s > 0.0) || !(t1_s > 0.0) || !(t2_s > 0.0) ||
        !std::isfinite(omega_rad_per_s) || !std::isfinite(t1_s) || !std::isfinite(t2_s))
        throw DomainError("bloch_peak requires positive finite omega, t1, t2");
    const double x = omega_rad_per_s * omega_rad_per_s * t1_s * t2_s;
    BlochSteadyState out;
    out.saturation = x / (1.0 + x);
    out.gamma = Frequency{std::sqrt(1.0 + x) / (std::numbers::pi * t2_s)};
    return out;
}

Lineshape Lineshape::phenomenological(Current a_peak, Frequency gamma) {
    if (!(a_peak.value() > 0.0) || !std::isfinite(a_peak.value()))
        throw DomainError("peak amplitude must be positive");
    if (!(gamma.value() > 0.0) || !std::isfinite(gamma.value()))
        throw DomainError("linewidth must be positive");
    return Lineshape(false, a_peak, gamma);
}

Lineshape Lineshape::bloch(double omega_rad_per_s, double t1_s, double t2_s) {
    const auto ss = bloch_peak(omega_rad_per_s, t1_s, t2_s);
    return Lineshape(true, Current{kBlochFullScaleA * ss.saturation}, ss.gamma);
}

void JunctionConfig::validate() const {
    require_finite(i_set.value(), "setpoint current");
    require_finite(v_dc.value(), "bias");
    require_finite(v_rf.value(), "RF amplitude");
    if (!(std::abs(eta) <= 1.0)) throw DomainError("tip polarization |eta| must be <= 1");
    require_finite(b_tip.value(), "tip field");
    if (!(std::abs(delta_b_hyst.value()) <= 0.010))
        throw DomainError("hysteresis offset bounded by 10 mT");
}

void MoleculeMap::validate() const {
    if (!(ring_radius_nm > 0.0) || !std::isfinite(ring_radius_nm))
        throw DomainError("ring radius must be positive");
    if (!(ring_width_nm > 0.0) || !std::isfinite(ring_width_nm))
        throw DomainError("ring width must be positive");
    if (!(lobe_depth >= 0.0 && lobe_depth <= 1.0))
        throw DomainError("lobe depth must lie in [0, 1]");
    require_finite(center.x_nm, "map center");
    require_finite(center.y_nm, "map center");
}

Position MoleculeMap::lobe_position(int k) const {
    const double theta = (k % kLobes) * 2.0 * std::numbers::pi / kLobes;
    return {center.x_nm + ring_radius_nm * std::cos(theta),
            center.y_nm + ring_radius_nm * std::sin(theta)};
}

double radical_density(Position pos, const MoleculeMap& map) {
    map.validate();
    const double dx = pos.x_nm - map.center.x_nm;
    const double dy = pos.y_nm - map.center.y_nm;
    const double r = std::hypot(dx, dy);
    const double theta = (r > 0.0) ? std::atan2(dy, dx) : 0.0;
    const double dr = r - map.ring_radius_nm;
    const double radial = std::exp(-dr * dr / (2.0 * map.ring_width_nm * map.ring_width_nm));
    const double c = std::cos(4.0 * theta);
    const double angular = 1.0 - map.lobe_depth + map.lobe_depth * c * c;
    return radial * angular;
}

void NoiseModel::validate() const {
    if (!(sigma_a >= 0.0) || !std::isfinite(sigma_a))
        throw DomainError("noise sigma must be non-negative");
}

void FrequencyGrid::validate() const {
    require_finite(lo.value(), "grid edge");
    require_finite(hi.value(), "grid edge");
    if (!(lo.value() < hi.value())) throw DomainError("grid must span lo < hi");
    if (n_points < 2) throw DomainError("grid needs at least two points");
}

std::uint64_t derive_seed(std::uint64_t base, MagneticField b_set, Position pos) {
    // FNV-1a over the raw bit patterns; folding with the base seed keeps
    // per-(B, pos) streams independent of synthesis order.
    std::uint64_t h = 1469598103934665603ull;
    const auto mix = [&h](double v) {
        std::uint64_t bits = std::bit_cast<std::uint64_t>(v == 0.0 ? 0.0 : v);
        for (int i = 0; i < 8; ++i) {
            h ^= (bits >> (8 * i)) & 0xffu;
            h *= 1099511628211ull;
        }
    };
    mix(b_set.value());
    mix(pos.x_nm);
    mix(pos.y_nm);
    return base ^ h;
}

Current lorentzian(Frequency f, Current a, Frequency f_r, Frequency gamma, Current baseline) {
    if (!(gamma.value() > 0.0)) throw DomainError("linewidth must be positive");
    const double hw = 0.5 * gamma.value();
    const double d = f.value() - f_r.value();
    return Current{baseline.value() + a.value() * hw * hw / (d * d + hw * hw)};
}

Spectrum synthesize_spectrum(const spinham::SpinSystemConfig& spin, const JunctionConfig& junction,
                             const MoleculeMap& map, Position pos, MagneticField b_set,
                             const FrequencyGrid& grid, const NoiseModel& noise,
                             ResonanceSource source) {
    spin.validate();
    junction.validate();
    map.validate();
    noise.validate();
    grid.validate();
    require_finite(b_set.value(), "set field");

    const MagneticField b_eff{b_set.value() + junction.delta_b_hyst.value() +
                              junction.b_tip.value()};

    struct Line {
        double f_hz, weight;
    };
    std::vector<Line> lines;
    if (source == ResonanceSource::kSpinModel) {
        for (const auto& l : spinham::esr_lines(spin, b_eff, kIntensityFloor))
            lines.push_back({l.freq.value(), l.intensity / 0.25});
    } else {
        const auto f0 = spinham::f0_from_exchange(spin.exchange);
        lines.push_back({spinham::zeeman_line(spin.g_s, f0, b_eff).value(), 1.0});
    }

    const double density = radical_density(pos, map);
    const double scale = junction.lineshape.peak_amplitude().value() * junction.eta * density;
    const double fwhm = junction.lineshape.fwhm().value();

    std::vector<double> freqs(grid.n_points), values(grid.n_points, 0.0);
    const double span = grid.hi.value() - grid.lo.value();
    for (std::size_t i = 0; i < grid.n_points; ++i) {
        freqs[i] = (i + 1 == grid.n_points)
                       ? grid.hi.value()
                       : grid.lo.value() + span * static_cast<double>(i) /
                                               static_cast<double>(grid.n_points - 1);
        for (const auto& line : lines)
            values[i] += lorentzian(Frequency{freqs[i]}, Current{scale * line.weight},
                                    Frequency{line.f_hz}, Frequency{fwhm}, Current{0.0})
                             .value();
    }

    const std::uint64_t seed = derive_seed(noise.seed, b_set, pos);
    if (noise.sigma_a > 0.0) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> gauss(0.0, noise.sigma_a);
        for (double& v : values) v += gauss(rng);
    }

    SpectrumMeta meta;
    meta.b_set = b_set;
    meta.x_nm = pos.x_nm;
    meta.y_nm = pos.y_nm;
    meta.position = std::to_string(pos.x_nm) + "," + std::to_string(pos.y_nm);
    meta.v_dc = junction.v_dc;
    meta.i_set = junction.i_set;
    meta.v_rf = junction.v_rf;
    meta.seed = seed;
    return Spectrum(std::move(freqs), std::move(values), meta);
}

Current lockin_output(std::span<const double> i_on_a, std::span<const double> i_off_a) {
    if (i_on_a.size() != i_off_a.size())
        throw DomainError("lock-in traces must have equal length");
    if (i_on_a.empty()) throw DomainError("lock-in traces must be non-empty");
    double on = 0.0, off = 0.0;
    for (double v : i_on_a) on += v;
    for (double v : i_off_a) off += v;
    const double n = static_cast<double>(i_on_a.size());
    return Current{on / n - off / n};
}

} // namespace esrstm::spectrometer
