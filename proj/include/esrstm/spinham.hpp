#pragma once

#include <vector>

#include "esrstm/constants.hpp"
#include "esrstm/linalg.hpp"
#include "esrstm/quantities.hpp"

namespace esrstm::spinham {

// ===========================================================================
//  Spin spaces and angular-momentum operators
// ===========================================================================

/// A single angular momentum with quantum number j (half-integer).
/// Basis states are ordered m = j, j-1, ..., -j.
struct SpinSpace {
    double j = 0.5;
    int dim = 2;

    /// Throws DomainError unless 2j is a non-negative integer.
    static SpinSpace of(double j);
};

struct LadderSet {
    linalg::Matrix jz;     // diagonal, entries m
    linalg::Matrix jplus;  // raising, [m+1, m] = sqrt(j(j+1) - m(m+1))
    linalg::Matrix jminus; // transpose of jplus
    linalg::Matrix jx;     // (jplus + jminus) / 2
};

/// Dimensionless angular-momentum matrices for quantum number j.
LadderSet ladder_matrices(double j);

// ===========================================================================
//  Coupled radical-ion model
// ===========================================================================

enum class ExchangeForm {
    kIsing,      // Sz Jz only; diagonal in the product basis
    kHeisenberg, // Sz Jz + (S+ J- + S- J+) / 2
};

enum class ModelMode {
    kFull,      // full product space, 2 x 13 = 26 levels
    kProjected, // ion restricted to the extremal doublet mJ = +-6, 4 levels
};

/// Configuration of the exchange-coupled S = 1/2 radical + J = 6 ion system.
/// The anisotropy enters as -|A| Jz^2, which makes mJ = +-6 the ground
/// doublet; its magnitude controls how strongly that doublet is frozen out.
struct SpinSystemConfig {
    double g_s = 1.84;                                        // radical g-factor
    double g_j = 1.5;                                         // ion Lande factor
    Energy exchange{constants::kPlanckJs * 0.3e9};            // J_ex; sign carried, < 0 ferromagnetic
    Energy anisotropy{constants::kPlanckJs * 1000e9};         // |A| of the -|A| Jz^2 term
    ExchangeForm exchange_form = ExchangeForm::kIsing;
    ModelMode mode = ModelMode::kFull;

    static constexpr double kRadicalSpin = 0.5;
    static constexpr double kIonMomentum = 6.0;

    void validate() const;
};

/// H = mu_B B (g_s Sz x I + g_j I x Jz) + J_ex (Sz x Jz [+ flip-flop])
///     - |A| (I x Jz^2), in joules. Real symmetric; dim 26 (full) or
/// 4 (projected). The field is the out-of-plane component.
linalg::Matrix build_hamiltonian(const SpinSystemConfig& cfg, MagneticField b);

/// Sx x I in the configured model space (drives radical spin flips).
linalg::Matrix radical_sx_operator(const SpinSystemConfig& cfg);

/// I x Jz in the configured model space (labels ion sectors).
linalg::Matrix ion_jz_operator(const SpinSystemConfig& cfg);

// ===========================================================================
//  Resonance lines
// ===========================================================================

struct EsrLine {
    Frequency freq{0.0};
    double intensity = 0.0; // |<a| Sx x I |b>|^2, at most 1/4 for S = 1/2
    int sector_mj = 0;      // rounded <Jz> of the pair
    int level_a = 0;        // lower level index (ascending-energy order)
    int level_b = 0;        // upper level index
};

/// Default occupation window: transitions are kept only when the lower
/// level lies within this energy of the ground level. 500 GHz x h covers
/// the Zeeman-split extremal doublet at laboratory fields while excluding
/// the anisotropy-gapped sectors.
inline constexpr double kDefaultOccupationWindowJ = constants::kPlanckJs * 500e9;

/// All radical-flip transitions above the intensity floor, restricted to
/// thermally relevant initial states and sorted by frequency. Lines closer
/// than max(1e-9 f, 1 Hz) are treated as one (degenerate sectors merge).
/// An empty result is a valid return. intensity_floor must lie in (0, 0.25).
std::vector<EsrLine> esr_lines(const SpinSystemConfig& cfg, MagneticField b,
                               double intensity_floor,
                               Energy occupation_window = Energy{kDefaultOccupationWindowJ});

// ===========================================================================
//  Closed forms
// ===========================================================================

/// Transition frequency f = g (mu_B / h) B + f0 for the radical line with a
/// field-independent exchange offset. B must be >= 0 (out-of-plane scalar
/// convention).
Frequency zeeman_line(double g, Frequency f0, MagneticField b);

/// Exchange offset of the radical line when the ion sits in the extremal
/// doublet: f0 = 6 |J_ex| / h. Reports magnitude; the sign convention is
/// metadata, not inferred.
Frequency f0_from_exchange(Energy j_ex);

/// Inverse of f0_from_exchange, |J_ex| = h f0 / 6. Requires f0 >= 0.
Energy exchange_from_f0(Frequency f0);

} // namespace esrstm::spinham
