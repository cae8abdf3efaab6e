#pragma once

/// Fundamental constants used throughout the toolkit, CODATA 2018 values,
/// SI units. Frequencies are Hz everywhere inside the library; GHz and
/// other display units appear only at I/O boundaries.

namespace esrstm::constants {

/// h, Planck constant [J·s] (exact).
inline constexpr double kPlanckJs = 6.62607015e-34;

/// mu_B, Bohr magneton [J/T].
inline constexpr double kBohrMagnetonJPerT = 9.2740100783e-24;

/// mu_B / h [Hz/T]; about 13.996 GHz per tesla.
inline constexpr double kMuBOverHHzPerT = kBohrMagnetonJPerT / kPlanckJs;

/// 1 eV in joules (exact).
inline constexpr double kElectronVoltJ = 1.602176634e-19;

/// h in eV·s, for energy views in electron volts.
inline constexpr double kPlanckEvS = kPlanckJs / kElectronVoltJ;

static_assert(kMuBOverHHzPerT > 1.3996244e10 && kMuBOverHHzPerT < 1.3996245e10,
              "derived mu_B/h ratio out of range");

} // namespace esrstm::constants
