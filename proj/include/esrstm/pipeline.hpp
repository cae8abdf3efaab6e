#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "esrstm/config.hpp"
#include "esrstm/quantities.hpp"
#include "esrstm/spectrometer.hpp"
#include "esrstm/spectrum.hpp"

namespace esrstm::pipeline {

/// One field's fitted resonance inside a Zeeman analysis.
struct PeakRow {
    MagneticField b_set{0.0};
    Frequency f_fit{0.0};
    Frequency sigma_f{0.0};
    Current amplitude{0.0};
    Frequency gamma{0.0};
    bool used = false;
    std::string note; // exclusion reason when not used
};

/// g-factor, zero-field intercept, and exchange magnitude from a straight
/// line through the per-field resonances.
struct ZeemanResult {
    double g = 0.0;
    double sigma_g = 0.0;
    Frequency f0{0.0};
    Frequency sigma_f0{0.0};
    Energy j_ex{0.0};       // |J_ex| = h f0 / 6 (Ising doublet convention)
    Energy sigma_j_ex{0.0};
    bool weighted = false;  // false when any per-point sigma was zero
    std::vector<PeakRow> table;
};

/// Fit a Lorentzian to each spectrum, then a weighted line through
/// (B_set, f_r). Spectra with no detectable peak are excluded with a note;
/// fewer than two usable distinct fields is an AnalysisError. When every
/// per-point sigma is positive the line fit is weighted and parameter
/// uncertainties are propagated from them; otherwise the fit is unweighted
/// and uncertainties are scaled from the residuals (zero when dof = 0).
/// g = h x slope / mu_B.
ZeemanResult zeeman_analysis(std::span<const Spectrum> spectra);

/// One tip position in a spatial ESR map.
struct ScanPoint {
    spectrometer::Position pos;
    bool detected = false;
    Current amplitude{0.0};
    Frequency f_r{0.0};
    Frequency sigma_f{0.0};
};

/// Synthesize and fit one spectrum per position at a fixed set field.
/// Throws DomainError on an empty position list.
std::vector<ScanPoint> spatial_scan(std::span<const spectrometer::Position> positions,
                                    MagneticField b_set, const RunConfig& cfg,
                                    std::uint64_t seed);

/// Self-contained result of a full simulated experiment. The body carries
/// the configuration echo, a conventions block, per-stage results, and
/// pass/fail against the configured envelopes; provenance.timestamp is the
/// only field that varies between identical runs.
struct ExperimentReport {
    nlohmann::ordered_json body;
    bool passed = false;
};

/// Calibrate the RF chain, acquire spectra at each configured field (the
/// acquisition window is re-centred per field on the nominal line), run the
/// Zeeman analysis, and map the eight lobes plus the centre. A stage error
/// is recorded in the report and halts downstream stages; the partial
/// report is still returned.
ExperimentReport roundtrip_experiment(const RunConfig& cfg, std::uint64_t seed);

} // namespace esrstm::pipeline
