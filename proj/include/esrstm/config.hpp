#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "esrstm/calibration.hpp"
#include "esrstm/rfchain.hpp"
#include "esrstm/spectrometer.hpp"
#include "esrstm/spinham.hpp"

namespace esrstm {

/// One experiment run, fully specified: spin model, junction, molecule,
/// noise, RF-chain truth, acquisition settings, and target envelopes.
/// Every field defaults to the values of the reference measurement, so an
/// empty document is a valid complete configuration. Serialized as
/// `key = value` lines grouped in [sections]; doubles round-trip exactly.
struct RunConfig {
    // [spin]
    double g_s = 1.84;
    double g_j = 1.5;
    double exchange_ghz = 0.3;      // J_ex / h
    double anisotropy_ghz = 1000.0; // |A| / h
    std::string exchange_form = "ising"; // ising | heisenberg
    std::string spin_mode = "full";      // full | projected

    // [junction]
    double i_set_a = 10e-12;
    double v_dc_v = -0.100;
    double v_rf_v = 0.010;
    double eta = 1.0;
    double b_tip_t = 0.020;
    double delta_b_hyst_t = 0.0;
    std::string lineshape = "phenomenological"; // phenomenological | bloch
    double a_peak_a = 0.3e-12;
    double gamma_hz = 55e6;
    double bloch_omega_rad_s = 1e6;
    double bloch_t1_s = 1e-6;
    double bloch_t2_s = 1e-6;

    // [molecule]
    double center_x_nm = 0.0;
    double center_y_nm = 0.0;
    double ring_radius_nm = 0.45;
    double ring_width_nm = 0.10;
    double lobe_depth = 1.0;

    // [noise]
    double sigma_a = 0.03e-12;
    bool has_seed = false; // seed key is optional; commands demand one
    std::uint64_t seed = 0;

    // [fields]
    std::vector<double> fields_t{0.65, 0.75, 0.80};

    // [grid]
    double f_lo_hz = 17.79e9;
    double f_hi_hz = 19.29e9;
    std::size_t n_points = 301;

    // [line] — ground-truth transmission of the cabling under test
    double line_slope_db_per_ghz = 1.0;
    double line_ripple_db = 3.0;
    double line_ripple_period_hz = 2.5e9;
    double line_ripple_phase = 0.7;
    double line_anchor_hz = 18e9;
    double source_scale_v = 0.05;

    // [calibration]
    double band_lo_hz = 18e9;
    double band_hi_hz = 25e9;
    double band_step_hz = 0.125e9;
    double f_ref_hz = 19e9;
    double p_estimate_dbm = -5.0;
    double p_constant_dbm = 5.0;
    double p_source_max_dbm = 25.0;
    double target_vrf_v = 0.005;
    int readings_per_point = 4;
    double noise_floor_a = 1e-16;
    double cal_noise_level = 0.0;

    // [envelopes] — pass/fail targets for the round-trip report
    double g_lo = 1.72, g_hi = 1.96;          // 1.84 +- 0.12
    double f0_lo_hz = 0.8e9, f0_hi_hz = 2.8e9; // 1.8 +- 1.0 GHz
    double gamma_lo_hz = 50e6, gamma_hi_hz = 60e6;
    double flatness_max = 0.01;
    double vrf_rel_err_max = 0.005;

    /// Cross-field sanity checks. Throws DomainError with the offending key.
    void validate() const;

    // Typed views consumed by the library layers.
    spinham::SpinSystemConfig spin() const;
    spectrometer::JunctionConfig junction() const;
    spectrometer::MoleculeMap molecule() const;
    spectrometer::FrequencyGrid grid() const;
    rfchain::TransmissionModel line() const;
    rfchain::RfChainTruth chain_truth() const;
    rfchain::CalibrationConfig calibration() const;
};

/// Serialize with sections in a fixed order, `%.17g` doubles. The output
/// parses back to an identical configuration.
std::string to_ini(const RunConfig& cfg);

/// Parse the `key = value` dialect emitted by to_ini. Unknown keys and
/// malformed lines throw IoError naming the line number; missing keys keep
/// their defaults. `#` and `;` start comments.
RunConfig parse_ini(const std::string& text);

/// parse_ini over a file's bytes; IoError mentions the path when unreadable.
RunConfig load_config(const std::string& path);

} // namespace esrstm
