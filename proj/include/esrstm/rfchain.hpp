#pragma once

#include <cstddef>
#include <vector>

#include "esrstm/quantities.hpp"

namespace esrstm::rfchain {

// ===========================================================================
//  Junction nonlinearity
// ===========================================================================

/// Smooth step model of the surface-state I-V characteristic,
///
///   I(V) = c V + G w softplus((V - V0) / w),
///
/// so dI/dV rises from c below the onset V0 to c + G above it over a width
/// of order w. The calibration only needs a known sharp nonlinearity, not
/// band-structure realism.
struct IVCurve {
    double c = 1e-10;     // ohmic conductance, S
    double g_step = 2e-9; // step conductance, S
    double v0 = -0.070;   // onset, V
    double w = 0.005;     // transition width, V

    void validate() const; // c, g_step >= 0; w > 0; all finite

    double current(double v) const;
    double didv(double v) const;
};

// ===========================================================================
//  Transmission of the RF line
// ===========================================================================

/// Frequency-dependent amplitude transmission. Parametric form in dB,
///
///   T_dB(f) = -a (f - f_anchor)/1 GHz + r sin(2 pi (f - f_anchor)/period + phi),
///
/// or a tabulated set of (f, T_linear) samples with linear interpolation.
/// T_linear = 10^(T_dB / 20) is an amplitude (not power) ratio.
class TransmissionModel {
  public:
    static TransmissionModel parametric(double slope_db_per_ghz, double ripple_db,
                                        Frequency ripple_period, double phase,
                                        Frequency f_anchor);
    /// Samples must be strictly increasing in f with positive T.
    static TransmissionModel tabulated(std::vector<double> freqs_hz,
                                       std::vector<double> t_linear);

    /// Amplitude ratio at f. Tabulated models throw DomainError outside
    /// their sample range; the parametric form is defined everywhere.
    double linear(Frequency f) const;
    double db(Frequency f) const;

    bool is_tabulated() const { return tabulated_; }
    const std::vector<double>& table_freqs_hz() const { return freqs_; }
    const std::vector<double>& table_t_linear() const { return values_; }

  private:
    TransmissionModel() = default;

    bool tabulated_ = false;
    double slope_db_per_ghz_ = 0.0;
    double ripple_db_ = 0.0;
    double period_hz_ = 1.0;
    double phase_ = 0.0;
    double anchor_hz_ = 0.0;
    std::vector<double> freqs_;
    std::vector<double> values_;
};

// ===========================================================================
//  Compensated source powers
// ===========================================================================

/// Source power versus frequency that holds the junction RF amplitude at
/// target_vrf. Powers interpolate linearly in dB between samples. Rows where
/// the required power exceeded the source maximum carry a clipped flag and
/// hold the clamped value.
struct PowerTable {
    std::vector<double> freqs_hz;
    std::vector<double> power_dbm;
    std::vector<unsigned char> clipped; // same length as freqs_hz
    Voltage target_vrf{0.0};
    Frequency band_lo{0.0};
    Frequency band_hi{0.0};

    /// Checks sorted grid, matched lengths, band coverage without gaps
    /// larger than max_gap.
    void validate(Frequency max_gap) const;

    double power_at(Frequency f) const; // linear interpolation in dB
    bool any_clipped() const;
};

// ===========================================================================
//  Measured dI/dV traces
// ===========================================================================

/// A bias-sorted dI/dV trace, the raw material of the V_RF estimation.
struct ConductanceTrace {
    std::vector<double> bias_v;
    std::vector<double> didv_s;

    void validate() const; // >= 8 points, strictly increasing bias, finite
};

// ===========================================================================
//  Arcsine rectification
// ===========================================================================

/// Time average of I(V_DC + V_RF cos theta) over one RF cycle,
/// (1/pi) int_0^pi I(V_DC + V_RF cos t) dt, evaluated with Gauss-Chebyshev
/// quadrature refined until two successive node counts agree to 1e-10
/// relative. V_RF = 0 returns I(V_DC) exactly.
Current arcsine_average(const IVCurve& iv, Voltage v_dc, Voltage v_rf);

/// dI/dV convolved with the arcsine kernel 1/(pi sqrt(V_RF^2 - v^2));
/// identical node rule as arcsine_average and equal to its V_DC derivative.
double broadened_didv(const IVCurve& iv, Voltage v, Voltage v_rf);

/// Amplitude-power relation V_RF = k 10^(P_dBm/20); k is in volts per
/// square-root milliwatt.
Voltage vrf_of_power(double k, PowerDbm p);

} // namespace esrstm::rfchain
