#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "esrstm/linalg.hpp"
#include "esrstm/quantities.hpp"
#include "esrstm/rfchain.hpp"
#include "esrstm/spectrum.hpp"

namespace esrstm::fitkit {

/// Scalar model y = f(x; p) used by the least-squares engine.
using ModelFn = std::function<double(double x, std::span<const double> p)>;

struct FitResult {
    std::vector<std::string> names;
    std::vector<double> params;
    std::vector<double> sigmas;    // sqrt(diag(covariance))
    linalg::Matrix covariance;
    double chi2 = 0.0;
    int dof = 0;
    bool converged = false;
    int n_iter = 0;
    std::vector<double> chi2_trace; // accepted chi2 per iteration when recorded

    double param(std::string_view name) const;
    double sigma(std::string_view name) const;
};

struct LmOptions {
    double lambda0 = 1e-3;
    double lambda_max = 1e12;
    int max_iter = 200;
    double rel_tol = 1e-10; // relative chi2 change declaring convergence
    bool record_trace = false;
};

/// Damped least squares, minimizing sum((y - f(x; p)) / sigma)^2.
/// Jacobian by central differences (relative step 1e-6, absolute floor
/// 1e-12); damping lambda starts at lambda0, x10 on a rejected step, /10 on
/// an accepted one; stops on relative chi2 change < rel_tol (converged),
/// lambda > lambda_max, or max_iter. Covariance is chi2/dof x (J^T W J)^-1.
/// A singular normal matrix flags non-convergence; NaN from the model
/// throws DomainError.
FitResult levenberg_marquardt(const ModelFn& model, std::span<const double> x,
                              std::span<const double> y, std::span<const double> sigma,
                              std::vector<double> initial, std::vector<std::string> names = {},
                              const LmOptions& opts = {});

/// Central-difference gradient of the model at one x, the same stencil the
/// engine uses for its Jacobian rows.
std::vector<double> fd_gradient(const ModelFn& model, double x, std::span<const double> p);

// ===========================================================================
//  Peak detection and the three analysis fits
// ===========================================================================

struct PeakGuess {
    Frequency f_guess{0.0};
    Current amplitude_guess{0.0};
    Frequency width_guess{0.0};
    double snr = 0.0; // (peak - baseline) / robust noise, capped at 1e9
};

/// Robust single-peak detector: baseline = median, noise = 1.4826 MAD; the
/// maximum sample must clear baseline + k_mad x noise. Width comes from the
/// half-maximum crossings. Absence is a value, not an error.
std::optional<PeakGuess> detect_peak(const Spectrum& s, double k_mad = 5.0);

/// Lorentzian peak fit {amplitude, f_r, gamma, baseline}; gamma is FWHM.
/// Seeds from the supplied guess or from detect_peak; throws AnalysisError
/// when neither yields a starting point.
FitResult fit_lorentzian(const Spectrum& s, const std::optional<PeakGuess>& guess = std::nullopt);

/// Two-stage arcsine-broadening fit. Stage 1 fits the unbroadened step
/// model {c, g_step, v0, w} to the RF-off trace; stage 2 holds those fixed
/// and fits V_RF alone to the RF-on trace through the arcsine-broadened
/// model (coarse scan, then damped refinement). Result carries
/// {v_rf, v0, height, width, c} with per-stage uncertainties.
FitResult fit_arcsine_step(const rfchain::ConductanceTrace& didv_on,
                           const rfchain::ConductanceTrace& didv_off);

struct LinePoint {
    double b_tesla = 0.0;
    double f_hz = 0.0;
    double sigma_hz = 1.0;
};

/// Closed-form weighted straight-line fit f = slope B + intercept.
/// Uncertainties are propagated from the stated sigma_hz (not rescaled by
/// reduced chi2, so scaling every sigma by c scales parameter sigmas by c).
/// Throws DomainError for bad sigmas, AnalysisError when all B coincide.
FitResult linear_fit_weighted(std::span<const LinePoint> points);

} // namespace esrstm::fitkit
