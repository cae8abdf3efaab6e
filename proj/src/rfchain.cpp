#include "esrstm/rfchain.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>

#include "esrstm/errors.hpp"

namespace esrstm::rfchain {
namespace {

double softplus(double x) {
    if (x > 30.0) return x;
    if (x < -30.0) return std::exp(x);
    return std::log1p(std::exp(x));
}

double logistic(double x) {
    if (x > 30.0) return 1.0;
    if (x < -30.0) return std::exp(x);
    return 1.0 / (1.0 + std::exp(-x));
}

// One Gauss-Chebyshev pass: (1/n) sum f(center + radius * cos(theta_k)) at
// theta_k = (2k - 1) pi / (2n). Exact for the arcsine-weighted average.
template <class F>
double chebyshev_pass(const F& f, double center, double radius, std::size_t n) {
    const double step = std::numbers::pi / static_cast<double>(n);
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double theta = (static_cast<double>(k) + 0.5) * step;
        acc += f(center + radius * std::cos(theta));
    }
    return acc / static_cast<double>(n);
}

template <class F>
double chebyshev_average(const F& f, double center, double radius, double abs_scale) {
    double prev = chebyshev_pass(f, center, radius, 64);
    for (std::size_t n = 128; n <= 65536; n *= 2) {
        const double cur = chebyshev_pass(f, center, radius, n);
        const double tol = 1e-10 * std::max({std::abs(cur), std::abs(prev), abs_scale});
        if (std::abs(cur - prev) <= tol) return cur;
        prev = cur;
    }
    throw NumericError("arcsine quadrature did not converge");
}

} // namespace

void IVCurve::validate() const {
    if (!std::isfinite(c) || c < 0.0) throw DomainError("IVCurve: ohmic slope must be finite and >= 0");
    if (!std::isfinite(g_step) || g_step < 0.0)
        throw DomainError("IVCurve: step conductance must be finite and >= 0");
    if (!std::isfinite(v0)) throw DomainError("IVCurve: onset must be finite");
    if (!std::isfinite(w) || w <= 0.0) throw DomainError("IVCurve: width must be finite and positive");
}

double IVCurve::current(double v) const {
    return c * v + g_step * w * softplus((v - v0) / w);
}

double IVCurve::didv(double v) const {
    return c + g_step * logistic((v - v0) / w);
}

TransmissionModel TransmissionModel::parametric(double slope_db_per_ghz, double ripple_db,
                                                Frequency ripple_period, double phase,
                                                Frequency f_anchor) {
    if (!std::isfinite(slope_db_per_ghz) || !std::isfinite(ripple_db) || !std::isfinite(phase))
        throw DomainError("transmission model parameters must be finite");
    if (!std::isfinite(ripple_period.value()) || ripple_period.value() <= 0.0)
        throw DomainError("ripple period must be positive");
    if (!std::isfinite(f_anchor.value())) throw DomainError("anchor frequency must be finite");
    TransmissionModel m;
    m.tabulated_ = false;
    m.slope_db_per_ghz_ = slope_db_per_ghz;
    m.ripple_db_ = ripple_db;
    m.period_hz_ = ripple_period.value();
    m.phase_ = phase;
    m.anchor_hz_ = f_anchor.value();
    return m;
}

TransmissionModel TransmissionModel::tabulated(std::vector<double> freqs_hz,
                                               std::vector<double> t_linear) {
    if (freqs_hz.size() != t_linear.size() || freqs_hz.size() < 2)
        throw DomainError("tabulated transmission needs >= 2 matched samples");
    for (std::size_t i = 0; i < freqs_hz.size(); ++i) {
        if (!std::isfinite(freqs_hz[i]) || !std::isfinite(t_linear[i]))
            throw DomainError("tabulated transmission samples must be finite");
        if (t_linear[i] <= 0.0) throw DomainError("tabulated transmission must be positive");
        if (i > 0 && freqs_hz[i] <= freqs_hz[i - 1])
            throw DomainError("tabulated transmission frequencies must be strictly increasing");
    }
    TransmissionModel m;
    m.tabulated_ = true;
    m.freqs_ = std::move(freqs_hz);
    m.values_ = std::move(t_linear);
    return m;
}

double TransmissionModel::linear(Frequency f) const {
    const double fh = f.value();
    if (!std::isfinite(fh)) throw DomainError("transmission query frequency must be finite");
    if (!tabulated_) {
        const double df = fh - anchor_hz_;
        const double t_db = -slope_db_per_ghz_ * df / 1e9 +
                            ripple_db_ * std::sin(2.0 * std::numbers::pi * df / period_hz_ + phase_);
        return std::pow(10.0, t_db / 20.0);
    }
    if (fh < freqs_.front() || fh > freqs_.back())
        throw DomainError("transmission query outside tabulated range");
    const auto it = std::upper_bound(freqs_.begin(), freqs_.end(), fh);
    if (it == freqs_.end()) return values_.back();
    const std::size_t hi = static_cast<std::size_t>(it - freqs_.begin());
    if (hi == 0) return values_.front();
    const std::size_t lo = hi - 1;
    const double t = (fh - freqs_[lo]) / (freqs_[hi] - freqs_[lo]);
    return values_[lo] + t * (values_[hi] - values_[lo]);
}

double TransmissionModel::db(Frequency f) const { return 20.0 * std::log10(linear(f)); }

void PowerTable::validate(Frequency max_gap) const {
    if (freqs_hz.size() < 2 || freqs_hz.size() != power_dbm.size() || freqs_hz.size() != clipped.size())
        throw DomainError("power table needs >= 2 rows with matched columns");
    for (std::size_t i = 0; i < freqs_hz.size(); ++i) {
        if (!std::isfinite(freqs_hz[i]) || !std::isfinite(power_dbm[i]))
            throw DomainError("power table entries must be finite");
        if (i > 0 && freqs_hz[i] <= freqs_hz[i - 1])
            throw DomainError("power table frequencies must be strictly increasing");
    }
    if (!(band_lo.value() < band_hi.value())) throw DomainError("power table band is empty");
    const double slack = 1e-6 * max_gap.value();
    if (freqs_hz.front() > band_lo.value() + slack || freqs_hz.back() < band_hi.value() - slack)
        throw DomainError("power table does not cover its band");
    for (std::size_t i = 1; i < freqs_hz.size(); ++i)
        if (freqs_hz[i] - freqs_hz[i - 1] > max_gap.value() * (1.0 + 1e-9))
            throw DomainError("power table has a gap larger than the sweep step");
}

double PowerTable::power_at(Frequency f) const {
    const double fh = f.value();
    if (!std::isfinite(fh)) throw DomainError("power query frequency must be finite");
    if (freqs_hz.empty()) throw DomainError("empty power table");
    if (fh < freqs_hz.front() || fh > freqs_hz.back())
        throw DomainError("power query outside table range");
    const auto it = std::upper_bound(freqs_hz.begin(), freqs_hz.end(), fh);
    if (it == freqs_hz.end()) return power_dbm.back();
    const std::size_t hi = static_cast<std::size_t>(it - freqs_hz.begin());
    if (hi == 0) return power_dbm.front();
    const std::size_t lo = hi - 1;
    const double t = (fh - freqs_hz[lo]) / (freqs_hz[hi] - freqs_hz[lo]);
    return power_dbm[lo] + t * (power_dbm[hi] - power_dbm[lo]);
}

bool PowerTable::any_clipped() const {
    return std::any_of(clipped.begin(), clipped.end(), [](unsigned char c) { return c != 0; });
}

void ConductanceTrace::validate() const {
    if (bias_v.size() < 8 || bias_v.size() != didv_s.size())
        throw DomainError("conductance trace needs >= 8 matched samples");
    for (std::size_t i = 0; i < bias_v.size(); ++i) {
        if (!std::isfinite(bias_v[i]) || !std::isfinite(didv_s[i]))
            throw DomainError("conductance trace samples must be finite");
        if (i > 0 && bias_v[i] <= bias_v[i - 1])
            throw DomainError("conductance trace bias must be strictly increasing");
    }
}

Current arcsine_average(const IVCurve& iv, Voltage v_dc, Voltage v_rf) {
    iv.validate();
    if (!std::isfinite(v_dc.value())) throw DomainError("V_DC must be finite");
    if (!std::isfinite(v_rf.value()) || v_rf.value() < 0.0)
        throw DomainError("V_RF must be finite and >= 0");
    if (v_rf.value() == 0.0) return Current{iv.current(v_dc.value())};
    const double scale = std::abs(iv.c * v_dc.value()) + iv.g_step * iv.w + 1e-18;
    const double avg = chebyshev_average([&](double v) { return iv.current(v); }, v_dc.value(),
                                         v_rf.value(), scale);
    return Current{avg};
}

double broadened_didv(const IVCurve& iv, Voltage v, Voltage v_rf) {
    iv.validate();
    if (!std::isfinite(v.value())) throw DomainError("bias must be finite");
    if (!std::isfinite(v_rf.value()) || v_rf.value() < 0.0)
        throw DomainError("V_RF must be finite and >= 0");
    if (v_rf.value() == 0.0) return iv.didv(v.value());
    const double scale = iv.c + iv.g_step + 1e-18;
    return chebyshev_average([&](double vv) { return iv.didv(vv); }, v.value(), v_rf.value(), scale);
}

Voltage vrf_of_power(double k, PowerDbm p) {
    if (!std::isfinite(k) || k < 0.0) throw DomainError("power scale k must be finite and >= 0");
    if (!std::isfinite(p.value())) throw DomainError("power must be finite");
    return Voltage{k * std::pow(10.0, p.value() / 20.0)};
}

} // namespace esrstm::rfchain
