#include "esrstm/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "esrstm/errors.hpp"

namespace esrstm::rfchain {
namespace {

double dbm_to_amplitude(double p_dbm) { return std::pow(10.0, p_dbm / 20.0); }

std::vector<double> grid_of(Frequency lo, Frequency hi, Frequency step) {
    const double n_real = (hi.value() - lo.value()) / step.value();
    const std::size_t n = static_cast<std::size_t>(std::lround(n_real)) + 1;
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = lo.value() + double(i) * step.value();
    g.back() = hi.value();
    return g;
}

// Savitzky-Golay window-5 quadratic smoothing in place, with odd-reflection
// padding so linear trends pass through the ends unchanged.
std::vector<double> sg5_smooth(const std::vector<double>& v) {
    const std::size_t n = v.size();
    if (n < 5) return v;
    auto at = [&](long i) -> double {
        if (i < 0) return 2.0 * v.front() - v[static_cast<std::size_t>(-i)];
        if (i >= static_cast<long>(n)) {
            const long m = 2 * static_cast<long>(n) - 2 - i;
            return 2.0 * v.back() - v[static_cast<std::size_t>(m)];
        }
        return v[static_cast<std::size_t>(i)];
    };
    std::vector<double> out(n);
    for (long i = 0; i < static_cast<long>(n); ++i)
        out[static_cast<std::size_t>(i)] =
            (-3.0 * at(i - 2) + 12.0 * at(i - 1) + 17.0 * at(i) + 12.0 * at(i + 1) -
             3.0 * at(i + 2)) /
            35.0;
    return out;
}

} // namespace

void RfChainTruth::validate() const {
    surface.validate();
    if (!std::isfinite(source_scale_v) || source_scale_v <= 0.0)
        throw DomainError("source scale must be finite and positive");
    if (!std::isfinite(v_detect.value())) throw DomainError("detection bias must be finite");
}

Voltage RfChainTruth::junction_vrf(Frequency f, PowerDbm p) const {
    if (!std::isfinite(p.value())) throw DomainError("power must be finite");
    return Voltage{source_scale_v * line.linear(f) * dbm_to_amplitude(p.value())};
}

void MeasurementNoise::validate() const {
    if (!std::isfinite(level) || level < 0.0 || level >= 1.0)
        throw DomainError("noise level must lie in [0, 1)");
}

double MeasurementNoise::draw(std::mt19937_64& rng) const {
    if (level == 0.0) return 1.0;
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    return 1.0 + level * u(rng);
}

Current rectified_delta_i(const IVCurve& iv, Voltage v_dc, Voltage v_rf) {
    const double on = arcsine_average(iv, v_dc, v_rf).value();
    return Current{on - iv.current(v_dc.value())};
}

Current lockin_reading(const RfChainTruth& truth, Frequency f, PowerDbm p,
                       const MeasurementNoise& noise, std::mt19937_64& rng) {
    truth.validate();
    noise.validate();
    const Voltage v_rf = truth.junction_vrf(f, p);
    return Current{rectified_delta_i(truth.surface, truth.v_detect, v_rf).value() *
                   noise.draw(rng)};
}

ConductanceTrace synthesize_didv(const IVCurve& iv, Voltage v_lo, Voltage v_hi,
                                 std::size_t n_points, Voltage v_rf,
                                 const MeasurementNoise& noise, std::mt19937_64& rng) {
    iv.validate();
    noise.validate();
    if (n_points < 8) throw DomainError("dI/dV trace needs at least 8 points");
    if (!(v_lo.value() < v_hi.value())) throw DomainError("dI/dV bias window is empty");
    ConductanceTrace t;
    t.bias_v.resize(n_points);
    t.didv_s.resize(n_points);
    const double span = v_hi.value() - v_lo.value();
    for (std::size_t i = 0; i < n_points; ++i) {
        const double v = v_lo.value() + span * double(i) / double(n_points - 1);
        t.bias_v[i] = v;
        t.didv_s[i] = broadened_didv(iv, Voltage{v}, v_rf) * noise.draw(rng);
    }
    return t;
}

fitkit::FitResult estimate_vrf(const ConductanceTrace& didv_off, const ConductanceTrace& didv_on) {
    return fitkit::fit_arcsine_step(didv_on, didv_off);
}

ScaleEstimate power_sweep_scale(const std::vector<PowerSample>& samples, Voltage vrf_known,
                                PowerDbm p_known) {
    if (samples.size() < 3) throw DomainError("power sweep needs at least 3 samples");
    if (!std::isfinite(vrf_known.value()) || vrf_known.value() <= 0.0)
        throw DomainError("anchor V_RF must be finite and positive");
    if (!std::isfinite(p_known.value())) throw DomainError("anchor power must be finite");

    std::vector<PowerSample> s = samples;
    std::sort(s.begin(), s.end(),
              [](const PowerSample& a, const PowerSample& b) { return a.p_dbm < b.p_dbm; });
    double suu = 0.0, svu = 0.0, svv = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!std::isfinite(s[i].p_dbm) || !std::isfinite(s[i].v_lockin))
            throw DomainError("power sweep samples must be finite");
        if (i > 0 && s[i].v_lockin <= s[i - 1].v_lockin)
            throw AnalysisError("power sweep amplitude is not monotone in power");
        const double u = dbm_to_amplitude(s[i].p_dbm);
        suu += u * u;
        svu += s[i].v_lockin * u;
        svv += s[i].v_lockin * s[i].v_lockin;
    }
    const double c = svu / suu;
    double res = 0.0;
    for (const PowerSample& smp : s) {
        const double d = smp.v_lockin - c * dbm_to_amplitude(smp.p_dbm);
        res += d * d;
    }
    ScaleEstimate out;
    out.k = vrf_known.value() * dbm_to_amplitude(-p_known.value());
    out.fit_rel_residual = svv > 0.0 ? std::sqrt(res / svv) : 0.0;
    return out;
}

TransmissionModel MeasuredTransmission::model() const {
    return TransmissionModel::tabulated(freqs_hz, t_rel_linear);
}

void CalibrationConfig::validate() const {
    if (!(band_lo.value() > 0.0) || !(band_hi.value() > band_lo.value()))
        throw DomainError("calibration band must be positive and non-empty");
    if (!(step.value() > 0.0)) throw DomainError("calibration step must be positive");
    const double n_real = (band_hi.value() - band_lo.value()) / step.value();
    if (std::abs(n_real - std::lround(n_real)) > 1e-6)
        throw DomainError("calibration band must be an integer number of steps");
    if (std::lround(n_real) + 1 < 5) throw DomainError("calibration band needs at least 5 samples");
    const double ref_off = (f_ref.value() - band_lo.value()) / step.value();
    if (f_ref.value() < band_lo.value() || f_ref.value() > band_hi.value() ||
        std::abs(ref_off - std::lround(ref_off)) > 1e-3)
        throw DomainError("reference frequency must sit on the calibration grid");
    if (!std::isfinite(p_estimate.value()) || !std::isfinite(p_constant.value()) ||
        !std::isfinite(p_source_max.value()))
        throw DomainError("calibration powers must be finite");
    if (!(target_vrf.value() > 0.0)) throw DomainError("target V_RF must be positive");
    if (readings_per_point < 1) throw DomainError("need at least one reading per point");
    if (!(noise_floor.value() > 0.0)) throw DomainError("noise floor must be positive");
    if (!(trace_lo.value() < trace_hi.value()) || trace_points < 16)
        throw DomainError("dI/dV trace window is invalid");
    if (sweep_points < 3 || !(sweep_p_lo_dbm < sweep_p_hi_dbm))
        throw DomainError("power sweep range is invalid");
}

MeasuredTransmission measure_transmission(const RfChainTruth& truth, const CalibrationConfig& cfg,
                                          const MeasurementNoise& noise, std::mt19937_64& rng) {
    truth.validate();
    cfg.validate();
    noise.validate();

    const std::vector<double> grid = grid_of(cfg.band_lo, cfg.band_hi, cfg.step);
    const std::size_t n = grid.size();

    MeasuredTransmission out;
    out.freqs_hz = grid;
    out.t_rel_linear.assign(n, 0.0);
    out.below_floor.assign(n, 0);

    std::vector<double> db(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double reading = 0.0;
        for (int r = 0; r < cfg.readings_per_point; ++r)
            reading += lockin_reading(truth, Frequency{grid[i]}, cfg.p_constant, noise, rng).value();
        reading /= double(cfg.readings_per_point);

        if (!(reading >= cfg.noise_floor.value())) {
            out.below_floor[i] = 1;
            continue;
        }
        // Invert the rectified response back to the junction amplitude.
        double hi = 1e-3;
        while (rectified_delta_i(truth.surface, truth.v_detect, Voltage{hi}).value() < reading) {
            hi *= 2.0;
            if (hi > 16.0) throw AnalysisError("lock-in reading exceeds the invertible range");
        }
        double lo = 0.0;
        for (int it = 0; it < 80; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (rectified_delta_i(truth.surface, truth.v_detect, Voltage{mid}).value() < reading)
                lo = mid;
            else
                hi = mid;
        }
        db[i] = 20.0 * std::log10(0.5 * (lo + hi));
    }

    // Patch flagged samples by linear interpolation in dB before smoothing.
    std::vector<std::size_t> good;
    for (std::size_t i = 0; i < n; ++i)
        if (!out.below_floor[i]) good.push_back(i);
    if (good.empty()) throw AnalysisError("every transmission sample fell under the noise floor");
    for (std::size_t i = 0; i < n; ++i) {
        if (!out.below_floor[i]) continue;
        const auto it = std::lower_bound(good.begin(), good.end(), i);
        if (it == good.begin()) db[i] = db[good.front()];
        else if (it == good.end()) db[i] = db[good.back()];
        else {
            const std::size_t a = *(it - 1), b = *it;
            const double t = double(i - a) / double(b - a);
            db[i] = db[a] + t * (db[b] - db[a]);
        }
    }

    const std::vector<double> smooth = sg5_smooth(db);
    const std::size_t ref =
        static_cast<std::size_t>(std::lround((cfg.f_ref.value() - cfg.band_lo.value()) / cfg.step.value()));
    for (std::size_t i = 0; i < n; ++i)
        out.t_rel_linear[i] = std::pow(10.0, (smooth[i] - smooth[ref]) / 20.0);
    return out;
}

PowerTable compensate(const TransmissionModel& t_rel, double k, const CalibrationConfig& cfg) {
    cfg.validate();
    if (!std::isfinite(k) || k <= 0.0) throw DomainError("power scale k must be finite and positive");

    PowerTable table;
    table.freqs_hz = grid_of(cfg.band_lo, cfg.band_hi, cfg.step);
    table.target_vrf = cfg.target_vrf;
    table.band_lo = cfg.band_lo;
    table.band_hi = cfg.band_hi;
    table.power_dbm.resize(table.freqs_hz.size());
    table.clipped.assign(table.freqs_hz.size(), 0);
    for (std::size_t i = 0; i < table.freqs_hz.size(); ++i) {
        const double t = t_rel.linear(Frequency{table.freqs_hz[i]});
        double p = 20.0 * std::log10(cfg.target_vrf.value() / (k * t));
        if (p > cfg.p_source_max.value()) {
            p = cfg.p_source_max.value();
            table.clipped[i] = 1;
        }
        table.power_dbm[i] = p;
    }
    table.validate(cfg.step);
    return table;
}

double verification_flatness(const RfChainTruth& truth, const PowerTable& table) {
    truth.validate();
    if (table.freqs_hz.size() < 2) throw DomainError("power table too short to verify");
    if (!(table.target_vrf.value() > 0.0)) throw DomainError("power table lacks a target V_RF");
    const double step = table.freqs_hz[1] - table.freqs_hz[0];
    double worst = 0.0;
    for (double f = table.band_lo.value() + 0.5 * step; f <= table.band_hi.value() - 0.49 * step;
         f += step) {
        const double p = table.power_at(Frequency{f});
        const double v = truth.junction_vrf(Frequency{f}, PowerDbm{p}).value();
        worst = std::max(worst, std::abs(v / table.target_vrf.value() - 1.0));
    }
    return worst;
}

CalibrationResult calibrate_chain(const RfChainTruth& truth, const CalibrationConfig& cfg,
                                  const MeasurementNoise& noise, std::uint64_t seed) {
    truth.validate();
    cfg.validate();
    noise.validate();
    std::mt19937_64 rng(seed);

    // Anchor: arcsine V_RF estimate at (f_ref, p_estimate).
    const Voltage vrf_true = truth.junction_vrf(cfg.f_ref, cfg.p_estimate);
    const ConductanceTrace off = synthesize_didv(truth.surface, cfg.trace_lo, cfg.trace_hi,
                                                 cfg.trace_points, Voltage{0.0}, noise, rng);
    const ConductanceTrace on = synthesize_didv(truth.surface, cfg.trace_lo, cfg.trace_hi,
                                                cfg.trace_points, vrf_true, noise, rng);
    CalibrationResult out;
    out.vrf_fit = estimate_vrf(off, on);
    out.vrf_at_anchor = Voltage{out.vrf_fit.param("v_rf")};

    // Power sweep at f_ref pins the amplitude-exponential law.
    std::vector<PowerSample> sweep(cfg.sweep_points);
    for (std::size_t i = 0; i < cfg.sweep_points; ++i) {
        const double p = cfg.sweep_p_lo_dbm + (cfg.sweep_p_hi_dbm - cfg.sweep_p_lo_dbm) *
                                                  double(i) / double(cfg.sweep_points - 1);
        sweep[i].p_dbm = p;
        sweep[i].v_lockin =
            lockin_reading(truth, cfg.f_ref, PowerDbm{p}, noise, rng).value();
    }
    out.scale = power_sweep_scale(sweep, out.vrf_at_anchor, cfg.p_estimate);
    out.k = out.scale.k;

    out.t_rel = measure_transmission(truth, cfg, noise, rng);
    out.power_table = compensate(out.t_rel.model(), out.k, cfg);
    out.residual_flatness = verification_flatness(truth, out.power_table);
    return out;
}

} // namespace esrstm::rfchain
