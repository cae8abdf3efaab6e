#include "esrstm/fitkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>

#include "esrstm/errors.hpp"

namespace esrstm::fitkit {
namespace {

double median_of(std::vector<double> v) {
    if (v.empty()) throw DomainError("median of empty range");
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    double hi = v[mid];
    if (v.size() % 2 == 1) return hi;
    const double lo = *std::max_element(v.begin(), v.begin() + mid);
    return 0.5 * (lo + hi);
}

double percentile_of(std::vector<double> v, double q) {
    const std::size_t idx = static_cast<std::size_t>(q * double(v.size() - 1) + 0.5);
    std::nth_element(v.begin(), v.begin() + idx, v.end());
    return v[idx];
}

double eval_model(const ModelFn& model, double x, std::span<const double> p) {
    const double m = model(x, p);
    if (!std::isfinite(m)) throw DomainError("model returned a non-finite value");
    return m;
}

double chi_squared(const ModelFn& model, std::span<const double> x, std::span<const double> y,
                   std::span<const double> sigma, std::span<const double> p) {
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = (y[i] - eval_model(model, x[i], p)) / sigma[i];
        acc += r * r;
    }
    return acc;
}

// Central-difference step matching the documented stencil.
double fd_step(double p) { return std::max(1e-6 * std::abs(p), 1e-12); }

// J[i][k] = d model(x_i) / d p_k.
linalg::Matrix jacobian(const ModelFn& model, std::span<const double> x,
                        std::span<const double> p) {
    linalg::Matrix j(x.size(), p.size());
    std::vector<double> work(p.begin(), p.end());
    for (std::size_t k = 0; k < p.size(); ++k) {
        const double h = fd_step(work[k]);
        const double saved = work[k];
        work[k] = saved + h;
        std::vector<double> hi(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) hi[i] = eval_model(model, x[i], work);
        work[k] = saved - h;
        for (std::size_t i = 0; i < x.size(); ++i)
            j.at(i, k) = (hi[i] - eval_model(model, x[i], work)) / (2.0 * h);
        work[k] = saved;
    }
    return j;
}

} // namespace

double FitResult::param(std::string_view name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return params[i];
    throw DomainError("unknown fit parameter: " + std::string(name));
}

double FitResult::sigma(std::string_view name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return sigmas[i];
    throw DomainError("unknown fit parameter: " + std::string(name));
}

std::vector<double> fd_gradient(const ModelFn& model, double x, std::span<const double> p) {
    std::vector<double> grad(p.size());
    std::vector<double> work(p.begin(), p.end());
    for (std::size_t k = 0; k < p.size(); ++k) {
        const double h = fd_step(work[k]);
        const double saved = work[k];
        work[k] = saved + h;
        const double up = eval_model(model, x, work);
        work[k] = saved - h;
        const double dn = eval_model(model, x, work);
        work[k] = saved;
        grad[k] = (up - dn) / (2.0 * h);
    }
    return grad;
}

FitResult levenberg_marquardt(const ModelFn& model, std::span<const double> x,
                              std::span<const double> y, std::span<const double> sigma,
                              std::vector<double> initial, std::vector<std::string> names,
                              const LmOptions& opts) {
    const std::size_t n = x.size();
    const std::size_t np = initial.size();
    if (np == 0) throw DomainError("fit needs at least one parameter");
    if (n <= np) throw DomainError("fit needs more data points than parameters");
    if (y.size() != n || sigma.size() != n) throw DomainError("fit arrays must have equal length");
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw DomainError("fit data must be finite");
        if (!std::isfinite(sigma[i]) || sigma[i] <= 0.0)
            throw DomainError("fit sigmas must be finite and positive");
    }
    for (double p : initial)
        if (!std::isfinite(p)) throw DomainError("initial parameters must be finite");
    if (!names.empty() && names.size() != np)
        throw DomainError("parameter name count must match parameter count");

    FitResult out;
    out.names = names.empty() ? std::vector<std::string>(np) : std::move(names);
    out.params = std::move(initial);
    out.covariance = linalg::Matrix(np);
    out.sigmas.assign(np, 0.0);
    out.dof = static_cast<int>(n - np);

    double chi2 = chi_squared(model, x, y, sigma, out.params);
    if (opts.record_trace) out.chi2_trace.push_back(chi2);
    double lambda = opts.lambda0;
    bool singular = false;
    bool need_jacobian = true;

    linalg::Matrix a(np);        // J^T W J
    std::vector<double> g(np);   // J^T W r
    std::vector<double> dscale(np, 0.0);

    while (out.n_iter < opts.max_iter && lambda <= opts.lambda_max) {
        if (need_jacobian) {
            const linalg::Matrix j = jacobian(model, x, out.params);
            for (std::size_t k = 0; k < np; ++k) {
                g[k] = 0.0;
                for (std::size_t l = 0; l <= k; ++l) a.at(k, l) = 0.0;
            }
            for (std::size_t i = 0; i < n; ++i) {
                const double w = 1.0 / (sigma[i] * sigma[i]);
                const double r = y[i] - eval_model(model, x[i], out.params);
                for (std::size_t k = 0; k < np; ++k) {
                    g[k] += w * j.at(i, k) * r;
                    for (std::size_t l = 0; l <= k; ++l) a.at(k, l) += w * j.at(i, k) * j.at(i, l);
                }
            }
            for (std::size_t k = 0; k < np; ++k)
                for (std::size_t l = 0; l < k; ++l) a.at(l, k) = a.at(k, l);
            for (std::size_t k = 0; k < np; ++k) {
                const double d = a.at(k, k);
                if (!(d > 0.0) || !std::isfinite(d)) {
                    singular = true;
                    break;
                }
                dscale[k] = 1.0 / std::sqrt(d);
            }
            if (singular) break;
            need_jacobian = false;
        }

        // Marquardt-scaled damped system: (Ahat + lambda I) dhat = ghat with
        // Ahat = D A D carrying a unit diagonal, so conditioning is set by the
        // parameter correlations, not their raw scales.
        linalg::Matrix damped(np);
        std::vector<double> ghat(np);
        for (std::size_t k = 0; k < np; ++k) {
            ghat[k] = dscale[k] * g[k];
            for (std::size_t l = 0; l < np; ++l)
                damped.at(k, l) = dscale[k] * a.at(k, l) * dscale[l] + (k == l ? lambda : 0.0);
        }
        std::vector<double> dhat;
        if (!linalg::solve_linear(damped, ghat, dhat)) {
            singular = true;
            break;
        }

        std::vector<double> trial = out.params;
        for (std::size_t k = 0; k < np; ++k) trial[k] += dscale[k] * dhat[k];
        double chi2_trial;
        try {
            chi2_trial = chi_squared(model, x, y, sigma, trial);
        } catch (const DomainError&) {
            // Trial wandered somewhere the model cannot evaluate; treat as a
            // rejected step rather than aborting the whole fit.
            chi2_trial = std::numeric_limits<double>::infinity();
        }
        ++out.n_iter;

        if (chi2_trial <= chi2) {
            const double drop = chi2 - chi2_trial;
            out.params = std::move(trial);
            const bool done = drop <= opts.rel_tol * std::max(chi2, 1e-300);
            chi2 = chi2_trial;
            if (opts.record_trace) out.chi2_trace.push_back(chi2);
            lambda = std::max(lambda / 10.0, 1e-18);
            need_jacobian = true;
            if (done) {
                out.converged = true;
                break;
            }
        } else {
            lambda *= 10.0;
        }
    }

    out.chi2 = chi2;

    // Covariance at the final parameters, chi2/dof-scaled.
    if (!singular) {
        const linalg::Matrix j = jacobian(model, x, out.params);
        linalg::Matrix afin(np);
        for (std::size_t i = 0; i < n; ++i) {
            const double w = 1.0 / (sigma[i] * sigma[i]);
            for (std::size_t k = 0; k < np; ++k)
                for (std::size_t l = 0; l < np; ++l) afin.at(k, l) += w * j.at(i, k) * j.at(i, l);
        }
        bool ok = true;
        std::vector<double> d(np);
        for (std::size_t k = 0; k < np; ++k) {
            if (!(afin.at(k, k) > 0.0) || !std::isfinite(afin.at(k, k))) ok = false;
            else d[k] = 1.0 / std::sqrt(afin.at(k, k));
        }
        if (ok) {
            linalg::Matrix ahat(np);
            for (std::size_t k = 0; k < np; ++k)
                for (std::size_t l = 0; l < np; ++l) ahat.at(k, l) = d[k] * afin.at(k, l) * d[l];
            linalg::Matrix inv;
            if (linalg::invert(ahat, inv)) {
                const double scale = out.dof > 0 ? chi2 / out.dof : 0.0;
                for (std::size_t k = 0; k < np; ++k)
                    for (std::size_t l = 0; l < np; ++l)
                        out.covariance.at(k, l) = scale * d[k] * inv.at(k, l) * d[l];
                for (std::size_t k = 0; k < np; ++k)
                    out.sigmas[k] = std::sqrt(std::max(out.covariance.at(k, k), 0.0));
            } else {
                ok = false;
            }
        }
        if (!ok) out.converged = false;
    } else {
        out.converged = false;
    }
    return out;
}

std::optional<PeakGuess> detect_peak(const Spectrum& s, double k_mad) {
    if (s.size() < 16) throw DomainError("peak detection needs at least 16 samples");
    if (!std::isfinite(k_mad) || k_mad <= 0.0) throw DomainError("k_mad must be positive");

    const auto vals = s.values_a();
    const auto freqs = s.freqs_hz();
    std::vector<double> v(vals.begin(), vals.end());
    const double baseline = median_of(v);
    std::vector<double> dev(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) dev[i] = std::abs(v[i] - baseline);
    const double noise = 1.4826 * median_of(std::move(dev));

    std::size_t peak = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[peak]) peak = i;
    const double height = v[peak] - baseline;
    if (!(height > k_mad * noise)) return std::nullopt;

    const double half = baseline + 0.5 * height;
    double f_left = freqs.front();
    for (std::size_t i = peak; i-- > 0;) {
        if (v[i] <= half) {
            const double t = (half - v[i]) / (v[i + 1] - v[i]);
            f_left = freqs[i] + t * (freqs[i + 1] - freqs[i]);
            break;
        }
    }
    double f_right = freqs.back();
    for (std::size_t i = peak + 1; i < v.size(); ++i) {
        if (v[i] <= half) {
            const double t = (v[i - 1] - half) / (v[i - 1] - v[i]);
            f_right = freqs[i - 1] + t * (freqs[i] - freqs[i - 1]);
            break;
        }
    }
    const double grid = (freqs.back() - freqs.front()) / double(s.size() - 1);

    PeakGuess out;
    out.f_guess = Frequency{freqs[peak]};
    out.amplitude_guess = Current{height};
    out.width_guess = Frequency{std::max(f_right - f_left, 2.0 * grid)};
    out.snr = noise > 0.0 ? std::min(height / noise, 1e9) : 1e9;
    return out;
}

FitResult fit_lorentzian(const Spectrum& s, const std::optional<PeakGuess>& guess) {
    std::optional<PeakGuess> g = guess ? guess : detect_peak(s);
    if (!g) throw AnalysisError("no peak detected and no initial guess supplied");

    const auto freqs = s.freqs_hz();
    const auto vals = s.values_a();
    const double baseline0 = median_of(std::vector<double>(vals.begin(), vals.end()));
    const double grid = (freqs.back() - freqs.front()) / double(s.size() - 1);

    const ModelFn model = [](double f, std::span<const double> p) {
        const double hw = 0.5 * p[2]; // half width; model is even in gamma
        const double d = f - p[1];
        return p[3] + p[0] * hw * hw / (d * d + hw * hw);
    };

    std::vector<double> init = {g->amplitude_guess.value(), g->f_guess.value(),
                                std::max(g->width_guess.value(), grid), baseline0};
    const std::vector<double> ones(s.size(), 1.0);
    FitResult fit = levenberg_marquardt(model, freqs, vals, ones, std::move(init),
                                        {"amplitude", "f_r", "gamma", "baseline"});
    if (fit.params[2] < 0.0) { // report FWHM as a magnitude
        fit.params[2] = -fit.params[2];
        for (std::size_t i = 0; i < fit.names.size(); ++i) {
            if (i == 2) continue;
            fit.covariance.at(2, i) = -fit.covariance.at(2, i);
            fit.covariance.at(i, 2) = -fit.covariance.at(i, 2);
        }
    }
    return fit;
}

FitResult fit_arcsine_step(const rfchain::ConductanceTrace& didv_on,
                           const rfchain::ConductanceTrace& didv_off) {
    didv_on.validate();
    didv_off.validate();

    const std::vector<double>& vb = didv_off.bias_v;
    const std::vector<double>& gb = didv_off.didv_s;

    // Require a resolved step in the off trace before trusting any fit.
    std::vector<double> diffs(gb.size() - 1);
    for (std::size_t i = 0; i + 1 < gb.size(); ++i) diffs[i] = std::abs(gb[i + 1] - gb[i]);
    const double diff_noise = 1.4826 * median_of(diffs) / std::sqrt(2.0);
    const double lo_g = percentile_of(gb, 0.10);
    const double hi_g = percentile_of(gb, 0.90);
    const double range = hi_g - lo_g;
    if (!(range > 0.0) || range <= 8.0 * diff_noise)
        throw AnalysisError("no conductance step found in the RF-off trace");

    // Stage 1: unbroadened logistic step on the off trace.
    std::size_t steepest = 1;
    double best_slope = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i + 1 < gb.size(); ++i) {
        const double sl = gb[i + 1] - gb[i - 1];
        if (sl > best_slope) {
            best_slope = sl;
            steepest = i;
        }
    }
    // Width seed from the 25%/75% rise interval (logistic: 2.2 w).
    const double q25 = lo_g + 0.25 * range;
    const double q75 = lo_g + 0.75 * range;
    double v25 = vb.front(), v75 = vb.back();
    for (std::size_t i = 0; i < gb.size(); ++i) {
        if (gb[i] <= q25) v25 = vb[i];
        if (gb[i] >= q75) {
            v75 = vb[i];
            break;
        }
    }
    const double grid = (vb.back() - vb.front()) / double(vb.size() - 1);
    const double w0 = std::max((v75 - v25) / 2.2, grid);

    const ModelFn step_model = [](double v, std::span<const double> p) {
        const double z = (v - p[2]) / p[3];
        double sg;
        if (z > 30.0) sg = 1.0;
        else if (z < -30.0) sg = std::exp(z);
        else sg = 1.0 / (1.0 + std::exp(-z));
        return p[0] + p[1] * sg;
    };

    const std::vector<double> ones_off(vb.size(), 1.0);
    FitResult s1 = levenberg_marquardt(step_model, vb, gb, ones_off,
                                       {lo_g, range, vb[steepest], w0},
                                       {"c", "height", "v0", "width"});
    if (s1.params[3] < 0.0) s1.params[3] = -s1.params[3];

    // Stage 2: V_RF alone on the on trace, off-step parameters frozen.
    rfchain::IVCurve iv;
    iv.c = std::max(s1.params[0], 0.0);
    iv.g_step = std::max(s1.params[1], 0.0);
    iv.v0 = s1.params[2];
    iv.w = s1.params[3];

    const ModelFn on_model = [iv](double v, std::span<const double> p) {
        return rfchain::broadened_didv(iv, Voltage{v}, Voltage{std::abs(p[0])});
    };

    const std::vector<double>& vb_on = didv_on.bias_v;
    const std::vector<double>& gb_on = didv_on.didv_s;
    const std::vector<double> ones_on(vb_on.size(), 1.0);

    const double v_span = 0.5 * (vb_on.back() - vb_on.front());
    double best_vrf = 0.0;
    double best_chi2 = chi_squared(on_model, vb_on, gb_on, ones_on, std::vector<double>{0.0});
    for (int i = 1; i <= 40; ++i) {
        const double cand = v_span * double(i) / 40.0;
        const double c2 = chi_squared(on_model, vb_on, gb_on, ones_on, std::vector<double>{cand});
        if (c2 < best_chi2) {
            best_chi2 = c2;
            best_vrf = cand;
        }
    }

    FitResult s2 = levenberg_marquardt(on_model, vb_on, gb_on, ones_on,
                                       {std::max(best_vrf, 1e-5)}, {"v_rf"});
    s2.params[0] = std::abs(s2.params[0]);

    // Assemble {v_rf, v0, height, width, c} with per-stage uncertainties.
    FitResult out;
    out.names = {"v_rf", "v0", "height", "width", "c"};
    out.params = {s2.params[0], s1.params[2], s1.params[1], s1.params[3], s1.params[0]};
    out.sigmas = {s2.sigmas[0], s1.sigmas[2], s1.sigmas[1], s1.sigmas[3], s1.sigmas[0]};
    out.covariance = linalg::Matrix(5);
    out.covariance.at(0, 0) = s2.covariance.at(0, 0);
    const std::size_t order[4] = {2, 1, 3, 0}; // stage-1 indices in output order
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j)
            out.covariance.at(i + 1, j + 1) = s1.covariance.at(order[i], order[j]);
    out.chi2 = s2.chi2;
    out.dof = s2.dof;
    out.n_iter = s1.n_iter + s2.n_iter;
    out.converged = s1.converged && s2.converged;
    return out;
}

FitResult linear_fit_weighted(std::span<const LinePoint> points) {
    if (points.size() < 2) throw DomainError("line fit needs at least 2 points");
    double sw = 0.0, sx = 0.0, sxx = 0.0, sy = 0.0, sxy = 0.0;
    for (const LinePoint& p : points) {
        if (!std::isfinite(p.b_tesla) || !std::isfinite(p.f_hz))
            throw DomainError("line fit points must be finite");
        if (!std::isfinite(p.sigma_hz) || p.sigma_hz <= 0.0)
            throw DomainError("line fit sigmas must be finite and positive");
        const double w = 1.0 / (p.sigma_hz * p.sigma_hz);
        sw += w;
        sx += w * p.b_tesla;
        sxx += w * p.b_tesla * p.b_tesla;
        sy += w * p.f_hz;
        sxy += w * p.b_tesla * p.f_hz;
    }
    const double det = sw * sxx - sx * sx;
    if (!(det > 1e-12 * sw * std::max(sxx, 1e-300)))
        throw AnalysisError("degenerate design: all field values coincide");

    FitResult out;
    out.names = {"slope", "intercept"};
    out.params = {(sw * sxy - sx * sy) / det, (sxx * sy - sx * sxy) / det};
    // Covariance propagated from the stated sigmas (not chi2-rescaled).
    out.covariance = linalg::Matrix(2);
    out.covariance.at(0, 0) = sw / det;
    out.covariance.at(1, 1) = sxx / det;
    out.covariance.at(0, 1) = out.covariance.at(1, 0) = -sx / det;
    out.sigmas = {std::sqrt(sw / det), std::sqrt(sxx / det)};
    double chi2 = 0.0;
    for (const LinePoint& p : points) {
        const double r = (p.f_hz - (out.params[0] * p.b_tesla + out.params[1])) / p.sigma_hz;
        chi2 += r * r;
    }
    out.chi2 = chi2;
    out.dof = static_cast<int>(points.size()) - 2;
    out.converged = true;
    out.n_iter = 0;
    return out;
}

} // namespace esrstm::fitkit
