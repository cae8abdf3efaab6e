#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "esrstm/calibration.hpp"
#include "esrstm/errors.hpp"
#include "esrstm/rfchain.hpp"

using namespace esrstm;
using namespace esrstm::rfchain;

namespace {

RfChainTruth default_truth() {
    return RfChainTruth{
        TransmissionModel::parametric(1.0, 3.0, Frequency{2.5e9}, 0.7, Frequency{18e9}),
        0.05, IVCurve{}, Voltage{-0.070}};
}

} // namespace

TEST_CASE("iv curve model") {
    IVCurve iv;
    CHECK(iv.didv(-0.120) == doctest::Approx(iv.c).epsilon(1e-3));
    CHECK(iv.didv(-0.020) == doctest::Approx(iv.c + iv.g_step).epsilon(1e-3));
    CHECK(iv.didv(iv.v0) == doctest::Approx(iv.c + 0.5 * iv.g_step).epsilon(1e-12));
    // Monotone current for non-negative conductances.
    double prev = iv.current(-0.2);
    for (double v = -0.199; v <= 0.05; v += 1e-3) {
        CHECK(iv.current(v) >= prev);
        prev = iv.current(v);
    }
    IVCurve bad = iv;
    bad.w = 0.0;
    CHECK_THROWS_AS(bad.validate(), DomainError);
    bad = iv;
    bad.g_step = -1e-9;
    CHECK_THROWS_AS(bad.validate(), DomainError);
}

TEST_CASE("parametric transmission") {
    const auto line = TransmissionModel::parametric(1.0, 0.0, Frequency{2.5e9}, 0.0, Frequency{18e9});
    CHECK(line.linear(Frequency{18e9}) == doctest::Approx(1.0));
    CHECK(line.db(Frequency{19e9}) == doctest::Approx(-1.0).epsilon(1e-12)); // 1 dB/GHz slope
    CHECK(line.db(Frequency{25e9}) == doctest::Approx(-7.0).epsilon(1e-12));

    const auto rippled = TransmissionModel::parametric(0.0, 3.0, Frequency{2.5e9}, 0.0, Frequency{18e9});
    CHECK(rippled.db(Frequency{18e9 + 0.625e9}) == doctest::Approx(3.0).epsilon(1e-12)); // quarter period

    CHECK_THROWS_AS(TransmissionModel::parametric(1.0, 1.0, Frequency{0.0}, 0.0, Frequency{18e9}),
                    DomainError);
}

TEST_CASE("tabulated transmission interpolates and validates") {
    const auto tab = TransmissionModel::tabulated({1e9, 2e9, 4e9}, {1.0, 0.5, 0.25});
    CHECK(tab.linear(Frequency{1e9}) == 1.0);
    CHECK(tab.linear(Frequency{1.5e9}) == doctest::Approx(0.75));
    CHECK(tab.linear(Frequency{3e9}) == doctest::Approx(0.375));
    CHECK(tab.linear(Frequency{4e9}) == 0.25);
    CHECK_THROWS_AS(tab.linear(Frequency{0.5e9}), DomainError);
    CHECK_THROWS_AS(tab.linear(Frequency{5e9}), DomainError);
    CHECK_THROWS_AS(TransmissionModel::tabulated({1e9, 1e9}, {1.0, 1.0}), DomainError);
    CHECK_THROWS_AS(TransmissionModel::tabulated({1e9, 2e9}, {1.0, 0.0}), DomainError);
    CHECK_THROWS_AS(TransmissionModel::tabulated({1e9}, {1.0}), DomainError);
}

TEST_CASE("arcsine average basics") {
    IVCurve ohmic;
    ohmic.g_step = 0.0;
    // Pure ohmic: the cosine averages out, leaving I(V_DC).
    CHECK(arcsine_average(ohmic, Voltage{-0.1}, Voltage{0.025}).value() ==
          doctest::Approx(ohmic.current(-0.1)).epsilon(1e-12));

    IVCurve iv;
    CHECK(arcsine_average(iv, Voltage{-0.1}, Voltage{0.0}).value() == iv.current(-0.1));
    CHECK_THROWS_AS(arcsine_average(iv, Voltage{-0.1}, Voltage{-0.01}), DomainError);

    // Near-hard step biased at the onset: the rectified extra current is
    // G V_RF / pi (arcsine average of the ramp (V - V0)+).
    IVCurve hard;
    hard.w = 1e-6;
    const double vrf = 0.025;
    const double extra = arcsine_average(hard, Voltage{hard.v0}, Voltage{vrf}).value() -
                         hard.current(hard.v0);
    CHECK(extra == doctest::Approx(hard.g_step * vrf / std::numbers::pi).epsilon(1e-3));
}

TEST_CASE("arcsine kernel has variance V_RF^2 / 2") {
    // Small-amplitude expansion: <I> - I = I''(V) V_RF^2 / 4 when the kernel
    // second moment is V_RF^2 / 2. I'' is analytic for the logistic step.
    IVCurve iv;
    const double v = iv.v0;
    const double vrf = 5e-5;
    const double i2 = iv.g_step * 0.25 / iv.w; // d2I/dV2 at the onset
    const double lift = arcsine_average(iv, Voltage{v}, Voltage{vrf}).value() - iv.current(v);
    CHECK(lift / (i2 * vrf * vrf / 4.0) == doctest::Approx(1.0).epsilon(2e-4));
}

TEST_CASE("broadened didv") {
    IVCurve iv;
    CHECK(broadened_didv(iv, Voltage{-0.08}, Voltage{0.0}) == iv.didv(-0.08));
    // Kernel symmetry at the onset: exactly half the conductance step.
    for (double vrf : {0.005, 0.010, 0.025}) {
        CHECK(broadened_didv(iv, Voltage{iv.v0}, Voltage{vrf}) ==
              doctest::Approx(iv.c + 0.5 * iv.g_step).epsilon(1e-10));
    }
    // Hard step probed at the kernel edges sits on the plateaus.
    IVCurve hard;
    hard.w = 1e-5;
    const double vrf = 0.025;
    CHECK(broadened_didv(hard, Voltage{hard.v0 + vrf}, Voltage{vrf}) ==
          doctest::Approx(hard.c + hard.g_step).epsilon(0.01));
    CHECK(broadened_didv(hard, Voltage{hard.v0 - vrf}, Voltage{vrf}) ==
          doctest::Approx(hard.c).epsilon(0.01));
}

TEST_CASE("broadened didv equals the V_DC derivative of the average") {
    IVCurve iv;
    const double vrf = 0.018;
    for (double v : {-0.100, -0.080, -0.070, -0.055, -0.030}) {
        const double h = 1e-7;
        const double fd = (arcsine_average(iv, Voltage{v + h}, Voltage{vrf}).value() -
                           arcsine_average(iv, Voltage{v - h}, Voltage{vrf}).value()) /
                          (2.0 * h);
        CHECK(broadened_didv(iv, Voltage{v}, Voltage{vrf}) ==
              doctest::Approx(fd).epsilon(1e-6));
    }
}

TEST_CASE("power sweep scale anchors exactly") {
    std::vector<PowerSample> sweep;
    for (double p = -15.0; p <= 5.01; p += 2.5)
        sweep.push_back({p, 3.0 * std::pow(10.0, p / 20.0)});
    const auto s = power_sweep_scale(sweep, Voltage{0.025}, PowerDbm{-5.0});
    CHECK(vrf_of_power(s.k, PowerDbm{-5.0}).value() == doctest::Approx(0.025).epsilon(1e-12));
    CHECK(s.fit_rel_residual == doctest::Approx(0.0).epsilon(1e-10));
    // Amplitude-decibel identities.
    CHECK(vrf_of_power(s.k, PowerDbm{15.0}).value() ==
          doctest::Approx(0.25).epsilon(1e-12)); // +20 dB = x10
    CHECK(vrf_of_power(s.k, PowerDbm{-5.0 - 20.0 * std::log10(2.0)}).value() ==
          doctest::Approx(0.0125).epsilon(1e-12)); // -6.0206 dB = x1/2

    std::vector<PowerSample> bad = sweep;
    std::swap(bad[2].v_lockin, bad[3].v_lockin);
    CHECK_THROWS_AS(power_sweep_scale(bad, Voltage{0.025}, PowerDbm{-5.0}), AnalysisError);
    CHECK_THROWS_AS(power_sweep_scale({{0.0, 1.0}, {1.0, 2.0}}, Voltage{0.025}, PowerDbm{0.0}),
                    DomainError);
}

TEST_CASE("v_rf estimation round trip") {
    const IVCurve iv;
    std::mt19937_64 rng(11);
    const MeasurementNoise quiet{0.0};
    const auto off = synthesize_didv(iv, Voltage{-0.140}, Voltage{-0.010}, 131, Voltage{0.0},
                                     quiet, rng);
    const auto on = synthesize_didv(iv, Voltage{-0.140}, Voltage{-0.010}, 131, Voltage{0.025},
                                    quiet, rng);
    const auto fit = estimate_vrf(off, on);
    CHECK(fit.converged);
    CHECK(fit.param("v_rf") == doctest::Approx(0.025).epsilon(1e-3)); // within 0.1%
    CHECK(fit.param("v0") == doctest::Approx(-0.070).epsilon(1e-3));
    CHECK(fit.param("height") == doctest::Approx(iv.g_step).epsilon(1e-3));

    // Identical traces: V_RF consistent with zero.
    const auto null_fit = estimate_vrf(off, off);
    CHECK(null_fit.param("v_rf") <= 1e-4); // 0.1 mV

    // A step-free off trace is not fittable.
    IVCurve flat;
    flat.g_step = 0.0;
    std::mt19937_64 rng2(12);
    const auto flat_off = synthesize_didv(flat, Voltage{-0.140}, Voltage{-0.010}, 131,
                                          Voltage{0.0}, quiet, rng2);
    CHECK_THROWS_AS(estimate_vrf(flat_off, flat_off), AnalysisError);
}

TEST_CASE("v_rf estimation at 2% noise stays within 2%") {
    const IVCurve iv;
    const MeasurementNoise noisy{0.02};
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        std::mt19937_64 rng(seed);
        const auto off = synthesize_didv(iv, Voltage{-0.140}, Voltage{-0.010}, 131, Voltage{0.0},
                                         noisy, rng);
        const auto on = synthesize_didv(iv, Voltage{-0.140}, Voltage{-0.010}, 131,
                                        Voltage{0.025}, noisy, rng);
        const auto fit = estimate_vrf(off, on);
        CHECK(std::abs(fit.param("v_rf") / 0.025 - 1.0) <= 0.02);
    }
}

TEST_CASE("transmission measurement recovers a flat line exactly") {
    RfChainTruth truth = default_truth();
    truth.line = TransmissionModel::parametric(0.0, 0.0, Frequency{2.5e9}, 0.0, Frequency{18e9});
    const CalibrationConfig cfg;
    std::mt19937_64 rng(5);
    const auto m = measure_transmission(truth, cfg, MeasurementNoise{0.0}, rng);
    CHECK(m.freqs_hz.front() == 18e9);
    CHECK(m.freqs_hz.back() == 25e9);
    for (double t : m.t_rel_linear) CHECK(t == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("transmission measurement tracks a structured line") {
    const RfChainTruth truth{
        TransmissionModel::parametric(0.5, 5.0, Frequency{2.5e9}, 0.3, Frequency{18e9}),
        0.05, IVCurve{}, Voltage{-0.070}};
    const CalibrationConfig cfg;
    std::mt19937_64 rng(6);
    const auto m = measure_transmission(truth, cfg, MeasurementNoise{0.0}, rng);
    const double t_ref = truth.line.linear(cfg.f_ref);
    for (std::size_t i = 0; i < m.freqs_hz.size(); ++i) {
        const double want = truth.line.linear(Frequency{m.freqs_hz[i]}) / t_ref;
        CHECK(m.t_rel_linear[i] == doctest::Approx(want).epsilon(0.02));
        CHECK(m.below_floor[i] == 0);
    }
}

TEST_CASE("samples under the noise floor are flagged and bridged") {
    // Tabulated line with a deep notch across 21-22 GHz.
    std::vector<double> fs, ts;
    for (double f = 17.9e9; f <= 25.1e9; f += 0.05e9) {
        fs.push_back(f);
        ts.push_back(f > 21e9 && f < 22e9 ? 1e-9 : 0.5);
    }
    RfChainTruth truth = default_truth();
    truth.line = TransmissionModel::tabulated(fs, ts);
    const CalibrationConfig cfg;
    std::mt19937_64 rng(7);
    const auto m = measure_transmission(truth, cfg, MeasurementNoise{0.0}, rng);
    int flagged = 0;
    for (std::size_t i = 0; i < m.freqs_hz.size(); ++i) {
        if (m.below_floor[i]) ++flagged;
        CHECK(std::isfinite(m.t_rel_linear[i]));
        CHECK(m.t_rel_linear[i] > 0.0);
    }
    CHECK(flagged >= 5);
    CHECK(flagged <= 12);
}

TEST_CASE("compensation closes the loop") {
    const CalibrationConfig cfg;
    // Flat relative transmission: constant power.
    const auto flat = TransmissionModel::parametric(0.0, 0.0, Frequency{2.5e9}, 0.0, Frequency{19e9});
    const auto table = compensate(flat, 0.05, cfg);
    for (double p : table.power_dbm) CHECK(p == doctest::Approx(table.power_dbm.front()).epsilon(1e-12));
    CHECK_FALSE(table.any_clipped());
    CHECK(table.power_dbm.front() ==
          doctest::Approx(20.0 * std::log10(0.005 / 0.05)).epsilon(1e-12));

    // Halving the transmission costs +6.0206 dB.
    const auto droop = TransmissionModel::tabulated({18e9, 25e9}, {1.0, 0.5});
    const auto t2 = compensate(droop, 0.05, cfg);
    CHECK(t2.power_dbm.back() - t2.power_dbm.front() ==
          doctest::Approx(20.0 * std::log10(2.0)).epsilon(1e-9));

    // A requested power above the source maximum is clamped and flagged.
    CalibrationConfig tight = cfg;
    tight.p_source_max = PowerDbm{-15.0};
    const auto clipped = compensate(droop, 0.05, tight);
    CHECK(clipped.any_clipped());
    for (std::size_t i = 0; i < clipped.freqs_hz.size(); ++i)
        if (clipped.clipped[i]) CHECK(clipped.power_dbm[i] == -15.0);
}

TEST_CASE("full chain calibration meets the flatness budget") {
    const RfChainTruth truth = default_truth(); // 7 dB slope + 6 dB p2p ripple
    const CalibrationConfig cfg;

    const auto quiet = calibrate_chain(truth, cfg, MeasurementNoise{0.0}, 42);
    CHECK(quiet.vrf_fit.converged);
    CHECK(quiet.residual_flatness <= 0.01);
    CHECK(quiet.power_table.freqs_hz.front() == 18e9);
    CHECK(quiet.power_table.freqs_hz.back() == 25e9);

    for (std::uint64_t seed : {1ull, 7ull, 42ull, 99ull, 1234ull}) {
        const auto noisy = calibrate_chain(truth, cfg, MeasurementNoise{0.02}, seed);
        CHECK(noisy.residual_flatness <= 0.03);
    }
}

TEST_CASE("random-line round trip stays flat") {
    const CalibrationConfig cfg;
    std::mt19937_64 gen(99);
    std::uniform_real_distribution<double> slope(0.0, 2.0), ripple(0.0, 5.0),
        period(2.5e9, 4e9), phase(0.0, 6.28);
    for (int i = 0; i < 6; ++i) {
        const RfChainTruth truth{
            TransmissionModel::parametric(slope(gen), ripple(gen), Frequency{period(gen)},
                                          phase(gen), Frequency{18e9}),
            0.05, IVCurve{}, Voltage{-0.070}};
        const auto quiet = calibrate_chain(truth, cfg, MeasurementNoise{0.0}, 7);
        CHECK(quiet.residual_flatness <= 0.01);
        const auto noisy = calibrate_chain(truth, cfg, MeasurementNoise{0.02}, 1000 + i);
        CHECK(noisy.residual_flatness <= 0.03);
    }
}

TEST_CASE("calibrating an already-compensated chain is a no-op") {
    const RfChainTruth truth = default_truth();
    const CalibrationConfig cfg;
    const auto first = calibrate_chain(truth, cfg, MeasurementNoise{0.0}, 3);

    // Fold the first-pass powers into the line: the corrected chain driven at
    // constant power reproduces the compensated amplitudes.
    const double p_flat = 20.0 * std::log10(cfg.target_vrf.value() / first.k);
    std::vector<double> ts(first.power_table.freqs_hz.size());
    for (std::size_t i = 0; i < ts.size(); ++i)
        ts[i] = truth.line.linear(Frequency{first.power_table.freqs_hz[i]}) *
                std::pow(10.0, (first.power_table.power_dbm[i] - p_flat) / 20.0);
    RfChainTruth corrected = truth;
    corrected.line = TransmissionModel::tabulated(first.power_table.freqs_hz, ts);

    const auto second = calibrate_chain(corrected, cfg, MeasurementNoise{0.0}, 3);
    double lo = 1e9, hi = -1e9;
    for (double p : second.power_table.power_dbm) {
        lo = std::min(lo, p);
        hi = std::max(hi, p);
    }
    CHECK(hi - lo <= 0.05); // residual corrections under 0.05 dB
}

TEST_CASE("calibration is deterministic in the seed") {
    const RfChainTruth truth = default_truth();
    const CalibrationConfig cfg;
    const auto a = calibrate_chain(truth, cfg, MeasurementNoise{0.02}, 40);
    const auto b = calibrate_chain(truth, cfg, MeasurementNoise{0.02}, 40);
    CHECK(a.k == b.k);
    CHECK(a.residual_flatness == b.residual_flatness);
    REQUIRE(a.power_table.power_dbm.size() == b.power_table.power_dbm.size());
    for (std::size_t i = 0; i < a.power_table.power_dbm.size(); ++i)
        CHECK(a.power_table.power_dbm[i] == b.power_table.power_dbm[i]);
}
