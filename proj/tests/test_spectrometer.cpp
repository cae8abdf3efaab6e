#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "esrstm/constants.hpp"
#include "esrstm/errors.hpp"
#include "esrstm/fitkit.hpp"
#include "esrstm/spectrometer.hpp"

using namespace esrstm;
using namespace esrstm::spectrometer;

namespace {

/// Steady state of the optical Bloch equations by brute-force integration,
/// independent of the closed forms in the library. Returns (v, w) at
/// detuning delta (rad/s), with equilibrium w0 = 1.
std::pair<double, double> bloch_integrate(double omega, double t1, double t2, double delta) {
    double u = 0.0, v = 0.0, w = 1.0;
    const double dt = std::min(t1, t2) / 200.0;
    const double t_end = 40.0 * std::max(t1, t2);
    const auto deriv = [&](double uu, double vv, double ww, double& du, double& dv, double& dw) {
        du = delta * vv - uu / t2;
        dv = -delta * uu - vv / t2 + omega * ww;
        dw = -omega * vv - (ww - 1.0) / t1;
    };
    for (double t = 0.0; t < t_end; t += dt) {
        double k1u, k1v, k1w, k2u, k2v, k2w, k3u, k3v, k3w, k4u, k4v, k4w;
        deriv(u, v, w, k1u, k1v, k1w);
        deriv(u + 0.5 * dt * k1u, v + 0.5 * dt * k1v, w + 0.5 * dt * k1w, k2u, k2v, k2w);
        deriv(u + 0.5 * dt * k2u, v + 0.5 * dt * k2v, w + 0.5 * dt * k2w, k3u, k3v, k3w);
        deriv(u + dt * k3u, v + dt * k3v, w + dt * k3w, k4u, k4v, k4w);
        u += dt / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
        v += dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        w += dt / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
    }
    return {v, w};
}

spinham::SpinSystemConfig default_spin() { return spinham::SpinSystemConfig{}; }

JunctionConfig bare_junction(double eta = 1.0) {
    JunctionConfig j;
    j.eta = eta;
    j.b_tip = MagneticField{0.0};
    return j;
}

} // namespace

TEST_CASE("lorentzian closed form") {
    const Current base{0.05e-12};
    const Current a{0.3e-12};
    const Frequency fr{18.6e9};
    const Frequency g{55e6};
    CHECK(lorentzian(fr, a, fr, g, base).value() == doctest::Approx(0.35e-12));
    CHECK(lorentzian(Frequency{18.6e9 + 27.5e6}, a, fr, g, base).value() ==
          doctest::Approx(base.value() + 0.15e-12).epsilon(1e-12));
    CHECK(lorentzian(Frequency{18.6e9 - 27.5e6}, a, fr, g, base).value() ==
          doctest::Approx(base.value() + 0.15e-12).epsilon(1e-12));
    CHECK_THROWS_AS(lorentzian(fr, a, fr, Frequency{0.0}, base), DomainError);
}

TEST_CASE("bloch steady state closed forms") {
    const double t1 = 2e-6, t2 = 1e-6;
    // Unsaturated limit.
    const auto weak = bloch_peak(1e-3, 1.0, 1.0);
    CHECK(weak.saturation <= 2e-6);
    CHECK(weak.gamma.value() ==
          doctest::Approx(1.0 / std::numbers::pi).epsilon(1e-5));
    // Omega^2 T1 T2 = 1.
    const auto half = bloch_peak(1.0 / std::sqrt(t1 * t2), t1, t2);
    CHECK(half.saturation == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(half.gamma.value() ==
          doctest::Approx(std::sqrt(2.0) / (std::numbers::pi * t2)).epsilon(1e-12));
    // Omega^2 T1 T2 = 3.
    const auto sat = bloch_peak(std::sqrt(3.0 / (t1 * t2)), t1, t2);
    CHECK(sat.saturation == doctest::Approx(0.75).epsilon(1e-12));
    CHECK_THROWS_AS(bloch_peak(0.0, 1.0, 1.0), DomainError);
    CHECK_THROWS_AS(bloch_peak(1.0, -1.0, 1.0), DomainError);
}

TEST_CASE("bloch closed forms agree with a rate-equation integrator") {
    const double t1 = 2e-6, t2 = 1e-6;
    const double omega = std::sqrt(3.0 / (t1 * t2)); // saturation 3/4
    const auto pred = bloch_peak(omega, t1, t2);

    const auto [v0, w0] = bloch_integrate(omega, t1, t2, 0.0);
    CHECK(1.0 - w0 == doctest::Approx(pred.saturation).epsilon(1e-5));

    // At the predicted half width the absorption falls to half its peak.
    const double delta_hwhm = std::numbers::pi * pred.gamma.value();
    const auto [vh, wh] = bloch_integrate(omega, t1, t2, delta_hwhm);
    CHECK(vh == doctest::Approx(0.5 * v0).epsilon(1e-4));
}

TEST_CASE("lineshape factories validate and saturate") {
    CHECK_THROWS_AS(Lineshape::phenomenological(Current{0.0}, Frequency{55e6}), DomainError);
    CHECK_THROWS_AS(Lineshape::phenomenological(Current{0.3e-12}, Frequency{-1.0}), DomainError);
    const auto ph = Lineshape::phenomenological(Current{0.3e-12}, Frequency{55e6});
    CHECK(!ph.is_bloch());
    CHECK(ph.peak_amplitude().value() == 0.3e-12);
    CHECK(ph.fwhm().value() == 55e6);

    const double t1 = 2e-6, t2 = 1e-6;
    const auto bl = Lineshape::bloch(std::sqrt(3.0 / (t1 * t2)), t1, t2);
    CHECK(bl.is_bloch());
    CHECK(bl.peak_amplitude().value() == doctest::Approx(0.75 * kBlochFullScaleA).epsilon(1e-12));
}

TEST_CASE("junction config bounds") {
    JunctionConfig j;
    j.validate();
    j.eta = 1.2;
    CHECK_THROWS_AS(j.validate(), DomainError);
    j.eta = -1.0;
    j.validate();
    j.delta_b_hyst = MagneticField{0.011};
    CHECK_THROWS_AS(j.validate(), DomainError);
    j.delta_b_hyst = MagneticField{-0.010};
    j.validate();
}

TEST_CASE("radical density ring") {
    MoleculeMap map;
    CHECK(radical_density(map.lobe_position(0), map) == doctest::Approx(1.0).epsilon(1e-12));
    for (int k = 0; k < 8; ++k)
        CHECK(radical_density(map.lobe_position(k), map) == doctest::Approx(1.0).epsilon(1e-9));
    // Center: radial factor exp(-r0^2 / 2w^2).
    const double want_center = std::exp(-0.45 * 0.45 / (2.0 * 0.1 * 0.1));
    CHECK(radical_density(map.center, map) == doctest::Approx(want_center).epsilon(1e-9));
    CHECK(radical_density(map.center, map) <= 4.1e-5);
    // Between lobes at full modulation the ring density vanishes.
    const double theta = std::numbers::pi / 8.0;
    const Position between{0.45 * std::cos(theta), 0.45 * std::sin(theta)};
    CHECK(radical_density(between, map) <= 1e-12);
    // Bounded everywhere.
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.2, 1.2);
    for (int i = 0; i < 500; ++i) {
        const double d = radical_density({u(rng), u(rng)}, map);
        CHECK(d >= 0.0);
        CHECK(d <= 1.0);
    }
    MoleculeMap bad = map;
    bad.lobe_depth = 1.5;
    CHECK_THROWS_AS(radical_density({0, 0}, bad), DomainError);
}

TEST_CASE("derived seeds separate fields and positions") {
    const std::uint64_t a = derive_seed(7, MagneticField{0.65}, {0.45, 0.0});
    CHECK(derive_seed(7, MagneticField{0.65}, {0.45, 0.0}) == a);
    CHECK(derive_seed(7, MagneticField{0.75}, {0.45, 0.0}) != a);
    CHECK(derive_seed(7, MagneticField{0.65}, {0.0, 0.45}) != a);
    CHECK(derive_seed(8, MagneticField{0.65}, {0.45, 0.0}) != a);
}

TEST_CASE("unpolarized tip sees only noise") {
    const MoleculeMap map;
    const FrequencyGrid grid;
    const auto quiet = synthesize_spectrum(default_spin(), bare_junction(0.0), map,
                                           map.lobe_position(0), MagneticField{0.65}, grid,
                                           NoiseModel{0.0, 1});
    for (double v : quiet.values_a()) CHECK(v == 0.0);
}

TEST_CASE("lobe spectrum peaks at the reference frequency") {
    const MoleculeMap map;
    const FrequencyGrid grid;
    const auto s = synthesize_spectrum(default_spin(), bare_junction(), map, map.lobe_position(0),
                                       MagneticField{0.650}, grid, NoiseModel{0.0, 0});
    const auto fit = fitkit::fit_lorentzian(s);
    REQUIRE(fit.converged);
    // g = 1.84, f0 = 1.8 GHz, B = 0.650 T with no tip or hysteresis field.
    CHECK(fit.param("f_r") == doctest::Approx(18.5395e9).epsilon(1e-4));
    CHECK(fit.param("gamma") == doctest::Approx(55e6).epsilon(1e-3));
    CHECK(fit.param("amplitude") == doctest::Approx(0.3e-12).epsilon(0.02));
    // Two exchange-split branches exist; the lower one sits at f_base - 6J/h,
    // outside this grid, so a single clean line remains.
}

TEST_CASE("molecule center shows no detectable peak") {
    const MoleculeMap map;
    const FrequencyGrid grid;
    const auto lobe = synthesize_spectrum(default_spin(), bare_junction(), map,
                                          map.lobe_position(0), MagneticField{0.650}, grid,
                                          NoiseModel{0.0, 0});
    const auto center = synthesize_spectrum(default_spin(), bare_junction(), map, map.center,
                                            MagneticField{0.650}, grid, NoiseModel{0.0, 0});
    double max_lobe = 0.0, max_center = 0.0;
    for (double v : lobe.values_a()) max_lobe = std::max(max_lobe, v);
    for (double v : center.values_a()) max_center = std::max(max_center, v);
    CHECK(max_center <= 0.01 * max_lobe);
    CHECK(max_lobe / std::max(max_center, 1e-30) >= 100.0);
}

TEST_CASE("synthesis is deterministic") {
    const MoleculeMap map;
    const FrequencyGrid grid;
    const NoiseModel noise{0.03e-12, 99};
    const auto a = synthesize_spectrum(default_spin(), bare_junction(), map, map.lobe_position(1),
                                       MagneticField{0.65}, grid, noise);
    const auto b = synthesize_spectrum(default_spin(), bare_junction(), map, map.lobe_position(1),
                                       MagneticField{0.65}, grid, noise);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.freqs_hz()[i] == b.freqs_hz()[i]);
        CHECK(a.values_a()[i] == b.values_a()[i]);
    }
    CHECK(a.meta().seed == b.meta().seed);
}

TEST_CASE("tip field adds to the set field exactly") {
    const MoleculeMap map;
    const FrequencyGrid grid;
    JunctionConfig with_tip = bare_junction();
    with_tip.b_tip = MagneticField{0.020};
    const auto a = synthesize_spectrum(default_spin(), with_tip, map, map.lobe_position(0),
                                       MagneticField{0.650}, grid, NoiseModel{0.0, 0});
    const auto b = synthesize_spectrum(default_spin(), bare_junction(), map, map.lobe_position(0),
                                       MagneticField{0.670}, grid, NoiseModel{0.0, 0});
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.values_a()[i] == b.values_a()[i]);
}

TEST_CASE("peak moves with the set field at the zeeman slope") {
    const MoleculeMap map;
    const FrequencyGrid grid{Frequency{18.0e9}, Frequency{21.5e9}, 701};
    JunctionConfig j; // default 20 mT tip field applies to both spectra
    j.eta = 1.0;
    const double delta = 0.050;
    const auto s1 = synthesize_spectrum(default_spin(), j, map, map.lobe_position(0),
                                        MagneticField{0.650}, grid, NoiseModel{0.0, 0});
    const auto s2 = synthesize_spectrum(default_spin(), j, map, map.lobe_position(0),
                                        MagneticField{0.650 + delta}, grid, NoiseModel{0.0, 0});
    const auto f1 = fitkit::fit_lorentzian(s1);
    const auto f2 = fitkit::fit_lorentzian(s2);
    REQUIRE(f1.converged);
    REQUIRE(f2.converged);
    const double want = 1.84 * constants::kMuBOverHHzPerT * delta;
    CHECK(f2.param("f_r") - f1.param("f_r") == doctest::Approx(want).epsilon(1e-6));
}

TEST_CASE("fitted amplitude is linear in tip polarization") {
    const MoleculeMap map;
    const FrequencyGrid grid;
    std::vector<double> ratio;
    for (double eta : {0.25, 0.5, 1.0}) {
        const auto s = synthesize_spectrum(default_spin(), bare_junction(eta), map,
                                           map.lobe_position(0), MagneticField{0.650}, grid,
                                           NoiseModel{0.0, 0});
        const auto fit = fitkit::fit_lorentzian(s);
        REQUIRE(fit.converged);
        ratio.push_back(fit.param("amplitude") / eta);
    }
    CHECK(ratio[1] == doctest::Approx(ratio[0]).epsilon(0.01));
    CHECK(ratio[2] == doctest::Approx(ratio[0]).epsilon(0.01));
}

TEST_CASE("closed-form source matches the spin model") {
    const MoleculeMap map;
    const FrequencyGrid grid;
    const auto a = synthesize_spectrum(default_spin(), bare_junction(), map, map.lobe_position(0),
                                       MagneticField{0.650}, grid, NoiseModel{0.0, 0},
                                       ResonanceSource::kSpinModel);
    const auto b = synthesize_spectrum(default_spin(), bare_junction(), map, map.lobe_position(0),
                                       MagneticField{0.650}, grid, NoiseModel{0.0, 0},
                                       ResonanceSource::kClosedForm);
    // The spin model also carries the lower exchange branch at f - 12 J/h;
    // on this grid only the upper branch contributes, so the two sources
    // agree pointwise.
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(a.values_a()[i] == doctest::Approx(b.values_a()[i]).epsilon(1e-6));
}

TEST_CASE("a dead spin system gives a valid pure-noise trace") {
    spinham::SpinSystemConfig spin;
    spin.exchange = Energy{0.0};
    const MoleculeMap map;
    const FrequencyGrid grid;
    const auto s = synthesize_spectrum(spin, bare_junction(), map, map.lobe_position(0),
                                       MagneticField{0.0}, grid, NoiseModel{0.0, 4});
    for (double v : s.values_a()) CHECK(v == 0.0); // zero-field, zero-exchange: no line in band
}

TEST_CASE("lock-in output") {
    std::vector<double> off(100, 10e-12), on(100, 10.3e-12);
    CHECK(lockin_output(off, off).value() == 0.0);
    CHECK(lockin_output(on, off).value() == doctest::Approx(0.3e-12).epsilon(1e-12));
    std::vector<double> shorter(99, 0.0);
    CHECK_THROWS_AS(lockin_output(on, shorter), DomainError);
    CHECK_THROWS_AS(lockin_output({}, {}), DomainError);
    CHECK(kChopFrequencyHz == 431.0);
}

TEST_CASE("lock-in mean converges at the CLT rate") {
    const double sigma = 1e-12, truth = 0.3e-12;
    const std::size_t n = 10000;
    // 3 sigma / sqrt(n) is a statistical bound: demand the right coverage
    // over seeds plus a hard cap that any scaling bug would blow through.
    int within = 0;
    for (std::uint64_t seed = 1; seed <= 24; ++seed) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> gauss(0.0, sigma);
        std::vector<double> on(n), off(n, 0.0);
        for (auto& v : on) v = truth + gauss(rng);
        const double got = lockin_output(on, off).value();
        if (std::abs(got - truth) <= 3.0 * sigma / 100.0) ++within;
        CHECK(std::abs(got - truth) <= 4.5 * sigma / 100.0);
    }
    CHECK(within >= 22);
}
