#pragma once

#include <cstdint>
#include <vector>

#include "esrstm/quantities.hpp"
#include "esrstm/spectrum.hpp"
#include "esrstm/spinham.hpp"

namespace esrstm::spectrometer {

/// Lock-in chopping frequency (Hz). Metadata only: demodulation is modeled
/// as an ideal mean difference between RF-on and RF-off current samples.
inline constexpr double kChopFrequencyHz = 431.0;

/// Full-scale peak current used by the Bloch lineshape before saturation
/// scaling (matches the phenomenological default).
inline constexpr double kBlochFullScaleA = 0.3e-12;

/// Continuous-wave steady state of a driven two-level system.
struct BlochSteadyState {
    double saturation = 0.0; // Omega^2 T1 T2 / (1 + Omega^2 T1 T2)
    Frequency gamma{0.0};    // FWHM = (1 / (pi T2)) sqrt(1 + Omega^2 T1 T2)
};

/// Throws DomainError unless omega, t1, t2 are all positive and finite.
BlochSteadyState bloch_peak(double omega_rad_per_s, double t1_s, double t2_s);

/// Resonance lineshape: a fixed-amplitude Lorentzian, or the Bloch steady
/// state whose amplitude saturates and whose width power-broadens.
class Lineshape {
  public:
    /// Peak current above baseline and FWHM. Throws DomainError unless both
    /// are positive and finite.
    static Lineshape phenomenological(Current a_peak, Frequency gamma);

    /// Driven two-level steady state; the peak current is the full scale
    /// times the saturation factor. Throws DomainError on non-positive
    /// omega / t1 / t2.
    static Lineshape bloch(double omega_rad_per_s, double t1_s, double t2_s);

    bool is_bloch() const { return bloch_; }
    Current peak_amplitude() const { return a_peak_; }
    Frequency fwhm() const { return gamma_; }

  private:
    Lineshape(bool is_bloch, Current a, Frequency g) : bloch_(is_bloch), a_peak_(a), gamma_(g) {}
    bool bloch_ = false;
    Current a_peak_{0.3e-12};
    Frequency gamma_{55e6};
};

/// Tip and bias settings of the tunnel junction readout.
struct JunctionConfig {
    Current i_set{10e-12};
    Voltage v_dc{-0.100};
    Voltage v_rf{0.010};
    double eta = 1.0;                // tip spin polarization, |eta| <= 1
    MagneticField b_tip{0.020};      // tip stray field, additive
    MagneticField delta_b_hyst{0.0}; // magnet hysteresis offset, |dB| <= 10 mT
    Lineshape lineshape = Lineshape::phenomenological(Current{0.3e-12}, Frequency{55e6});

    /// Throws DomainError when a bound above is violated.
    void validate() const;
};

struct Position {
    double x_nm = 0.0;
    double y_nm = 0.0;
};

/// Ring-shaped radical density with eight-fold lobe modulation.
struct MoleculeMap {
    Position center{0.0, 0.0};
    double ring_radius_nm = 0.45;
    double ring_width_nm = 0.10;
    double lobe_depth = 1.0; // angular modulation depth in [0, 1]
    static constexpr int kLobes = 8;

    /// Throws DomainError on non-positive radius / width or depth outside
    /// [0, 1].
    void validate() const;

    /// Center of lobe k (k mod 8) on the ring.
    Position lobe_position(int k) const;
};

/// Normalized radical weight in [0, 1]:
/// exp(-(r - r0)^2 / (2 w^2)) x (1 - d + d cos^2(4 theta)), peak 1 on the
/// ring at a lobe angle.
double radical_density(Position pos, const MoleculeMap& map);

/// Additive white Gaussian noise on the lock-in output.
struct NoiseModel {
    double sigma_a = 0.0;   // standard deviation on delta-I (A)
    std::uint64_t seed = 0; // base seed; per-spectrum streams are derived

    void validate() const; // sigma >= 0 and finite
};

/// Uniform acquisition grid, endpoints inclusive.
struct FrequencyGrid {
    Frequency lo{17.79e9};
    Frequency hi{19.29e9};
    std::size_t n_points = 301;

    void validate() const; // lo < hi, n >= 2
};

/// Where the resonance positions come from: the diagonalized spin model, or
/// the closed-form Zeeman line (g, f0 taken from the spin config).
enum class ResonanceSource { kSpinModel, kClosedForm };

/// Per-spectrum RNG stream: base seed folded with the field and position so
/// concurrent synthesis at different (B, pos) is schedule-independent.
std::uint64_t derive_seed(std::uint64_t base, MagneticField b_set, Position pos);

/// Single Lorentzian line, FWHM convention.
Current lorentzian(Frequency f, Current a, Frequency f_r, Frequency gamma, Current baseline);

/// Synthesize one lock-in spectrum at a tip position and set field. The
/// effective field is B_set + delta_B_hyst + B_tip; each spin-model line
/// contributes a Lorentzian of amplitude
///   A_peak x eta x radical_density(pos) x (intensity / 0.25),
/// then white noise is added. An empty line list is valid and gives a
/// pure-noise trace. Metadata records the set field, position, junction
/// settings, and the derived seed.
Spectrum synthesize_spectrum(const spinham::SpinSystemConfig& spin, const JunctionConfig& junction,
                             const MoleculeMap& map, Position pos, MagneticField b_set,
                             const FrequencyGrid& grid, const NoiseModel& noise,
                             ResonanceSource source = ResonanceSource::kSpinModel);

/// Ideal lock-in demodulation: mean(I_on) - mean(I_off). Throws DomainError
/// on length mismatch or empty traces.
Current lockin_output(std::span<const double> i_on_a, std::span<const double> i_off_a);

} // namespace esrstm::spectrometer
