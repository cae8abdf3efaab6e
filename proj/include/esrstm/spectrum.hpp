#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "esrstm/quantities.hpp"

namespace esrstm {

/// Acquisition metadata carried by every spectrum. The seed recorded here
/// fully determines any stochastic content of the trace.
struct SpectrumMeta {
    MagneticField b_set{0.0};  // commanded external field
    std::string position;      // label such as "lobe", "center", or "x,y"
    double x_nm = 0.0;
    double y_nm = 0.0;
    Voltage v_dc{-0.100};
    Current i_set{10e-12};
    Voltage v_rf{0.010};
    std::uint64_t seed = 0;
};

/// A sampled (frequency, delta-I) trace. Immutable after construction;
/// analyses return new objects rather than mutating spectra in place.
class Spectrum {
  public:
    /// Takes ownership of the sample arrays. Throws DomainError unless the
    /// frequency grid is finite, non-negative, strictly increasing, and at
    /// least two points long with matching value count.
    Spectrum(std::vector<double> freqs_hz, std::vector<double> values_a, SpectrumMeta meta);

    /// Uniform grid between lo and hi inclusive, values zero-initialized.
    /// Throws DomainError for a reversed range or fewer than two points.
    static Spectrum uniform(Frequency lo, Frequency hi, std::size_t n_points, SpectrumMeta meta);

    std::span<const double> freqs_hz() const { return freqs_; }
    std::span<const double> values_a() const { return values_; }
    const SpectrumMeta& meta() const { return meta_; }
    std::size_t size() const { return freqs_.size(); }

    /// Copy with every value multiplied by a constant (new object).
    Spectrum scaled(double factor) const;

  private:
    std::vector<double> freqs_;
    std::vector<double> values_;
    SpectrumMeta meta_;
};

} // namespace esrstm
