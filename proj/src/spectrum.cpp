#include "esrstm/spectrum.hpp"

#include <cmath>
#include <utility>

#include "esrstm/errors.hpp"

namespace esrstm {

Spectrum::Spectrum(std::vector<double> freqs_hz, std::vector<double> values_a, SpectrumMeta meta)
    : freqs_(std::move(freqs_hz)), values_(std::move(values_a)), meta_(std::move(meta)) {
    if (freqs_.size() < 2)
        throw DomainError("Spectrum: need at least two samples");
    if (freqs_.size() != values_.size())
        throw DomainError("Spectrum: frequency and value arrays differ in length");
    for (std::size_t i = 0; i < freqs_.size(); ++i) {
        if (!std::isfinite(freqs_[i]) || freqs_[i] < 0.0)
            throw DomainError("Spectrum: frequencies must be finite and >= 0");
        if (i > 0 && freqs_[i] <= freqs_[i - 1])
            throw DomainError("Spectrum: frequency grid must be strictly increasing");
        if (!std::isfinite(values_[i]))
            throw DomainError("Spectrum: values must be finite");
    }
}

Spectrum Spectrum::uniform(Frequency lo, Frequency hi, std::size_t n_points, SpectrumMeta meta) {
    if (n_points < 2)
        throw DomainError("Spectrum::uniform: need n_points >= 2");
    if (!(lo.v < hi.v))
        throw DomainError("Spectrum::uniform: range must be increasing");
    std::vector<double> freqs(n_points);
    const double step = (hi.v - lo.v) / static_cast<double>(n_points - 1);
    for (std::size_t i = 0; i < n_points; ++i)
        freqs[i] = lo.v + step * static_cast<double>(i);
    freqs.back() = hi.v; // endpoint exact
    return Spectrum(std::move(freqs), std::vector<double>(n_points, 0.0), std::move(meta));
}

Spectrum Spectrum::scaled(double factor) const {
    std::vector<double> values(values_);
    for (double& v : values)
        v *= factor;
    return Spectrum(std::vector<double>(freqs_), std::move(values), meta_);
}

} // namespace esrstm
