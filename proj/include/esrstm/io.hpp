#pragma once

#include <string>
#include <vector>

#include "esrstm/fitkit.hpp"
#include "esrstm/rfchain.hpp"
#include "esrstm/spectrum.hpp"

namespace esrstm::io {

/// All writers are atomic: content goes to `<path>.tmp`, then a rename.
/// Filesystem failures throw IoError; malformed content on the read side
/// throws FormatError naming the line.

/// `frequency_hz,delta_i_a` rows after `#`-prefixed metadata lines (field,
/// position, bias, setpoint, RF amplitude, seed).
void write_spectrum_csv(const std::string& path, const Spectrum& s);
Spectrum read_spectrum_csv(const std::string& path);

/// `frequency_hz,power_dbm` rows; a third `clipped` column appears only
/// when at least one row was clamped at the source maximum.
void write_power_table_csv(const std::string& path, const rfchain::PowerTable& table);
rfchain::PowerTable read_power_table_csv(const std::string& path);

/// `frequency_hz,t_linear` rows, a tabulated transmission line.
void write_transmission_csv(const std::string& path,
                            const std::vector<double>& freqs_hz,
                            const std::vector<double>& t_linear);
rfchain::TransmissionModel read_transmission_csv(const std::string& path);

/// `b_tesla,f_hz,sigma_hz` rows for a pre-fitted Zeeman point set.
std::vector<fitkit::LinePoint> read_peaks_csv(const std::string& path);

/// Raw text, atomically.
void write_text(const std::string& path, const std::string& content);
std::string read_text(const std::string& path);

} // namespace esrstm::io
