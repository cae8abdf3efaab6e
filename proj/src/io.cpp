#include "esrstm/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "esrstm/errors.hpp"

namespace esrstm::io {

namespace {

std::string format_double(double v) {
    char buf[40];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

[[noreturn]] void fail_line(const std::string& path, int line_no, const std::string& why) {
    throw FormatError(path + " line " + std::to_string(line_no) + ": " + why);
}

double parse_double(const std::string& path, int line_no, std::string_view text) {
    double v = 0.0;
    const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || p != text.data() + text.size())
        fail_line(path, line_no, "expected a number, got '" + std::string(text) + "'");
    return v;
}

std::vector<std::string> split_fields(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.emplace_back(line.substr(start, comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

/// Reads every line; strips a trailing '\r' so CRLF files parse.
std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read '" + path + "'");
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

} // namespace

void write_text(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write '" + tmp + "'");
        out << content;
        if (!out) throw IoError("write failed for '" + tmp + "'");
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw IoError("cannot move '" + tmp + "' to '" + path + "'");
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_spectrum_csv(const std::string& path, const Spectrum& s) {
    std::ostringstream out;
    const auto& m = s.meta();
    out << "# b_set_t = " << format_double(m.b_set.value()) << "\n";
    out << "# position = " << m.position << "\n";
    out << "# x_nm = " << format_double(m.x_nm) << "\n";
    out << "# y_nm = " << format_double(m.y_nm) << "\n";
    out << "# v_dc_v = " << format_double(m.v_dc.value()) << "\n";
    out << "# i_set_a = " << format_double(m.i_set.value()) << "\n";
    out << "# v_rf_v = " << format_double(m.v_rf.value()) << "\n";
    out << "# seed = " << m.seed << "\n";
    out << "frequency_hz,delta_i_a\n";
    for (std::size_t i = 0; i < s.size(); ++i)
        out << format_double(s.freqs_hz()[i]) << "," << format_double(s.values_a()[i]) << "\n";
    write_text(path, out.str());
}

Spectrum read_spectrum_csv(const std::string& path) {
    const auto lines = read_lines(path);
    SpectrumMeta meta;
    std::vector<double> freqs, values;
    bool header_seen = false;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const int line_no = static_cast<int>(i) + 1;
        const std::string& line = lines[i];
        if (line.empty()) continue;
        if (line.front() == '#') {
            std::istringstream kv(line.substr(1));
            std::string key, eq, value;
            if (kv >> key >> eq >> value && eq == "=") {
                try {
                    if (key == "b_set_t") meta.b_set = MagneticField{std::stod(value)};
                    else if (key == "position") meta.position = value;
                    else if (key == "x_nm") meta.x_nm = std::stod(value);
                    else if (key == "y_nm") meta.y_nm = std::stod(value);
                    else if (key == "v_dc_v") meta.v_dc = Voltage{std::stod(value)};
                    else if (key == "i_set_a") meta.i_set = Current{std::stod(value)};
                    else if (key == "v_rf_v") meta.v_rf = Voltage{std::stod(value)};
                    else if (key == "seed") meta.seed = std::stoull(value);
                    // unknown metadata keys pass through silently
                } catch (const std::exception&) {
                    fail_line(path, line_no, "bad metadata value '" + value + "'");
                }
            }
            continue;
        }
        if (!header_seen) {
            if (line != "frequency_hz,delta_i_a")
                fail_line(path, line_no, "expected header 'frequency_hz,delta_i_a'");
            header_seen = true;
            continue;
        }
        const auto fields = split_fields(line);
        if (fields.size() != 2) fail_line(path, line_no, "expected two comma-separated values");
        freqs.push_back(parse_double(path, line_no, fields[0]));
        values.push_back(parse_double(path, line_no, fields[1]));
    }
    if (!header_seen) throw FormatError(path + ": missing 'frequency_hz,delta_i_a' header");
    if (freqs.size() < 2) throw FormatError(path + ": fewer than two data rows");
    try {
        return Spectrum(std::move(freqs), std::move(values), meta);
    } catch (const DomainError& e) {
        throw FormatError(path + ": " + e.what());
    }
}

void write_power_table_csv(const std::string& path, const rfchain::PowerTable& table) {
    std::ostringstream out;
    const bool with_flags = table.any_clipped();
    out << "# target_vrf_v = " << format_double(table.target_vrf.value()) << "\n";
    out << "# band_lo_hz = " << format_double(table.band_lo.value()) << "\n";
    out << "# band_hi_hz = " << format_double(table.band_hi.value()) << "\n";
    out << (with_flags ? "frequency_hz,power_dbm,clipped\n" : "frequency_hz,power_dbm\n");
    for (std::size_t i = 0; i < table.freqs_hz.size(); ++i) {
        out << format_double(table.freqs_hz[i]) << "," << format_double(table.power_dbm[i]);
        if (with_flags) out << "," << (table.clipped[i] ? 1 : 0);
        out << "\n";
    }
    write_text(path, out.str());
}

rfchain::PowerTable read_power_table_csv(const std::string& path) {
    const auto lines = read_lines(path);
    rfchain::PowerTable table;
    bool header_seen = false, with_flags = false;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const int line_no = static_cast<int>(i) + 1;
        const std::string& line = lines[i];
        if (line.empty()) continue;
        if (line.front() == '#') {
            std::istringstream kv(line.substr(1));
            std::string key, eq, value;
            if (kv >> key >> eq >> value && eq == "=") {
                try {
                    if (key == "target_vrf_v") table.target_vrf = Voltage{std::stod(value)};
                    else if (key == "band_lo_hz") table.band_lo = Frequency{std::stod(value)};
                    else if (key == "band_hi_hz") table.band_hi = Frequency{std::stod(value)};
                } catch (const std::exception&) {
                    fail_line(path, line_no, "bad metadata value '" + value + "'");
                }
            }
            continue;
        }
        if (!header_seen) {
            if (line == "frequency_hz,power_dbm") with_flags = false;
            else if (line == "frequency_hz,power_dbm,clipped") with_flags = true;
            else fail_line(path, line_no, "expected power-table header");
            header_seen = true;
            continue;
        }
        const auto fields = split_fields(line);
        if (fields.size() != (with_flags ? 3u : 2u))
            fail_line(path, line_no, "wrong number of columns");
        table.freqs_hz.push_back(parse_double(path, line_no, fields[0]));
        table.power_dbm.push_back(parse_double(path, line_no, fields[1]));
        table.clipped.push_back(
            with_flags && parse_double(path, line_no, fields[2]) != 0.0 ? 1 : 0);
    }
    if (!header_seen) throw FormatError(path + ": missing power-table header");
    if (table.band_lo.value() == 0.0 && !table.freqs_hz.empty()) {
        table.band_lo = Frequency{table.freqs_hz.front()};
        table.band_hi = Frequency{table.freqs_hz.back()};
    }
    return table;
}

void write_transmission_csv(const std::string& path, const std::vector<double>& freqs_hz,
                            const std::vector<double>& t_linear) {
    if (freqs_hz.size() != t_linear.size())
        throw DomainError("transmission table arrays must match");
    std::ostringstream out;
    out << "frequency_hz,t_linear\n";
    for (std::size_t i = 0; i < freqs_hz.size(); ++i)
        out << format_double(freqs_hz[i]) << "," << format_double(t_linear[i]) << "\n";
    write_text(path, out.str());
}

rfchain::TransmissionModel read_transmission_csv(const std::string& path) {
    const auto lines = read_lines(path);
    std::vector<double> freqs, ts;
    bool header_seen = false;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const int line_no = static_cast<int>(i) + 1;
        const std::string& line = lines[i];
        if (line.empty() || line.front() == '#') continue;
        if (!header_seen) {
            if (line != "frequency_hz,t_linear")
                fail_line(path, line_no, "expected header 'frequency_hz,t_linear'");
            header_seen = true;
            continue;
        }
        const auto fields = split_fields(line);
        if (fields.size() != 2) fail_line(path, line_no, "expected two comma-separated values");
        freqs.push_back(parse_double(path, line_no, fields[0]));
        ts.push_back(parse_double(path, line_no, fields[1]));
    }
    if (!header_seen) throw FormatError(path + ": missing 'frequency_hz,t_linear' header");
    try {
        return rfchain::TransmissionModel::tabulated(freqs, ts);
    } catch (const DomainError& e) {
        throw FormatError(path + ": " + e.what());
    }
}

std::vector<fitkit::LinePoint> read_peaks_csv(const std::string& path) {
    const auto lines = read_lines(path);
    std::vector<fitkit::LinePoint> points;
    bool header_seen = false;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const int line_no = static_cast<int>(i) + 1;
        const std::string& line = lines[i];
        if (line.empty() || line.front() == '#') continue;
        if (!header_seen) {
            if (line != "b_tesla,f_hz,sigma_hz")
                fail_line(path, line_no, "expected header 'b_tesla,f_hz,sigma_hz'");
            header_seen = true;
            continue;
        }
        const auto fields = split_fields(line);
        if (fields.size() != 3) fail_line(path, line_no, "expected three comma-separated values");
        points.push_back({parse_double(path, line_no, fields[0]),
                          parse_double(path, line_no, fields[1]),
                          parse_double(path, line_no, fields[2])});
    }
    if (!header_seen) throw FormatError(path + ": missing 'b_tesla,f_hz,sigma_hz' header");
    return points;
}

} // namespace esrstm::io
