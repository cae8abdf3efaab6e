#include "esrstm/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "esrstm/errors.hpp"

namespace esrstm {

namespace {

struct DoubleKey {
    const char* section;
    const char* key;
    double RunConfig::* member;
};

// One row per scalar field, in serialization order.
const std::vector<DoubleKey>& double_keys() {
    static const std::vector<DoubleKey> keys{
        {"spin", "g_s", &RunConfig::g_s},
        {"spin", "g_j", &RunConfig::g_j},
        {"spin", "exchange_ghz", &RunConfig::exchange_ghz},
        {"spin", "anisotropy_ghz", &RunConfig::anisotropy_ghz},
        {"junction", "i_set_a", &RunConfig::i_set_a},
        {"junction", "v_dc_v", &RunConfig::v_dc_v},
        {"junction", "v_rf_v", &RunConfig::v_rf_v},
        {"junction", "eta", &RunConfig::eta},
        {"junction", "b_tip_t", &RunConfig::b_tip_t},
        {"junction", "delta_b_hyst_t", &RunConfig::delta_b_hyst_t},
        {"junction", "a_peak_a", &RunConfig::a_peak_a},
        {"junction", "gamma_hz", &RunConfig::gamma_hz},
        {"junction", "bloch_omega_rad_s", &RunConfig::bloch_omega_rad_s},
        {"junction", "bloch_t1_s", &RunConfig::bloch_t1_s},
        {"junction", "bloch_t2_s", &RunConfig::bloch_t2_s},
        {"molecule", "center_x_nm", &RunConfig::center_x_nm},
        {"molecule", "center_y_nm", &RunConfig::center_y_nm},
        {"molecule", "ring_radius_nm", &RunConfig::ring_radius_nm},
        {"molecule", "ring_width_nm", &RunConfig::ring_width_nm},
        {"molecule", "lobe_depth", &RunConfig::lobe_depth},
        {"noise", "sigma_a", &RunConfig::sigma_a},
        {"grid", "f_lo_hz", &RunConfig::f_lo_hz},
        {"grid", "f_hi_hz", &RunConfig::f_hi_hz},
        {"line", "slope_db_per_ghz", &RunConfig::line_slope_db_per_ghz},
        {"line", "ripple_db", &RunConfig::line_ripple_db},
        {"line", "ripple_period_hz", &RunConfig::line_ripple_period_hz},
        {"line", "ripple_phase", &RunConfig::line_ripple_phase},
        {"line", "anchor_hz", &RunConfig::line_anchor_hz},
        {"line", "source_scale_v", &RunConfig::source_scale_v},
        {"calibration", "band_lo_hz", &RunConfig::band_lo_hz},
        {"calibration", "band_hi_hz", &RunConfig::band_hi_hz},
        {"calibration", "band_step_hz", &RunConfig::band_step_hz},
        {"calibration", "f_ref_hz", &RunConfig::f_ref_hz},
        {"calibration", "p_estimate_dbm", &RunConfig::p_estimate_dbm},
        {"calibration", "p_constant_dbm", &RunConfig::p_constant_dbm},
        {"calibration", "p_source_max_dbm", &RunConfig::p_source_max_dbm},
        {"calibration", "target_vrf_v", &RunConfig::target_vrf_v},
        {"calibration", "noise_floor_a", &RunConfig::noise_floor_a},
        {"calibration", "noise_level", &RunConfig::cal_noise_level},
        {"envelopes", "g_lo", &RunConfig::g_lo},
        {"envelopes", "g_hi", &RunConfig::g_hi},
        {"envelopes", "f0_lo_hz", &RunConfig::f0_lo_hz},
        {"envelopes", "f0_hi_hz", &RunConfig::f0_hi_hz},
        {"envelopes", "gamma_lo_hz", &RunConfig::gamma_lo_hz},
        {"envelopes", "gamma_hi_hz", &RunConfig::gamma_hi_hz},
        {"envelopes", "flatness_max", &RunConfig::flatness_max},
        {"envelopes", "vrf_rel_err_max", &RunConfig::vrf_rel_err_max},
    };
    return keys;
}

std::string format_double(double v) {
    char buf[40];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v); // shortest round trip
    return std::string(buf, end);
}

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

[[noreturn]] void fail_line(int line_no, const std::string& why) {
    throw FormatError("config line " + std::to_string(line_no) + ": " + why);
}

double parse_double(const std::string& text, int line_no) {
    const char* s = text.c_str();
    char* end = nullptr;
    const double v = std::strtod(s, &end);
    if (end == s || *end != '\0') fail_line(line_no, "expected a number, got '" + text + "'");
    return v;
}

} // namespace

void RunConfig::validate() const {
    spin().validate();
    junction().validate();
    molecule().validate();
    grid().validate();
    line();
    calibration().validate();
    chain_truth().validate();
    if (!(sigma_a >= 0.0) || !std::isfinite(sigma_a))
        throw DomainError("noise.sigma_a must be non-negative");
    if (!(cal_noise_level >= 0.0 && cal_noise_level < 1.0))
        throw DomainError("calibration.noise_level must lie in [0, 1)");
    if (fields_t.empty()) throw DomainError("fields.b_tesla must list at least one field");
    for (double b : fields_t)
        if (!(b >= 0.0) || !std::isfinite(b))
            throw DomainError("fields.b_tesla entries must be non-negative");
    if (!(g_lo < g_hi) || !(f0_lo_hz < f0_hi_hz) || !(gamma_lo_hz < gamma_hi_hz))
        throw DomainError("envelopes must have lo < hi");
    if (!(flatness_max > 0.0) || !(vrf_rel_err_max > 0.0))
        throw DomainError("envelope tolerances must be positive");
}

spinham::SpinSystemConfig RunConfig::spin() const {
    spinham::SpinSystemConfig s;
    s.g_s = g_s;
    s.g_j = g_j;
    s.exchange = Energy{constants::kPlanckJs * exchange_ghz * 1e9};
    s.anisotropy = Energy{constants::kPlanckJs * anisotropy_ghz * 1e9};
    if (exchange_form == "ising")
        s.exchange_form = spinham::ExchangeForm::kIsing;
    else if (exchange_form == "heisenberg")
        s.exchange_form = spinham::ExchangeForm::kHeisenberg;
    else
        throw DomainError("spin.exchange_form must be ising or heisenberg");
    if (spin_mode == "full")
        s.mode = spinham::ModelMode::kFull;
    else if (spin_mode == "projected")
        s.mode = spinham::ModelMode::kProjected;
    else
        throw DomainError("spin.mode must be full or projected");
    return s;
}

spectrometer::JunctionConfig RunConfig::junction() const {
    spectrometer::JunctionConfig j;
    j.i_set = Current{i_set_a};
    j.v_dc = Voltage{v_dc_v};
    j.v_rf = Voltage{v_rf_v};
    j.eta = eta;
    j.b_tip = MagneticField{b_tip_t};
    j.delta_b_hyst = MagneticField{delta_b_hyst_t};
    if (lineshape == "phenomenological")
        j.lineshape = spectrometer::Lineshape::phenomenological(Current{a_peak_a},
                                                               Frequency{gamma_hz});
    else if (lineshape == "bloch")
        j.lineshape = spectrometer::Lineshape::bloch(bloch_omega_rad_s, bloch_t1_s, bloch_t2_s);
    else
        throw DomainError("junction.lineshape must be phenomenological or bloch");
    j.validate();
    return j;
}

spectrometer::MoleculeMap RunConfig::molecule() const {
    spectrometer::MoleculeMap m;
    m.center = {center_x_nm, center_y_nm};
    m.ring_radius_nm = ring_radius_nm;
    m.ring_width_nm = ring_width_nm;
    m.lobe_depth = lobe_depth;
    m.validate();
    return m;
}

spectrometer::FrequencyGrid RunConfig::grid() const {
    spectrometer::FrequencyGrid g;
    g.lo = Frequency{f_lo_hz};
    g.hi = Frequency{f_hi_hz};
    g.n_points = n_points;
    g.validate();
    return g;
}

rfchain::TransmissionModel RunConfig::line() const {
    return rfchain::TransmissionModel::parametric(line_slope_db_per_ghz, line_ripple_db,
                                                  Frequency{line_ripple_period_hz},
                                                  line_ripple_phase, Frequency{line_anchor_hz});
}

rfchain::RfChainTruth RunConfig::chain_truth() const {
    rfchain::RfChainTruth t{line(), source_scale_v, rfchain::IVCurve{}, Voltage{-0.070}};
    return t;
}

rfchain::CalibrationConfig RunConfig::calibration() const {
    rfchain::CalibrationConfig c;
    c.band_lo = Frequency{band_lo_hz};
    c.band_hi = Frequency{band_hi_hz};
    c.step = Frequency{band_step_hz};
    c.f_ref = Frequency{f_ref_hz};
    c.p_estimate = PowerDbm{p_estimate_dbm};
    c.p_constant = PowerDbm{p_constant_dbm};
    c.p_source_max = PowerDbm{p_source_max_dbm};
    c.target_vrf = Voltage{target_vrf_v};
    c.readings_per_point = readings_per_point;
    c.noise_floor = Current{noise_floor_a};
    return c;
}

std::string to_ini(const RunConfig& cfg) {
    std::ostringstream out;
    std::string current_section;
    const auto section = [&](const char* name) {
        if (current_section != name) {
            if (!current_section.empty()) out << "\n";
            out << "[" << name << "]\n";
            current_section = name;
        }
    };
    const auto emit = [&](const char* name, const std::string& value) {
        out << name << " = " << value << "\n";
    };

    for (const auto& k : double_keys()) {
        section(k.section);
        if (current_section == "spin" && k.member == &RunConfig::anisotropy_ghz) {
            emit(k.key, format_double(cfg.*(k.member)));
            emit("exchange_form", cfg.exchange_form);
            emit("mode", cfg.spin_mode);
            continue;
        }
        if (current_section == "junction" && k.member == &RunConfig::a_peak_a)
            emit("lineshape", cfg.lineshape);
        if (current_section == "noise" && k.member == &RunConfig::sigma_a) {
            emit(k.key, format_double(cfg.*(k.member)));
            if (cfg.has_seed) emit("seed", std::to_string(cfg.seed));
            section("fields");
            std::string list;
            for (std::size_t i = 0; i < cfg.fields_t.size(); ++i)
                list += (i ? ", " : "") + format_double(cfg.fields_t[i]);
            emit("b_tesla", list);
            continue;
        }
        if (current_section == "grid" && k.member == &RunConfig::f_hi_hz) {
            emit(k.key, format_double(cfg.*(k.member)));
            emit("n_points", std::to_string(cfg.n_points));
            continue;
        }
        if (current_section == "calibration" && k.member == &RunConfig::noise_floor_a)
            emit("readings_per_point", std::to_string(cfg.readings_per_point));
        emit(k.key, format_double(cfg.*(k.member)));
    }
    return out.str();
}

RunConfig parse_ini(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string raw;
    std::string sec;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto hash = raw.find_first_of("#;");
        std::string body = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (body.empty()) continue;
        if (body.front() == '[') {
            if (body.back() != ']') fail_line(line_no, "unterminated section header");
            sec = trim(body.substr(1, body.size() - 2));
            if (sec.empty()) fail_line(line_no, "empty section name");
            continue;
        }
        const auto eq = body.find('=');
        if (eq == std::string::npos) fail_line(line_no, "expected key = value");
        const std::string key = trim(body.substr(0, eq));
        const std::string value = trim(body.substr(eq + 1));
        if (key.empty()) fail_line(line_no, "empty key");

        bool handled = false;
        for (const auto& k : double_keys()) {
            if (sec == k.section && key == k.key) {
                cfg.*(k.member) = parse_double(value, line_no);
                handled = true;
                break;
            }
        }
        if (handled) continue;

        if (sec == "spin" && key == "exchange_form") cfg.exchange_form = value;
        else if (sec == "spin" && key == "mode") cfg.spin_mode = value;
        else if (sec == "junction" && key == "lineshape") cfg.lineshape = value;
        else if (sec == "noise" && key == "seed") {
            std::uint64_t v = 0;
            const auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
            if (ec != std::errc{} || p != value.data() + value.size())
                fail_line(line_no, "seed must be an unsigned integer");
            cfg.seed = v;
            cfg.has_seed = true;
        } else if (sec == "fields" && key == "b_tesla") {
            std::vector<double> fields;
            std::stringstream list(value);
            std::string item;
            while (std::getline(list, item, ',')) {
                const std::string t = trim(item);
                if (t.empty()) fail_line(line_no, "empty entry in field list");
                fields.push_back(parse_double(t, line_no));
            }
            if (fields.empty()) fail_line(line_no, "field list is empty");
            cfg.fields_t = std::move(fields);
        } else if (sec == "grid" && key == "n_points") {
            const long v = std::strtol(value.c_str(), nullptr, 10);
            if (v < 2) fail_line(line_no, "n_points must be at least 2");
            cfg.n_points = static_cast<std::size_t>(v);
        } else if (sec == "calibration" && key == "readings_per_point") {
            const long v = std::strtol(value.c_str(), nullptr, 10);
            if (v < 1) fail_line(line_no, "readings_per_point must be positive");
            cfg.readings_per_point = static_cast<int>(v);
        } else {
            fail_line(line_no, "unknown key '" + key + "' in section [" + sec + "]");
        }
    }
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_ini(buf.str());
}

} // namespace esrstm
