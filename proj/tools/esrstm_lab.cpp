// esrstm-lab: simulate, calibrate, fit, and plot ESR-STM experiments.
//
// Exit codes: 0 success, 1 soft analysis failure (non-converged fit, flatness
// or envelope miss), 2 usage/config/format error, 3 I/O failure.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "esrstm/calibration.hpp"
#include "esrstm/config.hpp"
#include "esrstm/constants.hpp"
#include "esrstm/errors.hpp"
#include "esrstm/fitkit.hpp"
#include "esrstm/io.hpp"
#include "esrstm/pipeline.hpp"
#include "esrstm/spectrometer.hpp"
#include "esrstm/svg.hpp"
#include "esrstm/version.hpp"

namespace {

using namespace esrstm;
using nlohmann::ordered_json;

RunConfig load_or_default(const std::string& path) {
    RunConfig cfg = path.empty() ? RunConfig{} : load_config(path);
    cfg.validate();
    return cfg;
}

/// --seed beats the config seed beats ESRSTM_LAB_SEED. Commands that draw
/// randomness refuse to guess one (reproducibility is a feature).
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& cli_seed, const RunConfig& cfg,
                           bool required) {
    if (cli_seed) return *cli_seed;
    if (cfg.has_seed) return cfg.seed;
    if (const char* env = std::getenv("ESRSTM_LAB_SEED")) {
        char* end = nullptr;
        const unsigned long long v = std::strtoull(env, &end, 10);
        if (end == env || *end != '\0')
            throw DomainError("ESRSTM_LAB_SEED must be an unsigned integer");
        return v;
    }
    if (required)
        throw DomainError(
            "this command draws random numbers: pass --seed, set [noise] seed in the "
            "config, or export ESRSTM_LAB_SEED");
    return 0;
}

spectrometer::Position parse_position(const std::string& label,
                                      const spectrometer::MoleculeMap& map) {
    if (label == "center") return map.center;
    if (label == "lobe") return map.lobe_position(0);
    if (label.rfind("lobe:", 0) == 0) {
        try {
            return map.lobe_position(std::stoi(label.substr(5)));
        } catch (const std::exception&) {
            throw DomainError("bad lobe index in position '" + label + "'");
        }
    }
    const auto comma = label.find(',');
    if (comma == std::string::npos)
        throw DomainError("position must be 'center', 'lobe', 'lobe:K', or 'x,y' in nm");
    try {
        std::size_t ax = 0, ay = 0;
        const std::string xs = label.substr(0, comma), ys = label.substr(comma + 1);
        const double x = std::stod(xs, &ax);
        const double y = std::stod(ys, &ay);
        if (ax != xs.size() || ay != ys.size()) throw std::invalid_argument("trailing text");
        return {x, y};
    } catch (const std::exception&) {
        throw DomainError("cannot parse position '" + label + "' as x,y");
    }
}

std::string sibling_json_path(const std::string& csv_path) {
    if (csv_path.size() >= 4 && csv_path.ends_with(".csv"))
        return csv_path.substr(0, csv_path.size() - 4) + ".json";
    return csv_path + ".json";
}

/// First non-comment, non-empty line of a file: the CSV header.
std::string peek_header(const std::string& path) {
    const std::string text = io::read_text(path);
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        std::string line = text.substr(pos, eol - pos);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty() && line.front() != '#') return line;
        pos = eol + 1;
    }
    return {};
}

ordered_json conventions_json() {
    ordered_json c;
    c["lockin"] = "delta I = mean(I_on) - mean(I_off)";
    c["linewidth"] = "gamma is the Lorentzian FWHM";
    c["f0_mapping"] = "f0 = 6 |J_ex| / h (Ising doublet, mJ = +/-6)";
    return c;
}

ordered_json fit_to_json(const fitkit::FitResult& fit) {
    ordered_json j;
    ordered_json params, sigmas;
    for (std::size_t i = 0; i < fit.names.size(); ++i) {
        params[fit.names[i]] = fit.params[i];
        sigmas[fit.names[i]] = fit.sigmas[i];
    }
    j["params"] = params;
    j["sigmas"] = sigmas;
    j["converged"] = fit.converged;
    j["chi2"] = fit.chi2;
    j["dof"] = fit.dof;
    j["n_iter"] = fit.n_iter;
    return j;
}

ordered_json zeeman_to_json(const pipeline::ZeemanResult& z) {
    ordered_json j;
    j["g"] = z.g;
    j["sigma_g"] = z.sigma_g;
    j["f0_hz"] = z.f0.value();
    j["sigma_f0_hz"] = z.sigma_f0.value();
    j["j_ex_ev"] = to_electron_volts(z.j_ex);
    j["sigma_j_ex_ev"] = to_electron_volts(z.sigma_j_ex);
    j["fit_mode"] = z.weighted ? "weighted" : "unweighted";
    j["converged"] = true;
    auto table = ordered_json::array();
    for (const auto& row : z.table) {
        ordered_json r;
        r["b_set_t"] = row.b_set.value();
        r["used"] = row.used;
        if (row.used) {
            r["f_hz"] = row.f_fit.value();
            r["sigma_f_hz"] = row.sigma_f.value();
            r["gamma_hz"] = row.gamma.value();
            r["amplitude_a"] = row.amplitude.value();
        } else {
            r["note"] = row.note;
        }
        table.push_back(r);
    }
    j["table"] = table;
    return j;
}

void write_json(const std::string& path, const ordered_json& j) {
    io::write_text(path, j.dump(2) + "\n");
}

// --------------------------------------------------------------------------
//  Subcommands
// --------------------------------------------------------------------------

int cmd_simulate(const std::string& config_path, double b_field, const std::string& position,
                 const std::string& out, const std::optional<std::uint64_t>& seed_opt) {
    const RunConfig cfg = load_or_default(config_path);
    if (b_field < 0.0)
        throw DomainError("--b-field is an out-of-plane magnitude and must be >= 0");
    const auto map = cfg.molecule();
    const auto pos = parse_position(position, map);
    const std::uint64_t seed = resolve_seed(seed_opt, cfg, cfg.sigma_a > 0.0);
    const auto s = spectrometer::synthesize_spectrum(
        cfg.spin(), cfg.junction(), map, pos, MagneticField{b_field}, cfg.grid(),
        spectrometer::NoiseModel{cfg.sigma_a, seed});
    io::write_spectrum_csv(out, s);
    return 0;
}

int cmd_calibrate(const std::string& config_path, const std::string& line_path,
                  std::optional<double> target_vrf, const std::string& band,
                  const std::string& out, const std::optional<std::uint64_t>& seed_opt) {
    RunConfig cfg = load_or_default(config_path);
    if (target_vrf) cfg.target_vrf_v = *target_vrf;
    if (!band.empty()) {
        const auto colon = band.find(':');
        if (colon == std::string::npos)
            throw DomainError("--band must look like f_lo:f_hi in Hz");
        try {
            cfg.band_lo_hz = std::stod(band.substr(0, colon));
            cfg.band_hi_hz = std::stod(band.substr(colon + 1));
        } catch (const std::exception&) {
            throw DomainError("cannot parse --band '" + band + "'");
        }
    }
    rfchain::RfChainTruth truth = cfg.chain_truth();
    if (!line_path.empty()) {
        if (line_path.ends_with(".csv")) truth.line = io::read_transmission_csv(line_path);
        else truth.line = load_config(line_path).line();
    }
    const auto cal_cfg = cfg.calibration();
    cal_cfg.validate();
    if (truth.line.is_tabulated()) {
        // Surface an unsupported band as a usage error before measuring.
        truth.line.linear(cal_cfg.band_lo);
        truth.line.linear(cal_cfg.band_hi);
    }
    const std::uint64_t seed = resolve_seed(seed_opt, cfg, cfg.cal_noise_level > 0.0);
    const auto cal = rfchain::calibrate_chain(
        truth, cal_cfg, rfchain::MeasurementNoise{cfg.cal_noise_level}, seed);
    io::write_power_table_csv(out, cal.power_table);

    ordered_json j;
    j["residual_flatness"] = cal.residual_flatness;
    j["flatness_max"] = cfg.flatness_max;
    j["target_vrf_v"] = cfg.target_vrf_v;
    j["k_v_per_sqrt_mw"] = cal.k;
    j["vrf_anchor_v"] = cal.vrf_at_anchor.value();
    j["any_clipped"] = cal.power_table.any_clipped();
    j["band_lo_hz"] = cfg.band_lo_hz;
    j["band_hi_hz"] = cfg.band_hi_hz;
    j["pass"] = cal.residual_flatness <= cfg.flatness_max && !cal.power_table.any_clipped();
    write_json(sibling_json_path(out), j);
    return j["pass"] ? 0 : 1;
}

int cmd_fit_peak(const std::string& input, const std::string& out) {
    const Spectrum s = io::read_spectrum_csv(input);
    ordered_json j;
    j["input"] = input;
    j["conventions"] = conventions_json();
    try {
        const auto fit = fitkit::fit_lorentzian(s);
        j.update(fit_to_json(fit));
        write_json(out, j);
        return fit.converged ? 0 : 1;
    } catch (const AnalysisError& e) {
        j["converged"] = false;
        j["error"] = e.what();
        write_json(out, j);
        return 1;
    }
}

int cmd_zeeman_fit(const std::vector<std::string>& inputs, const std::string& out) {
    ordered_json j;
    j["conventions"] = conventions_json();
    try {
        if (inputs.size() == 1 && peek_header(inputs[0]) == "b_tesla,f_hz,sigma_hz") {
            auto points = io::read_peaks_csv(inputs[0]);
            bool weighted = !points.empty();
            for (const auto& p : points)
                if (!(p.sigma_hz > 0.0)) weighted = false;
            if (!weighted)
                for (auto& p : points) p.sigma_hz = 1.0;
            const auto fit = fitkit::linear_fit_weighted(points);
            double s_slope = fit.sigma("slope"), s_int = fit.sigma("intercept");
            if (!weighted) {
                const double f = fit.dof > 0 ? std::sqrt(fit.chi2 / fit.dof) : 0.0;
                s_slope *= f;
                s_int *= f;
            }
            j["g"] = fit.param("slope") / constants::kMuBOverHHzPerT;
            j["sigma_g"] = s_slope / constants::kMuBOverHHzPerT;
            j["f0_hz"] = fit.param("intercept");
            j["sigma_f0_hz"] = s_int;
            j["j_ex_ev"] =
                constants::kPlanckEvS * std::abs(fit.param("intercept")) / 6.0;
            j["sigma_j_ex_ev"] = constants::kPlanckEvS * s_int / 6.0;
            j["fit_mode"] = weighted ? "weighted" : "unweighted";
            j["converged"] = true;
            j["n_points"] = points.size();
        } else {
            std::vector<Spectrum> spectra;
            for (const auto& path : inputs) spectra.push_back(io::read_spectrum_csv(path));
            j.update(zeeman_to_json(pipeline::zeeman_analysis(spectra)));
        }
        write_json(out, j);
        return 0;
    } catch (const AnalysisError& e) {
        j["converged"] = false;
        j["error"] = e.what();
        write_json(out, j);
        return 1;
    }
}

int cmd_spatial_map(const std::string& config_path, const std::string& out,
                    const std::optional<std::uint64_t>& seed_opt) {
    const RunConfig cfg = load_or_default(config_path);
    const std::uint64_t seed = resolve_seed(seed_opt, cfg, cfg.sigma_a > 0.0);
    const auto map = cfg.molecule();
    std::vector<spectrometer::Position> positions;
    for (int k = 0; k < spectrometer::MoleculeMap::kLobes; ++k)
        positions.push_back(map.lobe_position(k));
    positions.push_back(map.center);
    const auto scan =
        pipeline::spatial_scan(positions, MagneticField{cfg.fields_t.front()}, cfg, seed);
    std::string csv = "x_nm,y_nm,detected,amplitude_a,f_r_hz\n";
    char buf[160];
    for (const auto& p : scan) {
        if (p.detected)
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,1,%.17g,%.17g\n", p.pos.x_nm,
                          p.pos.y_nm, p.amplitude.value(), p.f_r.value());
        else
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,0,,\n", p.pos.x_nm, p.pos.y_nm);
        csv += buf;
    }
    io::write_text(out, csv);
    return 0;
}

int cmd_roundtrip(const std::string& config_path, const std::string& out,
                  const std::optional<std::uint64_t>& seed_opt) {
    const RunConfig cfg = load_or_default(config_path);
    const std::uint64_t seed = resolve_seed(seed_opt, cfg, true);
    const auto rep = pipeline::roundtrip_experiment(cfg, seed);
    write_json(out, rep.body);
    return rep.passed ? 0 : 1;
}

int cmd_plot(const std::string& input, const std::string& out) {
    std::vector<svg::Series> series;
    std::string title = input, x_label = "x", y_label = "y";

    if (input.ends_with(".json")) {
        ordered_json j;
        try {
            j = ordered_json::parse(io::read_text(input));
        } catch (const nlohmann::json::parse_error& e) {
            throw FormatError(input + ": " + e.what());
        }
        const ordered_json* z = nullptr;
        if (j.contains("table") && j.contains("g")) z = &j;
        else if (j.contains("stages") && j["stages"].contains("zeeman") &&
                 j["stages"]["zeeman"].contains("table"))
            z = &j["stages"]["zeeman"];
        if (z == nullptr)
            throw FormatError(input + ": no Zeeman table to plot in this JSON");
        svg::Series pts;
        pts.markers = true;
        pts.color = "#c44e52";
        pts.label = "fitted peaks";
        for (const auto& row : (*z)["table"]) {
            if (!row["used"]) continue;
            pts.x.push_back(row["b_set_t"].get<double>());
            pts.y.push_back(row["f_hz"].get<double>());
        }
        const double g = (*z)["g"], f0 = (*z)["f0_hz"];
        svg::Series line;
        line.label = "linear fit";
        if (!pts.x.empty()) {
            const auto [lo, hi] = std::minmax_element(pts.x.begin(), pts.x.end());
            for (int i = 0; i <= 50; ++i) {
                const double b = *lo + (*hi - *lo) * i / 50.0;
                line.x.push_back(b);
                line.y.push_back(g * constants::kMuBOverHHzPerT * b + f0);
            }
        }
        series = {line, pts};
        title = "Zeeman fit";
        x_label = "B_set (T)";
        y_label = "f_r (Hz)";
        const std::string doc = svg::render_plot(series, title, x_label, y_label);
        io::write_text(out, doc);
        return 0;
    }

    const std::string header = peek_header(input);
    if (header == "frequency_hz,delta_i_a") {
        const auto s = io::read_spectrum_csv(input);
        svg::Series data;
        data.x.assign(s.freqs_hz().begin(), s.freqs_hz().end());
        data.y.assign(s.values_a().begin(), s.values_a().end());
        data.label = "delta I";
        series.push_back(data);
        try {
            const auto fit = fitkit::fit_lorentzian(s);
            if (fit.converged) {
                svg::Series curve;
                curve.color = "#c44e52";
                curve.label = "Lorentzian fit";
                for (double f : data.x) {
                    curve.x.push_back(f);
                    curve.y.push_back(spectrometer::lorentzian(
                                          Frequency{f}, Current{fit.param("amplitude")},
                                          Frequency{fit.param("f_r")},
                                          Frequency{fit.param("gamma")},
                                          Current{fit.param("baseline")})
                                          .value());
                }
                series.push_back(curve);
            }
        } catch (const AnalysisError&) {
            // nothing to overlay on a peak-free trace
        }
        title = "ESR spectrum";
        x_label = "frequency (Hz)";
        y_label = "delta I (A)";
    } else if (header == "frequency_hz,power_dbm" ||
               header == "frequency_hz,power_dbm,clipped") {
        const auto table = io::read_power_table_csv(input);
        svg::Series data;
        data.x = table.freqs_hz;
        data.y = table.power_dbm;
        data.label = "source power";
        series.push_back(data);
        title = "Compensated source power";
        x_label = "frequency (Hz)";
        y_label = "P (dBm)";
    } else if (header == "frequency_hz,t_linear") {
        const auto model = io::read_transmission_csv(input);
        svg::Series data;
        data.x = model.table_freqs_hz();
        data.y = model.table_t_linear();
        data.label = "transmission";
        series.push_back(data);
        title = "Transmission";
        x_label = "frequency (Hz)";
        y_label = "|T| (linear)";
    } else if (header == "b_tesla,f_hz,sigma_hz") {
        const auto points = io::read_peaks_csv(input);
        svg::Series pts;
        pts.markers = true;
        for (const auto& p : points) {
            pts.x.push_back(p.b_tesla);
            pts.y.push_back(p.f_hz);
        }
        pts.label = "peaks";
        series.push_back(pts);
        title = "Zeeman peaks";
        x_label = "B (T)";
        y_label = "f (Hz)";
    } else {
        throw FormatError(input + ": unrecognized header '" + header + "'");
    }
    io::write_text(out, svg::render_plot(series, title, x_label, y_label));
    return 0;
}

int dispatch(int argc, char** argv) {
    CLI::App app{"ESR-STM spectrum simulator and analysis toolkit"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    std::string config_path, out, position = "lobe", band, line_path, input;
    std::vector<std::string> inputs;
    double b_field = 0.65;
    std::optional<double> target_vrf;
    std::optional<std::uint64_t> seed;

    auto* sim = app.add_subcommand("simulate-spectrum", "Synthesize one lock-in ESR spectrum");
    sim->add_option("--config", config_path, "configuration file");
    sim->add_option("--b-field", b_field, "set field in tesla")->required();
    sim->add_option("--position", position, "center | lobe | lobe:K | x,y (nm)");
    sim->add_option("--out", out, "output CSV")->required();
    sim->add_option("--seed", seed, "RNG seed");

    auto* cal = app.add_subcommand("calibrate", "Flatten the junction V_RF across a band");
    cal->add_option("--config", config_path, "configuration file");
    cal->add_option("--line", line_path, "transmission model (.csv table or config fragment)");
    cal->add_option("--target-vrf", target_vrf, "junction amplitude to hold (V)");
    cal->add_option("--band", band, "f_lo:f_hi in Hz");
    cal->add_option("--out", out, "power table CSV (flatness JSON written alongside)")
        ->required();
    cal->add_option("--seed", seed, "RNG seed");

    auto* fit = app.add_subcommand("fit-peak", "Lorentzian fit of one spectrum CSV");
    fit->add_option("spectrum", input, "spectrum CSV")->required();
    fit->add_option("--out", out, "result JSON")->required();

    auto* zee = app.add_subcommand("zeeman-fit", "g and f0 from spectra or a peak table");
    zee->add_option("inputs", inputs, "spectrum CSVs, or one b_tesla,f_hz,sigma_hz CSV")
        ->required();
    zee->add_option("--out", out, "result JSON")->required();

    auto* spa = app.add_subcommand("spatial-map", "Fit amplitude at the lobes and the center");
    spa->add_option("--config", config_path, "configuration file");
    spa->add_option("--out", out, "map CSV")->required();
    spa->add_option("--seed", seed, "RNG seed");

    auto* rt = app.add_subcommand("roundtrip", "Calibrate, measure, analyze, and report");
    rt->add_option("--config", config_path, "configuration file");
    rt->add_option("--seed", seed, "RNG seed");
    rt->add_option("--out", out, "report JSON")->required();

    auto* plt = app.add_subcommand("plot", "Render a CSV or report JSON as SVG");
    plt->add_option("input", input, "CSV or JSON file")->required();
    plt->add_option("--out", out, "output SVG")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2; // usage problems are exit 2
    }

    if (sim->parsed()) return cmd_simulate(config_path, b_field, position, out, seed);
    if (cal->parsed()) return cmd_calibrate(config_path, line_path, target_vrf, band, out, seed);
    if (fit->parsed()) return cmd_fit_peak(input, out);
    if (zee->parsed()) return cmd_zeeman_fit(inputs, out);
    if (spa->parsed()) return cmd_spatial_map(config_path, out, seed);
    if (rt->parsed()) return cmd_roundtrip(config_path, out, seed);
    if (plt->parsed()) return cmd_plot(input, out);
    return 2;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return dispatch(argc, argv);
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const AnalysisError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return 1;
    }
}
