// CSV readers/writers: round-trip fidelity, golden formats, and the
// line-numbered error contract.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <string>
#include <vector>

#include "esrstm/errors.hpp"
#include "esrstm/io.hpp"
#include "esrstm/spectrometer.hpp"
#include "esrstm/spectrum.hpp"

using namespace esrstm;
namespace fs = std::filesystem;

namespace {

fs::path tmpdir() {
    const fs::path dir = fs::temp_directory_path() / "esrstm_io_tests";
    fs::create_directories(dir);
    return dir;
}

std::string p(const std::string& name) { return (tmpdir() / name).string(); }

Spectrum sample_spectrum() {
    spinham::SpinSystemConfig spin;
    spectrometer::JunctionConfig junction;
    spectrometer::MoleculeMap map;
    return spectrometer::synthesize_spectrum(spin, junction, map, map.lobe_position(0),
                                             MagneticField{0.65},
                                             spectrometer::FrequencyGrid{},
                                             spectrometer::NoiseModel{0.03e-12, 11});
}

} // namespace

TEST_CASE("spectrum CSV round-trips bit-for-bit") {
    const Spectrum s = sample_spectrum();
    const std::string path = p("sp.csv");
    io::write_spectrum_csv(path, s);
    const Spectrum r = io::read_spectrum_csv(path);

    REQUIRE(r.size() == s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        CHECK(r.freqs_hz()[i] == s.freqs_hz()[i]);
        CHECK(r.values_a()[i] == s.values_a()[i]);
    }
    CHECK(r.meta().b_set.value() == s.meta().b_set.value());
    CHECK(r.meta().x_nm == s.meta().x_nm);
    CHECK(r.meta().y_nm == s.meta().y_nm);
    CHECK(r.meta().v_dc.value() == s.meta().v_dc.value());
    CHECK(r.meta().i_set.value() == s.meta().i_set.value());
    CHECK(r.meta().v_rf.value() == s.meta().v_rf.value());
    CHECK(r.meta().seed == s.meta().seed);

    SUBCASE("a second write is byte-identical") {
        io::write_spectrum_csv(p("sp2.csv"), r);
        CHECK(io::read_text(p("sp2.csv")) == io::read_text(path));
    }
}

TEST_CASE("golden spectrum format is frozen") {
    SpectrumMeta meta;
    meta.b_set = MagneticField{0.65};
    meta.position = "lobe";
    meta.x_nm = 0.45;
    meta.y_nm = 0.0;
    meta.v_dc = Voltage{-0.1};
    meta.i_set = Current{1e-11};
    meta.v_rf = Voltage{0.01};
    meta.seed = 7;
    const Spectrum s({1e9, 2e9}, {0.0, 1e-12}, meta);
    io::write_spectrum_csv(p("golden.csv"), s);
    const std::string expected = "# b_set_t = 0.65\n"
                                 "# position = lobe\n"
                                 "# x_nm = 0.45\n"
                                 "# y_nm = 0\n"
                                 "# v_dc_v = -0.1\n"
                                 "# i_set_a = 1e-11\n"
                                 "# v_rf_v = 0.01\n"
                                 "# seed = 7\n"
                                 "frequency_hz,delta_i_a\n"
                                 "1e+09,0\n"
                                 "2e+09,1e-12\n";
    CHECK(io::read_text(p("golden.csv")) == expected);
    // And the frozen bytes parse back unchanged.
    io::write_text(p("golden2.csv"), expected);
    const Spectrum r = io::read_spectrum_csv(p("golden2.csv"));
    CHECK(r.freqs_hz()[1] == 2e9);
    CHECK(r.values_a()[1] == 1e-12);
    CHECK(r.meta().seed == 7);
}

TEST_CASE("spectrum reader tolerates CRLF, comments, unknown metadata") {
    const std::string body = "# b_set_t = 0.5\r\n"
                             "# future_key = 12\r\n"
                             "# a free-form comment line\r\n"
                             "frequency_hz,delta_i_a\r\n"
                             "1e+09,0\r\n"
                             "2e+09,5e-13\r\n";
    io::write_text(p("crlf.csv"), body);
    const Spectrum r = io::read_spectrum_csv(p("crlf.csv"));
    CHECK(r.size() == 2);
    CHECK(r.meta().b_set.value() == 0.5);
    CHECK(r.values_a()[1] == 5e-13);
}

TEST_CASE("spectrum reader names the offending line") {
    SUBCASE("bad numeric cell") {
        io::write_text(p("bad1.csv"), "frequency_hz,delta_i_a\n1e9,0\n2e9,abc\n");
        CHECK_THROWS_WITH_AS(io::read_spectrum_csv(p("bad1.csv")),
                             doctest::Contains("line 3"), FormatError);
    }
    SUBCASE("wrong column count") {
        io::write_text(p("bad2.csv"), "frequency_hz,delta_i_a\n1e9,0,9\n2e9,0\n");
        CHECK_THROWS_WITH_AS(io::read_spectrum_csv(p("bad2.csv")),
                             doctest::Contains("line 2"), FormatError);
    }
    SUBCASE("wrong header") {
        io::write_text(p("bad3.csv"), "freq,di\n1e9,0\n");
        CHECK_THROWS_WITH_AS(io::read_spectrum_csv(p("bad3.csv")),
                             doctest::Contains("line 1"), FormatError);
    }
    SUBCASE("non-monotone grid is a format error, not a crash") {
        io::write_text(p("bad4.csv"), "frequency_hz,delta_i_a\n2e9,0\n1e9,0\n");
        CHECK_THROWS_AS(io::read_spectrum_csv(p("bad4.csv")), FormatError);
    }
    SUBCASE("too few rows") {
        io::write_text(p("bad5.csv"), "frequency_hz,delta_i_a\n1e9,0\n");
        CHECK_THROWS_AS(io::read_spectrum_csv(p("bad5.csv")), FormatError);
    }
    SUBCASE("missing file is an I/O error, not a format error") {
        bool io_error = false, format_error = false;
        try {
            io::read_spectrum_csv(p("nonexistent.csv"));
        } catch (const FormatError&) {
            format_error = true;
        } catch (const IoError&) {
            io_error = true;
        }
        CHECK(io_error);
        CHECK_FALSE(format_error);
    }
}

TEST_CASE("power table CSV round-trips; clipped column only when needed") {
    rfchain::PowerTable t;
    t.freqs_hz = {18e9, 18.5e9, 19e9};
    t.power_dbm = {-3.25, -1.5, 0.75};
    t.clipped = {0, 0, 0};
    t.target_vrf = Voltage{0.005};
    t.band_lo = Frequency{18e9};
    t.band_hi = Frequency{19e9};

    SUBCASE("no clipping: two columns") {
        io::write_power_table_csv(p("pt.csv"), t);
        const std::string text = io::read_text(p("pt.csv"));
        CHECK(text.find("frequency_hz,power_dbm\n") != std::string::npos);
        CHECK(text.find("clipped") == std::string::npos);
        const auto r = io::read_power_table_csv(p("pt.csv"));
        CHECK(r.freqs_hz == t.freqs_hz);
        CHECK(r.power_dbm == t.power_dbm);
        CHECK_FALSE(r.any_clipped());
        CHECK(r.target_vrf.value() == 0.005);
        CHECK(r.band_lo.value() == 18e9);
        CHECK(r.band_hi.value() == 19e9);
    }
    SUBCASE("clipping: flag column appears and survives") {
        t.clipped = {0, 1, 0};
        io::write_power_table_csv(p("ptc.csv"), t);
        const std::string text = io::read_text(p("ptc.csv"));
        CHECK(text.find("frequency_hz,power_dbm,clipped\n") != std::string::npos);
        const auto r = io::read_power_table_csv(p("ptc.csv"));
        CHECK(r.any_clipped());
        CHECK(r.clipped == std::vector<unsigned char>{0, 1, 0});
    }
    SUBCASE("malformed row is line-numbered") {
        io::write_text(p("ptb.csv"), "frequency_hz,power_dbm\n18e9\n");
        CHECK_THROWS_WITH_AS(io::read_power_table_csv(p("ptb.csv")),
                             doctest::Contains("line 2"), FormatError);
    }
}

TEST_CASE("transmission CSV round-trips into an interpolating model") {
    const std::vector<double> f = {18e9, 20e9, 25e9};
    const std::vector<double> tl = {0.9, 0.5, 0.7};
    io::write_transmission_csv(p("tr.csv"), f, tl);
    const auto model = io::read_transmission_csv(p("tr.csv"));
    REQUIRE(model.is_tabulated());
    CHECK(model.table_freqs_hz() == f);
    CHECK(model.table_t_linear() == tl);
    CHECK(model.linear(Frequency{20e9}) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(model.linear(Frequency{19e9}) == doctest::Approx(0.7).epsilon(1e-12));
    CHECK_THROWS_AS(model.linear(Frequency{30e9}), DomainError);

    SUBCASE("unsorted table is rejected as a format error") {
        io::write_text(p("trb.csv"), "frequency_hz,t_linear\n2e10,0.5\n1e10,0.9\n");
        CHECK_THROWS_AS(io::read_transmission_csv(p("trb.csv")), FormatError);
    }
    SUBCASE("mismatched arrays refuse to serialize") {
        CHECK_THROWS_AS(io::write_transmission_csv(p("trm.csv"), {1e9}, {0.5, 0.6}),
                        DomainError);
    }
}

TEST_CASE("peaks CSV reads b/f/sigma rows") {
    io::write_text(p("pk.csv"), "# fitted resonances\n"
                                "b_tesla,f_hz,sigma_hz\n"
                                "0.65,1.8539e10,1e6\n"
                                "0.75,2.1115e10,1.5e6\n");
    const auto pts = io::read_peaks_csv(p("pk.csv"));
    REQUIRE(pts.size() == 2);
    CHECK(pts[0].b_tesla == 0.65);
    CHECK(pts[0].f_hz == 1.8539e10);
    CHECK(pts[1].sigma_hz == 1.5e6);

    io::write_text(p("pkb.csv"), "b_tesla,f_hz,sigma_hz\n0.65,1.8e10\n");
    CHECK_THROWS_WITH_AS(io::read_peaks_csv(p("pkb.csv")), doctest::Contains("line 2"),
                         FormatError);
}

TEST_CASE("writers are atomic: no .tmp residue, clean overwrite") {
    const std::string path = p("atomic.txt");
    io::write_text(path, "first\n");
    io::write_text(path, "second\n");
    CHECK(io::read_text(path) == "second\n");
    CHECK_FALSE(fs::exists(path + ".tmp"));

    CHECK_THROWS_AS(io::write_text((tmpdir() / "no_such_dir" / "x.txt").string(), "y"),
                    IoError);
}
