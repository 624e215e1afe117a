#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "darkband/dicke.hpp"
#include "darkband/errors.hpp"
#include "darkband/experiments.hpp"
#include "darkband/io.hpp"
#include "doctest.h"

using namespace darkband;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("darkband_test_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("format_double round-trips and spells non-finite values") {
    for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 3.667516331672668}) {
        CHECK(std::stod(format_double(x)) == x);
    }
    CHECK(format_double(-0.0) == "0");
    CHECK(format_double(std::nan("")) == "nan");
    CHECK(format_double(-INFINITY) == "-inf");
}

TEST_CASE("CSV writer and reader agree") {
    const fs::path dir = scratch("csv");
    fs::create_directories(dir);
    {
        CsvWriter w(dir / "a.csv", {"x", "n", "tag"});
        w.row({1.5, 7LL, std::string("exact")});
        w.row({std::nan(""), -2LL, std::string("branch1")});
        CHECK_THROWS_AS(w.row({1.0}), ConfigError);
    }
    const auto t = read_csv(dir / "a.csv");
    REQUIRE(t.rows.size() == 2);
    CHECK(t.value(0, "x") == 1.5);
    CHECK(t.value(1, "n") == -2);
    CHECK(std::isnan(t.value(1, "x")));
    CHECK(t.rows[1][t.column("tag")] == "branch1");
    CHECK_THROWS_AS(t.column("missing"), ConfigError);
    CHECK_THROWS_AS(CsvWriter(dir / "no/such/dir/b.csv", {"x"}), ResourceError);
}

TEST_CASE("config values are validated per key") {
    auto c = RunConfig::defaults("loschmidt");
    CHECK(c.number("j") == 80);
    CHECK(RunConfig::defaults("darkband").number("j") == 350);
    CHECK_THROWS_AS(RunConfig::defaults("nope"), ConfigError);
    CHECK_THROWS_AS(c.set("bogus", "1"), ConfigError);
    CHECK_THROWS_AS(c.set("t_steps", "0"), ConfigError);
    CHECK_THROWS_AS(c.set("t_steps", "2.5"), ConfigError);
    CHECK_THROWS_AS(c.set("norm", "per-x"), ConfigError);
    CHECK_THROWS_AS(c.set("legacy_sign", "maybe"), ConfigError);
    CHECK(c.number("t_steps") == 501);  // failed sets leave the old value
    c.set("m0", "auto");
    c.set("m0", "12");
    CHECK(c.number("m0") == 12);
}

TEST_CASE("config file diagnostics carry the line number") {
    const fs::path dir = scratch("cfg");
    fs::create_directories(dir);
    std::ofstream(dir / "run.cfg") << "# comment\nj = 20\n\nt-steps = 11\nomega_over_g = fast\n";
    auto c = RunConfig::defaults("loschmidt");
    try {
        load_config_file(dir / "run.cfg", c);
        FAIL("expected a ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("run.cfg:5") != std::string::npos);
    }
    CHECK(c.number("j") == 20);
    CHECK(c.integer("t_steps") == 11);
    std::ofstream(dir / "bad.cfg") << "j 20\n";
    CHECK_THROWS_AS(load_config_file(dir / "bad.cfg", c), ConfigError);
    CHECK_THROWS_AS(load_config_file(dir / "missing.cfg", c), ConfigError);
}

TEST_CASE("loschmidt run starts at zero rate and replays byte-identically") {
    auto c = RunConfig::defaults("loschmidt");
    c.set("j", "20");
    c.set("t_steps", "21");
    const fs::path a = scratch("losch_a"), b = scratch("losch_b");
    const auto res = run_experiment(c, a);
    REQUIRE(res.files == std::vector<std::string>{"loschmidt.csv"});
    const auto t = read_csv(a / "loschmidt.csv");
    REQUIRE(t.rows.size() == 21);
    CHECK(t.value(0, "t") == 0.0);
    CHECK(t.value(0, "L") == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(t.value(0, "r")) < 1e-12);
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        CHECK(t.value(i, "L") <= 1.0 + 1e-12);
        CHECK(t.value(i, "r") == doctest::Approx(-std::log(std::max(t.value(i, "L"), 1e-300)) / 20.0).epsilon(1e-9));
    }

    const auto replay = config_from_manifest(a / "manifest.json");
    CHECK(replay.values() == c.values());
    run_experiment(replay, b);
    CHECK(slurp(a / "loschmidt.csv") == slurp(b / "loschmidt.csv"));
}

TEST_CASE("explicit m0 and per-N normalisation are honoured") {
    auto c = RunConfig::defaults("loschmidt");
    c.set("j", "10");
    c.set("t_steps", "5");
    c.set("m0", "4");
    c.set("norm", "per-N");
    const fs::path dir = scratch("losch_n");
    run_experiment(c, dir);
    const auto t = read_csv(dir / "loschmidt.csv");
    for (std::size_t i = 1; i < t.rows.size(); ++i)
        CHECK(t.value(i, "r") == doctest::Approx(-std::log(t.value(i, "L")) / 20.0).epsilon(1e-9));
}

TEST_CASE("rainbow run reports both extremal angles") {
    auto c = RunConfig::defaults("rainbow");
    c.set("h_steps", "2001");
    c.set("theta_steps", "51");
    const fs::path dir = scratch("rainbow");
    run_experiment(c, dir);
    const auto io = read_csv(dir / "rainbow_io.csv");
    double max1 = -1e9, min2 = 1e9;
    for (std::size_t i = 0; i < io.rows.size(); ++i) {
        const double th = io.value(i, "theta_deg");
        if (io.value(i, "order") == 1) max1 = std::max(max1, th);
        else min2 = std::min(min2, th);
    }
    CHECK(max1 == doctest::Approx(42.03).epsilon(1e-3));
    CHECK(min2 == doctest::Approx(50.98).epsilon(1e-3));
    const auto db = read_csv(dir / "darkband.csv");
    CHECK(db.rows.size() == 51);
}

TEST_CASE("darkband run locates the kink") {
    auto c = RunConfig::defaults("darkband");
    c.set("j", "40");
    c.set("t_steps", "71");
    const fs::path dir = scratch("darkband");
    const auto res = run_experiment(c, dir);
    CHECK(res.files.size() == 2);
    const auto t = read_csv(dir / "rate_semiclassical.csv");
    REQUIRE(t.rows.size() == 71);
    double best_t = 0, best = -1;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const double r = t.value(i, "r_min");
        if (std::isfinite(r) && r > best) best = r, best_t = t.value(i, "t");
    }
    CHECK(std::abs(best_t - 3.7) < 0.15);
    const auto s = read_csv(dir / "saddles.csv");
    CHECK(s.rows.size() > 0);
}

TEST_CASE("every subcommand rejects an invalid model") {
    for (const auto& name : subcommands()) {
        auto c = RunConfig::defaults(name);
        c.set("omega_over_g", "-1");
        c.set("n", "3");
        CHECK_THROWS_AS(run_experiment(c, scratch("invalid_" + name)), ConfigError);
    }
}
