#include "darkband/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>

#include <json.hpp>

#include "darkband/bipartite.hpp"
#include "darkband/catastrophe.hpp"
#include "darkband/classical.hpp"
#include "darkband/complexmech.hpp"
#include "darkband/dicke.hpp"
#include "darkband/errors.hpp"
#include "darkband/io.hpp"
#include "darkband/scan.hpp"
#include "darkband/wkb.hpp"

namespace darkband {

namespace {

namespace fs = std::filesystem;
constexpr double kDeg = 180.0 / std::numbers::pi;

const std::map<std::string, std::string>& base_defaults() {
    static const std::map<std::string, std::string> d{
        {"j", "80"},         {"n_atoms", "none"},  {"omega_over_g", "1"},
        {"m0", "auto"},      {"eta0", "0.6"},       {"t_min", "0"},
        {"t_max", "5"},      {"t_steps", "501"},    {"eta_min", "-0.95"},
        {"eta_max", "0.95"}, {"eta_steps", "301"},  {"eps_steps", "400"},
        {"norm", "per-j"},   {"legacy_sign", "false"}, {"workers", "1"},
        {"n_traj", "128"},   {"fold_traj", "2048"}, {"n", "1.3333333333333333"},
        {"k", "100"},        {"D1", "1"},           {"D2", "1"},
        {"h_steps", "1001"}, {"theta_steps", "401"},
    };
    return d;
}

std::vector<double> linspace(double a, double b, int n) {
    if (n < 2) throw ConfigError("grid needs at least 2 points");
    std::vector<double> g(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = a + (b - a) * i / (n - 1);
    return g;
}

std::vector<double> time_grid(const RunConfig& c) {
    const double lo = c.number("t_min"), hi = c.number("t_max");
    if (!(lo >= 0 && hi > lo)) throw ConfigError("t_min/t_max: need 0 <= t_min < t_max");
    return linspace(lo, hi, c.integer("t_steps"));
}

struct Physics {
    double G = 1.0;
    double Omega = 1.0;
};

Physics physics(const RunConfig& c) {
    const double w = c.number("omega_over_g");
    if (!(w > 0)) throw ConfigError("omega_over_g: must be positive");
    return {1.0, w};
}

DickeSpace spin_space(const RunConfig& c) {
    if (c.text("n_atoms") != "none") {
        const int n = c.integer("n_atoms");
        if (n < 1) throw ConfigError("n_atoms: must be positive");
        return DickeSpace(n);
    }
    const double j = c.number("j");
    if (!(j >= 0.5) || std::abs(2 * j - std::round(2 * j)) > 1e-12)
        throw ConfigError("j: must be a positive integer or half-integer");
    return DickeSpace::from_j(j);
}

double initial_m(const RunConfig& c, const DickeSpace& s) {
    if (c.text("m0") == "auto") return default_m0(s, c.number("eta0"));
    return c.number("m0");
}

// Latitude for the semiclassical subcommands; an explicit m0 overrides eta0.
double initial_eta(const RunConfig& c) {
    if (c.text("m0") == "auto") return c.number("eta0");
    return c.number("m0") / spin_space(c).j();
}

QuenchConfig quench(const RunConfig& c) {
    const Physics p = physics(c);
    QuenchConfig q;
    q.G = p.G;
    q.Omega = p.Omega;
    q.space = spin_space(c);
    q.m0 = initial_m(c, q.space);
    q.times = time_grid(c);
    const std::string norm = c.text("norm");
    if (norm == "per-j") q.norm = RateNorm::PerJ;
    else if (norm == "per-N") q.norm = RateNorm::PerN;
    else throw ConfigError("norm: expected per-j or per-N, got '" + norm + "'");
    q.workers = c.integer("workers");
    q.validate();
    return q;
}

using Files = std::vector<std::string>;

void run_fockmap(const RunConfig& c, const fs::path& dir, Files& files, nlohmann::json&) {
    const QuenchConfig q = quench(c);
    const Eigen::MatrixXd map = fock_map(q);
    CsvWriter w(dir / "fockmap.csv", {"t", "m", "abs_amp"});
    for (Eigen::Index k = 0; k < map.cols(); ++k)
        for (Eigen::Index i = 0; i < map.rows(); ++i)
            w.row({q.times[static_cast<std::size_t>(k)], q.space.m_of(i), map(i, k)});
    files.push_back("fockmap.csv");
}

void run_loschmidt(const RunConfig& c, const fs::path& dir, Files& files, nlohmann::json& notes) {
    const QuenchConfig q = quench(c);
    const auto echo = loschmidt(q);
    const auto rate = rate_function(echo, q.space, q.norm);
    CsvWriter w(dir / "loschmidt.csv", {"t", "L", "r"});
    int under = 0;
    for (std::size_t i = 0; i < echo.size(); ++i) {
        w.row({echo[i].t, echo[i].L, rate[i].r});
        under += rate[i].underflow;
    }
    notes["underflow_samples"] = under;
    files.push_back("loschmidt.csv");
}

void run_classical(const RunConfig& c, const fs::path& dir, Files& files, nlohmann::json& notes) {
    const Physics p = physics(c);
    const ClassicalModel m{p.G, p.Omega, c.flag("legacy_sign")};
    const double eta0 = initial_eta(c);
    const auto times = time_grid(c);
    const int workers = c.integer("workers");
    const auto ens = ensemble(eta0, static_cast<std::size_t>(c.integer("n_traj")), times, m, workers);
    CsvWriter w(dir / "ensemble.csv", {"t", "phi0", "phi", "eta"});
    for (Eigen::Index k = 0; k < ens.eta.rows(); ++k)
        for (Eigen::Index i = 0; i < ens.eta.cols(); ++i)
            w.row({times[static_cast<std::size_t>(k)], ens.phi0[static_cast<std::size_t>(i)], ens.phi(k, i), ens.eta(k, i)});
    files.push_back("ensemble.csv");

    const auto dense = ensemble(eta0, static_cast<std::size_t>(c.integer("fold_traj")), times, m, workers);
    CsvWriter f(dir / "folds.csv", {"t", "eta_star", "is_cusp"});
    nlohmann::json skipped = nlohmann::json::array();
    for (Eigen::Index k = 0; k < dense.eta.rows(); ++k) {
        FoldSet fs;
        try {
            fs = detect_folds(dense.phi0, dense.eta.row(k).transpose());
        } catch (const NumericError&) {
            skipped.push_back(times[static_cast<std::size_t>(k)]);
            continue;
        }
        for (const auto& fold : fs.folds)
            f.row({times[static_cast<std::size_t>(k)], fold.eta_star, static_cast<long long>(fold.is_cusp)});
    }
    notes["fold_frames_unresolved"] = skipped;
    files.push_back("folds.csv");
}

void run_wkb(const RunConfig& c, const fs::path& dir, Files& files, nlohmann::json& notes) {
    const Physics p = physics(c);
    const double eta0 = initial_eta(c);
    const auto win = allowed_window(eta0, p.G, p.Omega);
    const int n = c.integer("eps_steps");
    CsvWriter te(dir / "TE.csv", {"branch", "eps", "T"});
    for (const auto& b : {ActionBranch::first(eta0), ActionBranch::second(eta0)}) {
        for (int i = 1; i < n; ++i) {
            const double eps = win.lo + (win.hi - win.lo) * i / n;
            te.row({static_cast<long long>(b.k), eps, return_time(eps, b, p.G, p.Omega)});
        }
        const auto ct = caustic_time(b, p.G, p.Omega);
        notes["caustic_t" + std::to_string(b.k)] = ct.t;
    }
    files.push_back("TE.csv");

    const DickeSpace s = spin_space(c);
    const auto levels = bohr_sommerfeld(s, p.G, p.Omega);
    const auto es = diagonalize(build_hamiltonian(s, p.G, p.Omega));
    const auto range = spectrum_range(p.G, p.Omega);
    CsvWriter bs(dir / "bs_levels.csv", {"n", "eps_wkb", "eps_exact", "rel_err"});
    for (const auto& l : levels) {
        const double exact = es.energies(l.n) / s.j();
        bs.row({static_cast<long long>(l.n), l.eps, exact, std::abs(l.eps - exact) / (range.hi - range.lo)});
    }
    files.push_back("bs_levels.csv");
}

void run_darkband(const RunConfig& c, const fs::path& dir, Files& files, nlohmann::json& notes) {
    const Physics p = physics(c);
    const double eta0 = initial_eta(c);
    const double j = spin_space(c).j();
    const auto times = time_grid(c);
    const auto rc = asymptotic_rate(times, eta0, p.G, p.Omega);
    const auto sc = semiclassical_loschmidt(j, times, eta0, p.G, p.Omega);
    CsvWriter w(dir / "rate_semiclassical.csv", {"t", "r0", "r1", "r_min", "L_finite_j"});
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double nan = std::nan("");
        w.row({times[i], rc.valid[i] ? rc.r0[i] : nan, rc.valid[i] ? rc.r1[i] : nan, rc.valid[i] ? rc.r[i] : nan, sc[i].L});
    }
    files.push_back("rate_semiclassical.csv");
    if (rc.kink_t) notes["kink_t"] = *rc.kink_t;

    CsvWriter s(dir / "saddles.csv", {"branch", "t", "re_phi0", "im_phi0", "re_S", "im_S", "residual"});
    for (const auto& b : {ActionBranch::first(eta0), ActionBranch::second(eta0)}) {
        const auto track = continue_branch(b, times, eta0, p.G, p.Omega);
        for (const auto& sol : track.solutions)
            if (sol.converged)
                s.row({static_cast<long long>(b.k), sol.t, sol.phi0.real(), sol.phi0.imag(), sol.action.real(),
                       sol.action.imag(), sol.residual});
    }
    files.push_back("saddles.csv");
}

void run_bipartite(const RunConfig& c, const fs::path& dir, Files& files, nlohmann::json&) {
    const Physics p = physics(c);
    BipartiteConfig b;
    b.G = p.G;
    b.Omega = p.Omega;
    b.n_per_side = c.text("n_atoms") == "none" ? 20 : c.integer("n_atoms");
    const DickeSpace side(b.n_per_side);
    b.m0 = c.text("m0") == "auto" ? default_m0(side, c.number("eta0")) : c.number("m0");
    b.times = time_grid(c);
    b.workers = c.integer("workers");
    const auto rows = bipartite_rates(b);
    CsvWriter w(dir / "bipartite_rates.csv", {"t", "L", "r", "L_plus", "L_minus", "r_plus", "r_minus", "p_plus"});
    for (const auto& e : rows) w.row({e.t, e.L, e.r, e.L_plus, e.L_minus, e.r_plus, e.r_minus, e.p_plus});
    files.push_back("bipartite_rates.csv");
}

void run_switchline(const RunConfig& c, const fs::path& dir, Files& files, nlohmann::json& notes) {
    const Physics p = physics(c);
    const double eta0 = initial_eta(c);
    const auto times = time_grid(c);
    const auto etas = linspace(c.number("eta_min"), c.number("eta_max"), c.integer("eta_steps"));
    const int workers = c.integer("workers");
    const auto r0 = branch_rate_surface(ActionBranch::first(eta0), times, etas, p.G, p.Omega, workers);
    const auto r1 = branch_rate_surface(ActionBranch::second(eta0), times, etas, p.G, p.Omega, workers);
    QuenchConfig q = quench(c);
    const auto exact = rate_surface_exact(q);
    CsvWriter w(dir / "surface.csv", {"t", "eta", "r", "source"});
    for (const RateSurface* s : {&exact, &r0, &r1})
        for (std::size_t i = 0; i < s->etas.size(); ++i)
            for (std::size_t k = 0; k < s->times.size(); ++k)
                w.row({s->times[k], s->etas[i], s->r(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)),
                       to_string(s->source)});
    files.push_back("surface.csv");

    CsvWriter l(dir / "switchline.csv", {"t", "eta"});
    for (const auto& pt : switching_line(r0, r1)) l.row({pt.t, pt.eta});
    files.push_back("switchline.csv");

    const auto d = locate_dpt(eta0, p.G, p.Omega);
    CsvWriter dp(dir / "dpt.csv", {"t_c", "r_at_tc"});
    if (d.found) dp.row({d.t_c, d.r_at_tc});
    notes["dpt_found"] = d.found;
    files.push_back("dpt.csv");
}

void run_rainbow(const RunConfig& c, const fs::path& dir, Files& files, nlohmann::json& notes) {
    const double n = c.number("n");
    const auto params = RainbowParams::for_index(n, c.number("k"), c.number("D1"), c.number("D2"));
    CsvWriter io(dir / "rainbow_io.csv", {"order", "h", "theta_deg"});
    const auto hs = linspace(0.0, 1.0, c.integer("h_steps"));
    for (int order : {1, 2})
        for (double h : hs) io.row({static_cast<long long>(order), h, raindrop_deflection(h, n, order) * kDeg});
    files.push_back("rainbow_io.csv");
    notes["theta1_deg"] = params.theta1 * kDeg;
    notes["theta2_deg"] = params.theta2 * kDeg;
    notes["theta_star_deg"] = dark_band_switch_angle(params) * kDeg;

    CsvWriter db(dir / "darkband.csv", {"theta_deg", "I", "r"});
    for (double th : linspace(params.theta1, params.theta2, c.integer("theta_steps")))
        db.row({th * kDeg, dark_band_intensity(th, params), dark_band_rate(th, params).r});
    files.push_back("darkband.csv");
}

using Runner = void (*)(const RunConfig&, const fs::path&, Files&, nlohmann::json&);

const std::map<std::string, Runner>& runners() {
    static const std::map<std::string, Runner> r{
        {"fockmap", run_fockmap},     {"loschmidt", run_loschmidt}, {"classical", run_classical},
        {"wkb", run_wkb},             {"darkband", run_darkband},   {"bipartite", run_bipartite},
        {"switchline", run_switchline}, {"rainbow", run_rainbow},
    };
    return r;
}

}  // namespace

const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> s{"fockmap", "loschmidt", "classical", "wkb",
                                            "darkband", "bipartite", "switchline", "rainbow"};
    return s;
}

RunConfig RunConfig::defaults(const std::string& subcommand) {
    if (!runners().count(subcommand)) throw ConfigError("unknown subcommand '" + subcommand + "'");
    RunConfig c;
    c.subcommand_ = subcommand;
    c.values_ = base_defaults();
    if (subcommand == "wkb") c.values_["j"] = "40";
    if (subcommand == "darkband") {
        c.values_["j"] = "350";
        c.values_["t_min"] = "1";
        c.values_["t_max"] = "4.5";
        c.values_["t_steps"] = "351";
    }
    if (subcommand == "classical") c.values_["t_steps"] = "101";
    if (subcommand == "switchline") {
        c.values_["t_min"] = "2";
        c.values_["t_max"] = "4.5";
        c.values_["t_steps"] = "400";
    }
    return c;
}

void RunConfig::set(const std::string& key, const std::string& value, const std::string& where) {
    const std::string at = where.empty() ? key : where;
    if (!values_.count(key)) throw ConfigError(at + ": unknown key '" + key + "'");
    if (value.empty()) throw ConfigError(at + ": empty value for '" + key + "'");
    const std::string old = values_[key];
    values_[key] = value;
    try {
        // Type-check by key so errors point at the offending line.
        static const std::set<std::string> text_keys{"m0", "n_atoms", "norm", "legacy_sign"};
        static const std::set<std::string> int_keys{"t_steps", "eta_steps", "eps_steps", "workers",
                                                    "n_traj", "fold_traj", "h_steps", "theta_steps"};
        if (int_keys.count(key)) {
            if (integer(key) < 1) throw ConfigError("must be a positive integer");
        } else if (key == "legacy_sign") {
            flag(key);
        } else if (key == "norm") {
            if (value != "per-j" && value != "per-N") throw ConfigError("expected per-j or per-N");
        } else if (key == "m0") {
            if (value != "auto") number(key);
        } else if (key == "n_atoms") {
            if (value != "none" && integer(key) < 1) throw ConfigError("must be a positive integer");
        } else if (key == "eta0") {
            if (std::abs(number(key)) >= 1) throw ConfigError("must lie in (-1, 1)");
        } else if (!text_keys.count(key)) {
            number(key);
        }
    } catch (const ConfigError& e) {
        values_[key] = old;
        throw ConfigError(at + ": invalid value '" + value + "' for '" + key + "': " + e.what());
    }
}

bool RunConfig::has(const std::string& key) const { return values_.count(key) > 0; }

std::string RunConfig::text(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown key '" + key + "'");
    return it->second;
}

double RunConfig::number(const std::string& key) const {
    const std::string v = text(key);
    std::size_t used = 0;
    double x = 0;
    try {
        x = std::stod(v, &used);
    } catch (const std::exception&) {
        throw ConfigError(key + ": '" + v + "' is not a number");
    }
    if (used != v.size() || !std::isfinite(x)) throw ConfigError(key + ": '" + v + "' is not a finite number");
    return x;
}

int RunConfig::integer(const std::string& key) const {
    const double x = number(key);
    if (x != std::round(x) || std::abs(x) > 1e9) throw ConfigError(key + ": '" + text(key) + "' is not an integer");
    return static_cast<int>(x);
}

bool RunConfig::flag(const std::string& key) const {
    const std::string v = text(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(key + ": '" + v + "' is not a boolean");
}

void load_config_file(const fs::path& path, RunConfig& cfg) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path.string() + ": cannot open config file");
    auto trim = [](std::string s) {
        const auto a = s.find_first_not_of(" \t\r");
        const auto b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    std::string line;
    for (int no = 1; std::getline(in, line); ++no) {
        const std::string where = path.filename().string() + ":" + std::to_string(no);
        line = trim(line.substr(0, line.find('#')));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::replace(key.begin(), key.end(), '-', '_');
        cfg.set(key, trim(line.substr(eq + 1)), where);
    }
}

RunResult run_experiment(const RunConfig& cfg, const fs::path& out_dir) {
    const auto start = std::chrono::steady_clock::now();
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw ResourceError("cannot create " + out_dir.string() + ": " + ec.message());
    RunResult res;
    nlohmann::json notes = nlohmann::json::object();
    runners().at(cfg.subcommand())(cfg, out_dir, res.files, notes);
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    nlohmann::json m;
    m["subcommand"] = cfg.subcommand();
    m["parameters"] = cfg.values();
    m["out_dir"] = out_dir.string();
    m["version"] = kToolVersion;
    m["duration_s"] = res.seconds;
    m["files"] = res.files;
    m["notes"] = notes;
    std::ofstream out(out_dir / "manifest.json");
    out << m.dump(2) << '\n';
    if (!out) throw ResourceError("cannot write manifest.json");
    return res;
}

RunConfig config_from_manifest(const fs::path& manifest) {
    std::ifstream in(manifest);
    if (!in) throw ConfigError(manifest.string() + ": cannot open manifest");
    nlohmann::json m;
    try {
        in >> m;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(manifest.string() + ": " + e.what());
    }
    if (!m.contains("subcommand") || !m.contains("parameters"))
        throw ConfigError(manifest.string() + ": missing subcommand or parameters");
    RunConfig c = RunConfig::defaults(m["subcommand"].get<std::string>());
    for (const auto& [k, v] : m["parameters"].items()) c.set(k, v.get<std::string>(), manifest.filename().string() + ":" + k);
    return c;
}

}  // namespace darkband
