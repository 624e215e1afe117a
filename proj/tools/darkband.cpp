#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "darkband/errors.hpp"
#include "darkband/experiments.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitResource = 4;

struct Overrides {
    std::optional<std::string> config;
    std::optional<std::string> replay;
    std::string out_dir = "out";
    std::vector<std::string> sets;
    std::map<std::string, std::string> flags;
};

void add_common(CLI::App* sub, Overrides& o) {
    sub->add_option("--config", o.config, "key = value parameter file");
    sub->add_option("--out-dir", o.out_dir, "output directory");
    sub->add_option("--set", o.sets, "override key=value")->allow_extra_args(false);
    const std::vector<std::pair<std::string, std::string>> named{
        {"--j", "j"},           {"--n-atoms", "n_atoms"},   {"--omega-over-g", "omega_over_g"},
        {"--m0", "m0"},         {"--eta0", "eta0"},         {"--t-min", "t_min"},
        {"--t-max", "t_max"},   {"--t-steps", "t_steps"},   {"--eta-steps", "eta_steps"},
        {"--norm", "norm"},     {"--workers", "workers"},   {"--n", "n"},
        {"--k", "k"},
    };
    for (const auto& [flag, key] : named) {
        auto* opt = sub->add_option_function<std::string>(
            flag, [&o, key = key](const std::string& v) { o.flags[key] = v; }, key);
        (void)opt;
    }
    sub->add_flag_function("--legacy-sign", [&o](std::int64_t) { o.flags["legacy_sign"] = "true"; },
                           "flip the sign of the quadratic term");
}

int run(const std::string& name, const Overrides& o) {
    darkband::RunConfig cfg = o.replay ? darkband::config_from_manifest(*o.replay)
                                       : darkband::RunConfig::defaults(name);
    if (o.replay && cfg.subcommand() != name)
        throw darkband::ConfigError("--replay: manifest is for '" + cfg.subcommand() + "', not '" + name + "'");
    if (o.config) darkband::load_config_file(*o.config, cfg);
    for (const auto& [key, value] : o.flags) cfg.set(key, value, "--" + key);
    for (const auto& kv : o.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw darkband::ConfigError("--set: expected key=value, got '" + kv + "'");
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1), "--set " + kv.substr(0, eq));
    }
    const auto res = darkband::run_experiment(cfg, o.out_dir);
    for (const auto& f : res.files) std::cout << o.out_dir << "/" << f << '\n';
    std::cout << o.out_dir << "/manifest.json\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dynamical phase transition toolkit for the collective spin model"};
    app.set_version_flag("--version", darkband::kToolVersion);
    app.require_subcommand(1);

    std::map<std::string, Overrides> opts;
    for (const auto& name : darkband::subcommands()) {
        auto* sub = app.add_subcommand(name, "run the " + name + " experiment");
        auto& o = opts[name];
        add_common(sub, o);
        sub->add_option("--replay", o.replay, "rerun the parameters recorded in a manifest.json");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    const std::string name = app.get_subcommands().front()->get_name();
    try {
        return run(name, opts[name]);
    } catch (const darkband::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const darkband::ResourceError& e) {
        std::cerr << "resource error: " << e.what() << '\n';
        return kExitResource;
    } catch (const darkband::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return kExitNumeric;
    }
}
