#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace darkband {

inline constexpr const char* kToolVersion = "1.0.0";

const std::vector<std::string>& subcommands();

// Flat key/value parameter set. Keys are fixed; values are kept as text so a
// manifest replays exactly what was run.
class RunConfig {
public:
    static RunConfig defaults(const std::string& subcommand);

    const std::string& subcommand() const noexcept { return subcommand_; }
    const std::map<std::string, std::string>& values() const noexcept { return values_; }

    // `where` prefixes diagnostics, e.g. "run.cfg:3" or "--j".
    void set(const std::string& key, const std::string& value, const std::string& where = "");
    bool has(const std::string& key) const;

    std::string text(const std::string& key) const;
    double number(const std::string& key) const;
    int integer(const std::string& key) const;
    bool flag(const std::string& key) const;

private:
    std::string subcommand_;
    std::map<std::string, std::string> values_;
};

// Reads `key = value` lines into cfg; '#' starts a comment.
void load_config_file(const std::filesystem::path& path, RunConfig& cfg);

struct RunResult {
    std::vector<std::string> files;
    double seconds = 0.0;
};

// Writes the subcommand's CSV files and manifest.json into out_dir.
RunResult run_experiment(const RunConfig& cfg, const std::filesystem::path& out_dir);

// Parameter set recorded in a manifest.
RunConfig config_from_manifest(const std::filesystem::path& manifest);

}  // namespace darkband
