#pragma once

// Scenario files: a nested YAML document describing population, economy,
// servicer, product variants, learner, run protocol and output. Loading
// collects every violation instead of stopping at the first one.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mabm/engine.hpp"

namespace YAML {
class Node;
}

namespace mabm {

struct RunSettings {
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    int train_episodes = 60;
    int train_months = 120;
    int eval_months = 24;
    std::vector<double> shock_grid{0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
    /// 0 = one worker per hardware thread.
    int workers = 0;
    /// Directory of learner snapshots from an earlier run; empty = train.
    std::string snapshot_dir;
};

struct OutputSettings {
    std::string directory;
    std::vector<std::string> formats{"csv"};
};

struct ScenarioConfig {
    int schema_version = 1;
    std::string population_file;  // as written; empty = built-in tables
    int n_borrowers = 1000;
    DistributionConfig population = default_distribution_config();
    double h0 = 1.0;
    HpiPath hpi;
    ShockProcess shocks;
    ServicerConfig servicer;
    std::vector<ProductConfig> variants;
    TabularParams policy;
    LearnerSharing sharing = LearnerSharing::PerQuintile;
    EquityBasis equity_basis = EquityBasis::TotalScheduled;
    RunSettings run;
    OutputSettings output;

    SimulationConfig simulation(std::uint64_t seed, const ProductConfig& product) const;
    const ProductConfig* find_variant(std::string_view name) const;
};

struct ScenarioLoad {
    std::optional<ScenarioConfig> config;  // set iff violations is empty
    std::vector<std::string> violations;
};

/// Reads the file, applies `path=value` overrides in order, then parses and
/// validates. Relative population paths resolve against the file's directory.
ScenarioLoad load_scenario(const std::filesystem::path& file, std::span<const std::string> overrides = {});

/// Same, from text. `base_dir` anchors relative paths.
ScenarioLoad load_scenario_text(std::string_view yaml, const std::filesystem::path& base_dir,
                                std::span<const std::string> overrides = {});

/// Sets one dotted path (`run.seeds=[1]`, `products.variants.1.amount=2000`).
/// The value is parsed as YAML. Throws ConfigError on a malformed assignment.
void apply_override(YAML::Node& root, std::string_view assignment);

/// Canonical JSON of everything that affects results. Output location and
/// worker count are left out, so moving a run does not change its hash.
std::string canonical_json(const ScenarioConfig& config);
/// Subset that must agree for two runs to be compared cell by cell:
/// population, seeds, horizon and the evaluation shock protocol.
std::string comparability_json(const ScenarioConfig& config);

std::uint64_t config_hash(const ScenarioConfig& config);
std::uint64_t comparability_hash(const ScenarioConfig& config);
std::string hash_hex(std::uint64_t h);

/// Population tables file (the `population.file` target).
DistributionConfig load_distribution_file(const std::filesystem::path& file);
std::string distribution_to_yaml(const DistributionConfig& config);

}  // namespace mabm
