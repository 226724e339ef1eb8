#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "mabm/cli.hpp"
#include "mabm/scenario.hpp"

using namespace mabm;
namespace fs = std::filesystem;

namespace {

const fs::path kSource = MABM_SOURCE_DIR;

// Small enough to run in well under a second.
constexpr const char* kTiny = R"(schema_version: 1
population: {n: 60}
products:
  variants:
    - {name: none, mode: off}
    - {name: upfront-1000, mode: upfront, amount: 1000}
run:
  seeds: [1, 2]
  train_episodes: 1
  train_months: 6
  eval_months: 6
  shock_grid: [0.0, 0.3]
)";

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result invoke(std::vector<std::string> args) {
    args.insert(args.begin(), "mabm");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out;
    std::ostringstream err;
    const int code = cli::run_main(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("mabm_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

void write(const fs::path& p, const std::string& s) {
    std::ofstream f(p, std::ios::binary);
    f << s;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::map<std::string, std::string> tree(const fs::path& root) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = slurp(e.path());
    }
    return files;
}

fs::path tiny_config(const fs::path& dir, const std::string& extra = "") {
    const auto p = dir / "tiny.yaml";
    write(p, std::string(kTiny) + extra);
    return p;
}

bool contains(const std::string& hay, const std::string& needle) { return hay.find(needle) != std::string::npos; }

}  // namespace

TEST(Scenario, ShippedBaselineLoads) {
    const auto load = load_scenario(kSource / "config/baseline.yaml");
    ASSERT_TRUE(load.violations.empty()) << load.violations.front();
    const auto& c = *load.config;
    EXPECT_EQ(c.n_borrowers, 1000);
    EXPECT_EQ(c.variants.size(), 5u);
    ASSERT_NE(c.find_variant("matched"), nullptr);
    EXPECT_EQ(c.find_variant("matched")->menu.size(), 5u);
    EXPECT_EQ(c.find_variant("upfront-2500")->upfront_amount, Money::from_cents(250'000));
    EXPECT_EQ(c.run.seeds.size(), 5u);
    EXPECT_EQ(c.simulation(3, c.variants[0]).episode.seed, 3u);
}

TEST(Scenario, OverrideEqualsEditedFile) {
    const auto dir = scratch("override");
    const auto edited = load_scenario_text(std::string(kTiny) + "servicer: {advance_cap_payments: 6}\n", dir);
    const std::vector<std::string> sets{"servicer.advance_cap_payments=6"};
    const auto overridden = load_scenario_text(kTiny, dir, sets);
    ASSERT_TRUE(edited.config && overridden.config);
    EXPECT_EQ(config_hash(*edited.config), config_hash(*overridden.config));
    EXPECT_EQ(canonical_json(*edited.config), canonical_json(*overridden.config));

    const std::vector<std::string> index{"products.variants.1.amount=2500"};
    const auto idx = load_scenario_text(kTiny, dir, index);
    ASSERT_TRUE(idx.config);
    EXPECT_EQ(idx.config->variants[1].upfront_amount, Money::from_cents(250'000));
}

TEST(Scenario, HashIgnoresOutputAndWorkers) {
    const auto dir = scratch("hash");
    const auto a = load_scenario_text(kTiny, dir);
    const std::vector<std::string> sets{"output.directory=/elsewhere", "run.workers=7"};
    const auto b = load_scenario_text(kTiny, dir, sets);
    EXPECT_EQ(config_hash(*a.config), config_hash(*b.config));
    const std::vector<std::string> n{"population.n=61"};
    const auto c = load_scenario_text(kTiny, dir, n);
    EXPECT_NE(config_hash(*a.config), config_hash(*c.config));
    EXPECT_NE(comparability_hash(*a.config), comparability_hash(*c.config));
    // Product variants change the result but not comparability.
    const std::vector<std::string> m{"products.variants.1.amount=5000"};
    const auto d = load_scenario_text(kTiny, dir, m);
    EXPECT_NE(config_hash(*a.config), config_hash(*d.config));
    EXPECT_EQ(comparability_hash(*a.config), comparability_hash(*d.config));
    EXPECT_EQ(hash_hex(0xabc).size(), 16u);
}

TEST(Scenario, CollectsEveryViolation) {
    const auto dir = scratch("violations");
    const std::vector<std::string> sets{"products.variants.1.amount=-1000", "servicer.advance_cap=3",
                                        "run.eval_months=0"};
    const auto load = load_scenario_text(kTiny, dir, sets);
    EXPECT_FALSE(load.config.has_value());
    std::string all;
    for (const auto& v : load.violations) all += v + "\n";
    EXPECT_GE(load.violations.size(), 3u) << all;
    EXPECT_TRUE(contains(all, "products.variants[1].amount")) << all;
    EXPECT_TRUE(contains(all, "advance_cap")) << all;
    EXPECT_TRUE(contains(all, "eval_months")) << all;
}

TEST(Scenario, MissingPopulationFile) {
    const auto dir = scratch("missing_pop");
    const auto load = load_scenario_text("population: {file: nowhere.yaml}\n", dir);
    ASSERT_FALSE(load.violations.empty());
    EXPECT_TRUE(contains(load.violations.front(), "nowhere.yaml"));
}

TEST(Scenario, MalformedOverride) {
    const auto dir = scratch("bad_override");
    for (const std::string bad : {"noequals", "=3", "a..b=1", "products.variants.9.amount=1"}) {
        const std::vector<std::string> sets{bad};
        EXPECT_FALSE(load_scenario_text(kTiny, dir, sets).violations.empty()) << bad;
    }
}

TEST(Scenario, DuplicateVariantNames) {
    const auto dir = scratch("dup");
    const auto load = load_scenario_text("products: {variants: [{name: a, mode: off}, {name: a, mode: off}]}\n", dir);
    EXPECT_FALSE(load.violations.empty());
}

TEST(Cli, ExitCodesAndHelp) {
    EXPECT_EQ(invoke({}).code, cli::kExitInvalid);
    EXPECT_EQ(invoke({"frobnicate"}).code, cli::kExitInvalid);
    const auto help = invoke({"--help"});
    EXPECT_EQ(help.code, cli::kExitOk);
    EXPECT_TRUE(contains(help.out, "compare"));
    EXPECT_EQ(invoke({"run", "--workers", "-1", "x.yaml"}).code, cli::kExitInvalid);
}

TEST(Cli, Validate) {
    const auto ok = invoke({"validate", (kSource / "config/baseline.yaml").string()});
    EXPECT_EQ(ok.code, cli::kExitOk) << ok.err;
    EXPECT_TRUE(contains(ok.out, "OK"));
    const auto bad = invoke({"validate", (kSource / "config/baseline.yaml").string(), "--set",
                          "products.variants.1.amount=-1000", "--set", "population.n=2"});
    EXPECT_EQ(bad.code, cli::kExitInvalid);
    EXPECT_TRUE(contains(bad.err, "error: products.variants[1].amount")) << bad.err;
    EXPECT_TRUE(contains(bad.err, "error: population.n")) << bad.err;
    EXPECT_TRUE(contains(bad.out, "2 violation(s)")) << bad.out;
    const auto missing = invoke({"validate", "/nonexistent/scenario.yaml"});
    EXPECT_NE(missing.code, cli::kExitOk);
}

TEST(Cli, RunWritesLayoutAndIsReproducible) {
    const auto dir = scratch("run");
    const auto cfg = tiny_config(dir);
    const auto a = invoke({"run", cfg.string(), "--out", (dir / "a").string(), "--quiet", "--workers", "1"});
    ASSERT_EQ(a.code, cli::kExitOk) << a.err;
    const auto b = invoke({"run", cfg.string(), "--out", (dir / "b").string(), "--quiet", "--workers", "3"});
    ASSERT_EQ(b.code, cli::kExitOk) << b.err;

    EXPECT_TRUE(fs::exists(dir / "a/run_manifest.json"));
    EXPECT_TRUE(fs::exists(dir / "a/summary.csv"));
    EXPECT_TRUE(fs::exists(dir / "a/cells/seed-2/product-upfront-1000/shock-0.3/affected_rate.csv"));
    EXPECT_TRUE(fs::exists(dir / "a/snapshots/seed-1/product-none.bin"));
    EXPECT_FALSE(fs::exists(dir / ".a.partial"));
    EXPECT_EQ(tree(dir / "a"), tree(dir / "b"));

    const auto manifest = nlohmann::json::parse(slurp(dir / "a/run_manifest.json"));
    EXPECT_EQ(manifest["n_borrowers"], 60);
    EXPECT_EQ(manifest["trained"], true);

    // Rerunning into an earlier run directory replaces it with identical bytes.
    const auto again = invoke({"run", cfg.string(), "--out", (dir / "a").string(), "--quiet"});
    ASSERT_EQ(again.code, cli::kExitOk) << again.err;
    EXPECT_EQ(tree(dir / "a"), tree(dir / "b"));
}

TEST(Cli, ReusesSnapshots) {
    const auto dir = scratch("snap");
    const auto cfg = tiny_config(dir);
    ASSERT_EQ(invoke({"run", cfg.string(), "--out", (dir / "a").string(), "--quiet"}).code, cli::kExitOk);
    const auto r = invoke({"run", cfg.string(), "--out", (dir / "b").string(), "--snapshots", (dir / "a").string(), "--quiet"});
    ASSERT_EQ(r.code, cli::kExitOk) << r.err;
    EXPECT_EQ(slurp(dir / "a/summary.csv"), slurp(dir / "b/summary.csv"));
    EXPECT_EQ(nlohmann::json::parse(slurp(dir / "b/run_manifest.json"))["trained"], false);
}

TEST(Cli, FailedRunLeavesNothingBehind) {
    const auto dir = scratch("fail");
    const auto cfg = tiny_config(dir);
    fs::create_directories(dir / "empty_snapshots");
    const auto r = invoke({"run", cfg.string(), "--out", (dir / "out").string(), "--snapshots",
                        (dir / "empty_snapshots").string(), "--quiet"});
    EXPECT_NE(r.code, cli::kExitOk);
    EXPECT_FALSE(r.err.empty());
    EXPECT_FALSE(fs::exists(dir / "out"));
    EXPECT_FALSE(fs::exists(dir / ".out.partial"));
}

TEST(Cli, RefusesToClobberForeignDirectory) {
    const auto dir = scratch("clobber");
    const auto cfg = tiny_config(dir);
    fs::create_directories(dir / "precious");
    write(dir / "precious/thesis.tex", "do not delete");
    const auto r = invoke({"run", cfg.string(), "--out", (dir / "precious").string(), "--quiet"});
    EXPECT_EQ(r.code, cli::kExitRuntime);
    EXPECT_EQ(slurp(dir / "precious/thesis.tex"), "do not delete");
}

TEST(Cli, OutputDirectoryFromEnvironment) {
    const auto dir = scratch("env");
    const auto cfg = tiny_config(dir);
    const auto target = dir / "from_env";
    ::setenv(cli::kOutputEnv, target.c_str(), 1);
    const auto r = invoke({"run", cfg.string(), "--quiet"});
    ::unsetenv(cli::kOutputEnv);
    ASSERT_EQ(r.code, cli::kExitOk) << r.err;
    EXPECT_TRUE(fs::exists(target / "summary.csv"));
    const auto none = invoke({"run", cfg.string(), "--quiet"});
    EXPECT_EQ(none.code, cli::kExitInvalid);
}

TEST(Cli, CompareIdenticalRunsGivesZeroDeltas) {
    const auto dir = scratch("cmp_same");
    const auto cfg = tiny_config(dir);
    ASSERT_EQ(invoke({"run", cfg.string(), "--out", (dir / "a").string(), "--quiet"}).code, cli::kExitOk);
    const auto r = invoke({"compare", (dir / "a").string(), (dir / "a").string(), "--out", (dir / "cmp.csv").string()});
    ASSERT_EQ(r.code, cli::kExitOk) << r.err;
    EXPECT_EQ(slurp(dir / "cmp.csv"), r.out);
    std::istringstream in(r.out);
    std::string line;
    std::getline(in, line);
    EXPECT_TRUE(contains(line, "foreclosure_savings_pp"));
    int rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        std::stringstream ss(line);
        std::vector<std::string> f;
        for (std::string x; std::getline(ss, x, ',');) f.push_back(x);
        for (std::size_t i = 4; i < f.size(); ++i) {
            if (!f[i].empty()) EXPECT_EQ(std::stod(f[i]), 0.0) << line;
        }
    }
    EXPECT_EQ(rows, 2 * 2 * 6);  // products x shocks x (5 quintiles + all)
}

TEST(Cli, CompareAcrossProducts) {
    const auto dir = scratch("cmp_products");
    const auto cfg = tiny_config(dir);
    ASSERT_EQ(invoke({"run", cfg.string(), "--out", (dir / "a").string(), "--quiet"}).code, cli::kExitOk);
    const auto r = invoke({"compare", (dir / "a").string(), (dir / "a").string(), "--product-a", "none", "--product-b",
                        "upfront-1000"});
    ASSERT_EQ(r.code, cli::kExitOk) << r.err;
    EXPECT_TRUE(contains(r.out, "none,upfront-1000,0.300000,Q1,"));
    const auto missing = invoke({"compare", (dir / "a").string(), (dir / "a").string(), "--product-b", "nope"});
    EXPECT_EQ(missing.code, cli::kExitInvalid);
}

TEST(Cli, CompareRefusesIncomparableRuns) {
    const auto dir = scratch("cmp_diff");
    const auto cfg = tiny_config(dir);
    ASSERT_EQ(invoke({"run", cfg.string(), "--out", (dir / "a").string(), "--quiet"}).code, cli::kExitOk);
    ASSERT_EQ(invoke({"run", cfg.string(), "--out", (dir / "b").string(), "--quiet", "--set", "population.n=70"}).code,
              cli::kExitOk);
    const auto r = invoke({"compare", (dir / "a").string(), (dir / "b").string()});
    EXPECT_EQ(r.code, cli::kExitInvalid);
    EXPECT_TRUE(contains(r.err, "differ")) << r.err;
    EXPECT_TRUE(contains(r.err, "n")) << r.err;
    const auto notrun = invoke({"compare", dir.string(), (dir / "b").string()});
    EXPECT_EQ(notrun.code, cli::kExitInvalid);
}
