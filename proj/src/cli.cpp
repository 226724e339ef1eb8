#include "mabm/cli.hpp"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "mabm/engine.hpp"
#include "mabm/metrics.hpp"
#include "mabm/scenario.hpp"

namespace mabm::cli {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

void print_violations(std::ostream& err, const std::vector<std::string>& violations) {
    for (const auto& v : violations) err << "error: " << v << "\n";
}

std::string shock_label(double x) { return fmt::format("shock-{}", x); }

fs::path cell_dir(std::uint64_t seed, const std::string& product, double shock) {
    return fs::path("cells") / fmt::format("seed-{}", seed) / fmt::format("product-{}", product) / shock_label(shock);
}

fs::path snapshot_path(std::uint64_t seed, const std::string& product) {
    return fs::path("snapshots") / fmt::format("seed-{}", seed) / fmt::format("product-{}.bin", product);
}

fs::path normalize_dir(const fs::path& p) {
    fs::path out = fs::absolute(p).lexically_normal();
    if (out.filename().empty()) out = out.parent_path();
    return out;
}

std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error(fmt::format("cannot read '{}'", p.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& p, const std::string& s) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error(fmt::format("cannot write '{}'", p.string()));
    f << s;
    if (!f) throw std::runtime_error(fmt::format("write failed for '{}'", p.string()));
}

struct Cell {
    std::uint64_t seed = 0;
    const ProductConfig* product = nullptr;
    std::vector<std::vector<std::uint8_t>> snapshots;
    std::vector<EvaluationRun> runs;
    std::exception_ptr error;
};

/// Existing directories are only replaced when they hold an earlier run.
bool replaceable(const fs::path& dir) {
    if (!fs::exists(dir)) return true;
    if (!fs::is_directory(dir)) return false;
    return fs::is_empty(dir) || fs::exists(dir / "run_manifest.json");
}

}  // namespace

int cmd_validate(const fs::path& config, const std::vector<std::string>& overrides, std::ostream& out,
                 std::ostream& err) {
    const ScenarioLoad load = load_scenario(config, overrides);
    if (!load.violations.empty()) {
        print_violations(err, load.violations);
        out << fmt::format("{} violation(s)\n", load.violations.size());
        return kExitInvalid;
    }
    out << "OK\n";
    return kExitOk;
}

int cmd_run(const RunOptions& options, std::ostream& out, std::ostream& err) {
    const ScenarioLoad load = load_scenario(options.config, options.overrides);
    if (!load.violations.empty()) {
        print_violations(err, load.violations);
        return kExitInvalid;
    }
    const ScenarioConfig& config = *load.config;

    fs::path target;
    if (options.out) {
        target = *options.out;
    } else if (!config.output.directory.empty()) {
        target = config.output.directory;
    } else if (const char* env = std::getenv(kOutputEnv); env && *env) {
        target = env;
    } else {
        err << "error: no output directory (use --out, output.directory or " << kOutputEnv << ")\n";
        return kExitInvalid;
    }
    target = normalize_dir(target);

    std::optional<fs::path> snapshot_dir;
    if (options.snapshots) {
        snapshot_dir = normalize_dir(*options.snapshots);
    } else if (!config.run.snapshot_dir.empty()) {
        fs::path p = config.run.snapshot_dir;
        if (p.is_relative()) p = options.config.parent_path() / p;
        snapshot_dir = normalize_dir(p);
    }

    if (!replaceable(target)) {
        err << fmt::format("error: '{}' exists and is not an earlier run directory; refusing to overwrite\n",
                           target.string());
        return kExitRuntime;
    }
    const fs::path staging = target.parent_path() / fmt::format(".{}.partial", target.filename().string());

    const std::string chash = hash_hex(config_hash(config));
    const std::string khash = hash_hex(comparability_hash(config));

    std::vector<Cell> cells;
    for (const std::uint64_t seed : config.run.seeds) {
        for (const auto& v : config.variants) cells.push_back(Cell{seed, &v, {}, {}, nullptr});
    }

    int workers = options.workers.value_or(config.run.workers);
    if (workers <= 0) workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    workers = std::min<int>(workers, static_cast<int>(cells.size()));

    std::mutex log_mutex;
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < cells.size(); i = next++) {
            Cell& c = cells[i];
            try {
                const SimulationConfig sim = config.simulation(c.seed, *c.product);
                if (snapshot_dir) {
                    c.snapshots = read_snapshot_file((*snapshot_dir / snapshot_path(c.seed, c.product->name)).string());
                } else {
                    c.snapshots = run_training(sim).snapshots;
                }
                c.runs = run_evaluation(sim, c.snapshots, config.run.shock_grid);
                for (auto& r : c.runs) {
                    if (!r.money_conserved) {
                        throw std::runtime_error(fmt::format("money conservation violated (seed {}, product {}, shock {})",
                                                             c.seed, c.product->name, r.metrics.meta.shock_size));
                    }
                    r.metrics.meta.config_hash = chash;
                    r.metrics.meta.comparability_hash = khash;
                }
                if (!options.quiet) {
                    std::lock_guard lock(log_mutex);
                    out << fmt::format("done seed {} product {}\n", c.seed, c.product->name) << std::flush;
                }
            } catch (...) {
                c.error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();

    for (const Cell& c : cells) {
        if (!c.error) continue;
        try {
            std::rethrow_exception(c.error);
        } catch (const ConfigError& e) {
            err << fmt::format("error: seed {} product {}: {}\n", c.seed, c.product->name, e.what());
            return kExitInvalid;
        } catch (const std::exception& e) {
            err << fmt::format("error: seed {} product {}: {}\n", c.seed, c.product->name, e.what());
            return kExitRuntime;
        }
    }

    // Writes happen here, serially, in (seed, product, shock) order.
    try {
        fs::remove_all(staging);
        fs::create_directories(staging);
        std::vector<MetricsBundle> bundles;
        Json cell_list = Json::array();
        for (const Cell& c : cells) {
            const fs::path snap = staging / snapshot_path(c.seed, c.product->name);
            fs::create_directories(snap.parent_path());
            write_snapshot_file(snap.string(), c.snapshots);
            for (const auto& r : c.runs) {
                const fs::path rel = cell_dir(c.seed, c.product->name, r.metrics.meta.shock_size);
                write_csv(r.metrics, staging / rel);
                cell_list.push_back(rel.generic_string());
                bundles.push_back(r.metrics);
            }
        }
        write_summary_csv(bundles, staging / "summary.csv");

        Json m;
        m["schema_version"] = 1;
        m["config_hash"] = chash;
        m["comparability_hash"] = khash;
        m["trained"] = !snapshot_dir.has_value();
        m["seeds"] = config.run.seeds;
        Json products = Json::array();
        for (const auto& v : config.variants) products.push_back(v.name);
        m["products"] = products;
        m["shock_grid"] = config.run.shock_grid;
        m["n_borrowers"] = config.n_borrowers;
        m["eval_months"] = config.run.eval_months;
        m["comparability"] = Json::parse(comparability_json(config));
        m["config"] = Json::parse(canonical_json(config));
        m["cells"] = cell_list;
        write_text(staging / "run_manifest.json", m.dump(2) + "\n");

        fs::remove_all(target);
        fs::create_directories(target.parent_path());
        fs::rename(staging, target);
    } catch (const std::exception& e) {
        std::error_code ec;
        fs::remove_all(staging, ec);
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    if (!options.quiet) out << fmt::format("wrote {} ({} cells)\n", target.string(), cells.size());
    return kExitOk;
}

namespace {

struct SummaryRow {
    double affected = 0.0;
    std::optional<double> tta;
    double foreclosure = 0.0;
    double uptake = 0.0;
    std::optional<double> profit;
};

// product -> shock label -> quintile -> row
using Summary = std::map<std::string, std::map<std::string, std::map<std::string, SummaryRow>>>;

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, ',');) out.push_back(f);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

Summary read_summary(const fs::path& file) {
    std::istringstream in(read_text(file));
    std::string line;
    std::getline(in, line);
    if (line.rfind("product,shock_size,quintile,", 0) != 0) {
        throw std::runtime_error(fmt::format("'{}': unexpected header", file.string()));
    }
    Summary s;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split(line);
        if (f.size() != 9) throw std::runtime_error(fmt::format("'{}': malformed row '{}'", file.string(), line));
        SummaryRow r;
        r.affected = std::stod(f[4]);
        if (!f[5].empty()) r.tta = std::stod(f[5]);
        r.foreclosure = std::stod(f[6]);
        r.uptake = std::stod(f[7]);
        if (!f[8].empty()) r.profit = std::stod(f[8]);
        s[f[0]][f[1]][f[2]] = r;
    }
    return s;
}

Json read_manifest(const fs::path& dir) { return Json::parse(read_text(dir / "run_manifest.json")); }

std::vector<std::string> differing_keys(const Json& a, const Json& b) {
    std::vector<std::string> out;
    std::set<std::string> keys;
    for (auto it = a.begin(); it != a.end(); ++it) keys.insert(it.key());
    for (auto it = b.begin(); it != b.end(); ++it) keys.insert(it.key());
    for (const auto& k : keys) {
        if (!a.contains(k) || !b.contains(k) || a[k] != b[k]) out.push_back(k);
    }
    return out;
}

std::string pp(double x) { return format_fraction(x * 100.0); }

}  // namespace

int cmd_compare(const CompareOptions& options, std::ostream& out, std::ostream& err) {
    Json ma;
    Json mb;
    Summary sa;
    Summary sb;
    try {
        ma = read_manifest(options.run_a);
        mb = read_manifest(options.run_b);
        sa = read_summary(options.run_a / "summary.csv");
        sb = read_summary(options.run_b / "summary.csv");
    } catch (const std::exception& e) {
        err << "error: not a run directory: " << e.what() << "\n";
        return kExitInvalid;
    }

    if (ma.value("comparability_hash", "") != mb.value("comparability_hash", "")) {
        err << "error: runs are not comparable; these settings differ:";
        for (const auto& k : differing_keys(ma["comparability"], mb["comparability"])) err << " " << k;
        err << "\n";
        return kExitInvalid;
    }

    std::vector<std::pair<std::string, std::string>> pairs;
    if (options.product_a || options.product_b) {
        const std::string a = options.product_a.value_or(options.product_b.value_or(""));
        const std::string b = options.product_b.value_or(a);
        if (!sa.count(a) || !sb.count(b)) {
            err << fmt::format("error: product '{}' or '{}' not found in the runs\n", a, b);
            return kExitInvalid;
        }
        pairs.emplace_back(a, b);
    } else {
        for (const auto& [name, _] : sa) {
            if (sb.count(name)) pairs.emplace_back(name, name);
        }
        if (pairs.empty() && sa.size() == 1 && sb.size() == 1) pairs.emplace_back(sa.begin()->first, sb.begin()->first);
        if (pairs.empty()) {
            err << "error: no product variant in common; pick one with --product-a/--product-b\n";
            return kExitInvalid;
        }
    }

    std::string table =
        "product_a,product_b,shock_size,quintile,affected_rate_delta_pp,foreclosure_rate_delta_pp,"
        "foreclosure_savings_pp,mean_time_to_affect_delta_months,mra_uptake_delta_pp,net_profit_per_borrower_delta\n";
    std::size_t rows = 0;
    for (const auto& [pa, pb] : pairs) {
        for (const auto& [shock, qa] : sa.at(pa)) {
            const auto it = sb.at(pb).find(shock);
            if (it == sb.at(pb).end()) continue;
            for (const auto& [q, ra] : qa) {
                const auto jt = it->second.find(q);
                if (jt == it->second.end()) continue;
                const SummaryRow& rb = jt->second;
                const std::string tta = ra.tta && rb.tta ? format_fraction(*rb.tta - *ra.tta) : std::string{};
                const std::string profit =
                    ra.profit && rb.profit ? money_from_dollars(*rb.profit - *ra.profit).to_string() : std::string{};
                table += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", pa, pb, shock, q, pp(rb.affected - ra.affected),
                                     pp(rb.foreclosure - ra.foreclosure), pp(ra.foreclosure - rb.foreclosure), tta,
                                     pp(rb.uptake - ra.uptake), profit);
                ++rows;
            }
        }
    }
    if (rows == 0) {
        err << "error: the runs share no shock size\n";
        return kExitInvalid;
    }
    out << table;
    if (options.out) {
        try {
            if (options.out->has_parent_path()) fs::create_directories(options.out->parent_path());
            write_text(*options.out, table);
        } catch (const std::exception& e) {
            err << "error: " << e.what() << "\n";
            return kExitRuntime;
        }
    }
    return kExitOk;
}

int run_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Monthly agent-based mortgage servicing simulator"};
    app.require_subcommand(1);

    RunOptions run;
    std::string run_out;
    std::string run_snap;
    int run_workers = -1;
    auto* run_cmd = app.add_subcommand("run", "Train, evaluate the shock grid for every product variant, write CSVs");
    run_cmd->add_option("config", run.config, "Scenario file")->required();
    run_cmd->add_option("--set", run.overrides, "Override a config value, e.g. run.seeds=[1]");
    run_cmd->add_option("--out", run_out, fmt::format("Output directory (default: output.directory, then ${})", kOutputEnv));
    run_cmd->add_option("--snapshots", run_snap, "Reuse learners from an earlier run directory instead of training");
    run_cmd->add_option("--workers", run_workers, "Parallel cells (0 = all cores)")->check(CLI::NonNegativeNumber);
    run_cmd->add_flag("--quiet", run.quiet, "No progress output");

    CompareOptions cmp;
    std::string cmp_out;
    std::string cmp_pa;
    std::string cmp_pb;
    auto* cmp_cmd = app.add_subcommand("compare", "Per-quintile metric deltas B - A between two runs");
    cmp_cmd->add_option("run_a", cmp.run_a, "Baseline run directory")->required();
    cmp_cmd->add_option("run_b", cmp.run_b, "Counterfactual run directory")->required();
    cmp_cmd->add_option("--product-a", cmp_pa, "Product variant to take from A");
    cmp_cmd->add_option("--product-b", cmp_pb, "Product variant to take from B");
    cmp_cmd->add_option("--out", cmp_out, "Also write the table to this CSV file");

    fs::path val_config;
    std::vector<std::string> val_overrides;
    auto* val_cmd = app.add_subcommand("validate", "Check a scenario file and list every violation");
    val_cmd->add_option("config", val_config, "Scenario file")->required();
    val_cmd->add_option("--set", val_overrides, "Override a config value");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitInvalid;
    }

    try {
        if (*run_cmd) {
            if (!run_out.empty()) run.out = run_out;
            if (!run_snap.empty()) run.snapshots = run_snap;
            if (run_workers >= 0) run.workers = run_workers;
            return cmd_run(run, out, err);
        }
        if (*cmp_cmd) {
            if (!cmp_out.empty()) cmp.out = cmp_out;
            if (!cmp_pa.empty()) cmp.product_a = cmp_pa;
            if (!cmp_pb.empty()) cmp.product_b = cmp_pb;
            return cmd_compare(cmp, out, err);
        }
        return cmd_validate(val_config, val_overrides, out, err);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

}  // namespace mabm::cli
