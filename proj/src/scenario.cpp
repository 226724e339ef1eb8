#include "mabm/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include "json.hpp"

namespace mabm {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

// Collects field-level problems while walking a YAML tree. Every getter
// leaves the target untouched when the key is absent.
class Parser {
public:
    std::vector<std::string> errors;

    void error(const std::string& path, const std::string& what) { errors.push_back(fmt::format("{}: {}", path, what)); }

    static std::string join(const std::string& path, std::string_view key) {
        return path.empty() ? std::string(key) : fmt::format("{}.{}", path, key);
    }

    bool map(const YAML::Node& n, const std::string& path) {
        if (!n || n.IsNull()) return false;
        if (!n.IsMap()) {
            error(path, "expected a mapping");
            return false;
        }
        return true;
    }

    void allow(const YAML::Node& n, const std::string& path, std::initializer_list<std::string_view> keys) {
        for (const auto& kv : n) {
            const auto k = kv.first.as<std::string>();
            if (std::find(keys.begin(), keys.end(), k) == keys.end()) error(join(path, k), "unknown key");
        }
    }

    template <class T>
    bool scalar(const YAML::Node& n, const std::string& path, T& out, const char* expected) {
        if (!n.IsScalar()) {
            error(path, fmt::format("expected {}", expected));
            return false;
        }
        try {
            out = n.as<T>();
            return true;
        } catch (const YAML::Exception&) {
            error(path, fmt::format("expected {}, got '{}'", expected, n.Scalar()));
            return false;
        }
    }

    void number(const YAML::Node& m, std::string_view key, const std::string& path, double& out,
                double lo = -HUGE_VAL, double hi = HUGE_VAL) {
        const YAML::Node n = m[std::string(key)];
        if (!n) return;
        const std::string p = join(path, key);
        double v = 0.0;
        if (!scalar(n, p, v, "a number")) return;
        if (!std::isfinite(v) || v < lo || v > hi) {
            error(p, fmt::format("{} outside [{}, {}]", v, lo, hi));
            return;
        }
        out = v;
    }

    void integer(const YAML::Node& m, std::string_view key, const std::string& path, int& out, int lo = INT32_MIN,
                 int hi = INT32_MAX) {
        const YAML::Node n = m[std::string(key)];
        if (!n) return;
        const std::string p = join(path, key);
        int v = 0;
        if (!scalar(n, p, v, "an integer")) return;
        if (v < lo || v > hi) {
            error(p, fmt::format("{} outside [{}, {}]", v, lo, hi));
            return;
        }
        out = v;
    }

    void boolean(const YAML::Node& m, std::string_view key, const std::string& path, bool& out) {
        const YAML::Node n = m[std::string(key)];
        if (!n) return;
        bool v = false;
        if (scalar(n, join(path, key), v, "true or false")) out = v;
    }

    void text(const YAML::Node& m, std::string_view key, const std::string& path, std::string& out) {
        const YAML::Node n = m[std::string(key)];
        if (!n) return;
        std::string v;
        if (scalar(n, join(path, key), v, "a string")) out = v;
    }

    bool money(const YAML::Node& n, const std::string& path, Money& out, bool allow_negative = false) {
        std::string s;
        if (!scalar(n, path, s, "a dollar amount")) return false;
        try {
            const Money v = money_from_dollars(std::string_view(s));
            if (v.is_negative() && !allow_negative) {
                error(path, fmt::format("{} must be >= 0", s));
                return false;
            }
            out = v;
            return true;
        } catch (const ConfigError& e) {
            error(path, e.what());
            return false;
        }
    }

    void money(const YAML::Node& m, std::string_view key, const std::string& path, Money& out) {
        if (const YAML::Node n = m[std::string(key)]) money(n, join(path, key), out);
    }

    template <class T>
    void list(const YAML::Node& m, std::string_view key, const std::string& path, std::vector<T>& out,
              const char* expected) {
        const YAML::Node n = m[std::string(key)];
        if (!n) return;
        const std::string p = join(path, key);
        if (!n.IsSequence()) {
            error(p, "expected a list");
            return;
        }
        std::vector<T> v;
        bool ok = true;
        for (std::size_t i = 0; i < n.size(); ++i) {
            T x{};
            ok = scalar(n[i], fmt::format("{}[{}]", p, i), x, expected) && ok;
            v.push_back(x);
        }
        if (ok) out = std::move(v);
    }

    template <class E>
    void choice(const YAML::Node& m, std::string_view key, const std::string& path, E& out,
                std::initializer_list<std::pair<std::string_view, E>> names) {
        const YAML::Node n = m[std::string(key)];
        if (!n) return;
        const std::string p = join(path, key);
        std::string s;
        if (!scalar(n, p, s, "a name")) return;
        std::string options;
        for (const auto& [name, value] : names) {
            if (name == s) {
                out = value;
                return;
            }
            options += options.empty() ? std::string(name) : fmt::format(" | {}", name);
        }
        error(p, fmt::format("'{}' is not one of {}", s, options));
    }

    void table(const YAML::Node& n, const std::string& path, QuantileTable& out) {
        if (!map(n, path)) {
            if (!n || n.IsNull()) error(path, "missing");
            return;
        }
        allow(n, path, {"probs", "values"});
        std::vector<double> values;
        std::vector<double> probs;
        list(n, "values", path, values, "a number");
        list(n, "probs", path, probs, "a number");
        if (values.empty()) {
            error(join(path, "values"), "missing");
            return;
        }
        out = n["probs"] ? QuantileTable{std::move(probs), std::move(values)} : QuantileTable::evenly_spaced(std::move(values));
    }

    void quintile_tables(const YAML::Node& m, std::string_view key, const std::string& path,
                         std::array<QuantileTable, kQuintiles>& out) {
        const YAML::Node n = m[std::string(key)];
        if (!n) return;
        const std::string p = join(path, key);
        if (!n.IsSequence() || n.size() != kQuintiles) {
            error(p, fmt::format("expected a list of {} tables (one per income quintile)", kQuintiles));
            return;
        }
        for (std::size_t q = 0; q < kQuintiles; ++q) table(n[q], fmt::format("{}[{}]", p, q + 1), out[q]);
    }
};

void parse_distribution(Parser& ps, const YAML::Node& n, const std::string& path, DistributionConfig& c) {
    if (!ps.map(n, path)) return;
    ps.allow(n, path, {"schema_version", "income", "housing_ratio", "nonhousing_ratio", "savings",
                       "max_expense_to_income", "gamma", "loan"});
    ps.integer(n, "schema_version", path, c.schema_version);
    if (n["income"]) ps.table(n["income"], Parser::join(path, "income"), c.income);
    ps.quintile_tables(n, "housing_ratio", path, c.housing_ratio);
    ps.quintile_tables(n, "nonhousing_ratio", path, c.nonhousing_ratio);
    ps.quintile_tables(n, "savings", path, c.savings);
    ps.number(n, "max_expense_to_income", path, c.max_expense_to_income);
    if (const YAML::Node g = n["gamma"]; ps.map(g, Parser::join(path, "gamma"))) {
        const std::string gp = Parser::join(path, "gamma");
        ps.allow(g, gp, {"kind", "a", "b", "value"});
        ps.choice(g, "kind", gp, c.gamma.kind,
                  {{"beta", GammaDistribution::Kind::Beta},
                   {"uniform", GammaDistribution::Kind::Uniform},
                   {"fixed", GammaDistribution::Kind::Fixed}});
        ps.number(g, "a", gp, c.gamma.a);
        ps.number(g, "b", gp, c.gamma.b);
        ps.number(g, "value", gp, c.gamma.value);
    }
    if (const YAML::Node l = n["loan"]; ps.map(l, Parser::join(path, "loan"))) {
        const std::string lp = Parser::join(path, "loan");
        ps.allow(l, lp, {"annual_rate", "terms", "max_age_fraction"});
        if (l["annual_rate"]) ps.table(l["annual_rate"], Parser::join(lp, "annual_rate"), c.loan.annual_rate);
        ps.number(l, "max_age_fraction", lp, c.loan.max_age_fraction);
        if (const YAML::Node t = l["terms"]) {
            const std::string tp = Parser::join(lp, "terms");
            if (!t.IsSequence()) {
                ps.error(tp, "expected a list");
            } else {
                std::vector<TermOption> terms;
                for (std::size_t i = 0; i < t.size(); ++i) {
                    const std::string ip = fmt::format("{}[{}]", tp, i);
                    if (!ps.map(t[i], ip)) continue;
                    ps.allow(t[i], ip, {"months", "weight"});
                    TermOption o;
                    ps.integer(t[i], "months", ip, o.months);
                    ps.number(t[i], "weight", ip, o.weight);
                    terms.push_back(o);
                }
                c.loan.terms = std::move(terms);
            }
        }
    }
    for (const auto& v : validate_config(c)) ps.errors.push_back(path.empty() ? v : fmt::format("{}.{}", path, v));
}

void parse_population(Parser& ps, const YAML::Node& n, const fs::path& base_dir, ScenarioConfig& c) {
    if (!ps.map(n, "population")) return;
    ps.allow(n, "population", {"n", "file", "distribution"});
    ps.integer(n, "n", "population", c.n_borrowers, 5, 10'000'000);
    ps.text(n, "file", "population", c.population_file);
    if (!c.population_file.empty() && n["distribution"]) {
        ps.error("population", "give either file or distribution, not both");
        return;
    }
    if (!c.population_file.empty()) {
        fs::path p = c.population_file;
        if (p.is_relative()) p = base_dir / p;
        std::ifstream in(p);
        if (!in) {
            ps.error("population.file", fmt::format("cannot read '{}'", p.string()));
            return;
        }
        try {
            const YAML::Node doc = YAML::Load(in);
            c.population = default_distribution_config();
            parse_distribution(ps, doc, fmt::format("population.file({})", p.string()), c.population);
        } catch (const YAML::Exception& e) {
            ps.error("population.file", fmt::format("'{}': {}", p.string(), e.what()));
        }
    } else if (n["distribution"]) {
        parse_distribution(ps, n["distribution"], "population.distribution", c.population);
    }
}

void parse_economy(Parser& ps, const YAML::Node& n, ScenarioConfig& c) {
    if (!ps.map(n, "economy")) return;
    ps.allow(n, "economy", {"h0", "hpi", "shocks", "eval_shock"});
    ps.number(n, "h0", "economy", c.h0, 1e-9, 1e6);
    if (const YAML::Node h = n["hpi"]; ps.map(h, "economy.hpi")) {
        ps.allow(h, "economy.hpi", {"kind", "mu", "sigma"});
        ps.choice(h, "kind", "economy.hpi", c.hpi.kind,
                  {{"constant", HpiKind::Constant}, {"drift", HpiKind::Drift}, {"geometric_walk", HpiKind::GeometricWalk}});
        ps.number(h, "mu", "economy.hpi", c.hpi.mu, -1.0, 1.0);
        ps.number(h, "sigma", "economy.hpi", c.hpi.sigma, 0.0, 1.0);
    }
    if (const YAML::Node s = n["shocks"]; ps.map(s, "economy.shocks")) {
        const std::string p = "economy.shocks";
        ps.allow(s, p, {"monthly_arrival_prob", "magnitude_lo", "magnitude_hi", "allow_increase", "allow_reduce",
                        "duration_months"});
        ps.number(s, "monthly_arrival_prob", p, c.shocks.train_monthly_arrival_prob, 0.0, 1.0);
        ps.number(s, "magnitude_lo", p, c.shocks.magnitude_lo, 0.0, 1.0);
        ps.number(s, "magnitude_hi", p, c.shocks.magnitude_hi, 0.0, 1.0);
        ps.boolean(s, "allow_increase", p, c.shocks.allow_increase);
        ps.boolean(s, "allow_reduce", p, c.shocks.allow_reduce);
        ps.integer(s, "duration_months", p, c.shocks.shock_duration_months, 0);
        if (c.shocks.magnitude_lo > c.shocks.magnitude_hi) ps.error(p, "magnitude_lo must be <= magnitude_hi");
        if (!c.shocks.allow_increase && !c.shocks.allow_reduce) ps.error(p, "at least one shock direction must be allowed");
    }
    if (const YAML::Node e = n["eval_shock"]; ps.map(e, "economy.eval_shock")) {
        const std::string p = "economy.eval_shock";
        ps.allow(e, p, {"month", "direction", "coverage"});
        ps.integer(e, "month", p, c.shocks.eval_shock.month, 0);
        ps.choice(e, "direction", p, c.shocks.eval_shock.direction,
                  {{"reduce", ShockDirection::Reduce}, {"increase", ShockDirection::Increase}});
        ps.number(e, "coverage", p, c.shocks.eval_shock.coverage, 0.0, 1.0);
    }
}

void parse_servicer(Parser& ps, const YAML::Node& n, ScenarioConfig& c) {
    if (!ps.map(n, "servicer")) return;
    const std::string p = "servicer";
    auto& s = c.servicer;
    ps.allow(n, p, {"monthly_fee_rate", "advance_cap_payments", "incentive_repayment", "incentive_forbearance",
                    "incentive_modification", "foreclosure_trigger_months", "repayment_spread_months",
                    "forbearance_max_months", "modification_term_extension_months"});
    ps.number(n, "monthly_fee_rate", p, s.monthly_fee_rate, 0.0, 1.0);
    ps.integer(n, "advance_cap_payments", p, s.advance_cap_payments, 1);
    ps.money(n, "incentive_repayment", p, s.incentive_repayment);
    ps.money(n, "incentive_forbearance", p, s.incentive_forbearance);
    ps.money(n, "incentive_modification", p, s.incentive_modification);
    ps.integer(n, "foreclosure_trigger_months", p, s.foreclosure_trigger_months, 1);
    ps.integer(n, "repayment_spread_months", p, s.repayment_spread_months, 1);
    ps.integer(n, "forbearance_max_months", p, s.forbearance_max_months, 1);
    ps.integer(n, "modification_term_extension_months", p, s.modification_term_extension_months, 0);
}

bool safe_name(const std::string& s) {
    if (s.empty() || s == "." || s == "..") return false;
    return std::all_of(s.begin(), s.end(), [](char ch) {
        return (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') || (ch >= '0' && ch <= '9') || ch == '-' ||
               ch == '_' || ch == '.';
    });
}

void parse_products(Parser& ps, const YAML::Node& n, ScenarioConfig& c) {
    if (!ps.map(n, "products")) return;
    ps.allow(n, "products", {"variants"});
    const YAML::Node v = n["variants"];
    if (!v) return;
    if (!v.IsSequence() || v.size() == 0) {
        ps.error("products.variants", "expected a non-empty list");
        return;
    }
    std::vector<ProductConfig> out;
    std::set<std::string> names;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const std::string p = fmt::format("products.variants[{}]", i);
        if (!ps.map(v[i], p)) {
            ps.error(p, "expected a mapping");
            continue;
        }
        ps.allow(v[i], p, {"name", "mode", "amount", "menu"});
        ProductConfig pc;
        ps.text(v[i], "name", p, pc.name);
        if (!v[i]["name"]) ps.error(Parser::join(p, "name"), "missing");
        else if (!safe_name(pc.name)) ps.error(Parser::join(p, "name"), fmt::format("'{}' must use [A-Za-z0-9._-]", pc.name));
        else if (!names.insert(pc.name).second) ps.error(Parser::join(p, "name"), fmt::format("duplicate '{}'", pc.name));
        ps.choice(v[i], "mode", p, pc.mode,
                  {{"off", ProductMode::Off}, {"upfront", ProductMode::Upfront}, {"matched", ProductMode::Matched}});
        if (v[i]["amount"]) {
            if (pc.mode != ProductMode::Upfront) ps.error(Parser::join(p, "amount"), "only valid for mode upfront");
            ps.money(v[i]["amount"], Parser::join(p, "amount"), pc.upfront_amount);
        }
        if (pc.mode == ProductMode::Matched) pc.menu = ProductConfig::default_menu();
        if (const YAML::Node m = v[i]["menu"]) {
            const std::string mp = Parser::join(p, "menu");
            if (pc.mode != ProductMode::Matched) ps.error(mp, "only valid for mode matched");
            if (!m.IsSequence()) {
                ps.error(mp, "expected a list");
            } else {
                std::vector<Money> menu;
                for (std::size_t k = 0; k < m.size(); ++k) {
                    Money x;
                    if (ps.money(m[k], fmt::format("{}[{}]", mp, k), x)) menu.push_back(x);
                }
                pc.menu = std::move(menu);
            }
        }
        for (const auto& e : pc.violations()) ps.error(p, e);
        out.push_back(std::move(pc));
    }
    c.variants = std::move(out);
}

void parse_policy(Parser& ps, const YAML::Node& n, ScenarioConfig& c) {
    if (!ps.map(n, "policy")) return;
    const std::string p = "policy";
    ps.allow(n, p, {"learner", "sharing", "equity_basis", "alpha", "epsilon_start", "epsilon_end",
                    "epsilon_decay_steps", "discount", "tie_margin", "unseen_state_value"});
    if (const YAML::Node l = n["learner"]) {
        std::string s;
        if (ps.scalar(l, "policy.learner", s, "a name") && s != "tabular") {
            ps.error("policy.learner", fmt::format("'{}' is not one of tabular", s));
        }
    }
    ps.choice(n, "sharing", p, c.sharing,
              {{"per_quintile", LearnerSharing::PerQuintile}, {"individual", LearnerSharing::Individual}});
    ps.choice(n, "equity_basis", p, c.equity_basis,
              {{"total_scheduled", EquityBasis::TotalScheduled}, {"principal", EquityBasis::Principal}});
    auto& t = c.policy;
    ps.number(n, "alpha", p, t.alpha, 1e-12, 1.0);
    ps.number(n, "epsilon_start", p, t.epsilon_start, 0.0, 1.0);
    ps.number(n, "epsilon_end", p, t.epsilon_end, 0.0, 1.0);
    ps.number(n, "epsilon_decay_steps", p, t.epsilon_decay_steps, 1e-9);
    ps.number(n, "discount", p, t.discount, 0.0, 0.999999);
    ps.number(n, "tie_margin", p, t.tie_margin, 0.0);
    ps.number(n, "unseen_state_value", p, t.unseen_state_value);
}

void parse_run(Parser& ps, const YAML::Node& n, ScenarioConfig& c) {
    if (!ps.map(n, "run")) return;
    const std::string p = "run";
    auto& r = c.run;
    ps.allow(n, p, {"seeds", "train_episodes", "train_months", "eval_months", "shock_grid", "workers", "snapshot_dir"});
    ps.list(n, "seeds", p, r.seeds, "a non-negative integer");
    ps.integer(n, "train_episodes", p, r.train_episodes, 0);
    ps.integer(n, "train_months", p, r.train_months, 0);
    ps.integer(n, "eval_months", p, r.eval_months, 1, 12 * 100);
    ps.list(n, "shock_grid", p, r.shock_grid, "a number");
    ps.integer(n, "workers", p, r.workers, 0, 1024);
    ps.text(n, "snapshot_dir", p, r.snapshot_dir);
    if (r.seeds.empty()) ps.error("run.seeds", "at least one seed required");
    if (std::set<std::uint64_t>(r.seeds.begin(), r.seeds.end()).size() != r.seeds.size()) {
        ps.error("run.seeds", "duplicate seed");
    }
    if (r.shock_grid.empty()) ps.error("run.shock_grid", "at least one shock size required");
    for (std::size_t i = 0; i < r.shock_grid.size(); ++i) {
        const double s = r.shock_grid[i];
        if (!(s >= 0.0 && s <= 1.0)) ps.error(fmt::format("run.shock_grid[{}]", i), fmt::format("{} outside [0, 1]", s));
    }
    if (std::set<double>(r.shock_grid.begin(), r.shock_grid.end()).size() != r.shock_grid.size()) {
        ps.error("run.shock_grid", "duplicate shock size");
    }
}

void parse_output(Parser& ps, const YAML::Node& n, ScenarioConfig& c) {
    if (!ps.map(n, "output")) return;
    ps.allow(n, "output", {"directory", "formats"});
    ps.text(n, "directory", "output", c.output.directory);
    ps.list(n, "formats", "output", c.output.formats, "a format name");
    for (const auto& f : c.output.formats) {
        if (f != "csv") ps.error("output.formats", fmt::format("'{}' is not one of csv", f));
    }
}

ScenarioLoad parse_root(YAML::Node root, const fs::path& base_dir) {
    Parser ps;
    ScenarioConfig c;
    c.variants = {ProductConfig{}};
    if (!root || root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
    if (!root.IsMap()) return {std::nullopt, {"<root>: expected a mapping"}};
    const YAML::Node& croot = root;
    ps.allow(croot, "", {"schema_version", "population", "economy", "servicer", "products", "policy", "run", "output"});
    ps.integer(croot, "schema_version", "", c.schema_version);
    if (c.schema_version != 1) ps.error("schema_version", fmt::format("unsupported {}", c.schema_version));
    parse_population(ps, croot["population"], base_dir, c);
    parse_economy(ps, croot["economy"], c);
    parse_servicer(ps, croot["servicer"], c);
    parse_products(ps, croot["products"], c);
    parse_policy(ps, croot["policy"], c);
    parse_run(ps, croot["run"], c);
    parse_output(ps, croot["output"], c);

    if (c.shocks.eval_shock.month >= c.run.eval_months) {
        ps.error("economy.eval_shock.month",
                 fmt::format("{} must be < run.eval_months {}", c.shocks.eval_shock.month, c.run.eval_months));
    }
    if (ps.errors.empty()) {
        // Cross-check with the engine's own validation; anything it rejects
        // that the field checks above missed is still reported.
        for (const auto& v : c.variants) {
            try {
                c.simulation(c.run.seeds.front(), v).validate();
            } catch (const ConfigError& e) {
                ps.errors.push_back(e.what());
                break;
            }
        }
    }
    if (!ps.errors.empty()) return {std::nullopt, std::move(ps.errors)};
    return {std::move(c), {}};
}

bool is_index(std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char ch) { return ch >= '0' && ch <= '9'; });
}

void set_path(YAML::Node node, const std::vector<std::string>& keys, std::size_t at, const YAML::Node& value,
              std::string_view full) {
    const std::string& k = keys[at];
    const bool last = at + 1 == keys.size();
    if (node.IsSequence() && is_index(k)) {
        const std::size_t i = std::stoul(k);
        if (i >= node.size()) throw ConfigError(fmt::format("--set {}: index {} out of range", full, i));
        if (last) node[i] = value;
        else set_path(node[i], keys, at + 1, value, full);
        return;
    }
    if (!node.IsMap() && !node.IsNull()) {
        throw ConfigError(fmt::format("--set {}: '{}' is not a section", full, k));
    }
    if (last) {
        node[k] = value;
        return;
    }
    YAML::Node child = node[k];
    if (!child || child.IsNull()) {
        node[k] = YAML::Node(YAML::NodeType::Map);
        child = node[k];
    }
    set_path(child, keys, at + 1, value, full);
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error(fmt::format("cannot read '{}'", p.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Json table_json(const QuantileTable& t) { return Json{{"probs", t.probs}, {"values", t.values}}; }

Json distribution_json(const DistributionConfig& d) {
    Json j;
    j["schema_version"] = d.schema_version;
    j["income"] = table_json(d.income);
    for (const char* key : {"housing_ratio", "nonhousing_ratio", "savings"}) j[key] = Json::array();
    for (std::size_t q = 0; q < kQuintiles; ++q) {
        j["housing_ratio"].push_back(table_json(d.housing_ratio[q]));
        j["nonhousing_ratio"].push_back(table_json(d.nonhousing_ratio[q]));
        j["savings"].push_back(table_json(d.savings[q]));
    }
    j["max_expense_to_income"] = d.max_expense_to_income;
    j["gamma"] = {{"kind", static_cast<int>(d.gamma.kind)}, {"a", d.gamma.a}, {"b", d.gamma.b}, {"value", d.gamma.value}};
    Json terms = Json::array();
    for (const auto& t : d.loan.terms) terms.push_back({{"months", t.months}, {"weight", t.weight}});
    j["loan"] = {{"annual_rate", table_json(d.loan.annual_rate)}, {"terms", terms},
                 {"max_age_fraction", d.loan.max_age_fraction}};
    return j;
}

Json comparability(const ScenarioConfig& c) {
    Json j;
    j["population"] = distribution_json(c.population);
    j["n_borrowers"] = c.n_borrowers;
    j["seeds"] = c.run.seeds;
    j["eval_months"] = c.run.eval_months;
    j["eval_shock"] = {{"month", c.shocks.eval_shock.month},
                       {"direction", c.shocks.eval_shock.direction == ShockDirection::Reduce ? "reduce" : "increase"},
                       {"coverage", c.shocks.eval_shock.coverage}};
    j["h0"] = c.h0;
    j["hpi"] = {{"kind", static_cast<int>(c.hpi.kind)}, {"mu", c.hpi.mu}, {"sigma", c.hpi.sigma}};
    return j;
}

Json canonical(const ScenarioConfig& c) {
    Json j = comparability(c);
    j["schema_version"] = c.schema_version;
    const auto& s = c.shocks;
    j["train_shocks"] = {{"monthly_arrival_prob", s.train_monthly_arrival_prob}, {"magnitude_lo", s.magnitude_lo},
                         {"magnitude_hi", s.magnitude_hi}, {"allow_increase", s.allow_increase},
                         {"allow_reduce", s.allow_reduce}, {"duration_months", s.shock_duration_months}};
    const auto& v = c.servicer;
    j["servicer"] = {{"monthly_fee_rate", v.monthly_fee_rate},
                     {"advance_cap_payments", v.advance_cap_payments},
                     {"incentive_repayment", v.incentive_repayment.cents()},
                     {"incentive_forbearance", v.incentive_forbearance.cents()},
                     {"incentive_modification", v.incentive_modification.cents()},
                     {"foreclosure_trigger_months", v.foreclosure_trigger_months},
                     {"repayment_spread_months", v.repayment_spread_months},
                     {"forbearance_max_months", v.forbearance_max_months},
                     {"modification_term_extension_months", v.modification_term_extension_months}};
    Json variants = Json::array();
    for (const auto& p : c.variants) {
        Json menu = Json::array();
        for (const Money m : p.menu) menu.push_back(m.cents());
        variants.push_back({{"name", p.name}, {"mode", std::string(to_string(p.mode))},
                            {"amount", p.upfront_amount.cents()}, {"menu", menu}});
    }
    j["variants"] = variants;
    const auto& t = c.policy;
    j["policy"] = {{"learner", "tabular"},
                   {"sharing", c.sharing == LearnerSharing::PerQuintile ? "per_quintile" : "individual"},
                   {"equity_basis", c.equity_basis == EquityBasis::TotalScheduled ? "total_scheduled" : "principal"},
                   {"alpha", t.alpha},
                   {"epsilon_start", t.epsilon_start},
                   {"epsilon_end", t.epsilon_end},
                   {"epsilon_decay_steps", t.epsilon_decay_steps},
                   {"discount", t.discount},
                   {"tie_margin", t.tie_margin},
                   {"unseen_state_value", t.unseen_state_value}};
    j["train"] = {{"episodes", c.run.train_episodes}, {"months", c.run.train_months},
                  {"snapshot_dir", c.run.snapshot_dir}};
    j["shock_grid"] = c.run.shock_grid;
    return j;
}

std::string fmt_double(double x) { return fmt::format("{}", x); }

void emit_table(std::ostringstream& out, const QuantileTable& t, const char* indent) {
    out << indent << "probs: [";
    for (std::size_t i = 0; i < t.probs.size(); ++i) out << (i ? ", " : "") << fmt_double(t.probs[i]);
    out << "]\n" << indent << "values: [";
    for (std::size_t i = 0; i < t.values.size(); ++i) out << (i ? ", " : "") << fmt_double(t.values[i]);
    out << "]\n";
}

}  // namespace

SimulationConfig ScenarioConfig::simulation(std::uint64_t seed, const ProductConfig& product) const {
    SimulationConfig s;
    s.episode.n_borrowers = n_borrowers;
    s.episode.train_episodes = run.train_episodes;
    s.episode.train_months = run.train_months;
    s.episode.eval_months = run.eval_months;
    s.episode.seed = seed;
    s.population = population;
    s.hpi = hpi;
    s.h0 = h0;
    s.shocks = shocks;
    s.servicer = servicer;
    s.product = product;
    s.policy = policy;
    s.sharing = sharing;
    s.equity_basis = equity_basis;
    return s;
}

const ProductConfig* ScenarioConfig::find_variant(std::string_view name) const {
    for (const auto& v : variants) {
        if (v.name == name) return &v;
    }
    return nullptr;
}

void apply_override(YAML::Node& root, std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos || eq == 0) {
        throw ConfigError(fmt::format("--set '{}': expected path=value", assignment));
    }
    const std::string path(assignment.substr(0, eq));
    const std::string raw(assignment.substr(eq + 1));
    std::vector<std::string> keys;
    std::stringstream ss(path);
    for (std::string k; std::getline(ss, k, '.');) {
        if (k.empty()) throw ConfigError(fmt::format("--set '{}': empty path segment", assignment));
        keys.push_back(k);
    }
    if (keys.empty()) throw ConfigError(fmt::format("--set '{}': empty path", assignment));
    YAML::Node value;
    try {
        value = YAML::Load(raw);
    } catch (const YAML::Exception& e) {
        throw ConfigError(fmt::format("--set '{}': value does not parse: {}", assignment, e.what()));
    }
    if (!root || root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
    set_path(root, keys, 0, value, path);
}

ScenarioLoad load_scenario_text(std::string_view yaml, const fs::path& base_dir, std::span<const std::string> overrides) {
    YAML::Node root;
    try {
        root = YAML::Load(std::string(yaml));
    } catch (const YAML::Exception& e) {
        return {std::nullopt, {fmt::format("<yaml>: {}", e.what())}};
    }
    std::vector<std::string> errors;
    for (const auto& o : overrides) {
        try {
            apply_override(root, o);
        } catch (const ConfigError& e) {
            errors.push_back(e.what());
        }
    }
    if (!errors.empty()) return {std::nullopt, std::move(errors)};
    return parse_root(root, base_dir);
}

ScenarioLoad load_scenario(const fs::path& file, std::span<const std::string> overrides) {
    std::string text;
    try {
        text = read_file(file);
    } catch (const std::exception& e) {
        return {std::nullopt, {e.what()}};
    }
    return load_scenario_text(text, file.parent_path(), overrides);
}

std::string canonical_json(const ScenarioConfig& config) { return canonical(config).dump(); }
std::string comparability_json(const ScenarioConfig& config) { return comparability(config).dump(); }
std::uint64_t config_hash(const ScenarioConfig& config) { return fnv1a(canonical_json(config)); }
std::uint64_t comparability_hash(const ScenarioConfig& config) { return fnv1a(comparability_json(config)); }
std::string hash_hex(std::uint64_t h) { return fmt::format("{:016x}", h); }

DistributionConfig load_distribution_file(const fs::path& file) {
    YAML::Node doc;
    try {
        doc = YAML::Load(read_file(file));
    } catch (const YAML::Exception& e) {
        throw ConfigError(fmt::format("'{}': {}", file.string(), e.what()));
    }
    Parser ps;
    DistributionConfig c = default_distribution_config();
    parse_distribution(ps, doc, "", c);
    if (!ps.errors.empty()) {
        std::string msg = fmt::format("'{}':", file.string());
        for (const auto& e : ps.errors) msg += "\n  " + e;
        throw ConfigError(msg);
    }
    return c;
}

std::string distribution_to_yaml(const DistributionConfig& c) {
    std::ostringstream out;
    out << "schema_version: " << c.schema_version << "\n";
    out << "# Monthly income in dollars (inverse CDF knots).\nincome:\n";
    emit_table(out, c.income, "  ");
    const std::pair<const char*, const std::array<QuantileTable, kQuintiles>*> groups[] = {
        {"# Scheduled housing payment / income, one table per income quintile.\nhousing_ratio", &c.housing_ratio},
        {"# Non-housing spending / income.\nnonhousing_ratio", &c.nonhousing_ratio},
        {"# Liquid savings in dollars.\nsavings", &c.savings},
    };
    for (const auto& [head, tables] : groups) {
        out << head << ":\n";
        for (const auto& t : *tables) {
            std::ostringstream item;
            emit_table(item, t, "    ");
            std::string s = item.str();
            s.replace(0, 4, "  - ");
            out << s;
        }
    }
    out << "max_expense_to_income: " << fmt_double(c.max_expense_to_income) << "\n";
    out << "gamma:\n";
    switch (c.gamma.kind) {
        case GammaDistribution::Kind::Beta:
            out << "  kind: beta\n  a: " << fmt_double(c.gamma.a) << "\n  b: " << fmt_double(c.gamma.b) << "\n";
            break;
        case GammaDistribution::Kind::Uniform: out << "  kind: uniform\n"; break;
        case GammaDistribution::Kind::Fixed: out << "  kind: fixed\n  value: " << fmt_double(c.gamma.value) << "\n"; break;
    }
    out << "loan:\n  annual_rate:\n";
    emit_table(out, c.loan.annual_rate, "    ");
    out << "  terms:\n";
    for (const auto& t : c.loan.terms) out << "    - {months: " << t.months << ", weight: " << fmt_double(t.weight) << "}\n";
    out << "  max_age_fraction: " << fmt_double(c.loan.max_age_fraction) << "\n";
    return out.str();
}

}  // namespace mabm
