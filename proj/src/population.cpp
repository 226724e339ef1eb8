#include "mabm/population.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace mabm {

QuantileTable QuantileTable::evenly_spaced(std::vector<double> values) {
    QuantileTable t;
    const std::size_t k = values.size();
    for (std::size_t i = 0; i < k; ++i) t.probs.push_back(k == 1 ? 1.0 : static_cast<double>(i) / (k - 1));
    t.values = std::move(values);
    return t;
}

double QuantileTable::quantile(double u) const {
    u = std::clamp(u, 0.0, 1.0);
    const auto it = std::upper_bound(probs.begin(), probs.end(), u);
    if (it == probs.begin()) return values.front();
    if (it == probs.end()) return values.back();
    const std::size_t hi = static_cast<std::size_t>(it - probs.begin());
    const std::size_t lo = hi - 1;
    const double w = (u - probs[lo]) / (probs[hi] - probs[lo]);
    return values[lo] + w * (values[hi] - values[lo]);
}

double QuantileTable::cdf(double x) const {
    if (x <= values.front()) return probs.front();
    if (x >= values.back()) return probs.back();
    const auto it = std::upper_bound(values.begin(), values.end(), x);
    const std::size_t hi = static_cast<std::size_t>(it - values.begin());
    const std::size_t lo = hi - 1;
    const double w = (x - values[lo]) / (values[hi] - values[lo]);
    return probs[lo] + w * (probs[hi] - probs[lo]);
}

double QuantileTable::mean() const {
    double m = 0.0;
    for (std::size_t i = 1; i < probs.size(); ++i) {
        m += (probs[i] - probs[i - 1]) * 0.5 * (values[i] + values[i - 1]);
    }
    return m;
}

DistributionConfig default_distribution_config() {
    using QT = QuantileTable;
    DistributionConfig c;
    c.income = QT{{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0},
                  {2200, 3600, 4600, 5600, 6600, 7800, 9200, 10800, 13000, 16500, 32000}};
    c.housing_ratio = {QT::evenly_spaced({0.20, 0.30, 0.35, 0.40, 0.50}),
                       QT::evenly_spaced({0.15, 0.23, 0.28, 0.33, 0.42}),
                       QT::evenly_spaced({0.12, 0.18, 0.22, 0.27, 0.35}),
                       QT::evenly_spaced({0.09, 0.15, 0.18, 0.22, 0.30}),
                       QT::evenly_spaced({0.06, 0.11, 0.14, 0.18, 0.28})};
    c.nonhousing_ratio = {QT::evenly_spaced({0.44, 0.52, 0.57, 0.61, 0.70}),
                          QT::evenly_spaced({0.40, 0.48, 0.53, 0.58, 0.66}),
                          QT::evenly_spaced({0.36, 0.44, 0.49, 0.54, 0.62}),
                          QT::evenly_spaced({0.32, 0.40, 0.45, 0.50, 0.58}),
                          QT::evenly_spaced({0.25, 0.34, 0.40, 0.46, 0.56})};
    c.savings = {QT::evenly_spaced({0, 300, 1200, 3000, 12000}),
                 QT::evenly_spaced({0, 800, 2500, 6000, 20000}),
                 QT::evenly_spaced({0, 1500, 5000, 12000, 35000}),
                 QT::evenly_spaced({100, 3000, 9000, 20000, 60000}),
                 QT::evenly_spaced({500, 6000, 18000, 40000, 120000})};
    c.loan.annual_rate = QT::evenly_spaced({0.025, 0.030, 0.035, 0.040, 0.055});
    c.loan.terms = {{360, 0.8}, {180, 0.2}};
    return c;
}

namespace {

void check_table(const QuantileTable& t, const std::string& name, double lo, double hi,
                 std::vector<std::string>& out) {
    if (t.values.size() < 2 || t.values.size() != t.probs.size()) {
        out.push_back(fmt::format("{}: needs >= 2 quantiles with matching probs", name));
        return;
    }
    if (t.probs.front() != 0.0 || t.probs.back() != 1.0) {
        out.push_back(fmt::format("{}: probs must run from 0 to 1", name));
    }
    for (std::size_t i = 1; i < t.probs.size(); ++i) {
        if (!(t.probs[i] > t.probs[i - 1])) {
            out.push_back(fmt::format("{}: probs not strictly increasing", name));
            break;
        }
    }
    for (std::size_t i = 1; i < t.values.size(); ++i) {
        if (!(t.values[i] > t.values[i - 1])) {
            out.push_back(fmt::format("{}: quantile table not strictly increasing", name));
            break;
        }
    }
    for (double v : t.values) {
        if (!(v >= lo && v <= hi)) {
            out.push_back(fmt::format("{}: value {} outside [{}, {}]", name, v, lo, hi));
            break;
        }
    }
}

}  // namespace

std::vector<std::string> validate_config(const DistributionConfig& c) {
    std::vector<std::string> out;
    if (c.schema_version != 1) out.push_back(fmt::format("schema_version: unsupported {}", c.schema_version));
    check_table(c.income, "income", 0.0, 1e9, out);
    for (std::size_t q = 0; q < kQuintiles; ++q) {
        check_table(c.housing_ratio[q], fmt::format("housing_ratio[{}]", q + 1), 0.0, 1.5, out);
        check_table(c.nonhousing_ratio[q], fmt::format("nonhousing_ratio[{}]", q + 1), 0.0, 1.5, out);
        check_table(c.savings[q], fmt::format("savings[{}]", q + 1), 0.0, 1e9, out);
        if (!c.housing_ratio[q].values.empty() && c.housing_ratio[q].values.front() <= 0.0) {
            out.push_back(fmt::format("housing_ratio[{}]: ratios must be > 0 (every borrower has a mortgage)", q + 1));
        }
    }
    if (!(c.max_expense_to_income > 0.0 && c.max_expense_to_income <= 1.5)) {
        out.push_back("max_expense_to_income: must be in (0, 1.5]");
    }
    switch (c.gamma.kind) {
        case GammaDistribution::Kind::Beta:
            if (!(c.gamma.a > 0.0 && c.gamma.b > 0.0)) out.push_back("gamma: beta parameters must be > 0");
            break;
        case GammaDistribution::Kind::Fixed:
            if (!(c.gamma.value >= 0.0 && c.gamma.value <= 1.0)) out.push_back("gamma: fixed value outside [0, 1]");
            break;
        case GammaDistribution::Kind::Uniform:
            break;
    }
    check_table(c.loan.annual_rate, "loan.annual_rate", 0.0, 0.5, out);
    if (c.loan.terms.empty()) out.push_back("loan.terms: at least one term required");
    for (const auto& t : c.loan.terms) {
        if (t.months <= 0 || !(t.weight > 0.0)) {
            out.push_back("loan.terms: months and weight must be > 0");
            break;
        }
    }
    if (!(c.loan.max_age_fraction >= 0.0 && c.loan.max_age_fraction < 1.0)) {
        out.push_back("loan.max_age_fraction: must be in [0, 1)");
    }
    return out;
}

namespace {

double draw_gamma(const GammaDistribution& g, Rng& rng) {
    switch (g.kind) {
        case GammaDistribution::Kind::Beta: return beta_sample(rng, g.a, g.b);
        case GammaDistribution::Kind::Uniform: return uniform01(rng);
        case GammaDistribution::Kind::Fixed: return g.value;
    }
    return 0.5;
}

int draw_term(const std::vector<TermOption>& terms, Rng& rng) {
    double total = 0.0;
    for (const auto& t : terms) total += t.weight;
    double u = uniform01(rng) * total;
    for (const auto& t : terms) {
        if (u < t.weight) return t.months;
        u -= t.weight;
    }
    return terms.back().months;
}

}  // namespace

std::vector<BorrowerProfile> sample_population(const DistributionConfig& config, int n, Rng& rng) {
    if (n < 5) throw ConfigError(fmt::format("population size {} < 5", n));
    if (auto v = validate_config(config); !v.empty()) {
        std::string msg = "invalid distribution config:";
        for (const auto& s : v) msg += "\n  " + s;
        throw ConfigError(msg);
    }

    std::vector<BorrowerProfile> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        BorrowerProfile b;
        b.id = static_cast<std::size_t>(i);
        const double u_income = uniform01(rng);
        b.income_bucket = std::min(static_cast<int>(u_income * kQuintiles), static_cast<int>(kQuintiles) - 1);
        const auto q = static_cast<std::size_t>(b.income_bucket);
        b.monthly_income = Money::from_dollars(config.income.quantile(u_income));

        const double pti = config.housing_ratio[q].quantile(uniform01(rng));
        const double nh_ratio = config.nonhousing_ratio[q].quantile(uniform01(rng));
        b.savings = Money::from_dollars(config.savings[q].quantile(uniform01(rng)));
        b.gamma = std::clamp(draw_gamma(config.gamma, rng), 0.0, 1.0);

        const Rate rate{config.loan.annual_rate.quantile(uniform01(rng))};
        const int term = draw_term(config.loan.terms, rng);
        const auto max_age = static_cast<std::uint64_t>(config.loan.max_age_fraction * term);
        const int age = static_cast<int>(uniform_index(rng, max_age + 1));

        // Back-solve the loan so its level payment matches the drawn ratio.
        const Money target_payment = max(b.monthly_income.scaled(pti), Money::from_cents(100));
        const Money principal = principal_for_payment(target_payment, rate, term);
        b.loan = season_loan(originate_loan(principal, rate, term), age);
        b.housing_expense = b.loan.scheduled_payment;

        const double housing_share = b.housing_expense.dollars() / std::max(b.monthly_income.dollars(), 1.0);
        const double nh = std::max(0.0, std::min(nh_ratio, config.max_expense_to_income - housing_share));
        b.nonhousing_expense = b.monthly_income.scaled(nh);
        out.push_back(std::move(b));
    }

    std::vector<Money> incomes;
    incomes.reserve(out.size());
    for (const auto& b : out) incomes.push_back(b.monthly_income);
    const auto quintiles = assign_quintiles(incomes);
    for (std::size_t i = 0; i < out.size(); ++i) out[i].quintile = quintiles[i];
    return out;
}

}  // namespace mabm
