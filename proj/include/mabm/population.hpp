#pragma once

// Heterogeneous borrower sampling. Income is drawn first; housing ratio,
// non-housing ratio and savings are drawn from tables conditioned on the
// income's quintile bucket.

#include <array>
#include <string>
#include <vector>

#include "mabm/domain.hpp"
#include "mabm/finance.hpp"
#include "mabm/rng.hpp"

namespace mabm {

/// Piecewise-linear inverse CDF. `probs` runs from 0 to 1; `values` are the
/// matching quantiles and must be strictly increasing.
struct QuantileTable {
    std::vector<double> probs;
    std::vector<double> values;

    static QuantileTable evenly_spaced(std::vector<double> values);

    double quantile(double u) const;
    double cdf(double x) const;
    /// Mean of the piecewise-linear distribution.
    double mean() const;
};

struct GammaDistribution {
    enum class Kind { Beta, Uniform, Fixed };
    Kind kind = Kind::Beta;
    double a = 2.0;
    double b = 2.0;
    double value = 0.5;  // Fixed only
};

struct TermOption {
    int months = 360;
    double weight = 1.0;
};

struct LoanDistribution {
    QuantileTable annual_rate;
    std::vector<TermOption> terms;
    /// Loan age at t=0 is uniform on [0, max_age_fraction * term] months.
    double max_age_fraction = 0.5;
};

struct DistributionConfig {
    int schema_version = 1;
    QuantileTable income;                               // monthly dollars
    std::array<QuantileTable, kQuintiles> housing_ratio;     // payment / income
    std::array<QuantileTable, kQuintiles> nonhousing_ratio;  // expenses / income
    std::array<QuantileTable, kQuintiles> savings;           // dollars
    /// Underwriting-style cap on (housing + non-housing) / income at t=0.
    double max_expense_to_income = 0.97;
    GammaDistribution gamma;
    LoanDistribution loan;
};

/// Synthetic defaults with plausible 2020-era magnitudes. NOT census data.
DistributionConfig default_distribution_config();

/// Empty iff every invariant holds; each entry names the offending field.
std::vector<std::string> validate_config(const DistributionConfig& config);

struct BorrowerProfile {
    std::size_t id = 0;
    Money monthly_income;
    Money housing_expense;  // = loan.scheduled_payment at t=0
    Money nonhousing_expense;
    Money savings;
    double gamma = 0.5;
    IncomeQuintile quintile{1};
    /// Bucket of the income in the config's distribution (0..4); used for
    /// the conditional draws. `quintile` is rank-based within the sample.
    int income_bucket = 0;
    Loan loan;
};

/// Throws ConfigError (listing violations) on a malformed config or n < 5.
std::vector<BorrowerProfile> sample_population(const DistributionConfig& config, int n, Rng& rng);

}  // namespace mabm
