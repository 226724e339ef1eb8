#pragma once

// Exogenous economy: house price index path and income shocks.

#include <span>
#include <vector>

#include "mabm/domain.hpp"
#include "mabm/rng.hpp"

namespace mabm {

enum class HpiKind { Constant, Drift, GeometricWalk };

struct HpiPath {
    HpiKind kind = HpiKind::Constant;
    double mu = 0.0;     // per month; additive for Drift, log-drift for GeometricWalk
    double sigma = 0.0;  // GeometricWalk only
};

enum class ShockMode { TrainRandom, EvalDeterministic };
enum class ShockDirection { Increase, Reduce };

struct EvalShock {
    int month = 1;
    double relative_size = 0.0;
    ShockDirection direction = ShockDirection::Reduce;
    double coverage = 1.0;  // fraction of borrowers hit
};

struct ShockProcess {
    ShockMode mode = ShockMode::TrainRandom;
    double train_monthly_arrival_prob = 1.0 / 12.0;
    double magnitude_lo = 0.05;
    double magnitude_hi = 0.5;
    bool allow_increase = true;
    bool allow_reduce = true;
    /// 0 = permanent level change; otherwise income reverts after this many months.
    int shock_duration_months = 0;
    EvalShock eval_shock;
};

/// Throws ConfigError naming the first bad field.
void validate(const ShockProcess& process);

struct EconomyState {
    double h = 1.0;
    HpiPath hpi_path;
    ShockProcess shock_process;
};

/// Advance the house price index one month. Constant leaves h unchanged.
EconomyState step_hpi(EconomyState state, Rng& rng);

struct ShockEvent {
    std::size_t borrower = 0;
    double signed_fraction = 0.0;  // +0.2 = income up 20%, -0.2 = down 20%

    friend bool operator==(const ShockEvent&, const ShockEvent&) = default;
};

/// One month of training shocks: an independent Bernoulli arrival per
/// borrower, magnitude uniform on [lo, hi], sign uniform over allowed signs.
std::vector<ShockEvent> sample_train_shocks(const ShockProcess& process, std::size_t borrower_count, Rng& rng);

/// income * (1 + signed_fraction), floored at zero.
Money shocked_income(Money income, double signed_fraction);

/// Applies the evaluation shock to round(coverage * n) borrowers sampled
/// without replacement (all of them when coverage = 1). Returns the sorted
/// indices that were shocked.
std::vector<std::size_t> apply_eval_shock(std::span<Money> incomes, const EvalShock& shock, Rng& rng);

inline double signed_fraction(const EvalShock& shock) {
    return shock.direction == ShockDirection::Reduce ? -shock.relative_size : shock.relative_size;
}

}  // namespace mabm
