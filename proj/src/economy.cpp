#include "mabm/economy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

namespace mabm {

void validate(const ShockProcess& p) {
    auto in_unit = [](double x) { return x >= 0.0 && x <= 1.0; };
    if (!in_unit(p.train_monthly_arrival_prob)) {
        throw ConfigError(fmt::format("train_monthly_arrival_prob {} outside [0, 1]", p.train_monthly_arrival_prob));
    }
    if (!(p.magnitude_lo >= 0.0 && p.magnitude_lo <= p.magnitude_hi && p.magnitude_hi <= 1.0)) {
        throw ConfigError(fmt::format("train magnitude range [{}, {}] must satisfy 0 <= lo <= hi <= 1",
                                      p.magnitude_lo, p.magnitude_hi));
    }
    if (p.shock_duration_months < 0) throw ConfigError("shock_duration_months must be >= 0");
    if (!in_unit(p.eval_shock.coverage)) {
        throw ConfigError(fmt::format("eval_shock.coverage {} outside [0, 1]", p.eval_shock.coverage));
    }
    if (p.eval_shock.relative_size < 0.0 ||
        (p.eval_shock.direction == ShockDirection::Reduce && p.eval_shock.relative_size > 1.0)) {
        throw ConfigError(fmt::format("eval_shock.relative_size {} invalid", p.eval_shock.relative_size));
    }
    if (p.eval_shock.month < 0) throw ConfigError("eval_shock.month must be >= 0");
}

EconomyState step_hpi(EconomyState state, Rng& rng) {
    switch (state.hpi_path.kind) {
        case HpiKind::Constant:
            break;
        case HpiKind::Drift:
            state.h += state.hpi_path.mu;
            break;
        case HpiKind::GeometricWalk:
            state.h *= std::exp(state.hpi_path.mu + state.hpi_path.sigma * standard_normal(rng));
            break;
    }
    // h stays strictly positive.
    state.h = std::max(state.h, 1e-6);
    return state;
}

std::vector<ShockEvent> sample_train_shocks(const ShockProcess& process, std::size_t borrower_count, Rng& rng) {
    std::vector<ShockEvent> events;
    const double p = process.train_monthly_arrival_prob;
    if (p <= 0.0 || (!process.allow_increase && !process.allow_reduce)) return events;
    for (std::size_t i = 0; i < borrower_count; ++i) {
        if (uniform01(rng) >= p) continue;
        const double mag = process.magnitude_lo + (process.magnitude_hi - process.magnitude_lo) * uniform01(rng);
        bool reduce = process.allow_reduce;
        if (process.allow_increase && process.allow_reduce) reduce = uniform01(rng) < 0.5;
        events.push_back({i, reduce ? -mag : mag});
    }
    return events;
}

Money shocked_income(Money income, double signed_fraction) {
    return max(income.scaled(1.0 + signed_fraction), Money{});
}

std::vector<std::size_t> apply_eval_shock(std::span<Money> incomes, const EvalShock& shock, Rng& rng) {
    if (!(shock.coverage >= 0.0 && shock.coverage <= 1.0)) {
        throw ConfigError(fmt::format("eval_shock.coverage {} outside [0, 1]", shock.coverage));
    }
    const std::size_t n = incomes.size();
    const auto k = static_cast<std::size_t>(round_half_even(shock.coverage * static_cast<double>(n)));

    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (k < n) {
        // Partial Fisher-Yates: first k slots are the sample.
        for (std::size_t i = 0; i < k; ++i) {
            const std::size_t j = i + uniform_index(rng, n - i);
            std::swap(idx[i], idx[j]);
        }
        idx.resize(k);
        std::sort(idx.begin(), idx.end());
    }
    const double f = signed_fraction(shock);
    for (std::size_t i : idx) incomes[i] = shocked_income(incomes[i], f);
    return idx;
}

}  // namespace mabm
