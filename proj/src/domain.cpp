#include "mabm/domain.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>

#include <fmt/format.h>

namespace mabm {

namespace {

constexpr double kMaxDollars = 1e12;
constexpr std::int64_t kMaxCents = 100'000'000'000'000;  // 10^12 dollars

}  // namespace

double round_half_even(double x) {
    // nearbyint honours the current rounding mode, which is round-to-nearest
    // ties-to-even unless someone changed it.
    return std::nearbyint(x);
}

Money Money::from_dollars(double dollars) {
    return Money{static_cast<std::int64_t>(round_half_even(dollars * 100.0))};
}

Money Money::scaled(double factor) const {
    return Money{static_cast<std::int64_t>(round_half_even(static_cast<double>(cents_) * factor))};
}

std::string Money::to_string() const {
    const std::int64_t mag = cents_ < 0 ? -cents_ : cents_;
    return fmt::format("{}{}.{:02d}", cents_ < 0 ? "-" : "", mag / 100, mag % 100);
}

Money money_from_dollars(std::string_view text) {
    std::string_view s = text;
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
    if (s.empty()) throw ConfigError("empty money amount");

    bool negative = false;
    if (s.front() == '-' || s.front() == '+') {
        negative = s.front() == '-';
        s.remove_prefix(1);
    }
    if (!s.empty() && s.front() == '$') s.remove_prefix(1);

    std::int64_t whole = 0;
    std::string frac;
    bool seen_dot = false;
    bool any_digit = false;
    for (char c : s) {
        if (c == ',' && !seen_dot) continue;
        if (c == '.' && !seen_dot) {
            seen_dot = true;
            continue;
        }
        if (c < '0' || c > '9') throw ConfigError(fmt::format("malformed money amount '{}'", text));
        any_digit = true;
        if (seen_dot) {
            frac.push_back(c);
        } else {
            whole = whole * 10 + (c - '0');
            if (whole >= 1'000'000'000'000) {
                throw ConfigError(fmt::format("money amount '{}' overflows (|d| must be < 10^12)", text));
            }
        }
    }
    if (!any_digit) throw ConfigError(fmt::format("malformed money amount '{}'", text));

    std::int64_t cents = whole * 100;
    if (!frac.empty()) cents += (frac[0] - '0') * 10;
    if (frac.size() > 1) cents += frac[1] - '0';
    if (frac.size() > 2) {
        // Sub-cent remainder compared against exactly one half.
        const std::string_view rest(frac.data() + 2, frac.size() - 2);
        int cmp = 0;  // -1 below half, 0 exactly half, +1 above
        if (rest[0] > '5') {
            cmp = 1;
        } else if (rest[0] < '5') {
            cmp = -1;
        } else {
            cmp = std::any_of(rest.begin() + 1, rest.end(), [](char c) { return c != '0'; }) ? 1 : 0;
        }
        if (cmp > 0 || (cmp == 0 && (cents % 2) != 0)) ++cents;
    }
    if (cents >= kMaxCents) throw ConfigError(fmt::format("money amount '{}' overflows (|d| must be < 10^12)", text));
    return Money::from_cents(negative ? -cents : cents);
}

Money money_from_dollars(double dollars) {
    if (!std::isfinite(dollars) || std::fabs(dollars) >= kMaxDollars) {
        throw ConfigError(fmt::format("money amount {} overflows (|d| must be < 10^12)", dollars));
    }
    return Money::from_dollars(dollars);
}

Money sum(std::span<const Money> amounts) {
    return std::accumulate(amounts.begin(), amounts.end(), Money{});
}

Rate Rate::of(double v) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError(fmt::format("rate must be >= 0, got {}", v));
    return Rate{v};
}

IncomeQuintile::IncomeQuintile(int index) : index_(index) {
    if (index < 1 || index > 5) throw ConfigError(fmt::format("quintile index {} outside 1..5", index));
}

std::vector<IncomeQuintile> assign_quintiles(std::span<const Money> incomes) {
    const std::size_t n = incomes.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return incomes[a] < incomes[b]; });
    std::vector<IncomeQuintile> out(n, IncomeQuintile{1});
    for (std::size_t rank = 0; rank < n; ++rank) {
        out[order[rank]] = IncomeQuintile{static_cast<int>(rank * kQuintiles / n) + 1};
    }
    return out;
}

}  // namespace mabm
