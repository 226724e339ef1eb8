#pragma once

// Core value types shared by every module: exact currency, rates, income
// quintiles and the simulation clock.

#include <compare>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mabm {

/// Raised for invalid user-supplied configuration or out-of-range inputs.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when an operation is applied to an entity in the wrong state
/// (e.g. a relief plan on a foreclosed loan).
class StateError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Round to the nearest integer, ties to even.
double round_half_even(double x);

/// Signed fixed-point currency in cents. All ledger arithmetic goes through
/// this type; doubles only appear in rate/utility computations and are
/// rounded back with round-half-even at the boundary.
class Money {
public:
    constexpr Money() = default;

    static constexpr Money from_cents(std::int64_t cents) { return Money{cents}; }

    /// Nearest cent of a computed dollar value (half-even on the cent grid).
    static Money from_dollars(double dollars);

    constexpr std::int64_t cents() const { return cents_; }
    double dollars() const { return static_cast<double>(cents_) / 100.0; }

    /// this * factor, rounded half-even to the cent.
    Money scaled(double factor) const;

    constexpr bool is_zero() const { return cents_ == 0; }
    constexpr bool is_negative() const { return cents_ < 0; }
    constexpr bool is_positive() const { return cents_ > 0; }

    constexpr Money operator-() const { return Money{-cents_}; }
    constexpr Money& operator+=(Money o) { cents_ += o.cents_; return *this; }
    constexpr Money& operator-=(Money o) { cents_ -= o.cents_; return *this; }
    friend constexpr Money operator+(Money a, Money b) { return Money{a.cents_ + b.cents_}; }
    friend constexpr Money operator-(Money a, Money b) { return Money{a.cents_ - b.cents_}; }
    friend constexpr Money operator*(Money a, std::int64_t k) { return Money{a.cents_ * k}; }
    friend constexpr Money operator*(std::int64_t k, Money a) { return Money{a.cents_ * k}; }
    friend constexpr auto operator<=>(Money, Money) = default;
    friend constexpr bool operator==(Money, Money) = default;

    /// "-1234.56" style, always two decimals.
    std::string to_string() const;

private:
    constexpr explicit Money(std::int64_t cents) : cents_(cents) {}
    std::int64_t cents_ = 0;
};

constexpr Money min(Money a, Money b) { return b < a ? b : a; }
constexpr Money max(Money a, Money b) { return a < b ? b : a; }

/// Exact decimal parse ("1234.5", "-0.005", "1e3" is rejected). Sub-cent
/// digits round half-even. |d| >= 10^12 raises ConfigError.
Money money_from_dollars(std::string_view decimal);

/// Double overload for computed values; same range check.
Money money_from_dollars(double dollars);

Money sum(std::span<const Money> amounts);

/// Dimensionless fraction per period. The basis (annual or monthly) is
/// carried by the name of the field that holds it.
struct Rate {
    double value = 0.0;

    static Rate of(double v);
    friend bool operator==(Rate, Rate) = default;
};

class IncomeQuintile {
public:
    explicit IncomeQuintile(int index);
    int index() const { return index_; }
    /// 0-based slot for per-quintile arrays.
    std::size_t slot() const { return static_cast<std::size_t>(index_ - 1); }
    friend bool operator==(IncomeQuintile, IncomeQuintile) = default;

private:
    int index_;
};

inline constexpr std::size_t kQuintiles = 5;

/// Rank-based quintile labels; group sizes differ by at most one. Ties are
/// broken by position so the result is deterministic.
std::vector<IncomeQuintile> assign_quintiles(std::span<const Money> incomes);

enum class Phase { Train, Evaluate };

struct SimClock {
    int month = 0;
    Phase phase = Phase::Train;

    void advance() { ++month; }
};

}  // namespace mabm
