#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <vector>

#include "mabm/domain.hpp"

using namespace mabm;

TEST(MoneyParse, WholeDollars) { EXPECT_EQ(money_from_dollars("1000.00").cents(), 100000); }

TEST(MoneyParse, Zero) {
    EXPECT_EQ(money_from_dollars("0").cents(), 0);
    EXPECT_EQ(money_from_dollars(0.0).cents(), 0);
}

// Half a cent sits exactly between 0 and 1; the even neighbour is 0.
TEST(MoneyParse, SubCentRoundsHalfEven) {
    EXPECT_EQ(money_from_dollars("0.005").cents(), 0);
    EXPECT_EQ(money_from_dollars("0.015").cents(), 2);
    EXPECT_EQ(money_from_dollars("0.025").cents(), 2);
    EXPECT_EQ(money_from_dollars("0.0251").cents(), 3);
    EXPECT_EQ(money_from_dollars("0.0049999").cents(), 0);
    EXPECT_EQ(money_from_dollars("-0.015").cents(), -2);
    EXPECT_EQ(money_from_dollars("12.345").cents(), 1234);
    EXPECT_EQ(money_from_dollars("12.355").cents(), 1236);
}

TEST(MoneyParse, AcceptsSeparatorsAndSign) {
    EXPECT_EQ(money_from_dollars("$1,234.5").cents(), 123450);
    EXPECT_EQ(money_from_dollars("-7").cents(), -700);
    EXPECT_EQ(money_from_dollars(" +3.10 ").cents(), 310);
}

TEST(MoneyParse, RejectsMalformedAndOverflow) {
    EXPECT_THROW(money_from_dollars("1e3"), ConfigError);
    EXPECT_THROW(money_from_dollars(""), ConfigError);
    EXPECT_THROW(money_from_dollars("abc"), ConfigError);
    EXPECT_THROW(money_from_dollars("1000000000000"), ConfigError);
    EXPECT_THROW(money_from_dollars("-1000000000000"), ConfigError);
    EXPECT_NO_THROW(money_from_dollars("999999999999.99"));
    EXPECT_THROW(money_from_dollars(1e12), ConfigError);
    EXPECT_THROW(money_from_dollars(std::nan("")), ConfigError);
}

TEST(Money, RoundHalfEven) {
    EXPECT_EQ(round_half_even(2.5), 2.0);
    EXPECT_EQ(round_half_even(3.5), 4.0);
    EXPECT_EQ(round_half_even(-2.5), -2.0);
    EXPECT_EQ(round_half_even(2.6), 3.0);
    EXPECT_EQ(Money::from_cents(5).scaled(0.5).cents(), 2);
    EXPECT_EQ(Money::from_cents(7).scaled(0.5).cents(), 4);
}

TEST(Money, ToString) {
    EXPECT_EQ(Money::from_cents(-123456).to_string(), "-1234.56");
    EXPECT_EQ(Money::from_cents(5).to_string(), "0.05");
    EXPECT_EQ(Money{}.to_string(), "0.00");
    EXPECT_EQ(Money::from_cents(-5).to_string(), "-0.05");
}

TEST(Money, Arithmetic) {
    const Money a = Money::from_cents(150);
    const Money b = Money::from_cents(-40);
    EXPECT_EQ((a + b).cents(), 110);
    EXPECT_EQ((a - b).cents(), 190);
    EXPECT_EQ((a * 3).cents(), 450);
    EXPECT_EQ(min(a, b), b);
    EXPECT_EQ(max(a, b), a);
    EXPECT_TRUE(b.is_negative());
    EXPECT_TRUE(Money{}.is_zero());
}

// Property: the total of a transaction list does not depend on its order.
TEST(MoneyProperty, SumInvariantUnderPermutation) {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<std::int64_t> cents(-10'000'000, 10'000'000);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<Money> xs(1 + trial % 50);
        for (auto& x : xs) x = Money::from_cents(cents(rng));
        std::int64_t expect = 0;
        for (const Money x : xs) expect += x.cents();
        for (int p = 0; p < 5; ++p) {
            std::shuffle(xs.begin(), xs.end(), rng);
            ASSERT_EQ(sum(xs).cents(), expect);
        }
    }
}

TEST(Rate, RejectsNegative) {
    EXPECT_EQ(Rate::of(0.005).value, 0.005);
    EXPECT_THROW(Rate::of(-0.01), ConfigError);
    EXPECT_THROW(Rate::of(std::nan("")), ConfigError);
}

TEST(IncomeQuintile, Range) {
    EXPECT_EQ(IncomeQuintile(1).slot(), 0u);
    EXPECT_EQ(IncomeQuintile(5).slot(), 4u);
    EXPECT_THROW(IncomeQuintile(0), ConfigError);
    EXPECT_THROW(IncomeQuintile(6), ConfigError);
}

TEST(IncomeQuintile, AssignmentIsRankBased) {
    const std::vector<Money> incomes = {Money::from_cents(500), Money::from_cents(100), Money::from_cents(900),
                                        Money::from_cents(300), Money::from_cents(700)};
    const auto q = assign_quintiles(incomes);
    EXPECT_EQ(q[1].index(), 1);
    EXPECT_EQ(q[3].index(), 2);
    EXPECT_EQ(q[0].index(), 3);
    EXPECT_EQ(q[4].index(), 4);
    EXPECT_EQ(q[2].index(), 5);
}

// Property: sizes differ by at most one and labels never invert income order.
TEST(IncomeQuintileProperty, BalancedAndMonotone) {
    std::mt19937_64 rng(11);
    for (int n = 5; n < 300; n += 7) {
        std::vector<Money> incomes(static_cast<std::size_t>(n));
        std::uniform_int_distribution<std::int64_t> d(0, 50);  // many ties
        for (auto& m : incomes) m = Money::from_cents(d(rng) * 1000);
        const auto q = assign_quintiles(incomes);
        std::array<int, 5> count{};
        for (const auto& x : q) ++count[x.slot()];
        const auto [lo, hi] = std::minmax_element(count.begin(), count.end());
        ASSERT_LE(*hi - *lo, 1) << "n=" << n;
        for (std::size_t i = 0; i < incomes.size(); ++i) {
            for (std::size_t j = 0; j < incomes.size(); ++j) {
                if (incomes[i] < incomes[j]) ASSERT_LE(q[i].index(), q[j].index());
            }
        }
    }
}

TEST(SimClock, AdvancesByOne) {
    SimClock c;
    EXPECT_EQ(c.month, 0);
    c.advance();
    c.advance();
    EXPECT_EQ(c.month, 2);
}
