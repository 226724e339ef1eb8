#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "mabm/economy.hpp"
#include "mabm/rng.hpp"

using namespace mabm;

TEST(StepHpi, ConstantIsIdentity) {
    Rng rng = substream(1, "hpi");
    EconomyState s;
    for (int m = 0; m < 24; ++m) s = step_hpi(s, rng);
    EXPECT_EQ(s.h, 1.0);
}

TEST(StepHpi, Drift) {
    Rng rng = substream(1, "hpi");
    EconomyState s;
    s.hpi_path = {HpiKind::Drift, 0.002, 0.0};
    s = step_hpi(s, rng);
    EXPECT_DOUBLE_EQ(s.h, 1.002);
}

TEST(StepHpi, GeometricWalkReplays) {
    EconomyState a;
    a.hpi_path = {HpiKind::GeometricWalk, 0.0, 0.02};
    EconomyState b = a;
    Rng ra = substream(9, "hpi");
    Rng rb = substream(9, "hpi");
    for (int m = 0; m < 120; ++m) {
        a = step_hpi(a, ra);
        b = step_hpi(b, rb);
        ASSERT_EQ(a.h, b.h);
        ASSERT_GT(a.h, 0.0);
    }
    EXPECT_NE(a.h, 1.0);
}

TEST(StepHpi, StaysPositiveUnderNegativeDrift) {
    Rng rng = substream(1, "hpi");
    EconomyState s;
    s.hpi_path = {HpiKind::Drift, -0.3, 0.0};
    for (int m = 0; m < 10; ++m) s = step_hpi(s, rng);
    EXPECT_GT(s.h, 0.0);
}

// Oracle: total arrivals ~ Binomial(120000, 1/12), sd about 96, so the
// per-borrower-year mean is 1 with sd about 0.01.
TEST(TrainShocks, ArrivalRateMatchesBinomial) {
    ShockProcess p;
    Rng rng = substream(3, "economy");
    std::size_t arrivals = 0;
    std::size_t reductions = 0;
    double mag_sum = 0.0;
    for (int month = 0; month < 12; ++month) {
        const auto ev = sample_train_shocks(p, 10'000, rng);
        arrivals += ev.size();
        for (const auto& e : ev) {
            const double m = std::fabs(e.signed_fraction);
            ASSERT_GE(m, p.magnitude_lo);
            ASSERT_LE(m, p.magnitude_hi);
            mag_sum += m;
            if (e.signed_fraction < 0) ++reductions;
        }
    }
    EXPECT_NEAR(arrivals / 10'000.0, 1.0, 0.05);
    // Sign is a fair coin: 4 sd of Binomial(~10000, 0.5) is about 0.02.
    EXPECT_NEAR(static_cast<double>(reductions) / arrivals, 0.5, 0.02);
    EXPECT_NEAR(mag_sum / arrivals, 0.5 * (p.magnitude_lo + p.magnitude_hi), 0.01);
}

TEST(TrainShocks, ZeroProbabilityIsEmpty) {
    ShockProcess p;
    p.train_monthly_arrival_prob = 0.0;
    Rng rng = substream(3, "economy");
    EXPECT_TRUE(sample_train_shocks(p, 1000, rng).empty());
}

TEST(TrainShocks, SeedReplaysAndDirectionFilter) {
    ShockProcess p;
    p.allow_increase = false;
    Rng a = substream(4, "economy");
    Rng b = substream(4, "economy");
    const auto ea = sample_train_shocks(p, 5000, a);
    EXPECT_EQ(ea, sample_train_shocks(p, 5000, b));
    for (const auto& e : ea) EXPECT_LT(e.signed_fraction, 0.0);
}

TEST(EvalShock, ReducesIncome) {
    std::vector<Money> incomes{Money::from_cents(500'000)};
    EvalShock s{1, 0.20, ShockDirection::Reduce, 1.0};
    Rng rng = substream(1, "eval");
    apply_eval_shock(incomes, s, rng);
    EXPECT_EQ(incomes[0], Money::from_cents(400'000));
}

TEST(EvalShock, ZeroSizeIsIdentity) {
    std::vector<Money> incomes{Money::from_cents(123'456), Money::from_cents(7)};
    const auto before = incomes;
    Rng rng = substream(1, "eval");
    apply_eval_shock(incomes, EvalShock{1, 0.0, ShockDirection::Reduce, 1.0}, rng);
    EXPECT_EQ(incomes, before);
}

TEST(EvalShock, PartialCoverageIsExactAndReplays) {
    std::vector<Money> a(1000, Money::from_cents(100'000));
    std::vector<Money> b = a;
    const EvalShock s{1, 0.3, ShockDirection::Reduce, 0.5};
    Rng ra = substream(5, "eval");
    Rng rb = substream(5, "eval");
    const auto ia = apply_eval_shock(a, s, ra);
    const auto ib = apply_eval_shock(b, s, rb);
    EXPECT_EQ(ia.size(), 500u);
    EXPECT_EQ(ia, ib);
    EXPECT_EQ(std::set<std::size_t>(ia.begin(), ia.end()).size(), 500u);
    int hit = 0;
    for (const Money m : a) hit += m == Money::from_cents(70'000);
    EXPECT_EQ(hit, 500);
}

TEST(EvalShock, BadCoverageRejected) {
    std::vector<Money> a(3, Money::from_cents(1));
    Rng rng = substream(1, "eval");
    EXPECT_THROW(apply_eval_shock(a, EvalShock{1, 0.1, ShockDirection::Reduce, 1.5}, rng), ConfigError);
}

// Property: no shock can push income below zero.
TEST(ShockProperty, IncomeNeverNegative) {
    Rng rng = substream(8, "prop");
    for (int i = 0; i < 10'000; ++i) {
        const Money inc = Money::from_cents(static_cast<std::int64_t>(uniform_index(rng, 5'000'000)));
        const double f = -2.0 + 4.0 * uniform01(rng);
        ASSERT_GE(shocked_income(inc, f), Money{});
    }
}

TEST(ShockProcess, Validation) {
    ShockProcess p;
    EXPECT_NO_THROW(validate(p));
    p.train_monthly_arrival_prob = 1.5;
    EXPECT_THROW(validate(p), ConfigError);
    p = ShockProcess{};
    p.eval_shock.coverage = -0.1;
    EXPECT_THROW(validate(p), ConfigError);
    p = ShockProcess{};
    p.magnitude_lo = 0.6;
    EXPECT_THROW(validate(p), ConfigError);
}

TEST(Rng, SubstreamsAreNamedAndStable) {
    Rng a = substream(1, "population");
    Rng b = substream(1, "population");
    Rng c = substream(1, "economy");
    Rng d = substream(1, "population", 1);
    const auto va = a();
    EXPECT_EQ(va, b());
    EXPECT_NE(va, c());
    EXPECT_NE(va, d());
    EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
    EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(Rng, UniformAndBetaMoments) {
    Rng rng = substream(2, "moments");
    double su = 0.0;
    double sb = 0.0;
    double sb2 = 0.0;
    const int n = 200'000;
    for (int i = 0; i < n; ++i) {
        const double u = uniform01(rng);
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        su += u;
        const double x = beta_sample(rng, 2.0, 2.0);
        sb += x;
        sb2 += x * x;
    }
    EXPECT_NEAR(su / n, 0.5, 0.005);
    // Beta(2, 2): mean 1/2, variance 1/20.
    EXPECT_NEAR(sb / n, 0.5, 0.005);
    EXPECT_NEAR(sb2 / n - (sb / n) * (sb / n), 0.05, 0.002);
}
