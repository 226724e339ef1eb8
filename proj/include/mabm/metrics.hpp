#pragma once

// Distress and profitability metrics with quintile breakdowns, and their
// deterministic CSV serialization.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mabm/domain.hpp"
#include "mabm/finance.hpp"
#include "mabm/servicing.hpp"

namespace mabm {

/// Per-borrower record of an evaluation episode.
struct BorrowerHistory {
    std::size_t id = 0;
    IncomeQuintile quintile{1};
    std::vector<std::uint8_t> missed;       // per month: 1 = uncovered missed payment
    std::vector<std::uint8_t> mra_covered;  // per month: 1 = reserve account paid something
    int foreclosed_month = -1;
    LoanStatus final_status = LoanStatus::Current;
    bool mra_enrolled = false;
    Money mra_contribution;
    Money fees_paid;
    int pay_full = 0;     // payment decisions with something due
    int pay_savings = 0;
    int miss = 0;

    void record_miss(int month, bool value);
    bool foreclosed() const { return final_status == LoanStatus::ForeclosureCompleted; }
};

struct RateCell {
    int borrowers = 0;
    int hits = 0;
    double rate() const { return borrowers == 0 ? 0.0 : static_cast<double>(hits) / borrowers; }
};

struct QuintileRates {
    std::array<RateCell, kQuintiles> by_quintile{};
    RateCell overall;

    double rate(int quintile_index) const { return by_quintile[static_cast<std::size_t>(quintile_index - 1)].rate(); }
};

struct TtaStats {
    int affected = 0;
    std::optional<double> mean;    // absent when no borrower was affected
    std::optional<double> median;
    std::map<int, int> distribution;  // months -> count
};

struct QuintileTta {
    std::array<TtaStats, kQuintiles> by_quintile{};
    TtaStats overall;

    const TtaStats& q(int quintile_index) const { return by_quintile[static_cast<std::size_t>(quintile_index - 1)]; }
};

/// Fraction of borrowers with at least one uncovered missed payment in
/// months [from_month, to_month).
QuintileRates affected_rate(std::span<const BorrowerHistory> histories, int from_month, int to_month);

/// Months from shock_month to the first uncovered miss at or after it, over
/// affected borrowers only (misses before to_month).
QuintileTta time_to_affect(std::span<const BorrowerHistory> histories, int shock_month, int to_month);

QuintileRates foreclosure_rate(std::span<const BorrowerHistory> histories);

QuintileRates mra_uptake(std::span<const BorrowerHistory> histories);

struct ActionCounts {
    int pay_full = 0;
    int pay_savings = 0;
    int miss = 0;
    int total() const { return pay_full + pay_savings + miss; }
};

struct RunMeta {
    std::uint64_t seed = 0;
    std::string config_hash;
    std::string comparability_hash;
    std::string product = "none";
    double shock_size = 0.0;
    int shock_month = 1;
    int n_borrowers = 0;
    int eval_months = 0;
    std::uint64_t population_seed = 0;
    bool paired_population = true;
};

struct MetricsBundle {
    RunMeta meta;
    QuintileRates affected;
    QuintileTta tta;
    QuintileRates foreclosure;
    QuintileRates uptake;
    bool products_enabled = false;
    std::vector<MonthCash> servicer_months;
    std::array<Money, kQuintiles> fee_income_by_quintile{};
    std::array<ActionCounts, kQuintiles> actions{};
    ActionCounts actions_overall;
    Money write_offs_total;

    Money cumulative_net_cash() const;
};

MetricsBundle compute_bundle(std::span<const BorrowerHistory> histories, const ServicerBook& book, RunMeta meta,
                             bool products_enabled);

/// "0.333333"
std::string format_fraction(double x);

/// Writes one CSV per metric family plus manifest.json into `dir`. Throws
/// std::runtime_error with the path on I/O failure.
void write_csv(const MetricsBundle& bundle, const std::filesystem::path& dir);

/// Seed-aggregated summary: one row per (product, shock, quintile) with the
/// mean of each metric over the given bundles.
void write_summary_csv(std::span<const MetricsBundle> bundles, const std::filesystem::path& path);

}  // namespace mabm
