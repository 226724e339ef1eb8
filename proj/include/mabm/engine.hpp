#pragma once

// Monthly simulation loop, training and evaluation phases.
//
// Within a month the order is fixed: economy (shocks, HPI), then each
// borrower in id order (income, non-housing spending, enrollment / relief /
// payment decisions), reserve-account draws, servicing, rewards and
// learning, metrics. Every random draw comes from a named substream of the
// run seed.

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "mabm/domain.hpp"
#include "mabm/economy.hpp"
#include "mabm/finance.hpp"
#include "mabm/metrics.hpp"
#include "mabm/policy.hpp"
#include "mabm/population.hpp"
#include "mabm/products.hpp"
#include "mabm/rng.hpp"
#include "mabm/servicing.hpp"

namespace mabm {

enum class LearnerSharing { PerQuintile, Individual };

struct EpisodeConfig {
    int n_borrowers = 1000;
    int train_episodes = 60;
    int train_months = 120;
    int eval_months = 24;
    std::uint64_t seed = 1;

    void validate() const;
};

struct SimulationConfig {
    EpisodeConfig episode;
    DistributionConfig population = default_distribution_config();
    HpiPath hpi;
    double h0 = 1.0;
    ShockProcess shocks;
    ServicerConfig servicer;
    ProductConfig product;
    TabularParams policy;
    LearnerSharing sharing = LearnerSharing::PerQuintile;
    EquityBasis equity_basis = EquityBasis::TotalScheduled;

    /// Throws ConfigError naming the first bad field.
    void validate() const;
};

/// Maps borrowers to learners: one per income quintile, or one per
/// borrower slot.
class LearnerPool {
public:
    LearnerPool(const SimulationConfig& config);

    PolicyLearner& for_borrower(std::size_t id, IncomeQuintile q);
    std::size_t size() const { return learners_.size(); }
    PolicyLearner& at(std::size_t i) { return *learners_.at(i); }

    std::vector<std::vector<std::uint8_t>> snapshots() const;
    /// Throws StateError if the count does not match.
    void restore(const std::vector<std::vector<std::uint8_t>>& snapshots);

private:
    LearnerSharing sharing_;
    std::vector<std::unique_ptr<PolicyLearner>> learners_;
};

/// Dynamic state of one household.
struct Borrower {
    BorrowerProfile profile;
    LoanServicing servicing;
    std::optional<MRAAccount> mra;
    bool enrollment_decided = false;
    int shock_revert_month = -1;
    Money income_before_shock;

    bool active() const { return !profile.loan.is_closed(); }
};

/// Flows that cross the system boundary in one month, and the account
/// totals at the end of it.
struct MonthAudit {
    Money income_in;
    Money expenses_out;
    Money sponsor_in;        // upfront reserve accounts
    Money foreclosure_in;    // recoveries out of collateral
    Money borrower_savings;  // end of month
    Money mra_balances;
    Money servicer_cash;
    Money owner_cash;
};

class World {
public:
    World(const SimulationConfig& config, Phase phase, std::vector<BorrowerProfile> population, LearnerPool& learners,
          std::uint64_t economy_stream);

    void step_month();
    /// Feeds the outstanding transition of each borrower to its learner
    /// (train only). Call once after the last step.
    void finish();

    const SimClock& clock() const { return clock_; }
    double h() const { return economy_.h; }
    std::span<const Borrower> borrowers() const { return borrowers_; }
    std::span<Borrower> borrowers_mut() { return borrowers_; }
    std::span<const BorrowerHistory> histories() const { return histories_; }
    const ServicerBook& book() const { return book_; }
    std::span<const MonthAudit> audits() const { return audits_; }

    /// Cents-exact per-month money balance across borrowers, reserve
    /// accounts, servicer and owner. Returns the first failing month.
    std::optional<int> conservation_violation() const;

    /// FNV digest of the full mutable state.
    std::uint64_t hash() const;

    /// Sum and count of step rewards so far.
    double reward_sum() const { return reward_sum_; }
    std::uint64_t reward_count() const { return reward_count_; }
    /// Borrower decisions taken in the most recent month.
    int decisions_last_month() const { return decisions_last_month_; }

private:
    struct PendingTransition {
        Observation obs;
        Action action;
        double reward = 0.0;
    };

    void apply_economy();
    void step_borrower(std::size_t i, MonthAudit& audit);
    Observation observe(const Borrower& b, Money housing_payment, ReliefOfferKind offer, bool window) const;
    Action decide(std::size_t i, const Observation& obs, std::span<const Action> legal);
    Money housing_payment(const Borrower& b) const;

    const SimulationConfig& config_;
    Phase phase_;
    LearnerPool& learners_;
    Rng economy_rng_;
    Rng hpi_rng_;
    EconomyState economy_;
    SimClock clock_;
    std::vector<Borrower> borrowers_;
    std::vector<std::optional<PendingTransition>> pending_;
    std::vector<BorrowerHistory> histories_;
    std::vector<int> last_acted_month_;
    ServicerBook book_;
    std::vector<MonthAudit> audits_;
    Money initial_total_;  // opening savings; every other account starts at zero
    Money servicer_cash_;
    Money owner_cash_;
    double reward_sum_ = 0.0;
    std::uint64_t reward_count_ = 0;
    int decisions_last_month_ = 0;
};

struct TrainingResult {
    std::vector<std::vector<std::uint8_t>> snapshots;
    std::vector<double> episode_mean_reward;
};

/// Runs train_episodes episodes of train_months each, a fresh population per
/// episode, random shocks and exploration. train_months = 0 or
/// train_episodes = 0 returns untrained snapshots.
TrainingResult run_training(const SimulationConfig& config);

struct EvaluationRun {
    std::vector<BorrowerHistory> histories;
    ServicerBook book;
    MetricsBundle metrics;
    bool money_conserved = true;
};

/// One frozen-policy evaluation per shock size, all on the same population.
std::vector<EvaluationRun> run_evaluation(const SimulationConfig& config,
                                          const std::vector<std::vector<std::uint8_t>>& snapshots,
                                          std::span<const double> shock_grid);

/// The evaluation population for a seed (shared by every shock size and
/// product so that results are paired).
std::vector<BorrowerProfile> evaluation_population(const SimulationConfig& config);

}  // namespace mabm
