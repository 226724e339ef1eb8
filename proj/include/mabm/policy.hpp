#pragma once

// Borrower decision making: discretized observations, the discrete action
// space with legality masks, the learner contract and a tabular Q-learner.

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mabm/domain.hpp"
#include "mabm/finance.hpp"
#include "mabm/rng.hpp"

namespace mabm {

enum class ReliefOfferKind : std::uint8_t { None, Repayment, Forbearance, Modification };
enum class HpiBucket : std::uint8_t { Low, Par, High };

std::string_view to_string(ReliefOfferKind k);

/// Discretized borrower state. See docs/observation.md for the bucket table.
struct Observation {
    std::uint8_t payment_to_income = 0;  // bucket index, 0..9
    std::uint8_t savings_months = 0;     // bucket index, 0..6 (0 = no savings)
    std::uint8_t months_delinquent = 0;  // clamped to 0..6
    ReliefOfferKind relief_offer = ReliefOfferKind::None;
    HpiBucket h_bucket = HpiBucket::Par;
    bool mra_available = false;
    bool enrollment_window = false;
    bool income_short = false;           // income net of living costs < regular installment

    std::uint64_t key() const;
    friend bool operator==(const Observation&, const Observation&) = default;
};

struct ObservationInput {
    Money income;
    Money housing_payment;     // this month's installment (post-relief)
    Money monthly_expenses;    // housing + non-housing
    Money savings;
    int months_delinquent = 0;
    ReliefOfferKind relief_offer = ReliefOfferKind::None;
    double h = 1.0;
    bool mra_available = false;
    bool enrollment_window = false;
    bool income_short = false;
};

Observation encode_observation(const ObservationInput& in);

std::uint8_t payment_to_income_bucket(Money payment, Money income);
std::uint8_t savings_months_bucket(Money savings, Money monthly_expenses);
HpiBucket hpi_bucket(double h);

enum class ActionKind : std::uint8_t {
    PayFull,            // pay everything due, from income then savings
    PaySavings,         // short of the full amount: pay all available cash
    Miss,               // pay nothing
    AcceptRelief,
    DeclineRelief,
    DeclineMatchedMRA,
    EnrollMatchedMRA,   // contribution from the configured menu
};

std::string_view to_string(ActionKind k);

struct Action {
    ActionKind kind = ActionKind::PayFull;
    int menu_index = -1;   // EnrollMatchedMRA only
    Money contribution;    // EnrollMatchedMRA only

    friend bool operator==(const Action&, const Action&) = default;
};

inline constexpr std::size_t kMaxMenuItems = 8;
inline constexpr std::size_t kActionSlots = 6 + kMaxMenuItems;

/// Fixed ordering used for tie-breaks: enum order, menu items last.
std::size_t action_slot(const Action& a);

/// Payment decision. due = 0 (forbearance) leaves only PayFull; PayFull
/// requires cash >= due; PaySavings requires 0 < cash < due; Miss is always
/// legal otherwise.
std::vector<Action> legal_payment_actions(Money total_due, Money cash_available);

std::vector<Action> legal_relief_actions(ReliefOfferKind offer);

/// DeclineMatchedMRA plus every positive menu contribution the borrower can fund.
std::vector<Action> legal_enrollment_actions(Money savings, std::span<const Money> menu);

/// Per-step reward: borrower utility at the current income and housing payment.
double step_reward(double gamma, const Loan& loan, Money housing_payment, Money income, double h,
                   EquityBasis basis = EquityBasis::TotalScheduled);

class PolicyLearner {
public:
    virtual ~PolicyLearner() = default;

    /// explore = false must be deterministic given the learner state.
    virtual Action act(const Observation& obs, std::span<const Action> legal, bool explore) = 0;
    virtual void learn(const Observation& obs, const Action& action, double reward, const Observation& next_obs,
                       bool done) = 0;
    virtual std::vector<std::uint8_t> snapshot() const = 0;
    virtual void restore(std::span<const std::uint8_t> bytes) = 0;
};

struct TabularParams {
    double alpha = 0.005;           // floor on the 1/n step size
    double epsilon_start = 0.3;
    double epsilon_end = 0.01;
    double epsilon_decay_steps = 200000.0;
    double discount = 0.95;
    /// Bootstrap value of a state with no visited action.
    double unseen_state_value = 0.0;
    /// Greedy choice treats actions within this much of the best Q as tied.
    double tie_margin = 1.0;

    /// Throws ConfigError naming the first out-of-range field.
    void validate() const;
};

/// Q-learning over Observation x action slots. Step size is max(alpha, 1/n)
/// per (state, action). Exploration is epsilon-greedy with
///   epsilon(t) = end + (start - end) * exp(-t / decay_steps),
/// t = number of learn() calls. Unvisited actions score 0; ties go to the
/// lowest slot.
class TabularQLearner final : public PolicyLearner {
public:
    TabularQLearner(TabularParams params, std::uint64_t exploration_seed);

    Action act(const Observation& obs, std::span<const Action> legal, bool explore) override;
    void learn(const Observation& obs, const Action& action, double reward, const Observation& next_obs,
               bool done) override;
    std::vector<std::uint8_t> snapshot() const override;
    void restore(std::span<const std::uint8_t> bytes) override;

    double epsilon() const;
    double q_value(const Observation& obs, const Action& a) const;
    std::uint32_t visits(const Observation& obs, const Action& a) const;
    std::uint64_t steps() const { return steps_; }
    std::size_t state_count() const { return table_.size(); }
    const TabularParams& params() const { return params_; }

private:
    struct Entry {
        std::array<double, kActionSlots> q{};
        std::array<std::uint32_t, kActionSlots> visits{};
    };

    double best_visited(std::uint64_t key) const;

    TabularParams params_;
    Rng rng_;
    std::uint64_t steps_ = 0;
    std::map<std::uint64_t, Entry> table_;
};

std::unique_ptr<PolicyLearner> tabular_learner(TabularParams params, std::uint64_t exploration_seed);

/// Versioned container for a set of learner snapshots (train -> evaluate).
std::vector<std::uint8_t> pack_snapshots(const std::vector<std::vector<std::uint8_t>>& snapshots);
std::vector<std::vector<std::uint8_t>> unpack_snapshots(std::span<const std::uint8_t> bytes);
void write_snapshot_file(const std::string& path, const std::vector<std::vector<std::uint8_t>>& snapshots);
std::vector<std::vector<std::uint8_t>> read_snapshot_file(const std::string& path);

}  // namespace mabm
