#include "mabm/policy.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include <fmt/format.h>

namespace mabm {

std::string_view to_string(ReliefOfferKind k) {
    switch (k) {
        case ReliefOfferKind::None: return "none";
        case ReliefOfferKind::Repayment: return "repayment";
        case ReliefOfferKind::Forbearance: return "forbearance";
        case ReliefOfferKind::Modification: return "modification";
    }
    return "unknown";
}

std::string_view to_string(ActionKind k) {
    switch (k) {
        case ActionKind::PayFull: return "pay_full";
        case ActionKind::PaySavings: return "pay_savings";
        case ActionKind::Miss: return "miss";
        case ActionKind::AcceptRelief: return "accept_relief";
        case ActionKind::DeclineRelief: return "decline_relief";
        case ActionKind::DeclineMatchedMRA: return "decline_mra";
        case ActionKind::EnrollMatchedMRA: return "enroll_mra";
    }
    return "unknown";
}

std::uint64_t Observation::key() const {
    std::uint64_t k = payment_to_income;
    k = (k << 4) | savings_months;
    k = (k << 4) | months_delinquent;
    k = (k << 2) | static_cast<std::uint64_t>(relief_offer);
    k = (k << 2) | static_cast<std::uint64_t>(h_bucket);
    k = (k << 1) | (mra_available ? 1u : 0u);
    k = (k << 1) | (enrollment_window ? 1u : 0u);
    k = (k << 1) | (income_short ? 1u : 0u);
    return k;
}

std::uint8_t payment_to_income_bucket(Money payment, Money income) {
    static constexpr std::array<double, 9> kEdges{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.8, 1.0, 1.5};
    const double ratio = income.is_positive() ? std::clamp(payment.dollars() / income.dollars(), 0.0, 2.0) : 2.0;
    // Small epsilon so exact edge ratios (1000/5000) land in the upper bucket.
    return static_cast<std::uint8_t>(
        std::upper_bound(kEdges.begin(), kEdges.end(), ratio + 1e-12) - kEdges.begin());
}

std::uint8_t savings_months_bucket(Money savings, Money monthly_expenses) {
    if (!savings.is_positive()) return 0;
    static constexpr std::array<double, 5> kEdges{1.0, 2.0, 3.0, 6.0, 12.0};
    const double months = monthly_expenses.is_positive()
                              ? std::clamp(savings.dollars() / monthly_expenses.dollars(), 0.0, 12.0)
                              : 12.0;
    return static_cast<std::uint8_t>(
        1 + (std::upper_bound(kEdges.begin(), kEdges.end(), months) - kEdges.begin()));
}

HpiBucket hpi_bucket(double h) {
    if (h < 0.97) return HpiBucket::Low;
    if (h > 1.03) return HpiBucket::High;
    return HpiBucket::Par;
}

Observation encode_observation(const ObservationInput& in) {
    Observation o;
    o.payment_to_income = payment_to_income_bucket(in.housing_payment, in.income);
    o.savings_months = savings_months_bucket(in.savings, in.monthly_expenses);
    o.months_delinquent = static_cast<std::uint8_t>(std::clamp(in.months_delinquent, 0, 6));
    o.relief_offer = in.relief_offer;
    o.h_bucket = hpi_bucket(in.h);
    o.mra_available = in.mra_available;
    o.enrollment_window = in.enrollment_window;
    o.income_short = in.income_short;
    return o;
}

std::size_t action_slot(const Action& a) {
    if (a.kind == ActionKind::EnrollMatchedMRA) {
        if (a.menu_index < 0 || static_cast<std::size_t>(a.menu_index) >= kMaxMenuItems) {
            throw ConfigError(fmt::format("MRA menu index {} out of range", a.menu_index));
        }
        return 6 + static_cast<std::size_t>(a.menu_index);
    }
    return static_cast<std::size_t>(a.kind);
}

std::vector<Action> legal_payment_actions(Money total_due, Money cash_available) {
    if (!total_due.is_positive()) return {Action{ActionKind::PayFull}};
    std::vector<Action> out;
    if (cash_available >= total_due) {
        out.push_back({ActionKind::PayFull});
    } else if (cash_available.is_positive()) {
        out.push_back({ActionKind::PaySavings});
    }
    out.push_back({ActionKind::Miss});
    return out;
}

std::vector<Action> legal_relief_actions(ReliefOfferKind offer) {
    if (offer == ReliefOfferKind::None) return {};
    return {Action{ActionKind::AcceptRelief}, Action{ActionKind::DeclineRelief}};
}

std::vector<Action> legal_enrollment_actions(Money savings, std::span<const Money> menu) {
    std::vector<Action> out{Action{ActionKind::DeclineMatchedMRA}};
    for (std::size_t i = 0; i < menu.size() && i < kMaxMenuItems; ++i) {
        if (menu[i].is_positive() && menu[i] <= savings) {
            out.push_back(Action{ActionKind::EnrollMatchedMRA, static_cast<int>(i), menu[i]});
        }
    }
    return out;
}

double step_reward(double gamma, const Loan& loan, Money housing_payment, Money income, double h,
                   EquityBasis basis) {
    return utility(UtilityParams{gamma}, liquidity_component(housing_payment, income), equity_component(loan, basis),
                   h);
}

void TabularParams::validate() const {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError(fmt::format("policy.alpha {} outside (0, 1]", alpha));
    if (!(discount >= 0.0 && discount < 1.0)) {
        throw ConfigError(fmt::format("policy.discount {} outside [0, 1)", discount));
    }
    if (!(epsilon_start >= 0.0 && epsilon_start <= 1.0 && epsilon_end >= 0.0 && epsilon_end <= 1.0)) {
        throw ConfigError("policy.epsilon_start/epsilon_end must be in [0, 1]");
    }
    if (!(epsilon_decay_steps > 0.0)) throw ConfigError("policy.epsilon_decay_steps must be > 0");
    if (!(tie_margin >= 0.0 && std::isfinite(tie_margin))) throw ConfigError("policy.tie_margin must be >= 0");
    if (!std::isfinite(unseen_state_value)) throw ConfigError("policy.unseen_state_value must be finite");
}

TabularQLearner::TabularQLearner(TabularParams params, std::uint64_t exploration_seed)
    : params_(params), rng_(substream(exploration_seed, "policy-exploration")) {
    params_.validate();
}

double TabularQLearner::epsilon() const {
    return params_.epsilon_end +
           (params_.epsilon_start - params_.epsilon_end) *
               std::exp(-static_cast<double>(steps_) / params_.epsilon_decay_steps);
}

double TabularQLearner::q_value(const Observation& obs, const Action& a) const {
    const auto it = table_.find(obs.key());
    return it == table_.end() ? 0.0 : it->second.q[action_slot(a)];
}

std::uint32_t TabularQLearner::visits(const Observation& obs, const Action& a) const {
    const auto it = table_.find(obs.key());
    return it == table_.end() ? 0u : it->second.visits[action_slot(a)];
}

Action TabularQLearner::act(const Observation& obs, std::span<const Action> legal, bool explore) {
    if (legal.empty()) throw StateError("act called with no legal actions");
    if (explore && uniform01(rng_) < epsilon()) return legal[uniform_index(rng_, legal.size())];

    const auto it = table_.find(obs.key());
    auto q_of = [&](std::size_t i) { return it == table_.end() ? 0.0 : it->second.q[action_slot(legal[i])]; };
    double top = -1e300;
    for (std::size_t i = 0; i < legal.size(); ++i) top = std::max(top, q_of(i));
    std::size_t best = legal.size();
    for (std::size_t i = 0; i < legal.size(); ++i) {
        if (q_of(i) < top - params_.tie_margin) continue;
        if (best == legal.size() || action_slot(legal[i]) < action_slot(legal[best])) best = i;
    }
    return legal[best];
}

double TabularQLearner::best_visited(std::uint64_t key) const {
    const auto it = table_.find(key);
    if (it == table_.end()) return params_.unseen_state_value;
    bool any = false;
    double best = params_.unseen_state_value;
    for (std::size_t s = 0; s < kActionSlots; ++s) {
        if (it->second.visits[s] == 0) continue;
        if (!any || it->second.q[s] > best) best = it->second.q[s];
        any = true;
    }
    return best;
}

void TabularQLearner::learn(const Observation& obs, const Action& action, double reward, const Observation& next_obs,
                            bool done) {
    const double target = reward + (done ? 0.0 : params_.discount * best_visited(next_obs.key()));
    Entry& e = table_[obs.key()];
    const std::size_t slot = action_slot(action);
    e.visits[slot] += 1;
    const double lr = std::max(params_.alpha, 1.0 / e.visits[slot]);
    e.q[slot] += lr * (target - e.q[slot]);
    ++steps_;
}

namespace {

constexpr char kLearnerMagic[8] = {'M', 'A', 'B', 'M', 'Q', 'T', 'A', 'B'};
constexpr char kPoolMagic[8] = {'M', 'A', 'B', 'M', 'P', 'O', 'O', 'L'};
constexpr std::uint32_t kFormatVersion = 1;

class Writer {
public:
    void bytes(const char* p, std::size_t n) { out_.insert(out_.end(), p, p + n); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    std::vector<std::uint8_t> take() { return std::move(out_); }

private:
    std::vector<std::uint8_t> out_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}
    void expect_magic(const char (&magic)[8]) {
        need(8);
        if (std::memcmp(in_.data() + pos_, magic, 8) != 0) throw ConfigError("snapshot: bad magic");
        pos_ += 8;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
        pos_ += 8;
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::span<const std::uint8_t> take(std::size_t n) {
        need(n);
        auto s = in_.subspan(pos_, n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == in_.size(); }

private:
    void need(std::size_t n) const {
        if (pos_ + n > in_.size()) throw ConfigError("snapshot: truncated");
    }
    std::span<const std::uint8_t> in_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> TabularQLearner::snapshot() const {
    Writer w;
    w.bytes(kLearnerMagic, 8);
    w.u32(kFormatVersion);
    w.u32(static_cast<std::uint32_t>(kActionSlots));
    w.f64(params_.alpha);
    w.f64(params_.epsilon_start);
    w.f64(params_.epsilon_end);
    w.f64(params_.epsilon_decay_steps);
    w.f64(params_.discount);
    w.f64(params_.unseen_state_value);
    w.f64(params_.tie_margin);
    w.u64(steps_);
    w.u64(table_.size());
    for (const auto& [key, e] : table_) {
        w.u64(key);
        for (std::size_t s = 0; s < kActionSlots; ++s) {
            w.f64(e.q[s]);
            w.u32(e.visits[s]);
        }
    }
    return w.take();
}

void TabularQLearner::restore(std::span<const std::uint8_t> bytes) {
    Reader r(bytes);
    r.expect_magic(kLearnerMagic);
    if (r.u32() != kFormatVersion) throw ConfigError("snapshot: unsupported version");
    if (r.u32() != kActionSlots) throw ConfigError("snapshot: action space mismatch");
    TabularParams p;
    p.alpha = r.f64();
    p.epsilon_start = r.f64();
    p.epsilon_end = r.f64();
    p.epsilon_decay_steps = r.f64();
    p.discount = r.f64();
    p.unseen_state_value = r.f64();
    p.tie_margin = r.f64();
    p.validate();
    const std::uint64_t steps = r.u64();
    const std::uint64_t count = r.u64();
    std::map<std::uint64_t, Entry> table;
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::uint64_t key = r.u64();
        Entry e;
        for (std::size_t s = 0; s < kActionSlots; ++s) {
            e.q[s] = r.f64();
            e.visits[s] = r.u32();
        }
        table.emplace(key, e);
    }
    if (!r.done()) throw ConfigError("snapshot: trailing bytes");
    params_ = p;
    steps_ = steps;
    table_ = std::move(table);
}

std::unique_ptr<PolicyLearner> tabular_learner(TabularParams params, std::uint64_t exploration_seed) {
    return std::make_unique<TabularQLearner>(params, exploration_seed);
}

std::vector<std::uint8_t> pack_snapshots(const std::vector<std::vector<std::uint8_t>>& snapshots) {
    Writer w;
    w.bytes(kPoolMagic, 8);
    w.u32(kFormatVersion);
    w.u64(snapshots.size());
    for (const auto& s : snapshots) {
        w.u64(s.size());
        w.bytes(reinterpret_cast<const char*>(s.data()), s.size());
    }
    return w.take();
}

std::vector<std::vector<std::uint8_t>> unpack_snapshots(std::span<const std::uint8_t> bytes) {
    Reader r(bytes);
    r.expect_magic(kPoolMagic);
    if (r.u32() != kFormatVersion) throw ConfigError("snapshot pool: unsupported version");
    const std::uint64_t n = r.u64();
    std::vector<std::vector<std::uint8_t>> out;
    for (std::uint64_t i = 0; i < n; ++i) {
        const auto len = r.u64();
        const auto s = r.take(len);
        out.emplace_back(s.begin(), s.end());
    }
    if (!r.done()) throw ConfigError("snapshot pool: trailing bytes");
    return out;
}

void write_snapshot_file(const std::string& path, const std::vector<std::vector<std::uint8_t>>& snapshots) {
    const auto bytes = pack_snapshots(snapshots);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error(fmt::format("cannot write snapshot file '{}'", path));
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error(fmt::format("write failed for snapshot file '{}'", path));
}

std::vector<std::vector<std::uint8_t>> read_snapshot_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error(fmt::format("cannot read snapshot file '{}'", path));
    std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
    return unpack_snapshots(bytes);
}

}  // namespace mabm
