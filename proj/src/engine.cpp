#include "mabm/engine.hpp"

#include <algorithm>
#include <bit>
#include <cstring>

#include <fmt/format.h>

namespace mabm {

void EpisodeConfig::validate() const {
    if (n_borrowers < 5) throw ConfigError(fmt::format("population.n {} must be >= 5", n_borrowers));
    if (train_episodes < 0) throw ConfigError("run.train_episodes must be >= 0");
    if (train_months < 0) throw ConfigError("run.train_months must be >= 0");
    if (eval_months < 1) throw ConfigError("run.eval_months must be >= 1");
}

void SimulationConfig::validate() const {
    episode.validate();
    if (const auto v = validate_config(population); !v.empty()) throw ConfigError(v.front());
    if (!(h0 > 0.0)) throw ConfigError(fmt::format("economy.h0 {} must be > 0", h0));
    if (hpi.sigma < 0.0) throw ConfigError("economy.hpi.sigma must be >= 0");
    mabm::validate(shocks);
    if (shocks.eval_shock.month >= episode.eval_months) {
        throw ConfigError(fmt::format("economy.eval_shock.month {} must be < run.eval_months {}",
                                      shocks.eval_shock.month, episode.eval_months));
    }
    servicer.validate();
    if (const auto v = product.violations(); !v.empty()) throw ConfigError(v.front());
    policy.validate();
}

// ---------------------------------------------------------------------------

LearnerPool::LearnerPool(const SimulationConfig& config) : sharing_(config.sharing) {
    const std::size_t count = sharing_ == LearnerSharing::PerQuintile
                                  ? kQuintiles
                                  : static_cast<std::size_t>(config.episode.n_borrowers);
    learners_.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::uint64_t s = mix64(config.episode.seed ^ fnv1a("learner") ^ mix64(i));
        learners_.push_back(tabular_learner(config.policy, s));
    }
}

PolicyLearner& LearnerPool::for_borrower(std::size_t id, IncomeQuintile q) {
    return sharing_ == LearnerSharing::PerQuintile ? *learners_[q.slot()] : *learners_.at(id);
}

std::vector<std::vector<std::uint8_t>> LearnerPool::snapshots() const {
    std::vector<std::vector<std::uint8_t>> out;
    out.reserve(learners_.size());
    for (const auto& l : learners_) out.push_back(l->snapshot());
    return out;
}

void LearnerPool::restore(const std::vector<std::vector<std::uint8_t>>& snapshots) {
    if (snapshots.size() != learners_.size()) {
        throw StateError(fmt::format("expected {} learner snapshots, got {}", learners_.size(), snapshots.size()));
    }
    for (std::size_t i = 0; i < learners_.size(); ++i) learners_[i]->restore(snapshots[i]);
}

// ---------------------------------------------------------------------------

World::World(const SimulationConfig& config, Phase phase, std::vector<BorrowerProfile> population,
             LearnerPool& learners, std::uint64_t economy_stream)
    : config_(config),
      phase_(phase),
      learners_(learners),
      economy_rng_(substream(config.episode.seed, "economy", economy_stream)),
      hpi_rng_(substream(config.episode.seed, "hpi", economy_stream)),
      economy_{config.h0, config.hpi, config.shocks},
      clock_{0, phase} {
    borrowers_.reserve(population.size());
    histories_.reserve(population.size());
    for (auto& p : population) {
        BorrowerHistory h;
        h.id = p.id;
        h.quintile = p.quintile;
        h.final_status = p.loan.status;
        histories_.push_back(std::move(h));
        Borrower b;
        b.profile = std::move(p);
        b.income_before_shock = b.profile.monthly_income;
        initial_total_ += b.profile.savings;
        borrowers_.push_back(std::move(b));
    }
    pending_.resize(borrowers_.size());
    last_acted_month_.assign(borrowers_.size(), -1);
}

// Arrears count as housing outlay, so a miss leaves less liquidity next
// month. Forbearance defers the installment rather than removing it.
Money World::housing_payment(const Borrower& b) const {
    const auto& plan = b.servicing.active_plan;
    if (plan && plan->kind == ReliefKind::Forbearance) return installment_due(b.profile.loan);
    return amount_due(b.profile.loan, b.servicing, config_.servicer);
}

Observation World::observe(const Borrower& b, Money housing, ReliefOfferKind offer, bool window) const {
    ObservationInput in;
    in.income = b.profile.monthly_income;
    in.housing_payment = housing;
    in.monthly_expenses = housing + b.profile.nonhousing_expense;
    in.savings = b.profile.savings;
    in.months_delinquent = b.profile.loan.months_delinquent;
    in.relief_offer = offer;
    in.h = economy_.h;
    in.mra_available = b.mra && b.mra->balance.is_positive();
    in.enrollment_window = window;
    in.income_short = b.profile.monthly_income - b.profile.nonhousing_expense < installment_due(b.profile.loan);
    return encode_observation(in);
}

Action World::decide(std::size_t i, const Observation& obs, std::span<const Action> legal) {
    const Borrower& b = borrowers_[i];
    PolicyLearner& learner = learners_.for_borrower(b.profile.id, b.profile.quintile);
    const bool train = phase_ == Phase::Train;
    if (train && pending_[i]) {
        learner.learn(pending_[i]->obs, pending_[i]->action, pending_[i]->reward, obs, false);
    }
    const Action a = learner.act(obs, legal, train);
    pending_[i] = PendingTransition{obs, a, 0.0};
    ++decisions_last_month_;
    return a;
}

void World::apply_economy() {
    const int t = clock_.month;
    if (t > 0) economy_ = step_hpi(economy_, hpi_rng_);

    if (phase_ == Phase::Train) {
        for (auto& b : borrowers_) {
            if (b.shock_revert_month == t) {
                b.profile.monthly_income = b.income_before_shock;
                b.shock_revert_month = -1;
            }
        }
        if (economy_.shock_process.train_monthly_arrival_prob > 0.0) {
            for (const ShockEvent& e : sample_train_shocks(economy_.shock_process, borrowers_.size(), economy_rng_)) {
                Borrower& b = borrowers_[e.borrower];
                if (!b.active()) continue;
                if (b.shock_revert_month < 0) b.income_before_shock = b.profile.monthly_income;
                b.profile.monthly_income = shocked_income(b.profile.monthly_income, e.signed_fraction);
                if (economy_.shock_process.shock_duration_months > 0) {
                    b.shock_revert_month = t + economy_.shock_process.shock_duration_months;
                }
            }
        }
        return;
    }

    const EvalShock& shock = economy_.shock_process.eval_shock;
    for (auto& b : borrowers_) {
        if (b.shock_revert_month == t) {
            b.profile.monthly_income = b.income_before_shock;
            b.shock_revert_month = -1;
        }
    }
    if (t == shock.month && shock.relative_size > 0.0) {
        std::vector<Money> incomes;
        incomes.reserve(borrowers_.size());
        for (const auto& b : borrowers_) incomes.push_back(b.profile.monthly_income);
        const auto hit = apply_eval_shock(incomes, shock, economy_rng_);
        for (std::size_t i : hit) {
            Borrower& b = borrowers_[i];
            b.income_before_shock = b.profile.monthly_income;
            b.profile.monthly_income = incomes[i];
            if (economy_.shock_process.shock_duration_months > 0) {
                b.shock_revert_month = t + economy_.shock_process.shock_duration_months;
            }
        }
    }
}

void World::step_borrower(std::size_t i, MonthAudit& audit) {
    Borrower& b = borrowers_[i];
    if (!b.active()) return;
    const int t = clock_.month;
    if (last_acted_month_[i] == t) throw StateError(fmt::format("borrower {} acted twice in month {}", i, t));
    last_acted_month_[i] = t;

    BorrowerProfile& p = b.profile;
    Loan& loan = p.loan;
    BorrowerHistory& hist = histories_[i];

    if (t == 0 && config_.product.mode == ProductMode::Upfront && !b.mra && config_.product.upfront_amount.is_positive()) {
        b.mra = open_upfront_mra(config_.product.upfront_amount);
        audit.sponsor_in += config_.product.upfront_amount;
        hist.mra_enrolled = true;
    }

    p.savings += p.monthly_income;
    audit.income_in += p.monthly_income;
    const Money spent = min(p.nonhousing_expense, p.savings);
    p.savings -= spent;
    audit.expenses_out += spent;

    if (t == 0 && config_.product.mode == ProductMode::Matched && !b.enrollment_decided) {
        b.enrollment_decided = true;
        const Money hp = housing_payment(b);
        const auto legal = legal_enrollment_actions(p.savings, config_.product.menu);
        const Action a = decide(i, observe(b, hp, ReliefOfferKind::None, true), legal);
        if (a.kind == ActionKind::EnrollMatchedMRA) {
            const Money m = a.contribution;
            b.mra = enroll_matched(p.savings, m);
            if (b.mra) {
                book_.mra_match_cum += m;
                book_.month(t).mra_match += m;
                hist.mra_enrolled = true;
                hist.mra_contribution = m;
                // The contribution is a housing outlay this month.
                pending_[i]->reward = -p.gamma * (liquidity_component(hp, p.monthly_income) -
                                                  liquidity_component(hp + m, p.monthly_income));
            }
        }
    }

    if (b.servicing.pending_offer != ReliefOfferKind::None) {
        const ReliefOfferKind offer = b.servicing.pending_offer;
        const auto legal = legal_relief_actions(offer);
        const Action a = decide(i, observe(b, housing_payment(b), offer, false), legal);
        if (a.kind == ActionKind::AcceptRelief) {
            const ReliefResult r = apply_relief(loan, b.servicing, offer, book_, config_.servicer, t);
            owner_cash_ -= r.incentive + r.recovered_advances;
        } else {
            b.servicing.pending_offer = ReliefOfferKind::None;
        }
    }

    const Money hp = housing_payment(b);
    const Money due = amount_due(loan, b.servicing, config_.servicer);
    const Money regular = regular_due(loan, b.servicing, config_.servicer);
    // Hardship: income net of living costs does not cover the regular installment.
    const bool hardship = p.monthly_income - p.nonhousing_expense < installment_due(loan);
    const Money cash = p.savings;
    const auto legal = legal_payment_actions(due, cash);
    const Action a = decide(i, observe(b, hp, ReliefOfferKind::None, false), legal);
    Money paid;
    switch (a.kind) {
        case ActionKind::PayFull: paid = due; break;
        case ActionKind::PaySavings: paid = cash; break;
        default: break;
    }
    p.savings -= paid;
    if (due.is_positive()) {
        if (a.kind == ActionKind::PayFull) ++hist.pay_full;
        else if (a.kind == ActionKind::PaySavings) ++hist.pay_savings;
        else ++hist.miss;
    }

    // Reserve account covers what is left of this month's installment once
    // the borrower has put in all available cash. A strategic miss draws nothing.
    Money covered;
    if (b.mra && b.mra->balance.is_positive() && cash < due && paid == cash && paid < regular) {
        const DrawResult d = draw_for_missed_payment(*b.mra, regular - paid);
        b.mra = d.account;
        covered = d.covered;
    }

    const ServicingOutcome out =
        service_month(loan, b.servicing, paid + covered, hardship, economy_.h, config_.servicer, book_, t);
    p.savings += out.payment.refund;
    owner_cash_ += out.owner_receipts();
    audit.foreclosure_in += out.recovered_at_foreclosure;
    hist.fees_paid += out.fee;

    hist.record_miss(t, out.missed);
    if (hist.mra_covered.size() <= static_cast<std::size_t>(t)) hist.mra_covered.resize(static_cast<std::size_t>(t) + 1, 0);
    hist.mra_covered[static_cast<std::size_t>(t)] = covered.is_positive() ? 1 : 0;
    hist.final_status = loan.status;
    if (out.foreclosed) hist.foreclosed_month = t;

    const double u = out.foreclosed ? 0.0
                                    : step_reward(p.gamma, loan, hp, p.monthly_income, economy_.h,
                                                  config_.equity_basis);
    reward_sum_ += u;
    ++reward_count_;
    pending_[i]->reward += u;

    if (loan.is_closed()) {
        if (phase_ == Phase::Train) {
            const Observation terminal = observe(b, Money{}, ReliefOfferKind::None, false);
            learners_.for_borrower(p.id, p.quintile).learn(pending_[i]->obs, pending_[i]->action, pending_[i]->reward,
                                                           terminal, true);
        }
        pending_[i].reset();
    }
}

void World::step_month() {
    const int t = clock_.month;
    decisions_last_month_ = 0;
    apply_economy();
    MonthAudit audit;
    book_.month(t);
    for (std::size_t i = 0; i < borrowers_.size(); ++i) step_borrower(i, audit);

    servicer_cash_ += book_.month(t).net_cash();
    for (const auto& b : borrowers_) {
        audit.borrower_savings += b.profile.savings;
        if (b.mra) audit.mra_balances += b.mra->balance;
    }
    audit.servicer_cash = servicer_cash_;
    audit.owner_cash = owner_cash_;
    audits_.push_back(audit);
    clock_.advance();
}

void World::finish() {
    if (phase_ != Phase::Train) return;
    for (std::size_t i = 0; i < borrowers_.size(); ++i) {
        if (!pending_[i]) continue;
        const Borrower& b = borrowers_[i];
        // Episode end is a time limit, not a terminal state: bootstrap.
        const Observation next =
            observe(b, housing_payment(b), b.servicing.pending_offer, false);
        learners_.for_borrower(b.profile.id, b.profile.quintile)
            .learn(pending_[i]->obs, pending_[i]->action, pending_[i]->reward, next, false);
        pending_[i].reset();
    }
}

std::optional<int> World::conservation_violation() const {
    Money prev_total = initial_total_;
    for (std::size_t i = 0; i < audits_.size(); ++i) {
        const MonthAudit& a = audits_[i];
        const Money total = a.borrower_savings + a.mra_balances + a.servicer_cash + a.owner_cash;
        if (total - prev_total != a.income_in - a.expenses_out + a.sponsor_in + a.foreclosure_in) {
            return static_cast<int>(i);
        }
        prev_total = total;
    }
    return std::nullopt;
}

namespace {

struct Hasher {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    void bytes(const void* p, std::size_t n) {
        const auto* c = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= c[i];
            h *= 0x100000001b3ULL;
        }
    }
    void i64(std::int64_t v) { bytes(&v, sizeof v); }
    void money(Money m) { i64(m.cents()); }
    void f64(double d) { i64(std::bit_cast<std::int64_t>(d)); }
};

}  // namespace

std::uint64_t World::hash() const {
    Hasher hs;
    hs.i64(clock_.month);
    hs.f64(economy_.h);
    for (const auto& b : borrowers_) {
        const Loan& l = b.profile.loan;
        hs.money(b.profile.monthly_income);
        hs.money(b.profile.savings);
        hs.money(l.balance);
        hs.money(l.arrears);
        hs.money(l.scheduled_payment);
        hs.money(l.payments_made_total);
        hs.i64(l.remaining_term_months);
        hs.i64(l.months_delinquent);
        hs.i64(static_cast<int>(l.status));
        hs.money(b.servicing.advances_outstanding);
        hs.i64(static_cast<int>(b.servicing.highest_rung));
        hs.i64(static_cast<int>(b.servicing.pending_offer));
        hs.i64(b.servicing.active_plan ? static_cast<int>(b.servicing.active_plan->kind) + 1 : 0);
        hs.money(b.mra ? b.mra->balance : Money{});
    }
    hs.money(servicer_cash_);
    hs.money(owner_cash_);
    return hs.h;
}

// ---------------------------------------------------------------------------

TrainingResult run_training(const SimulationConfig& config) {
    config.validate();
    LearnerPool pool(config);
    TrainingResult result;
    if (config.episode.train_months > 0) {
        SimulationConfig train_cfg = config;
        train_cfg.shocks.mode = ShockMode::TrainRandom;
        for (int ep = 0; ep < config.episode.train_episodes; ++ep) {
            Rng pop_rng = substream(config.episode.seed, "population-train", static_cast<std::uint64_t>(ep));
            World world(train_cfg, Phase::Train, sample_population(config.population, config.episode.n_borrowers, pop_rng),
                        pool, static_cast<std::uint64_t>(ep));
            for (int m = 0; m < config.episode.train_months; ++m) world.step_month();
            world.finish();
            result.episode_mean_reward.push_back(
                world.reward_count() == 0 ? 0.0 : world.reward_sum() / static_cast<double>(world.reward_count()));
        }
    }
    result.snapshots = pool.snapshots();
    return result;
}

std::vector<BorrowerProfile> evaluation_population(const SimulationConfig& config) {
    Rng rng = substream(config.episode.seed, "population");
    return sample_population(config.population, config.episode.n_borrowers, rng);
}

std::vector<EvaluationRun> run_evaluation(const SimulationConfig& config,
                                          const std::vector<std::vector<std::uint8_t>>& snapshots,
                                          std::span<const double> shock_grid) {
    config.validate();
    const auto population = evaluation_population(config);
    std::vector<EvaluationRun> runs;
    runs.reserve(shock_grid.size());
    for (double size : shock_grid) {
        if (!(size >= 0.0 && size <= 1.0)) throw ConfigError(fmt::format("run.shock_grid: size {} outside [0, 1]", size));
        SimulationConfig cfg = config;
        cfg.shocks.mode = ShockMode::EvalDeterministic;
        cfg.shocks.eval_shock.relative_size = size;
        LearnerPool pool(cfg);
        pool.restore(snapshots);
        World world(cfg, Phase::Evaluate, population, pool, 0);
        for (int m = 0; m < cfg.episode.eval_months; ++m) world.step_month();

        EvaluationRun run;
        run.histories.assign(world.histories().begin(), world.histories().end());
        run.book = world.book();
        run.money_conserved = !world.conservation_violation().has_value();

        RunMeta meta;
        meta.seed = cfg.episode.seed;
        meta.product = cfg.product.name;
        meta.shock_size = size;
        meta.shock_month = cfg.shocks.eval_shock.month;
        meta.n_borrowers = cfg.episode.n_borrowers;
        meta.eval_months = cfg.episode.eval_months;
        meta.population_seed = cfg.episode.seed;
        meta.paired_population = true;
        run.metrics = compute_bundle(run.histories, run.book, meta, cfg.product.mode != ProductMode::Off);
        runs.push_back(std::move(run));
    }
    return runs;
}

}  // namespace mabm
