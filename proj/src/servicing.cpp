#include "mabm/servicing.hpp"

#include <algorithm>

#include <fmt/format.h>

namespace mabm {

void ServicerConfig::validate() const {
    if (!(monthly_fee_rate >= 0.0 && monthly_fee_rate <= 1.0)) {
        throw ConfigError(fmt::format("servicer.monthly_fee_rate {} outside [0, 1]", monthly_fee_rate));
    }
    if (advance_cap_payments < 1) throw ConfigError("servicer.advance_cap_payments must be >= 1");
    if (incentive_repayment.is_negative()) throw ConfigError("servicer.incentive_repayment must be >= 0");
    if (incentive_forbearance.is_negative()) throw ConfigError("servicer.incentive_forbearance must be >= 0");
    if (incentive_modification.is_negative()) throw ConfigError("servicer.incentive_modification must be >= 0");
    if (foreclosure_trigger_months < 1) throw ConfigError("servicer.foreclosure_trigger_months must be >= 1");
    if (repayment_spread_months < 1) throw ConfigError("servicer.repayment_spread_months must be >= 1");
    if (forbearance_max_months < 1) throw ConfigError("servicer.forbearance_max_months must be >= 1");
    if (modification_term_extension_months < 0) {
        throw ConfigError("servicer.modification_term_extension_months must be >= 0");
    }
}

MonthCash& ServicerBook::month(int m) {
    if (m < 0) throw StateError("negative month");
    if (net_cash_by_month.size() <= static_cast<std::size_t>(m)) net_cash_by_month.resize(static_cast<std::size_t>(m) + 1);
    return net_cash_by_month[static_cast<std::size_t>(m)];
}

Money collect_fee(ServicerBook& book, LoanServicing& servicing, const Loan& loan, const ServicerConfig& config,
                  int month) {
    if (loan.is_closed()) return Money{};
    const Money fee = loan.scheduled_payment.scaled(config.monthly_fee_rate);
    book.fee_income_cum += fee;
    book.month(month).fees += fee;
    servicing.fees_collected += fee;
    return fee;
}

Money advance_missed_payment(ServicerBook& book, LoanServicing& servicing, Money amount,
                             const ServicerConfig& config, int month) {
    if (!amount.is_positive() || servicing.advances_in_episode >= config.advance_cap_payments) return Money{};
    servicing.advances_in_episode += 1;
    servicing.advances_outstanding += amount;
    servicing.advanced_total += amount;
    book.advances_outstanding += amount;
    book.advances_total_cum += amount;
    book.month(month).advances += amount;
    return amount;
}

ReliefOfferKind offer_relief(const Loan& loan, const LoanServicing& servicing, bool hardship) {
    if (loan.is_closed() || servicing.active_plan || !hardship || loan.months_delinquent < 1) {
        return ReliefOfferKind::None;
    }
    switch (servicing.highest_rung) {
        case ReliefOfferKind::None:
            return (loan.months_delinquent >= 2 || servicing.repayment_failed) ? ReliefOfferKind::Forbearance
                                                                                : ReliefOfferKind::Repayment;
        case ReliefOfferKind::Repayment: return ReliefOfferKind::Forbearance;
        case ReliefOfferKind::Forbearance: return ReliefOfferKind::Modification;
        case ReliefOfferKind::Modification: return ReliefOfferKind::None;
    }
    return ReliefOfferKind::None;
}

namespace {

Money repayment_catch_up(const Loan& loan, const ReliefPlan& plan, const ServicerConfig& config) {
    if (plan.months_elapsed + 1 >= plan.months_total) return loan.arrears;
    const Money per_month = Money::from_cents(plan.arrears_at_start.cents() / config.repayment_spread_months);
    return min(per_month, loan.arrears);
}

}  // namespace

Money amount_due(const Loan& loan, const LoanServicing& servicing, const ServicerConfig& config) {
    if (loan.is_closed()) return Money{};
    if (servicing.active_plan) {
        if (servicing.active_plan->kind == ReliefKind::Forbearance) return Money{};
        if (servicing.active_plan->kind == ReliefKind::RepaymentPlan) {
            return installment_due(loan) + repayment_catch_up(loan, *servicing.active_plan, config);
        }
    }
    return total_due(loan);
}

Money regular_due(const Loan& loan, const LoanServicing& servicing, const ServicerConfig&) {
    if (loan.is_closed()) return Money{};
    if (servicing.active_plan && servicing.active_plan->kind == ReliefKind::Forbearance) return Money{};
    return installment_due(loan);
}

Money recover_advances_on_cure(ServicerBook& book, LoanServicing& servicing, Money arrears_repaid, int month) {
    const Money recovered = min(arrears_repaid, servicing.advances_outstanding);
    if (!recovered.is_positive()) return Money{};
    servicing.advances_outstanding -= recovered;
    book.advances_outstanding -= recovered;
    book.advances_recovered_cum += recovered;
    book.month(month).recoveries += recovered;
    return recovered;
}

ReliefResult apply_relief(Loan& loan, LoanServicing& servicing, ReliefOfferKind kind, ServicerBook& book,
                          const ServicerConfig& config, int month) {
    if (loan.is_closed()) throw StateError(fmt::format("relief on a {} loan", to_string(loan.status)));
    if (servicing.active_plan) throw StateError("relief while another plan is active");

    ReliefResult result;
    switch (kind) {
        case ReliefOfferKind::None:
            throw StateError("apply_relief with no offer");
        case ReliefOfferKind::Repayment:
            servicing.active_plan = ReliefPlan{ReliefKind::RepaymentPlan, month, config.repayment_spread_months, 0,
                                               loan.arrears};
            loan.status = LoanStatus::InRelief;
            result.incentive = config.incentive_repayment;
            break;
        case ReliefOfferKind::Forbearance:
            servicing.active_plan = ReliefPlan{ReliefKind::Forbearance, month, config.forbearance_max_months, 0, {}};
            loan.status = LoanStatus::InRelief;
            loan.delinquency_frozen = true;
            result.incentive = config.incentive_forbearance;
            break;
        case ReliefOfferKind::Modification: {
            loan.balance += loan.arrears;
            loan.arrears = Money{};
            loan.months_delinquent = 0;
            loan.remaining_term_months += config.modification_term_extension_months;
            if (loan.balance.is_positive() && loan.remaining_term_months > 0) {
                loan.scheduled_payment = scheduled_payment(loan.balance, loan.annual_rate, loan.remaining_term_months);
            }
            loan.loan_value = loan.payments_made_total + loan.scheduled_payment * loan.remaining_term_months;
            loan.status = LoanStatus::Current;
            // Capitalised arrears make the owner whole, so the advances come back in full.
            result.recovered_advances = recover_advances_on_cure(book, servicing, servicing.advances_outstanding, month);
            servicing.advances_in_episode = 0;
            result.incentive = config.incentive_modification;
            break;
        }
    }
    servicing.pending_offer = ReliefOfferKind::None;
    book.incentives_cum += result.incentive;
    book.month(month).incentives += result.incentive;
    return result;
}

ForeclosureResult trigger_foreclosure(Loan& loan, LoanServicing& servicing, ServicerBook& book, double h, int month) {
    if (loan.is_closed()) throw StateError(fmt::format("foreclosure on a {} loan", to_string(loan.status)));
    ForeclosureResult r;
    const Money outstanding = servicing.advances_outstanding;
    r.recovered = outstanding.scaled(std::min(h, 1.0));
    r.written_off = outstanding - r.recovered;

    servicing.advances_outstanding = Money{};
    book.advances_outstanding -= outstanding;
    book.advances_recovered_cum += r.recovered;
    book.advances_written_off_cum += r.written_off;
    book.month(month).recoveries += r.recovered;
    book.month(month).write_offs += r.written_off;

    servicing.active_plan.reset();
    servicing.pending_offer = ReliefOfferKind::None;
    loan.status = LoanStatus::ForeclosureCompleted;
    loan.delinquency_frozen = false;
    return r;
}

ServicingOutcome service_month(Loan& loan, LoanServicing& servicing, Money received, bool hardship, double h,
                               const ServicerConfig& config, ServicerBook& book, int month) {
    ServicingOutcome out;
    out.received_total = received;
    out.due = amount_due(loan, servicing, config);
    out.regular = regular_due(loan, servicing, config);
    const bool in_forbearance = servicing.active_plan && servicing.active_plan->kind == ReliefKind::Forbearance;

    out.payment = apply_payment(loan, received);
    loan = out.payment.loan;
    out.missed = !in_forbearance && out.payment.shortfall.is_positive();

    if (!in_forbearance && !out.missed && out.regular.is_positive()) {
        out.fee = collect_fee(book, servicing, loan, config, month);
    }
    // Forbearance months are still advanced to the owner, subject to the cap.
    if (out.payment.shortfall.is_positive()) {
        out.advanced = advance_missed_payment(book, servicing, out.payment.shortfall, config, month);
    }
    if (out.payment.arrears_portion.is_positive()) {
        out.recovered_from_payment = recover_advances_on_cure(book, servicing, out.payment.arrears_portion, month);
    }

    if (servicing.active_plan) {
        ReliefPlan& plan = *servicing.active_plan;
        if (plan.kind == ReliefKind::Forbearance) {
            if (++plan.months_elapsed >= plan.months_total) {
                servicing.active_plan.reset();
                loan.delinquency_frozen = false;
                loan.months_delinquent = delinquency_months(loan.arrears, loan.scheduled_payment);
                if (!loan.is_closed()) {
                    loan.status = loan.arrears.is_positive() ? LoanStatus::Delinquent : LoanStatus::Current;
                }
                out.plan_completed = true;
            }
        } else if (plan.kind == ReliefKind::RepaymentPlan) {
            if (received < out.due) {
                servicing.active_plan.reset();
                servicing.repayment_failed = true;
                out.plan_failed = true;
            } else if (++plan.months_elapsed >= plan.months_total || loan.arrears.is_zero()) {
                servicing.active_plan.reset();
                out.plan_completed = loan.arrears.is_zero();
                out.plan_failed = !out.plan_completed;
                if (out.plan_failed) servicing.repayment_failed = true;
            }
            if (!servicing.active_plan && !loan.is_closed()) {
                loan.status = loan.arrears.is_positive() ? LoanStatus::Delinquent : LoanStatus::Current;
            }
        }
    }

    if (loan.arrears.is_zero()) servicing.advances_in_episode = 0;

    if (!loan.is_closed() && !servicing.active_plan && loan.months_delinquent >= 1) {
        const ReliefOfferKind offer = offer_relief(loan, servicing, hardship);
        if (offer != ReliefOfferKind::None) {
            servicing.pending_offer = offer;
            servicing.highest_rung = offer;
            out.new_offer = offer;
        } else if (loan.months_delinquent >= config.foreclosure_trigger_months) {
            const auto fc = trigger_foreclosure(loan, servicing, book, h, month);
            out.foreclosed = true;
            out.recovered_at_foreclosure = fc.recovered;
            out.written_off = fc.written_off;
        }
    }
    return out;
}

Money net_profit_per_borrower(const ServicerBook& book, int n_borrowers, int from_month, int to_month) {
    if (n_borrowers <= 0) throw ConfigError("net_profit_per_borrower: n_borrowers must be > 0");
    Money total;
    for (int m = std::max(from_month, 0); m < to_month && m < static_cast<int>(book.net_cash_by_month.size()); ++m) {
        total += book.net_cash_by_month[static_cast<std::size_t>(m)].net_cash();
    }
    return total.scaled(1.0 / n_borrowers);
}

}  // namespace mabm
