#pragma once

// Servicer agent. Tracks delinquency, runs the loss-mitigation waterfall
// (repayment plan -> forbearance -> modification -> foreclosure), and keeps
// the fee / advance / incentive / recovery book. The mortgage owner is a
// passive sink for whatever the servicer forwards.

#include <optional>
#include <vector>

#include "mabm/domain.hpp"
#include "mabm/finance.hpp"
#include "mabm/policy.hpp"

namespace mabm {

struct ServicerConfig {
    double monthly_fee_rate = 0.0025;  // fraction of the scheduled payment
    int advance_cap_payments = 4;
    Money incentive_repayment = Money::from_cents(50'000);
    Money incentive_forbearance = Money::from_cents(50'000);
    Money incentive_modification = Money::from_cents(100'000);
    int foreclosure_trigger_months = 4;
    int repayment_spread_months = 6;
    int forbearance_max_months = 6;
    int modification_term_extension_months = 120;

    /// Throws ConfigError naming the offending field.
    void validate() const;
};

enum class ReliefKind { RepaymentPlan, Forbearance, Modification };

struct ReliefPlan {
    ReliefKind kind = ReliefKind::RepaymentPlan;
    int start_month = 0;
    int months_total = 0;
    int months_elapsed = 0;
    Money arrears_at_start;  // repayment plan only
};

/// The servicer's per-loan record.
struct LoanServicing {
    Money advances_outstanding;
    Money advanced_total;
    int advances_in_episode = 0;  // count toward the cap; reset when the loan cures
    /// Highest waterfall rung offered so far; offers never go back down.
    ReliefOfferKind highest_rung = ReliefOfferKind::None;
    bool repayment_failed = false;
    std::optional<ReliefPlan> active_plan;
    ReliefOfferKind pending_offer = ReliefOfferKind::None;
    Money fees_collected;
};

struct MonthCash {
    Money fees;
    Money incentives;
    Money advances;
    Money recoveries;
    Money write_offs;  // recognised loss, not a cash movement
    Money mra_match;   // servicer's half of matched reserve accounts

    Money net_cash() const { return fees + incentives + recoveries - advances - mra_match; }
};

struct ServicerBook {
    Money fee_income_cum;
    Money incentives_cum;
    Money advances_outstanding;
    Money advances_total_cum;
    Money advances_recovered_cum;
    Money advances_written_off_cum;
    Money mra_match_cum;
    std::vector<MonthCash> net_cash_by_month;

    MonthCash& month(int m);

    /// total advanced == outstanding + recovered + written off.
    bool advances_conserved() const {
        return advances_total_cum == advances_outstanding + advances_recovered_cum + advances_written_off_cum;
    }
};

/// Fee on this month's scheduled payment; added to the book. Closed loans
/// pay nothing.
Money collect_fee(ServicerBook& book, LoanServicing& servicing, const Loan& loan, const ServicerConfig& config,
                  int month);

/// Advances `amount` (normally the missed installment) to the owner unless
/// the loan has already used its cap of advanced payments. Returns the amount
/// advanced (0 when capped).
Money advance_missed_payment(ServicerBook& book, LoanServicing& servicing, Money amount,
                             const ServicerConfig& config, int month);

/// Next waterfall rung for a delinquent loan, or None. Requires hardship
/// (the borrower cannot cure from income) and no active plan. First miss gets
/// a repayment plan; two or more months, or a failed repayment plan, gets
/// forbearance; after forbearance, modification. Each rung is offered once.
ReliefOfferKind offer_relief(const Loan& loan, const LoanServicing& servicing, bool hardship);

/// Installment plus repayment-plan catch-up for this month; 0 in forbearance;
/// outside a plan, everything owed (installment + arrears).
Money amount_due(const Loan& loan, const LoanServicing& servicing, const ServicerConfig& config);

/// Only the part of amount_due that counts as this month's payment for
/// delinquency purposes (0 in forbearance).
Money regular_due(const Loan& loan, const LoanServicing& servicing, const ServicerConfig& config);

/// Borrower accepted an offer. Sets up the plan (or modifies the loan in
/// place) and credits the incentive. Throws StateError on a closed loan or
/// when a plan is already active.
struct ReliefResult {
    Money incentive;           // paid by the owner to the servicer
    Money recovered_advances;  // modification only: owner reimburses outstanding advances
};
ReliefResult apply_relief(Loan& loan, LoanServicing& servicing, ReliefOfferKind kind, ServicerBook& book,
                          const ServicerConfig& config, int month);

/// Moves up to `arrears_repaid` of this loan's outstanding advances to
/// recovered. Returns the amount recovered.
Money recover_advances_on_cure(ServicerBook& book, LoanServicing& servicing, Money arrears_repaid, int month);

/// Closes the loan. Recovers min(h, 1) of the loan's outstanding advances,
/// writes off the rest.
struct ForeclosureResult {
    Money recovered;
    Money written_off;
};
ForeclosureResult trigger_foreclosure(Loan& loan, LoanServicing& servicing, ServicerBook& book, double h, int month);

/// Everything the servicer does with one loan in one month after the
/// borrower (and any reserve account) has paid `received`.
struct ServicingOutcome {
    PaymentResult payment;
    Money due;
    Money regular;
    Money fee;
    Money advanced;
    Money recovered_from_payment;  // retained out of the borrower's arrears payment
    Money recovered_at_foreclosure;
    Money written_off;
    bool missed = false;  // this month's regular installment not fully paid
    bool foreclosed = false;
    bool plan_failed = false;
    bool plan_completed = false;
    ReliefOfferKind new_offer = ReliefOfferKind::None;

    /// Net cash the owner receives from this loan this month.
    Money owner_receipts() const {
        return payment_in_net() - fee - recovered_from_payment + advanced;
    }
    Money payment_in_net() const { return received_total - payment.refund; }
    Money received_total;
};

ServicingOutcome service_month(Loan& loan, LoanServicing& servicing, Money received, bool hardship, double h,
                               const ServicerConfig& config, ServicerBook& book, int month);

/// Cash-basis net (fees + incentives + recoveries - advances - match) over
/// months [from, to), per borrower, rounded to the cent.
Money net_profit_per_borrower(const ServicerBook& book, int n_borrowers, int from_month, int to_month);

}  // namespace mabm
