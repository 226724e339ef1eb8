#pragma once

// Fixed-rate mortgage math and the borrower utility function.

#include "mabm/domain.hpp"

namespace mabm {

enum class LoanStatus { Current, Delinquent, InRelief, ForeclosureCompleted, PaidOff };

std::string_view to_string(LoanStatus s);

/// Which "loan value" divides cumulative payments in the equity component.
enum class EquityBasis {
    TotalScheduled,  // scheduled payment x term; a completed loan gives exactly 1
    Principal,       // original principal; clamped to 1
};

/// Fixed-rate amortizing loan.
///
/// `balance` follows the contractual schedule: each month the scheduled
/// principal is removed from it whether or not the borrower paid, and any
/// unpaid part of the installment moves to `arrears`. balance + arrears is
/// therefore always the total debt. Interest accrues on `balance` only.
struct Loan {
    Money original_principal;
    Rate annual_rate;
    int term_months = 0;
    int remaining_term_months = 0;
    Money balance;
    Money scheduled_payment;
    Money payments_made_total;
    Money arrears;
    int months_delinquent = 0;
    LoanStatus status = LoanStatus::Current;
    /// Total scheduled obligation (payment x term), rebased on modification.
    Money loan_value;
    /// Set while in forbearance: arrears grow but the delinquency count is held.
    bool delinquency_frozen = false;

    bool is_closed() const {
        return status == LoanStatus::PaidOff || status == LoanStatus::ForeclosureCompleted;
    }
    Money total_debt() const { return balance + arrears; }
};

/// Level annuity payment, rounded half-even to the cent. Zero rate gives
/// principal / term. The final installment absorbs the rounding residual.
Money scheduled_payment(Money principal, Rate annual_rate, int term_months);

/// Unrounded annuity payment in dollars (used by oracles and back-solving).
double annuity_payment(double principal, double monthly_rate, int term_months);

/// Principal that a given level payment amortizes over the term.
Money principal_for_payment(Money payment, Rate annual_rate, int term_months);

Loan originate_loan(Money principal, Rate annual_rate, int term_months);

/// Interest that will accrue this month.
Money monthly_interest(const Loan& loan);

/// Regular installment for this month: the scheduled payment, or the payoff
/// amount (balance + interest) in the final month or when it is smaller.
Money installment_due(const Loan& loan);

/// Amount that brings the loan fully current this month.
inline Money total_due(const Loan& loan) { return installment_due(loan) + loan.arrears; }

struct PaymentResult {
    Loan loan;
    Money interest_accrued;
    Money interest_portion;
    Money principal_portion;  // scheduled principal + any prepayment
    Money arrears_portion;
    Money refund;
    Money shortfall;  // unpaid part of this month's installment, added to arrears
    bool missed() const { return shortfall.is_positive(); }
};

/// ceil(arrears / payment): whole installments past due.
int delinquency_months(Money arrears, Money payment);

/// One month of the ledger. Interest accrues on the balance; the amount pays
/// this month's interest, then this month's scheduled principal, then
/// arrears, then prepays principal. Anything beyond payoff is refunded.
/// Throws StateError on a closed loan and ConfigError on a negative amount.
PaymentResult apply_payment(const Loan& loan, Money amount);

/// Re-runs `months` fully paid installments on a fresh loan (loan age).
Loan season_loan(Loan loan, int months);

/// L = 1 - min(1, housing_payment / income); income <= 0 gives 0.
double liquidity_component(Money housing_payment, Money income);

/// E = payments made / loan value, in [0, 1].
double equity_component(const Loan& loan, EquityBasis basis = EquityBasis::TotalScheduled);

struct UtilityParams {
    double gamma = 0.5;  // liquidity preference

    static UtilityParams of(double gamma);
};

/// U = gamma * L + (1 - gamma) * h * E
double utility(UtilityParams params, double liquidity, double equity, double hpi);

}  // namespace mabm
