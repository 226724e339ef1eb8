#include "mabm/finance.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace mabm {

std::string_view to_string(LoanStatus s) {
    switch (s) {
        case LoanStatus::Current: return "current";
        case LoanStatus::Delinquent: return "delinquent";
        case LoanStatus::InRelief: return "in_relief";
        case LoanStatus::ForeclosureCompleted: return "foreclosed";
        case LoanStatus::PaidOff: return "paid_off";
    }
    return "unknown";
}

double annuity_payment(double principal, double monthly_rate, int term_months) {
    if (monthly_rate == 0.0) return principal / term_months;
    return principal * monthly_rate / (1.0 - std::pow(1.0 + monthly_rate, -term_months));
}

Money scheduled_payment(Money principal, Rate annual_rate, int term_months) {
    if (!principal.is_positive()) throw ConfigError("scheduled_payment: principal must be > 0");
    if (term_months <= 0) throw ConfigError("scheduled_payment: term_months must be > 0");
    return Money::from_dollars(annuity_payment(principal.dollars(), annual_rate.value / 12.0, term_months));
}

Money principal_for_payment(Money payment, Rate annual_rate, int term_months) {
    const double r = annual_rate.value / 12.0;
    if (r == 0.0) return payment * term_months;
    return Money::from_dollars(payment.dollars() * (1.0 - std::pow(1.0 + r, -term_months)) / r);
}

Loan originate_loan(Money principal, Rate annual_rate, int term_months) {
    Loan loan;
    loan.original_principal = principal;
    loan.annual_rate = annual_rate;
    loan.term_months = term_months;
    loan.remaining_term_months = term_months;
    loan.balance = principal;
    loan.scheduled_payment = scheduled_payment(principal, annual_rate, term_months);
    loan.loan_value = loan.scheduled_payment * term_months;
    return loan;
}

Money monthly_interest(const Loan& loan) {
    return loan.balance.scaled(loan.annual_rate.value / 12.0);
}

Money installment_due(const Loan& loan) {
    if (loan.is_closed() || loan.balance.is_zero()) return Money{};
    const Money payoff = loan.balance + monthly_interest(loan);
    if (loan.remaining_term_months <= 1 || payoff <= loan.scheduled_payment) return payoff;
    return loan.scheduled_payment;
}

int delinquency_months(Money arrears, Money payment) {
    if (!arrears.is_positive()) return 0;
    if (!payment.is_positive()) return 1;
    return static_cast<int>((arrears.cents() + payment.cents() - 1) / payment.cents());
}

PaymentResult apply_payment(const Loan& loan, Money amount) {
    if (loan.is_closed()) {
        throw StateError(fmt::format("apply_payment on a {} loan", to_string(loan.status)));
    }
    if (amount.is_negative()) throw ConfigError("apply_payment: negative amount");

    PaymentResult r;
    r.loan = loan;
    Loan& out = r.loan;

    const Money installment = installment_due(loan);
    const Money interest = installment.is_zero() ? Money{} : monthly_interest(loan);
    const Money scheduled_principal = max(installment - interest, Money{});
    r.interest_accrued = interest;

    Money rest = amount;
    r.interest_portion = min(rest, interest);
    rest -= r.interest_portion;
    const Money current_principal = min(rest, scheduled_principal);
    rest -= current_principal;
    r.shortfall = installment - r.interest_portion - current_principal;

    r.arrears_portion = min(rest, loan.arrears);
    rest -= r.arrears_portion;

    // Schedule runs regardless of payment; the unpaid part becomes arrears.
    out.balance = loan.balance + interest - installment;
    const Money prepay = min(rest, out.balance);
    out.balance -= prepay;
    rest -= prepay;
    r.principal_portion = current_principal + prepay;
    r.refund = rest;

    out.arrears = loan.arrears - r.arrears_portion + r.shortfall;
    if (installment.is_positive() && out.remaining_term_months > 0) --out.remaining_term_months;
    out.payments_made_total += amount - r.refund;

    if (!out.delinquency_frozen) out.months_delinquent = delinquency_months(out.arrears, out.scheduled_payment);

    if (out.balance.is_zero() && out.arrears.is_zero()) {
        out.status = LoanStatus::PaidOff;
        out.months_delinquent = 0;
    } else if (out.status != LoanStatus::InRelief) {
        out.status = out.arrears.is_positive() ? LoanStatus::Delinquent : LoanStatus::Current;
    }
    return r;
}

Loan season_loan(Loan loan, int months) {
    for (int m = 0; m < months && !loan.is_closed(); ++m) {
        loan = apply_payment(loan, installment_due(loan)).loan;
    }
    return loan;
}

double liquidity_component(Money housing_payment, Money income) {
    if (!income.is_positive()) return 0.0;
    const double ratio = housing_payment.dollars() / income.dollars();
    return 1.0 - std::min(1.0, std::max(0.0, ratio));
}

double equity_component(const Loan& loan, EquityBasis basis) {
    const Money denom = basis == EquityBasis::TotalScheduled ? loan.loan_value : loan.original_principal;
    if (!denom.is_positive()) return 0.0;
    const double e = loan.payments_made_total.dollars() / denom.dollars();
    return std::clamp(e, 0.0, 1.0);
}

UtilityParams UtilityParams::of(double gamma) {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError(fmt::format("gamma {} outside [0, 1]", gamma));
    return UtilityParams{gamma};
}

double utility(UtilityParams params, double liquidity, double equity, double hpi) {
    return params.gamma * liquidity + (1.0 - params.gamma) * hpi * equity;
}

}  // namespace mabm
