#pragma once

// Mortgage reserve accounts: a fund drawn down to cover missed payments,
// either granted upfront or built from a borrower contribution matched 1:1
// by the servicer.

#include <optional>
#include <string>
#include <vector>

#include "mabm/domain.hpp"

namespace mabm {

enum class MraSource { Upfront, Matched };

struct MRAAccount {
    Money funded_total;
    Money balance;
    MraSource source = MraSource::Upfront;
    Money borrower_contribution;  // Matched only; funded_total == 2 * contribution

    Money paid_out() const { return funded_total - balance; }
};

MRAAccount open_upfront_mra(Money amount);

struct DrawResult {
    MRAAccount account;
    Money covered;
};

/// covered = min(balance, shortfall). Partial draws are allowed; whatever is
/// left of the shortfall stays a missed payment.
DrawResult draw_for_missed_payment(const MRAAccount& account, Money shortfall);

/// Takes m out of `savings` and opens an account funded at 2m. m = 0 opens
/// nothing. m > savings is a StateError (the action is masked upstream).
std::optional<MRAAccount> enroll_matched(Money& savings, Money contribution);

enum class ProductMode { Off, Upfront, Matched };

std::string_view to_string(ProductMode m);

struct ProductConfig {
    std::string name = "none";
    ProductMode mode = ProductMode::Off;
    Money upfront_amount;        // Upfront: M
    std::vector<Money> menu;     // Matched: contribution choices m

    static std::vector<Money> default_menu();

    /// Empty iff valid; entries name the field.
    std::vector<std::string> violations() const;
};

}  // namespace mabm
