#include "mabm/products.hpp"

#include <fmt/format.h>

#include "mabm/policy.hpp"

namespace mabm {

MRAAccount open_upfront_mra(Money amount) {
    if (amount.is_negative()) throw ConfigError("upfront MRA amount must be >= 0");
    return MRAAccount{amount, amount, MraSource::Upfront, Money{}};
}

DrawResult draw_for_missed_payment(const MRAAccount& account, Money shortfall) {
    DrawResult r{account, Money{}};
    if (!shortfall.is_positive()) return r;
    r.covered = min(account.balance, shortfall);
    r.account.balance -= r.covered;
    return r;
}

std::optional<MRAAccount> enroll_matched(Money& savings, Money contribution) {
    if (contribution.is_negative()) throw StateError("negative MRA contribution");
    if (contribution.is_zero()) return std::nullopt;
    if (contribution > savings) throw StateError("MRA contribution exceeds savings");
    savings -= contribution;
    return MRAAccount{contribution * 2, contribution * 2, MraSource::Matched, contribution};
}

std::string_view to_string(ProductMode m) {
    switch (m) {
        case ProductMode::Off: return "off";
        case ProductMode::Upfront: return "upfront";
        case ProductMode::Matched: return "matched";
    }
    return "unknown";
}

std::vector<Money> ProductConfig::default_menu() {
    return {Money{}, Money::from_cents(50'000), Money::from_cents(100'000), Money::from_cents(175'000),
            Money::from_cents(250'000)};
}

std::vector<std::string> ProductConfig::violations() const {
    std::vector<std::string> out;
    if (name.empty()) out.push_back("products.variants.name: must not be empty");
    if (upfront_amount.is_negative()) {
        out.push_back(fmt::format("products.variants[{}].amount: negative M ({})", name, upfront_amount.to_string()));
    }
    if (mode == ProductMode::Matched) {
        if (menu.empty()) out.push_back(fmt::format("products.variants[{}].menu: empty", name));
        if (menu.size() > kMaxMenuItems) {
            out.push_back(fmt::format("products.variants[{}].menu: at most {} entries", name, kMaxMenuItems));
        }
        for (const Money& m : menu) {
            if (m.is_negative()) {
                out.push_back(fmt::format("products.variants[{}].menu: negative contribution {}", name, m.to_string()));
                break;
            }
        }
    }
    return out;
}

}  // namespace mabm
