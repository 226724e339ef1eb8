#include "mabm/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "json.hpp"

namespace mabm {

void BorrowerHistory::record_miss(int month, bool value) {
    if (month < 0) throw StateError("negative month");
    if (missed.size() <= static_cast<std::size_t>(month)) missed.resize(static_cast<std::size_t>(month) + 1, 0);
    missed[static_cast<std::size_t>(month)] = value ? 1 : 0;
}

namespace {

std::optional<int> first_miss(const BorrowerHistory& h, int from_month, int to_month) {
    const int end = std::min<int>(to_month, static_cast<int>(h.missed.size()));
    for (int m = std::max(from_month, 0); m < end; ++m) {
        if (h.missed[static_cast<std::size_t>(m)] != 0) return m;
    }
    return std::nullopt;
}

template <class Pred>
QuintileRates count_rates(std::span<const BorrowerHistory> histories, Pred pred) {
    QuintileRates r;
    for (const auto& h : histories) {
        RateCell& c = r.by_quintile[h.quintile.slot()];
        const bool hit = pred(h);
        ++c.borrowers;
        ++r.overall.borrowers;
        if (hit) {
            ++c.hits;
            ++r.overall.hits;
        }
    }
    return r;
}

void finalize(TtaStats& s, std::vector<int>& samples) {
    s.affected = static_cast<int>(samples.size());
    if (samples.empty()) return;
    std::sort(samples.begin(), samples.end());
    double total = 0.0;
    for (int v : samples) {
        total += v;
        ++s.distribution[v];
    }
    s.mean = total / static_cast<double>(samples.size());
    const std::size_t n = samples.size();
    s.median = n % 2 == 1 ? static_cast<double>(samples[n / 2])
                          : 0.5 * (static_cast<double>(samples[n / 2 - 1]) + static_cast<double>(samples[n / 2]));
}

}  // namespace

QuintileRates affected_rate(std::span<const BorrowerHistory> histories, int from_month, int to_month) {
    return count_rates(histories,
                       [&](const BorrowerHistory& h) { return first_miss(h, from_month, to_month).has_value(); });
}

QuintileTta time_to_affect(std::span<const BorrowerHistory> histories, int shock_month, int to_month) {
    std::array<std::vector<int>, kQuintiles> per_q;
    std::vector<int> all;
    for (const auto& h : histories) {
        if (const auto m = first_miss(h, shock_month, to_month)) {
            per_q[h.quintile.slot()].push_back(*m - shock_month);
            all.push_back(*m - shock_month);
        }
    }
    QuintileTta out;
    for (std::size_t q = 0; q < kQuintiles; ++q) finalize(out.by_quintile[q], per_q[q]);
    finalize(out.overall, all);
    return out;
}

QuintileRates foreclosure_rate(std::span<const BorrowerHistory> histories) {
    return count_rates(histories, [](const BorrowerHistory& h) { return h.foreclosed(); });
}

QuintileRates mra_uptake(std::span<const BorrowerHistory> histories) {
    return count_rates(histories, [](const BorrowerHistory& h) { return h.mra_enrolled; });
}

Money MetricsBundle::cumulative_net_cash() const {
    Money total;
    for (const auto& m : servicer_months) total += m.net_cash();
    return total;
}

MetricsBundle compute_bundle(std::span<const BorrowerHistory> histories, const ServicerBook& book, RunMeta meta,
                             bool products_enabled) {
    MetricsBundle b;
    b.meta = std::move(meta);
    const int horizon = b.meta.eval_months;
    b.affected = affected_rate(histories, b.meta.shock_month, horizon);
    b.tta = time_to_affect(histories, b.meta.shock_month, horizon);
    b.foreclosure = foreclosure_rate(histories);
    b.uptake = mra_uptake(histories);
    b.products_enabled = products_enabled;
    b.servicer_months = book.net_cash_by_month;
    if (b.servicer_months.size() < static_cast<std::size_t>(std::max(horizon, 0))) {
        b.servicer_months.resize(static_cast<std::size_t>(horizon));
    }
    b.write_offs_total = book.advances_written_off_cum;
    for (const auto& h : histories) {
        const std::size_t q = h.quintile.slot();
        b.fee_income_by_quintile[q] += h.fees_paid;
        b.actions[q].pay_full += h.pay_full;
        b.actions[q].pay_savings += h.pay_savings;
        b.actions[q].miss += h.miss;
        b.actions_overall.pay_full += h.pay_full;
        b.actions_overall.pay_savings += h.pay_savings;
        b.actions_overall.miss += h.miss;
    }
    return b;
}

std::string format_fraction(double x) {
    std::string s = fmt::format("{:.6f}", x);
    if (s == "-0.000000") s = "0.000000";
    return s;
}

namespace {

std::string opt(const std::optional<double>& v) { return v ? format_fraction(*v) : std::string{}; }

std::string quintile_label(std::size_t slot) { return fmt::format("Q{}", slot + 1); }

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error(fmt::format("cannot open {} for writing", path.string()));
    out << content;
    out.flush();
    if (!out) throw std::runtime_error(fmt::format("write failed: {}", path.string()));
}

std::string rates_csv(const QuintileRates& r, std::string_view hits_column, bool has_rows) {
    std::string s = fmt::format("quintile,borrowers,{},rate\n", hits_column);
    if (!has_rows) return s;
    for (std::size_t q = 0; q < kQuintiles; ++q) {
        const RateCell& c = r.by_quintile[q];
        s += fmt::format("{},{},{},{}\n", quintile_label(q), c.borrowers, c.hits, format_fraction(c.rate()));
    }
    s += fmt::format("all,{},{},{}\n", r.overall.borrowers, r.overall.hits, format_fraction(r.overall.rate()));
    return s;
}

}  // namespace

void write_csv(const MetricsBundle& b, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw std::runtime_error(fmt::format("cannot create {}: {}", dir.string(), ec.message()));

    const bool rows = b.affected.overall.borrowers > 0;

    write_file(dir / "affected_rate.csv", rates_csv(b.affected, "affected", rows));
    write_file(dir / "foreclosure_rate.csv", rates_csv(b.foreclosure, "foreclosed", rows));
    write_file(dir / "mra_uptake.csv", rates_csv(b.uptake, "enrolled", rows && b.products_enabled));

    {
        std::string s = "quintile,affected,mean_months,median_months\n";
        if (rows) {
            for (std::size_t q = 0; q < kQuintiles; ++q) {
                const TtaStats& t = b.tta.by_quintile[q];
                s += fmt::format("{},{},{},{}\n", quintile_label(q), t.affected, opt(t.mean), opt(t.median));
            }
            s += fmt::format("all,{},{},{}\n", b.tta.overall.affected, opt(b.tta.overall.mean), opt(b.tta.overall.median));
        }
        write_file(dir / "time_to_affect.csv", s);
    }
    {
        std::string s = "quintile,months,count\n";
        for (std::size_t q = 0; q < kQuintiles && rows; ++q) {
            for (const auto& [months, count] : b.tta.by_quintile[q].distribution) {
                s += fmt::format("{},{},{}\n", quintile_label(q), months, count);
            }
        }
        write_file(dir / "time_to_affect_distribution.csv", s);
    }
    {
        std::string s =
            "month,fees,incentives,advances,recoveries,write_offs,mra_match,net_cash,net_cash_per_borrower,"
            "cumulative_per_borrower\n";
        if (rows) {
            const double inv = 1.0 / b.meta.n_borrowers;
            Money cum;
            for (std::size_t m = 0; m < b.servicer_months.size(); ++m) {
                const MonthCash& c = b.servicer_months[m];
                cum += c.net_cash();
                s += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", m, c.fees.to_string(), c.incentives.to_string(),
                                 c.advances.to_string(), c.recoveries.to_string(), c.write_offs.to_string(),
                                 c.mra_match.to_string(), c.net_cash().to_string(),
                                 c.net_cash().scaled(inv).to_string(), cum.scaled(inv).to_string());
            }
        }
        write_file(dir / "servicer_profit.csv", s);
    }
    {
        std::string s = "quintile,fee_income,share\n";
        if (rows) {
            Money total;
            for (const Money& m : b.fee_income_by_quintile) total += m;
            for (std::size_t q = 0; q < kQuintiles; ++q) {
                const Money f = b.fee_income_by_quintile[q];
                const double share = total.is_positive() ? static_cast<double>(f.cents()) / total.cents() : 0.0;
                s += fmt::format("{},{},{}\n", quintile_label(q), f.to_string(), format_fraction(share));
            }
            s += fmt::format("all,{},{}\n", total.to_string(), format_fraction(total.is_positive() ? 1.0 : 0.0));
        }
        write_file(dir / "fee_income_by_quintile.csv", s);
    }
    {
        std::string s = "quintile,pay_full,pay_savings,miss,pay_full_share\n";
        if (rows) {
            auto row = [&](const std::string& label, const ActionCounts& a) {
                const double share = a.total() == 0 ? 0.0 : static_cast<double>(a.pay_full) / a.total();
                s += fmt::format("{},{},{},{},{}\n", label, a.pay_full, a.pay_savings, a.miss, format_fraction(share));
            };
            for (std::size_t q = 0; q < kQuintiles; ++q) row(quintile_label(q), b.actions[q]);
            row("all", b.actions_overall);
        }
        write_file(dir / "actions.csv", s);
    }

    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["seed"] = b.meta.seed;
    j["config_hash"] = b.meta.config_hash;
    j["comparability_hash"] = b.meta.comparability_hash;
    j["product"] = b.meta.product;
    j["shock_size"] = format_fraction(b.meta.shock_size);
    j["shock_month"] = b.meta.shock_month;
    j["n_borrowers"] = b.meta.n_borrowers;
    j["eval_months"] = b.meta.eval_months;
    j["population_seed"] = b.meta.population_seed;
    j["paired_population"] = b.meta.paired_population;
    j["products_enabled"] = b.products_enabled;
    j["cumulative_net_cash"] = b.cumulative_net_cash().to_string();
    j["write_offs_total"] = b.write_offs_total.to_string();
    write_file(dir / "manifest.json", j.dump(2) + "\n");
}

void write_summary_csv(std::span<const MetricsBundle> bundles, const std::filesystem::path& path) {
    struct Key {
        std::string product;
        double shock;
        auto operator<=>(const Key&) const = default;
    };
    struct Acc {
        int runs = 0;
        std::array<double, kQuintiles + 1> affected{};
        std::array<double, kQuintiles + 1> foreclosure{};
        std::array<double, kQuintiles + 1> uptake{};
        std::array<double, kQuintiles + 1> tta_sum{};
        std::array<int, kQuintiles + 1> tta_n{};
        double profit = 0.0;
    };
    // Insertion order of keys follows the (already ordered) bundles.
    std::vector<Key> order;
    std::map<Key, Acc> acc;
    for (const auto& b : bundles) {
        const Key k{b.meta.product, b.meta.shock_size};
        auto [it, inserted] = acc.try_emplace(k);
        if (inserted) order.push_back(k);
        Acc& a = it->second;
        ++a.runs;
        for (std::size_t q = 0; q <= kQuintiles; ++q) {
            const bool all = q == kQuintiles;
            a.affected[q] += all ? b.affected.overall.rate() : b.affected.by_quintile[q].rate();
            a.foreclosure[q] += all ? b.foreclosure.overall.rate() : b.foreclosure.by_quintile[q].rate();
            a.uptake[q] += all ? b.uptake.overall.rate() : b.uptake.by_quintile[q].rate();
            const TtaStats& t = all ? b.tta.overall : b.tta.by_quintile[q];
            if (t.mean) {
                a.tta_sum[q] += *t.mean;
                ++a.tta_n[q];
            }
        }
        a.profit += b.meta.n_borrowers > 0 ? b.cumulative_net_cash().dollars() / b.meta.n_borrowers : 0.0;
    }

    std::string s =
        "product,shock_size,quintile,runs,affected_rate,mean_time_to_affect,foreclosure_rate,mra_uptake,"
        "net_profit_per_borrower\n";
    for (const Key& k : order) {
        const Acc& a = acc.at(k);
        const double n = a.runs;
        const Money profit = money_from_dollars(a.profit / n);
        for (std::size_t q = 0; q <= kQuintiles; ++q) {
            const std::string label = q == kQuintiles ? "all" : quintile_label(q);
            const std::string tta = a.tta_n[q] == 0 ? std::string{} : format_fraction(a.tta_sum[q] / a.tta_n[q]);
            s += fmt::format("{},{},{},{},{},{},{},{},{}\n", k.product, format_fraction(k.shock), label, a.runs,
                             format_fraction(a.affected[q] / n), tta, format_fraction(a.foreclosure[q] / n),
                             format_fraction(a.uptake[q] / n), q == kQuintiles ? profit.to_string() : std::string{});
        }
    }
    if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
    write_file(path, s);
}

}  // namespace mabm
