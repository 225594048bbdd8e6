#ifndef ACDC_ADMISSION_HPP
#define ACDC_ADMISSION_HPP

#include <acdc/errors.hpp>
#include <acdc/lut.hpp>
#include <acdc/profile.hpp>

#include <algorithm>
#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

namespace acdc {

/// QoS requirement (L_j, R_j) and admission channel of class j.
struct qos_class {
    int index = 1;
    int delay = 10;
    double reliability = 0.95;
    std::vector<std::size_t> ac_resources;
    selection_profile ac_profile;
};

/// Time-indexed record of resolution-channel frequencies. A holding covers
/// the inclusive slot range in which its job uses the frequencies.
class capacity_ledger {
public:
    struct holding {
        std::vector<std::size_t> frequencies;
        std::int64_t first_slot = 0;
        std::int64_t last_slot = 0;
    };

    explicit capacity_ledger(std::size_t total = 0) : total_(total) {}

    std::size_t total() const { return total_; }

    std::size_t held_at(std::int64_t slot) const
    {
        std::size_t n = 0;
        for (const auto &[id, h] : holdings_)
            if (h.first_slot <= slot && slot <= h.last_slot)
                n += h.frequencies.size();
        return n;
    }

    std::size_t free_at(std::int64_t slot) const { return total_ - held_at(slot); }

    /// Minimum free count over [first, last].
    std::size_t free_over(std::int64_t first, std::int64_t last) const
    {
        return total_ - busy_over(first, last).size();
    }

    bool holds(std::uint64_t job) const { return holdings_.count(job) != 0; }
    const std::map<std::uint64_t, holding> &holdings() const { return holdings_; }

    /// Reserves the m lowest-indexed frequencies free over [first, last].
    const std::vector<std::size_t> &reserve(std::uint64_t job, std::size_t m, std::int64_t first,
                                            std::int64_t last)
    {
        if (holds(job))
            throw internal_error("ledger: job " + std::to_string(job) + " already holds frequencies");
        if (last < first)
            throw internal_error("ledger: empty holding interval");
        const auto busy = busy_over(first, last);
        holding h{{}, first, last};
        for (std::size_t f = 0; f < total_ && h.frequencies.size() < m; ++f)
            if (!std::binary_search(busy.begin(), busy.end(), f))
                h.frequencies.push_back(f);
        if (h.frequencies.size() < m)
            throw internal_error("ledger: not enough free frequencies for job " + std::to_string(job));
        return holdings_.emplace(job, std::move(h)).first->second.frequencies;
    }

    /// Ends the holding after `slot`; the frequencies are free from slot + 1.
    void release(std::uint64_t job, std::int64_t slot)
    {
        auto it = holdings_.find(job);
        if (it == holdings_.end())
            throw internal_error("ledger: unknown job " + std::to_string(job));
        if (slot < it->second.first_slot)
            holdings_.erase(it);
        else
            it->second.last_slot = std::min(it->second.last_slot, slot);
    }

    /// Forgets holdings that ended before `slot`.
    void collect(std::int64_t slot)
    {
        std::erase_if(holdings_, [slot](const auto &kv) { return kv.second.last_slot < slot; });
    }

    /// free + held == total and no frequency is held twice at `slot`.
    bool conserved_at(std::int64_t slot) const
    {
        std::vector<std::size_t> used;
        for (const auto &[id, h] : holdings_)
            if (h.first_slot <= slot && slot <= h.last_slot)
                used.insert(used.end(), h.frequencies.begin(), h.frequencies.end());
        std::sort(used.begin(), used.end());
        return std::adjacent_find(used.begin(), used.end()) == used.end() && used.size() <= total_ &&
               (used.empty() || used.back() < total_);
    }

private:
    std::vector<std::size_t> busy_over(std::int64_t first, std::int64_t last) const
    {
        std::vector<std::size_t> busy;
        for (const auto &[id, h] : holdings_)
            if (h.first_slot <= last && first <= h.last_slot)
                busy.insert(busy.end(), h.frequencies.begin(), h.frequencies.end());
        std::sort(busy.begin(), busy.end());
        busy.erase(std::unique(busy.begin(), busy.end()), busy.end());
        return busy;
    }

    std::size_t total_;
    std::map<std::uint64_t, holding> holdings_;
};

enum class verdict { accept, reject_infeasible, reject_no_capacity };

inline const char *to_string(verdict v)
{
    switch (v) {
    case verdict::accept: return "accept";
    case verdict::reject_infeasible: return "reject-infeasible";
    case verdict::reject_no_capacity: return "reject-no-capacity";
    }
    return "?";
}

struct admission_decision {
    verdict outcome = verdict::reject_infeasible;
    int m_p = 0;
    std::vector<std::size_t> frequencies;
    /// Slots deferred before the first resolution slot (0 when unbuffered).
    int wait = 0;
    std::int64_t first_slot = 0;
    std::int64_t deadline_slot = 0;
    std::size_t free_before = 0;
    std::size_t free_after = 0;

    bool accepted() const { return outcome == verdict::accept; }
};

namespace detail {

inline admission_decision try_admit(const qos_class &cls, int u_dagger, const parallelization_lut &lut,
                                    capacity_ledger &ledger, std::int64_t slot, std::uint64_t job,
                                    int max_wait)
{
    admission_decision d;
    d.deadline_slot = slot + cls.delay;
    d.free_before = ledger.free_at(slot + 1);
    d.free_after = d.free_before;

    const int m0 = lut.query(cls.delay, cls.reliability, u_dagger);
    if (m0 == 0) {
        d.outcome = verdict::reject_infeasible;
        return d;
    }
    d.outcome = verdict::reject_no_capacity;
    d.m_p = m0;
    for (int w = 0; w <= max_wait; ++w) {
        const int residual = cls.delay - w;
        const int m = w == 0 ? m0 : lut.query(residual, cls.reliability, u_dagger);
        if (m == 0)
            break;
        const std::int64_t first = slot + 1 + w;
        if (ledger.free_over(first, d.deadline_slot) >= std::size_t(m)) {
            d.outcome = verdict::accept;
            d.m_p = m;
            d.wait = w;
            d.first_slot = first;
            d.frequencies = ledger.reserve(job, std::size_t(m), first, d.deadline_slot);
            d.free_after = ledger.free_at(slot + 1);
            return d;
        }
    }
    return d;
}

} // namespace detail

/// Accept with m_p = f(L_j, R_j, u_dagger) when that many frequencies are free
/// for the whole resolution window [slot + 1, slot + L_j]; otherwise reject.
inline admission_decision decide(const qos_class &cls, int u_dagger, const parallelization_lut &lut,
                                 capacity_ledger &ledger, std::int64_t slot, std::uint64_t job)
{
    return detail::try_admit(cls, u_dagger, lut, ledger, slot, job, 0);
}

/// As decide, but a capacity shortfall may be absorbed by starting up to
/// max_wait slots later with the LUT re-queried for the residual deadline.
inline admission_decision decide_buffered(const qos_class &cls, int u_dagger, const parallelization_lut &lut,
                                          capacity_ledger &ledger, std::int64_t slot, std::uint64_t job,
                                          int max_wait)
{
    if (max_wait < 0)
        throw config_error("max_wait must be non-negative");
    return detail::try_admit(cls, u_dagger, lut, ledger, slot, job, max_wait);
}

struct admission_log_entry {
    std::int64_t slot = 0;
    int cls = 0;
    std::size_t resource = 0;
    int u_hat = 0;
    int u_dagger = 0;
    verdict outcome = verdict::reject_infeasible;
    int m_p = 0;
    std::size_t free_before = 0;
    std::size_t free_after = 0;
};

inline void write_admission_log(std::ostream &os, const std::vector<admission_log_entry> &log)
{
    os << "slot,class,resource,u_hat,u_dagger,verdict,m_p,free_before,free_after\n";
    for (const auto &e : log)
        os << e.slot << ',' << e.cls << ',' << e.resource << ',' << e.u_hat << ',' << e.u_dagger << ','
           << to_string(e.outcome) << ',' << e.m_p << ',' << e.free_before << ',' << e.free_after << '\n';
}

} // namespace acdc

#endif // ACDC_ADMISSION_HPP
