#ifndef ACDC_LUT_HPP
#define ACDC_LUT_HPP

#include <acdc/errors.hpp>
#include <acdc/tree.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace acdc {

struct lut_provenance {
    enum class kind { bundled, monte_carlo };
    kind source = kind::monte_carlo;
    long runs = 0;
    std::uint64_t seed = 0;
};

inline const char *to_string(lut_provenance::kind k)
{
    return k == lut_provenance::kind::bundled ? "bundled-table" : "monte-carlo";
}

/// f(L, R, N): parallelization needed to resolve N collided users within L
/// slots with probability R. 0 marks an infeasible cell.
class parallelization_lut {
public:
    parallelization_lut() = default;
    parallelization_lut(double reliability, lut_provenance provenance)
        : reliability_(reliability), provenance_(provenance)
    {
    }

    double reliability() const { return reliability_; }
    const lut_provenance &provenance() const { return provenance_; }
    const std::set<int> &delays() const { return delays_; }
    const std::set<int> &users() const { return users_; }

    void set(int delay, int n, int m_p)
    {
        if (m_p < 0)
            throw config_error("lut entry must be non-negative");
        delays_.insert(delay);
        users_.insert(n);
        entries_[{delay, n}] = m_p;
    }

    /// Exact cell; throws when (L, N) is not tabulated.
    int at(int delay, int n) const
    {
        auto it = entries_.find({delay, n});
        if (it == entries_.end())
            throw config_error("lut has no cell (L=" + std::to_string(delay) + ", N=" + std::to_string(n) + ")");
        return it->second;
    }

    bool contains(int delay, int n) const { return entries_.count({delay, n}) != 0; }

    /// Conservative lookup: N rounds up to the next row, L rounds down to the
    /// previous column. Off the table on either side means infeasible (0).
    int query(int delay, double reliability, int n) const
    {
        if (std::abs(reliability - reliability_) > 1e-9)
            throw config_error("lut built for R=" + std::to_string(reliability_) + ", queried with R=" +
                               std::to_string(reliability));
        if (delays_.empty() || users_.empty())
            return 0;
        auto col = delays_.upper_bound(delay);
        if (col == delays_.begin())
            return 0;
        --col;
        auto row = users_.lower_bound(n);
        if (row == users_.end())
            return 0;
        auto it = entries_.find({*col, *row});
        return it == entries_.end() ? 0 : it->second;
    }

    /// Entries non-increasing in L (for fixed N) and non-decreasing in N (for
    /// fixed L), with 0 read as "more than any allocation".
    bool is_monotone() const
    {
        const auto rank = [](int v) { return v == 0 ? std::numeric_limits<int>::max() : v; };
        for (int n : users_) {
            int prev = std::numeric_limits<int>::max();
            for (int l : delays_) {
                if (!contains(l, n))
                    continue;
                const int v = rank(at(l, n));
                if (v > prev)
                    return false;
                prev = v;
            }
        }
        for (int l : delays_) {
            int prev = 0;
            for (int n : users_) {
                if (!contains(l, n))
                    continue;
                const int v = rank(at(l, n));
                if (v < prev)
                    return false;
                prev = v;
            }
        }
        return true;
    }

    /// Header: reliability,L,N,m_p,provenance,runs,seed
    void write_csv(std::ostream &os) const
    {
        os << "reliability,L,N,m_p,provenance,runs,seed\n";
        for (int n : users_)
            for (int l : delays_)
                if (contains(l, n))
                    os << reliability_ << ',' << l << ',' << n << ',' << at(l, n) << ','
                       << to_string(provenance_.source) << ',' << provenance_.runs << ','
                       << provenance_.seed << '\n';
    }

    static parallelization_lut read_csv(std::istream &is)
    {
        std::string line;
        if (!std::getline(is, line) || line.rfind("reliability,L,N,m_p", 0) != 0)
            throw config_error("lut csv: missing header");
        parallelization_lut lut;
        bool first = true;
        while (std::getline(is, line)) {
            if (line.empty())
                continue;
            std::stringstream ss(line);
            std::string field;
            std::vector<std::string> f;
            while (std::getline(ss, field, ','))
                f.push_back(field);
            if (f.size() != 7)
                throw config_error("lut csv: expected 7 fields in '" + line + "'");
            const double r = std::stod(f[0]);
            if (first) {
                lut.reliability_ = r;
                lut.provenance_.source = f[4] == "bundled-table" ? lut_provenance::kind::bundled
                                                               : lut_provenance::kind::monte_carlo;
                lut.provenance_.runs = std::stol(f[5]);
                lut.provenance_.seed = std::stoull(f[6]);
                first = false;
            } else if (std::abs(r - lut.reliability_) > 1e-12) {
                throw config_error("lut csv: mixed reliabilities");
            }
            lut.set(std::stoi(f[1]), std::stoi(f[2]), std::stoi(f[3]));
        }
        return lut;
    }

    static parallelization_lut load(const std::string &path)
    {
        std::ifstream in(path);
        if (!in)
            throw config_error("cannot open lut file " + path);
        return read_csv(in);
    }

private:
    double reliability_ = 0.0;
    lut_provenance provenance_;
    std::set<int> delays_;
    std::set<int> users_;
    std::map<std::pair<int, int>, int> entries_;
};

/// Parallelization table shipped for R = 0.95 (rows N = 5..40, columns L = 5..35).
inline parallelization_lut table2()
{
    static constexpr std::array<int, 7> delays{5, 10, 15, 20, 25, 30, 35};
    static constexpr std::array<std::array<int, 8>, 8> rows{{
        {5, 0, 1, 1, 1, 1, 1, 1},
        {10, 0, 3, 2, 1, 1, 1, 1},
        {15, 0, 4, 2, 2, 1, 1, 1},
        {20, 0, 6, 3, 2, 1, 1, 1},
        {25, 0, 8, 4, 3, 2, 2, 2},
        {30, 0, 9, 4, 3, 2, 2, 2},
        {35, 0, 11, 5, 4, 3, 2, 2},
        {40, 0, 13, 6, 4, 3, 3, 2},
    }};
    parallelization_lut lut(0.95, {lut_provenance::kind::bundled, 0, 0});
    for (const auto &row : rows)
        for (std::size_t c = 0; c < delays.size(); ++c)
            lut.set(delays[c], row[0], row[c + 1]);
    return lut;
}

/// Derives an independent, order-free engine for one (N, m_p) cell.
inline rng_type cell_rng(std::uint64_t seed, int n, int m_p)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(m_p), 0x7ab1e2u};
    return rng_type(seq);
}

struct completion_profile {
    /// hist[s] = number of runs that finished in exactly s slots.
    std::vector<long> hist;
    std::size_t max_frontier = 0;
    long runs = 0;

    double probability_within(int slots) const
    {
        if (slots < 0 || runs == 0)
            return 0.0;
        long ok = 0;
        for (std::size_t s = 0; s < hist.size() && s <= std::size_t(slots); ++s)
            ok += hist[s];
        return double(ok) / double(runs);
    }
};

inline completion_profile sample_completion(int n, int m_p, long runs, std::uint64_t seed,
                                            delay_convention convention)
{
    auto rng = cell_rng(seed, n, m_p);
    completion_profile prof;
    prof.runs = runs;
    const int offset = convention_offset(convention);
    for (long r = 0; r < runs; ++r) {
        const auto run = simulate_tree(n, m_p, rng);
        const std::size_t slots = std::size_t(run.slots + offset);
        if (prof.hist.size() <= slots)
            prof.hist.resize(slots + 1, 0);
        ++prof.hist[slots];
        prof.max_frontier = std::max(prof.max_frontier, run.max_frontier);
    }
    return prof;
}

struct lut_build_options {
    double reliability = 0.95;
    std::vector<int> delays;
    std::vector<int> users;
    int m_p_max = 12;
    long runs = 10000;
    std::uint64_t seed = 1;
    delay_convention convention = delay_convention::rc_slots_from_admission;
};

/// Monte Carlo f(L, R, N): smallest m_p <= m_p_max with empirical
/// P(completion <= L) >= R, else 0. Rows are then made monotone in N.
inline parallelization_lut build_lut(const lut_build_options &opt)
{
    if (opt.m_p_max < 1 || opt.runs < 1)
        throw config_error("build_lut: need m_p_max >= 1 and runs >= 1");
    parallelization_lut lut(opt.reliability, {lut_provenance::kind::monte_carlo, opt.runs, opt.seed});

    std::vector<int> delays = opt.delays, users = opt.users;
    std::sort(delays.begin(), delays.end());
    std::sort(users.begin(), users.end());
    delays.erase(std::unique(delays.begin(), delays.end()), delays.end());
    users.erase(std::unique(users.begin(), users.end()), users.end());

    for (int n : users) {
        std::vector<int> cell(delays.size(), 0);
        if (n < 2) {
            // Nothing to resolve: one slot of a single frequency.
            for (std::size_t c = 0; c < delays.size(); ++c)
                cell[c] = delays[c] >= 1 + convention_offset(opt.convention) ? 1 : 0;
        } else {
            std::size_t open = delays.size();
            // Columns that fail even at m_p_max are infeasible; skip them.
            const auto widest = sample_completion(n, opt.m_p_max, opt.runs, opt.seed, opt.convention);
            for (std::size_t c = 0; c < delays.size(); ++c)
                if (widest.probability_within(delays[c]) < opt.reliability) {
                    cell[c] = -1;
                    --open;
                }
            for (int m_p = 1; m_p <= opt.m_p_max && open > 0; ++m_p) {
                const auto prof = sample_completion(n, m_p, opt.runs, opt.seed, opt.convention);
                for (std::size_t c = 0; c < delays.size(); ++c) {
                    if (cell[c] != 0)
                        continue;
                    if (prof.probability_within(delays[c]) >= opt.reliability) {
                        cell[c] = m_p;
                        --open;
                    }
                }
                // Wider allocations cannot change any run once m_p covers the
                // widest frontier ever seen.
                if (std::size_t(m_p) >= prof.max_frontier)
                    break;
            }
        }
        for (std::size_t c = 0; c < delays.size(); ++c)
            lut.set(delays[c], n, std::max(0, cell[c]));
    }

    // Sampling noise can break monotonicity in N; take the running maximum
    // with infeasible as the top element.
    for (int l : delays) {
        int running = 1;
        bool infeasible = false;
        for (int n : users) {
            int v = lut.at(l, n);
            if (infeasible || v == 0) {
                infeasible = true;
                v = 0;
            } else {
                running = std::max(running, v);
                v = running;
            }
            lut.set(l, n, v);
        }
    }
    return lut;
}

struct table2_cell_check {
    int n = 0;
    int delay = 0;
    int table = 0;
    int simulated = 0;
    bool ok = false;
};

struct table2_verification {
    delay_convention convention = delay_convention::rc_slots_from_admission;
    long runs = 0;
    std::uint64_t seed = 0;
    std::vector<table2_cell_check> cells;

    std::size_t failures() const
    {
        return std::size_t(std::count_if(cells.begin(), cells.end(), [](const auto &c) { return !c.ok; }));
    }
    bool passed() const { return failures() == 0; }
};

/// Rebuilds the shipped table by Monte Carlo: nonzero cells must agree within
/// one unit, infeasible cells must stay infeasible.
inline table2_verification verify_table2(long runs, std::uint64_t seed, delay_convention convention,
                                         int m_p_max = 64)
{
    const auto reference = table2();
    lut_build_options opt;
    opt.reliability = reference.reliability();
    opt.delays.assign(reference.delays().begin(), reference.delays().end());
    opt.users.assign(reference.users().begin(), reference.users().end());
    opt.m_p_max = m_p_max;
    opt.runs = runs;
    opt.seed = seed;
    opt.convention = convention;
    const auto built = build_lut(opt);

    table2_verification v;
    v.convention = convention;
    v.runs = runs;
    v.seed = seed;
    for (int n : reference.users()) {
        for (int l : reference.delays()) {
            table2_cell_check c{n, l, reference.at(l, n), built.at(l, n), false};
            c.ok = c.table == 0 ? c.simulated == 0 : (c.simulated != 0 && std::abs(c.simulated - c.table) <= 1);
            v.cells.push_back(c);
        }
    }
    return v;
}

} // namespace acdc

#endif // ACDC_LUT_HPP
