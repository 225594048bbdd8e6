#ifndef ACDC_ESTIMATION_HPP
#define ACDC_ESTIMATION_HPP

#include <acdc/channel.hpp>
#include <acdc/errors.hpp>
#include <acdc/profile.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

namespace acdc {

// ---------------------------------------------------------------------------
// Coupon-collector backlog estimate
// ---------------------------------------------------------------------------

/// Expected number of draws that produced the given set of busy resources.
inline double ccp_expected_draws(std::span<const std::size_t> occupied,
                                 const selection_profile &profile, ccp_truncation trunc = {})
{
    std::vector<double> probs;
    probs.reserve(occupied.size());
    for (std::size_t i : occupied) {
        if (i >= profile.size())
            throw config_error("occupied resource index out of range");
        probs.push_back(profile[i]);
    }
    return detail::ccp_series(probs, trunc.term_cutoff, trunc.cap_factor * profile.n_max_ceiling());
}

inline std::vector<std::size_t> busy_resources(std::span<const symbol> observation)
{
    std::vector<std::size_t> busy;
    for (std::size_t i = 0; i < observation.size(); ++i)
        if (observation[i] != symbol::idle)
            busy.push_back(i);
    return busy;
}

inline double ccp_expected_draws(std::span<const symbol> observation, const selection_profile &profile,
                                 ccp_truncation trunc = {})
{
    if (observation.size() != profile.size())
        throw config_error("observation length does not match the profile");
    return ccp_expected_draws(busy_resources(observation), profile, trunc);
}

/// Memoizes the expected-draws series per busy-set bitmask (M <= 64).
class ccp_estimator {
public:
    explicit ccp_estimator(selection_profile profile) : profile_(std::move(profile))
    {
        if (profile_.size() > 64)
            throw config_error("ccp_estimator supports at most 64 resources");
    }

    const selection_profile &profile() const { return profile_; }

    double operator()(std::span<const symbol> observation)
    {
        if (observation.size() != profile_.size())
            throw config_error("observation length does not match the profile");
        std::uint64_t mask = 0;
        for (std::size_t i = 0; i < observation.size(); ++i)
            if (observation[i] != symbol::idle)
                mask |= std::uint64_t{1} << i;
        auto it = cache_.find(mask);
        if (it != cache_.end())
            return it->second;
        const double value = ccp_expected_draws(observation, profile_);
        cache_.emplace(mask, value);
        return value;
    }

private:
    selection_profile profile_;
    std::unordered_map<std::uint64_t, double> cache_;
};

// ---------------------------------------------------------------------------
// Partition of the backlog into per-resource multiplicities
// ---------------------------------------------------------------------------

/// Enumerates every guess consistent with the observation that sums to
/// `total`: 0 on idle, 1 on success, >= 2 on collision.
inline void for_each_guess(std::span<const symbol> observation, int total,
                           const std::function<void(const std::vector<int> &)> &visit)
{
    const std::size_t m = observation.size();
    std::vector<int> guess(m, 0);
    // Minimum still required by resources i..M-1.
    std::vector<int> floor_after(m + 1, 0);
    for (std::size_t i = m; i-- > 0;) {
        const int need = observation[i] == symbol::collision ? 2 : (observation[i] == symbol::success ? 1 : 0);
        floor_after[i] = floor_after[i + 1] + need;
    }

    std::function<void(std::size_t, int)> rec = [&](std::size_t i, int remaining) {
        if (i == m) {
            if (remaining == 0)
                visit(guess);
            return;
        }
        switch (observation[i]) {
        case symbol::idle:
            guess[i] = 0;
            rec(i + 1, remaining);
            break;
        case symbol::success:
            guess[i] = 1;
            rec(i + 1, remaining - 1);
            break;
        case symbol::collision: {
            // Later collisions can absorb any surplus, so only the last one is pinned.
            bool later_collision = false;
            for (std::size_t j = i + 1; j < m; ++j)
                later_collision |= observation[j] == symbol::collision;
            const int hi = remaining - floor_after[i + 1];
            if (!later_collision) {
                if (hi >= 2) {
                    guess[i] = hi;
                    rec(i + 1, remaining - hi);
                }
                break;
            }
            for (int g = 2; g <= hi; ++g) {
                guess[i] = g;
                rec(i + 1, remaining - g);
            }
            break;
        }
        }
    };
    if (total >= floor_after[0])
        rec(0, total);
}

/// log of prod_i C(N - sum_{j<i} g_j, g_i) p_i^{g_i}.
inline double log_guess_probability(std::span<const int> guess, std::span<const double> probs)
{
    int remaining = 0;
    for (int g : guess)
        remaining += g;
    double lp = 0.0;
    for (std::size_t i = 0; i < guess.size(); ++i) {
        const int g = guess[i];
        if (g == 0)
            continue;
        lp += std::lgamma(double(remaining) + 1.0) - std::lgamma(double(g) + 1.0) -
              std::lgamma(double(remaining - g) + 1.0) + double(g) * std::log(probs[i]);
        remaining -= g;
    }
    return lp;
}

/// Most likely partition of n_hat users over the resources given the
/// observation. Exhaustive, so only meant for small instances. Ties go to the
/// lexicographically smallest guess.
inline std::vector<int> ml_partition(std::span<const symbol> observation, int n_hat,
                                     const selection_profile &profile)
{
    if (observation.size() != profile.size())
        throw config_error("observation length does not match the profile");
    const auto c = count_symbols(observation);
    const int floor = int(c.success) + 2 * int(c.collision);
    if (n_hat < floor || (c.collision == 0 && n_hat != int(c.success)))
        throw estimation_error("n_hat = " + std::to_string(n_hat) + " is infeasible for outcome " +
                               to_string(observation));

    std::vector<int> best;
    double best_lp = -std::numeric_limits<double>::infinity();
    for_each_guess(observation, n_hat, [&](const std::vector<int> &g) {
        const double lp = log_guess_probability(g, profile.probabilities());
        // Guesses arrive in lexicographic order; only a clear win replaces.
        if (best.empty() || lp > best_lp + 1e-12 * std::max(1.0, std::abs(best_lp))) {
            best = g;
            best_lp = lp;
        }
    });
    return best;
}

/// ceil(p_i * n_hat) on collisions (at least 2), the observed value elsewhere.
inline std::vector<int> heuristic_partition(std::span<const symbol> observation, double n_hat,
                                            const selection_profile &profile)
{
    if (observation.size() != profile.size())
        throw config_error("observation length does not match the profile");
    std::vector<int> out(observation.size(), 0);
    for (std::size_t i = 0; i < observation.size(); ++i) {
        switch (observation[i]) {
        case symbol::idle: out[i] = 0; break;
        case symbol::success: out[i] = 1; break;
        case symbol::collision:
            out[i] = std::max(2, static_cast<int>(std::ceil(profile[i] * n_hat - 1e-9)));
            break;
        }
    }
    return out;
}

/// u_dagger_i = ceil(u_hat_i + factor) on collision resources only.
inline std::vector<int> apply_pessimism(std::span<const symbol> observation, std::span<const int> u_hat,
                                        double factor)
{
    std::vector<int> out(u_hat.begin(), u_hat.end());
    for (std::size_t i = 0; i < observation.size(); ++i)
        if (observation[i] == symbol::collision)
            out[i] = static_cast<int>(std::ceil(double(u_hat[i]) + factor - 1e-9));
    return out;
}

struct backlog_estimate {
    double n_hat = 0.0;
    std::vector<int> per_resource;
    std::vector<int> per_resource_pessimistic;
    double pessimism = 0.0;
};

/// Protocol path: CCP backlog, heuristic partition, pessimism on top.
inline backlog_estimate estimate_backlog(std::span<const symbol> observation, ccp_estimator &ccp,
                                         double pessimism)
{
    backlog_estimate e;
    e.n_hat = ccp(observation);
    e.per_resource = heuristic_partition(observation, e.n_hat, ccp.profile());
    e.per_resource_pessimistic = apply_pessimism(observation, e.per_resource, pessimism);
    e.pessimism = pessimism;
    return e;
}

// ---------------------------------------------------------------------------
// Uniform-probability maximum-likelihood baselines
// ---------------------------------------------------------------------------

namespace detail {

inline double log_add(double a, double b)
{
    if (a == -std::numeric_limits<double>::infinity())
        return b;
    if (b == -std::numeric_limits<double>::infinity())
        return a;
    const double hi = std::max(a, b);
    return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

/// log S(n, k) for n = 0..n_max, for one fixed k, via the triangular
/// recurrence S(n,k) = k S(n-1,k) + S(n-1,k-1) carried in log space.
inline std::vector<double> log_stirling2_column(int n_max, int k)
{
    const double ninf = -std::numeric_limits<double>::infinity();
    // row[j] = log S(n, j) for the current n.
    std::vector<double> row(std::size_t(k) + 1, ninf);
    row[0] = 0.0; // S(0,0) = 1
    std::vector<double> column(std::size_t(n_max) + 1, ninf);
    column[0] = row[std::size_t(k)];
    for (int n = 1; n <= n_max; ++n) {
        for (int j = std::min(n, k); j >= 1; --j)
            row[std::size_t(j)] = log_add(std::log(double(j)) + row[std::size_t(j)], row[std::size_t(j) - 1]);
        row[0] = ninf;
        column[std::size_t(n)] = row[std::size_t(k)];
    }
    return column;
}

} // namespace detail

/// argmax_N S(N, m) M! / (M^N (M-m)!) over N in [m, n_cap].
inline int mle_stirling(int m_nonidle, int resources, int n_cap)
{
    if (m_nonidle < 0 || m_nonidle > resources)
        throw config_error("mle_stirling: need 0 <= m_nonidle <= M");
    if (m_nonidle == 0)
        return 0;
    if (n_cap <= m_nonidle)
        return m_nonidle;
    // Every resource busy: the likelihood increases monotonically towards 1.
    if (m_nonidle == resources)
        return n_cap;

    const auto log_s = detail::log_stirling2_column(n_cap, m_nonidle);
    const double log_const = std::lgamma(double(resources) + 1.0) -
                             std::lgamma(double(resources - m_nonidle) + 1.0);
    int best = m_nonidle;
    double best_ll = -std::numeric_limits<double>::infinity();
    for (int n = m_nonidle; n <= n_cap; ++n) {
        const double ll = log_s[std::size_t(n)] + log_const - double(n) * std::log(double(resources));
        if (ll > best_ll) {
            best_ll = ll;
            best = n;
        }
    }
    return best;
}

struct zanella_estimate {
    double n_hat = 0.0;
    double avg_collision_size = 0.0;
};

namespace detail {

/// x (e^x - 1) / (e^x - 1 - x), with its x -> 0 limit of 2.
inline double zanella_ratio(double x)
{
    if (x < 1e-4)
        return 2.0 + 2.0 * x / 3.0;
    const double em1 = std::expm1(x);
    return x * em1 / (em1 - x);
}

} // namespace detail

/// Root in N of (N - M_s)/M_c = x(e^x - 1)/(e^x - 1 - x), x = N/M, by
/// bisection on [M_s + 2 M_c, bracket_hi]. When the residual never changes
/// sign the estimate saturates at the nearer bracket end.
inline zanella_estimate mle_zanella(int m_success, int m_collision, int resources, double bracket_hi = 1e4)
{
    if (m_collision <= 0)
        throw estimation_error("mle_zanella: no collided resources, nothing to estimate");
    if (resources <= 0 || m_success < 0 || m_success + m_collision > resources)
        throw config_error("mle_zanella: inconsistent counts");

    const double ms = m_success, mc = m_collision, m = resources;
    const auto residual = [&](double n) { return (n - ms) / mc - detail::zanella_ratio(n / m); };

    double lo = ms + 2.0 * mc;
    double hi = std::max(bracket_hi, lo);
    double root;
    if (residual(lo) >= 0.0) {
        root = lo;
    } else if (residual(hi) < 0.0) {
        root = hi;
    } else {
        while (hi - lo > 1e-9) {
            const double mid = 0.5 * (lo + hi);
            (residual(mid) < 0.0 ? lo : hi) = mid;
        }
        root = 0.5 * (lo + hi);
    }
    return {root, (root - ms) / mc};
}

// ---------------------------------------------------------------------------
// Pessimism factor
// ---------------------------------------------------------------------------

/// Draws a multinomial placement of n users over the profile's resources.
template <class Rng>
std::vector<int> place_users(int n, std::span<const double> probabilities, Rng &rng)
{
    std::vector<int> counts(probabilities.size(), 0);
    int remaining = n;
    double mass = 1.0;
    for (std::size_t i = 0; i + 1 < probabilities.size() && remaining > 0; ++i) {
        const double q = std::clamp(probabilities[i] / mass, 0.0, 1.0);
        const int k = std::binomial_distribution<int>(remaining, q)(rng);
        counts[i] = k;
        remaining -= k;
        mass -= probabilities[i];
        if (mass <= 0.0)
            break;
    }
    counts.back() += remaining;
    return counts;
}

inline std::vector<symbol> observe_counts(std::span<const int> counts)
{
    std::vector<symbol> out(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i)
        out[i] = counts[i] == 0 ? symbol::idle : (counts[i] == 1 ? symbol::success : symbol::collision);
    return out;
}

/// Monte Carlo mean of |u_hat_i - u_i| over collided resources, with the true
/// backlog drawn uniformly from [1, floor(ceiling)] and the heuristic partition
/// applied to the CCP estimate. Zero when no collision was ever observed.
template <class Rng>
double pessimism_factor(const selection_profile &profile, int runs, Rng &rng)
{
    ccp_estimator ccp(profile);
    const int n_hi = std::max(1, static_cast<int>(std::floor(profile.n_max_ceiling())));
    std::uniform_int_distribution<int> pick_n(1, n_hi);
    double err = 0.0;
    long samples = 0;
    for (int r = 0; r < runs; ++r) {
        const auto truth = place_users(pick_n(rng), profile.probabilities(), rng);
        const auto obs = observe_counts(truth);
        const auto est = heuristic_partition(obs, ccp(obs), profile);
        for (std::size_t i = 0; i < obs.size(); ++i) {
            if (obs[i] != symbol::collision)
                continue;
            err += std::abs(est[i] - truth[i]);
            ++samples;
        }
    }
    return samples == 0 ? 0.0 : err / double(samples);
}

/// Pessimism factors memoized per profile.
class pessimism_cache {
public:
    explicit pessimism_cache(int runs = 2000, std::uint64_t seed = 0x5eed) : runs_(runs), seed_(seed) {}

    double operator()(const selection_profile &profile)
    {
        std::vector<double> key(profile.probabilities().begin(), profile.probabilities().end());
        auto it = cache_.find(key);
        if (it != cache_.end())
            return it->second;
        rng_type rng(seed_);
        const double f = pessimism_factor(profile, runs_, rng);
        cache_.emplace(std::move(key), f);
        return f;
    }

private:
    int runs_;
    std::uint64_t seed_;
    std::map<std::vector<double>, double> cache_;
};

} // namespace acdc

#endif // ACDC_ESTIMATION_HPP
