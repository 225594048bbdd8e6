#ifndef ACDC_ANALYTICS_HPP
#define ACDC_ANALYTICS_HPP

#include <acdc/errors.hpp>
#include <acdc/lut.hpp>
#include <acdc/profile.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace acdc {

/// Bounds on the subset enumeration (cost grows as 3^M per multiplicity).
struct analytics_guard {
    std::size_t max_resources = 10;
    int max_users = 60;
};

/// Per-resource probability p(u) of seeing exactly u of N balls in a bin.
struct multiplicity_distribution {
    int users = 0;
    std::size_t resources = 0;
    std::vector<double> p_of_u;
    /// Smallest "exactly this subset" probability produced by the recursion.
    double min_subset_probability = 0.0;

    double operator()(int u) const
    {
        return u >= 0 && std::size_t(u) < p_of_u.size() ? p_of_u[std::size_t(u)] : 0.0;
    }

    /// 1 - p(1) - p(0).
    double collision_probability() const { return std::clamp(1.0 - (*this)(0) - (*this)(1), 0.0, 1.0); }

    double mass() const
    {
        double s = 0.0;
        for (double p : p_of_u)
            s += p;
        return s;
    }

    /// sum_u u * M * p(u); equals N when the distribution is complete.
    double expected_balls() const
    {
        double s = 0.0;
        for (std::size_t u = 0; u < p_of_u.size(); ++u)
            s += double(u) * double(resources) * p_of_u[u];
        return s;
    }
};

namespace detail {

inline void check_guard(int n, std::size_t m, const analytics_guard &guard)
{
    if (m > 24)
        throw config_error("analytics: subset enumeration is limited to M <= 24");
    if (m > guard.max_resources)
        throw config_error("analytics: M = " + std::to_string(m) + " exceeds the size guard of " +
                           std::to_string(guard.max_resources));
    if (n > guard.max_users)
        throw config_error("analytics: N = " + std::to_string(n) + " exceeds the size guard of " +
                           std::to_string(guard.max_users));
}

/// Expected number of bins holding exactly u balls, by inclusion-exclusion
/// over bin subsets: "at least these bins hold u" minus every strict
/// superset's "exactly" term, supersets first.
inline double expected_bins_with(int n, int u, std::span<const double> p, double &min_exact)
{
    const std::size_t m = p.size();
    const int j_max = u == 0 ? int(m) : std::min<int>(n / u, int(m));
    if (j_max == 0)
        return 0.0;
    const std::uint32_t full = (std::uint32_t{1} << m) - 1;
    const double ninf = -std::numeric_limits<double>::infinity();

    std::vector<double> log_p(m);
    for (std::size_t i = 0; i < m; ++i)
        log_p[i] = std::log(p[i]);
    const double lg_n = std::lgamma(double(n) + 1.0), lg_u = std::lgamma(double(u) + 1.0);

    std::vector<double> exact(std::size_t(full) + 1, 0.0);
    // Masks by descending popcount so supersets are always done first.
    std::vector<std::uint32_t> order;
    for (std::uint32_t s = 1; s <= full; ++s)
        if (std::popcount(s) <= j_max)
            order.push_back(s);
    std::stable_sort(order.begin(), order.end(),
                     [](std::uint32_t a, std::uint32_t b) { return std::popcount(a) > std::popcount(b); });

    double expected = 0.0;
    for (std::uint32_t s : order) {
        const int j = std::popcount(s);
        const int rest = n - j * u;
        double mass = 0.0, log_term = lg_n - double(j) * lg_u - std::lgamma(double(rest) + 1.0);
        for (std::size_t i = 0; i < m; ++i)
            if (s >> i & 1U) {
                mass += p[i];
                log_term += double(u) * log_p[i];
            }
        const double outside = std::max(0.0, 1.0 - mass);
        if (rest > 0)
            log_term += outside > 0.0 ? double(rest) * std::log(outside) : ninf;
        double value = std::exp(log_term);

        const std::uint32_t comp = full & ~s;
        for (std::uint32_t add = comp; add != 0; add = (add - 1) & comp) {
            const std::uint32_t t = s | add;
            if (std::popcount(t) <= j_max)
                value -= exact[t];
        }
        exact[s] = value;
        min_exact = std::min(min_exact, value);
        expected += double(j) * value;
    }
    return expected;
}

} // namespace detail

/// p(u) for u = 0..u_max (default: all of 0..N) under selection profile p.
inline multiplicity_distribution multiplicity_dist(int n, const selection_profile &profile,
                                                   const analytics_guard &guard = {}, int u_max = -1)
{
    if (n < 0)
        throw config_error("analytics: N must be non-negative");
    detail::check_guard(n, profile.size(), guard);
    multiplicity_distribution d;
    d.users = n;
    d.resources = profile.size();
    const int top = u_max < 0 ? n : std::min(u_max, n);
    d.p_of_u.assign(std::size_t(top) + 1, 0.0);
    if (n == 0) {
        d.p_of_u[0] = 1.0;
        return d;
    }
    for (int u = 0; u <= top; ++u)
        d.p_of_u[std::size_t(u)] =
            detail::expected_bins_with(n, u, profile.probabilities(), d.min_subset_probability) /
            double(profile.size());
    return d;
}

/// Poisson(N_c) weights e^-N_c N_c^i / i!, truncated once the tail mass is
/// below `tail`. Throws when the truncation point exceeds the guard.
inline std::vector<double> poisson_weights(double mean, const analytics_guard &guard, double tail = 1e-9)
{
    if (!(mean >= 0.0))
        throw config_error("analytics: Poisson mean must be non-negative");
    std::vector<double> w;
    double cum = 0.0;
    for (int i = 0;; ++i) {
        const double pi =
            mean == 0.0 ? (i == 0 ? 1.0 : 0.0)
                        : std::exp(double(i) * std::log(mean) - mean - std::lgamma(double(i) + 1.0));
        w.push_back(pi);
        cum += pi;
        if (1.0 - cum < tail && double(i) >= mean)
            break;
        if (i >= guard.max_users)
            throw config_error("analytics: Poisson mean " + std::to_string(mean) +
                               " needs more than N = " + std::to_string(guard.max_users) +
                               " users for the truncated mixture");
    }
    return w;
}

/// Expected fraction of resources that collide when the number of
/// transmitters is Poisson(N_c).
inline double poisson_adjusted_pc(double mean, const selection_profile &profile,
                                  const analytics_guard &guard = {})
{
    detail::check_guard(0, profile.size(), guard);
    const auto w = poisson_weights(mean, guard);
    double pc = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i)
        if (i >= 2)
            pc += w[i] * multiplicity_dist(int(i), profile, guard, 1).collision_probability();
    return pc;
}

/// Poisson(N_c) mixture of the per-resource multiplicity distributions.
inline multiplicity_distribution poisson_mixture(double mean, const selection_profile &profile,
                                                 const analytics_guard &guard = {})
{
    detail::check_guard(0, profile.size(), guard);
    const auto w = poisson_weights(mean, guard);
    multiplicity_distribution mix;
    mix.resources = profile.size();
    mix.users = int(w.size()) - 1;
    mix.p_of_u.assign(w.size(), 0.0);
    for (std::size_t i = 0; i < w.size(); ++i) {
        const auto d = multiplicity_dist(int(i), profile, guard);
        for (std::size_t u = 0; u < d.p_of_u.size(); ++u)
            mix.p_of_u[u] += w[i] * d.p_of_u[u];
        mix.min_subset_probability = std::min(mix.min_subset_probability, d.min_subset_probability);
    }
    return mix;
}

/// E[M_P] = sum_{u >= 2} f(L, R, u) p(u).
inline double expected_parallelization(const parallelization_lut &lut, const multiplicity_distribution &dist,
                                       int delay, double reliability)
{
    double e = 0.0;
    for (std::size_t u = 2; u < dist.p_of_u.size(); ++u)
        if (dist.p_of_u[u] != 0.0)
            e += double(lut.query(delay, reliability, int(u))) * dist.p_of_u[u];
    return e;
}

enum class erlang_variant { from_one, standard };

inline const char *to_string(erlang_variant v) { return v == erlang_variant::from_one ? "paper" : "standard"; }

struct raq_model {
    int delay = 0;
    double arrivals_per_slot = 0.0;
    int servers = 0;
    double blocking = 1.0;
    erlang_variant variant = erlang_variant::from_one;
};

/// Loss-system blocking with M_G = floor(M_RC / E[M_P]) servers and offered
/// load L * M_AC. The from_one variant sums the denominator from o = 1.
inline raq_model raq_blocking(int delay, double arrivals_per_slot, std::size_t rc_frequencies, double expected_mp,
                              erlang_variant variant = erlang_variant::from_one)
{
    if (!(expected_mp > 0.0))
        throw config_error("raq_blocking: expected parallelization must be positive");
    if (delay < 1 || !(arrivals_per_slot > 0.0))
        throw config_error("raq_blocking: need L >= 1 and a positive arrival rate");
    raq_model r;
    r.delay = delay;
    r.arrivals_per_slot = arrivals_per_slot;
    r.variant = variant;
    r.servers = static_cast<int>(std::floor(double(rc_frequencies) / expected_mp + 1e-12));
    if (r.servers == 0) {
        r.blocking = 1.0;
        return r;
    }
    const double log_load = std::log(double(delay) * arrivals_per_slot);
    const auto log_term = [&](int o) { return double(o) * log_load - std::lgamma(double(o) + 1.0); };
    double log_den = -std::numeric_limits<double>::infinity();
    for (int o = variant == erlang_variant::from_one ? 1 : 0; o <= r.servers; ++o) {
        const double t = log_term(o);
        const double hi = std::max(log_den, t);
        log_den = hi + std::log(std::exp(log_den - hi) + std::exp(t - hi));
    }
    r.blocking = std::clamp(std::exp(log_term(r.servers) - log_den), 0.0, 1.0);
    return r;
}

/// p_on = 1 - e^-lambda.
inline double activation_probability(double lambda) { return -std::expm1(-lambda); }

enum class user_state : std::uint8_t { off, tx, a_r, suc, fail };
inline constexpr std::size_t markov_states = 5;

inline const char *to_string(user_state s)
{
    switch (s) {
    case user_state::off: return "Off";
    case user_state::tx: return "Tx";
    case user_state::a_r: return "A_R";
    case user_state::suc: return "Suc";
    case user_state::fail: return "Fail";
    }
    return "?";
}

inline Eigen::Matrix<double, 5, 5> markov_transition_matrix(double p_on, double p_c, double p_r)
{
    for (double v : {p_on, p_c, p_r})
        if (!(v >= 0.0 && v <= 1.0))
            throw config_error("markov: parameters must lie in [0, 1]");
    Eigen::Matrix<double, 5, 5> P = Eigen::Matrix<double, 5, 5>::Zero();
    constexpr int off = 0, tx = 1, ar = 2, suc = 3, fail = 4;
    P(off, off) = 1.0 - p_on;
    P(off, tx) = p_on;
    P(tx, suc) = 1.0 - p_c;
    P(tx, ar) = p_c;
    P(ar, fail) = p_r;
    P(ar, suc) = 1.0 - p_r;
    P(suc, off) = 1.0;
    P(fail, off) = 1.0;
    return P;
}

struct markov_solution {
    std::array<double, markov_states> pi{};
    /// max |pi P - pi|.
    double residual = 0.0;
};

/// Stationary distribution of the per-user chain Off/Tx/A_R/Suc/Fail.
inline markov_solution markov_steady_state(double p_on, double p_c, double p_r)
{
    const auto P = markov_transition_matrix(p_on, p_c, p_r);
    if (p_on == 0.0) {
        // Off is absorbing.
        markov_solution s;
        s.pi = {1.0, 0.0, 0.0, 0.0, 0.0};
        return s;
    }
    // GTH state reduction: subtraction-free, so 0/1 chains come out exact.
    // Every state drains into Off, so each pivot mass s is positive.
    Eigen::Matrix<double, 5, 5> A = P;
    for (Eigen::Index k = 4; k >= 1; --k) {
        const double s = A.row(k).head(k).sum();
        for (Eigen::Index i = 0; i < k; ++i)
            for (Eigen::Index j = 0; j < k; ++j)
                A(i, j) += A(i, k) * A(k, j) / s;
    }
    std::array<double, markov_states> x{1.0, 0.0, 0.0, 0.0, 0.0};
    for (Eigen::Index k = 1; k < 5; ++k) {
        double num = 0.0;
        for (Eigen::Index i = 0; i < k; ++i)
            num += x[std::size_t(i)] * A(i, k);
        x[std::size_t(k)] = num / A.row(k).head(k).sum();
    }
    double total = 0.0;
    for (double v : x)
        total += v;
    markov_solution s;
    for (std::size_t i = 0; i < markov_states; ++i)
        s.pi[i] = x[i] / total;
    Eigen::Matrix<double, 1, 5> row;
    for (std::size_t i = 0; i < markov_states; ++i)
        row(Eigen::Index(i)) = s.pi[i];
    s.residual = (row * P - row).cwiseAbs().maxCoeff();
    return s;
}

} // namespace acdc

#endif // ACDC_ANALYTICS_HPP
