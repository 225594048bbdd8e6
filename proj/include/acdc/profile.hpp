#ifndef ACDC_PROFILE_HPP
#define ACDC_PROFILE_HPP

#include <acdc/errors.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace acdc {

enum class profile_family { uniform, geometric, poisson, power, custom };

inline const char *to_string(profile_family f)
{
    switch (f) {
    case profile_family::uniform: return "uniform";
    case profile_family::geometric: return "geometric";
    case profile_family::poisson: return "poisson";
    case profile_family::power: return "power";
    case profile_family::custom: return "custom";
    }
    return "?";
}

/// Truncation policy for the expected-draws series.
struct ccp_truncation {
    double term_cutoff = 1e-12;
    /// Hard stop at z = cap_factor * ceiling (ignored while the ceiling is
    /// being computed).
    double cap_factor = 100.0;
};

namespace detail {

/// sum_{z>=0} (1 - prod_{i in occupied} (1 - exp(-p_i z))), stopped once the
/// summand drops below the cutoff or z reaches z_cap. The summand is
/// non-increasing in z, so the cutoff bounds the tail.
inline double ccp_series(std::span<const double> occupied_probabilities, double term_cutoff,
                         double z_cap)
{
    if (occupied_probabilities.empty())
        return 0.0;
    const std::size_t k = occupied_probabilities.size();
    std::vector<double> ratio(k), power(k, 1.0);
    for (std::size_t i = 0; i < k; ++i)
        ratio[i] = std::exp(-occupied_probabilities[i]);

    double sum = 0.0;
    for (double z = 0.0; z <= z_cap; z += 1.0) {
        double prod = 1.0;
        for (std::size_t i = 0; i < k; ++i) {
            prod *= 1.0 - power[i];
            power[i] *= ratio[i];
        }
        const double term = 1.0 - prod;
        sum += term;
        if (term < term_cutoff)
            break;
    }
    return sum;
}

} // namespace detail

/// Per-resource selection probabilities of one admission channel, together
/// with the estimation ceiling (expected draws when every resource is busy).
class selection_profile {
public:
    selection_profile() = default;

    static selection_profile uniform(std::size_t resources)
    {
        if (resources == 0)
            throw config_error("uniform profile needs at least one resource");
        return selection_profile(std::vector<double>(resources, 1.0 / double(resources)),
                                 profile_family::uniform, 0.0, 1.0);
    }

    /// p_i proportional to (1-p)^i p, i = 1..M, normalized to sum to one.
    static selection_profile geometric(double p, std::size_t resources)
    {
        if (!(p > 0.0 && p < 1.0) || resources == 0)
            throw config_error("geometric profile needs 0 < p < 1 and M >= 1");
        std::vector<double> probs(resources);
        for (std::size_t i = 0; i < resources; ++i)
            probs[i] = std::pow(1.0 - p, double(i + 1)) * p;
        return selection_profile(normalized(std::move(probs)), profile_family::geometric, p, 0.0);
    }

    /// p_i proportional to lambda^i e^-lambda / i!, i = 1..M, normalized.
    static selection_profile poisson(double lambda, std::size_t resources)
    {
        if (!(lambda > 0.0) || resources == 0)
            throw config_error("poisson profile needs lambda > 0 and M >= 1");
        std::vector<double> probs(resources);
        for (std::size_t i = 0; i < resources; ++i) {
            const double k = double(i + 1);
            probs[i] = std::exp(k * std::log(lambda) - lambda - std::lgamma(k + 1.0));
        }
        return selection_profile(normalized(std::move(probs)), profile_family::poisson, lambda,
                                 0.0);
    }

    /// p_i = p0 * alpha^i, i = 1..M, with alpha chosen so the p_i sum to one.
    static selection_profile power(double p0, std::size_t resources);

    static selection_profile custom(std::vector<double> probabilities)
    {
        if (probabilities.empty())
            throw config_error("custom profile is empty");
        double sum = 0.0;
        for (double p : probabilities) {
            if (!(p > 0.0))
                throw config_error("selection probabilities must be strictly positive");
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw config_error("selection probabilities must sum to 1 (got " +
                               std::to_string(sum) + ")");
        return selection_profile(std::move(probabilities), profile_family::custom, 0.0, 0.0);
    }

    std::size_t size() const { return probs_.size(); }
    std::span<const double> probabilities() const { return probs_; }
    double operator[](std::size_t i) const { return probs_[i]; }
    profile_family family() const { return family_; }
    /// p for geometric, lambda for poisson, p0 for power.
    double parameter() const { return parameter_; }
    /// Growth factor of the power family (1 for uniform).
    double alpha() const { return alpha_; }
    double n_max_ceiling() const { return ceiling_; }

    bool operator==(const selection_profile &other) const { return probs_ == other.probs_; }

private:
    selection_profile(std::vector<double> probs, profile_family family, double parameter,
                      double alpha)
        : probs_(std::move(probs)), family_(family), parameter_(parameter), alpha_(alpha)
    {
        double p_min = 1.0;
        for (double p : probs_)
            p_min = std::min(p_min, p);
        // The series needs about 28 / p_min terms to converge.
        if (28.0 / p_min > 5e7)
            throw config_error("profile too skewed: smallest selection probability " +
                               std::to_string(p_min) + " puts the ceiling out of range");
        ceiling_ = detail::ccp_series(probs_, ccp_truncation{}.term_cutoff,
                                      std::numeric_limits<double>::infinity());
    }

    static std::vector<double> normalized(std::vector<double> probs)
    {
        double sum = 0.0;
        for (double p : probs)
            sum += p;
        if (!(sum > 0.0))
            throw config_error("profile has no probability mass");
        for (double &p : probs)
            p /= sum;
        for (double p : probs)
            if (!(p > 0.0))
                throw config_error("profile underflows to a zero selection probability");
        return probs;
    }

    std::vector<double> probs_;
    profile_family family_ = profile_family::custom;
    double parameter_ = 0.0;
    double alpha_ = 0.0;
    double ceiling_ = 0.0;
};

/// Solves sum_{i=1..M} p0 alpha^i = 1 for alpha by bisection on (1e-9, 1e3).
inline selection_profile selection_profile::power(double p0, std::size_t resources)
{
    if (!(p0 > 0.0 && p0 < 1.0))
        throw config_error("power profile needs 0 < p0 < 1");
    if (resources < 2)
        throw config_error("power profile needs at least two resources");

    const auto excess = [&](double alpha) {
        // Direct summation has no singularity at alpha = 1.
        double term = 1.0, sum = 0.0;
        for (std::size_t i = 0; i < resources; ++i) {
            term *= alpha;
            sum += term;
        }
        return p0 * sum - 1.0;
    };

    double lo = 1e-9, hi = 1e3;
    if (excess(lo) > 0.0 || excess(hi) < 0.0)
        throw config_error("power profile: no alpha in (1e-9, 1e3) for p0 = " + std::to_string(p0) +
                           ", M = " + std::to_string(resources));

    double alpha = 1.0;
    if (std::abs(p0 * double(resources) - 1.0) < 1e-15) {
        alpha = 1.0;
    } else {
        for (int it = 0; it < 200 && (hi - lo) > 1e-15 * hi; ++it) {
            const double mid = 0.5 * (lo + hi);
            (excess(mid) < 0.0 ? lo : hi) = mid;
        }
        alpha = 0.5 * (lo + hi);
    }

    std::vector<double> probs(resources);
    double term = p0;
    for (std::size_t i = 0; i < resources; ++i) {
        term *= alpha;
        probs[i] = term;
    }
    // Absorb the residual of the root so the probabilities sum to one exactly.
    double sum = 0.0;
    for (double p : probs)
        sum += p;
    for (double &p : probs)
        p /= sum;
    return selection_profile(std::move(probs), profile_family::power, p0, alpha);
}

} // namespace acdc

#endif // ACDC_PROFILE_HPP
