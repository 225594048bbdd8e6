#ifndef ACDC_CHANNEL_HPP
#define ACDC_CHANNEL_HPP

#include <acdc/errors.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace acdc {

using user_id = std::uint64_t;
using rng_type = std::mt19937_64;

/// Observable per-resource feedback of the collision channel.
enum class symbol : std::uint8_t { idle = 0, success = 1, collision = 2 };

inline char to_char(symbol s)
{
    switch (s) {
    case symbol::idle: return '0';
    case symbol::success: return '1';
    case symbol::collision: return 'e';
    }
    return '?';
}

inline std::string to_string(std::span<const symbol> symbols)
{
    std::string out;
    out.reserve(symbols.size());
    for (auto s : symbols)
        out.push_back(to_char(s));
    return out;
}

/// Parses strings like "10e1" into symbols.
inline std::vector<symbol> parse_symbols(std::string_view text)
{
    std::vector<symbol> out;
    out.reserve(text.size());
    for (char c : text) {
        switch (c) {
        case '0': out.push_back(symbol::idle); break;
        case '1': out.push_back(symbol::success); break;
        case 'e':
        case 'E': out.push_back(symbol::collision); break;
        default: throw config_error(std::string("invalid outcome symbol '") + c + "'");
        }
    }
    return out;
}

/// Slotted time-frequency grid split into admission and resolution frequencies.
struct resource_grid {
    std::size_t num_frequencies = 0;
    std::size_t admission_frequencies = 0;
    std::size_t resolution_frequencies = 0;
    std::uint64_t slot_index = 0;

    static resource_grid partition(std::span<const std::size_t> admission_per_class,
                                   std::size_t resolution)
    {
        resource_grid g;
        g.admission_frequencies =
            std::accumulate(admission_per_class.begin(), admission_per_class.end(), std::size_t{0});
        g.resolution_frequencies = resolution;
        g.num_frequencies = g.admission_frequencies + resolution;
        if (g.num_frequencies == 0)
            throw config_error("resource grid: num_frequencies must be positive");
        return g;
    }
};

/// Outcome of one resource in one slot. The multiplicity is the hidden
/// ground truth; only `observable()` is visible to the receiver.
class ternary_outcome {
public:
    ternary_outcome() = default;
    explicit ternary_outcome(std::vector<user_id> users) : users_(std::move(users)) {}

    symbol observable() const
    {
        if (users_.empty())
            return symbol::idle;
        return users_.size() == 1 ? symbol::success : symbol::collision;
    }

    std::size_t multiplicity() const { return users_.size(); }
    const std::vector<user_id> &users() const { return users_; }

    void add(user_id u) { users_.push_back(u); }

private:
    std::vector<user_id> users_;
};

using ternary_outcome_vector = std::vector<ternary_outcome>;

/// Samples resource indices from a fixed probability vector.
class resource_picker {
public:
    explicit resource_picker(std::span<const double> probabilities)
    {
        if (probabilities.empty())
            throw config_error("selection profile is empty");
        double sum = 0.0;
        cumulative_.reserve(probabilities.size());
        for (double p : probabilities) {
            if (!(p >= 0.0))
                throw config_error("selection probabilities must be non-negative");
            sum += p;
            cumulative_.push_back(sum);
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw config_error("selection probabilities must sum to 1");
        cumulative_.back() = 1.0;
    }

    std::size_t size() const { return cumulative_.size(); }

    template <class Rng>
    std::size_t operator()(Rng &rng) const
    {
        const double r = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), r);
        // upper_bound never lands on a zero-probability resource.
        auto idx = static_cast<std::size_t>(it - cumulative_.begin());
        return std::min(idx, cumulative_.size() - 1);
    }

private:
    std::vector<double> cumulative_;
};

/// Every user independently lands on resource i with probability p_i.
template <class Rng>
ternary_outcome_vector contend(std::span<const user_id> users, const resource_picker &picker, Rng &rng)
{
    ternary_outcome_vector out(picker.size());
    for (user_id u : users)
        out[picker(rng)].add(u);
    return out;
}

template <class Rng>
ternary_outcome_vector contend(std::span<const user_id> users, std::span<const double> probabilities,
                               Rng &rng)
{
    return contend(users, resource_picker(probabilities), rng);
}

inline std::vector<symbol> observe(const ternary_outcome_vector &outcomes)
{
    std::vector<symbol> out;
    out.reserve(outcomes.size());
    for (const auto &o : outcomes)
        out.push_back(o.observable());
    return out;
}

/// Per-resource hidden multiplicities, for estimator scoring.
inline std::vector<int> multiplicities(const ternary_outcome_vector &outcomes)
{
    std::vector<int> out;
    out.reserve(outcomes.size());
    for (const auto &o : outcomes)
        out.push_back(static_cast<int>(o.multiplicity()));
    return out;
}

struct outcome_counts {
    std::size_t idle = 0;
    std::size_t success = 0;
    std::size_t collision = 0;
};

inline outcome_counts count_symbols(std::span<const symbol> symbols)
{
    outcome_counts c;
    for (auto s : symbols) {
        if (s == symbol::idle)
            ++c.idle;
        else if (s == symbol::success)
            ++c.success;
        else
            ++c.collision;
    }
    return c;
}

} // namespace acdc

#endif // ACDC_CHANNEL_HPP
