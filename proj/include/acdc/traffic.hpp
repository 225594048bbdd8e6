#ifndef ACDC_TRAFFIC_HPP
#define ACDC_TRAFFIC_HPP

#include <acdc/channel.hpp>
#include <acdc/errors.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace acdc {

struct traffic_model {
    enum class kind { poisson, beta_burst };
    kind type = kind::poisson;
    /// Mean arrivals per slot (poisson).
    double rate = 0.0;
    /// Activation window in slots (beta_burst).
    int activation_slots = 100;
    double shape_a = 3.0;
    double shape_b = 4.0;
    /// Users per class for beta_burst; split weights for poisson.
    std::vector<long> populations;

    static traffic_model poisson(double rate, std::vector<long> weights)
    {
        traffic_model m;
        m.type = kind::poisson;
        m.rate = rate;
        m.populations = std::move(weights);
        m.validate();
        return m;
    }

    static traffic_model beta_burst(int activation_slots, std::vector<long> populations, double a = 3.0,
                                    double b = 4.0)
    {
        traffic_model m;
        m.type = kind::beta_burst;
        m.activation_slots = activation_slots;
        m.populations = std::move(populations);
        m.shape_a = a;
        m.shape_b = b;
        m.validate();
        return m;
    }

    std::size_t classes() const { return populations.size(); }
    long total() const { return std::accumulate(populations.begin(), populations.end(), 0L); }

    void validate() const
    {
        if (populations.empty())
            throw config_error("traffic.populations: at least one class required");
        for (long p : populations)
            if (p < 0)
                throw config_error("traffic.populations: negative count");
        if (type == kind::poisson) {
            if (!(rate >= 0.0))
                throw config_error("traffic.rate: must be >= 0");
            if (rate > 0.0 && total() <= 0)
                throw config_error("traffic.populations: poisson split weights sum to zero");
        } else {
            if (activation_slots < 1)
                throw config_error("traffic.activation_slots: must be >= 1");
            if (!(shape_a > 0.0) || !(shape_b > 0.0))
                throw config_error("traffic.shape: beta shapes must be positive");
        }
    }
};

inline const char *to_string(traffic_model::kind k)
{
    return k == traffic_model::kind::poisson ? "poisson" : "beta_burst";
}

/// Per-slot activations by class. Poisson users get fresh ids; a beta burst
/// draws every user's activation slot up front.
class traffic_source {
public:
    traffic_source(traffic_model model, std::uint64_t seed) : model_(std::move(model)), rng_(seed)
    {
        model_.validate();
        if (model_.type == traffic_model::kind::beta_burst) {
            schedule_.assign(std::size_t(model_.activation_slots), std::vector<std::vector<user_id>>(model_.classes()));
            std::gamma_distribution<double> ga(model_.shape_a, 1.0), gb(model_.shape_b, 1.0);
            for (std::size_t c = 0; c < model_.classes(); ++c) {
                for (long k = 0; k < model_.populations[c]; ++k) {
                    const double x = ga(rng_);
                    const double y = gb(rng_);
                    const double frac = x / (x + y);
                    auto s = static_cast<std::int64_t>(std::floor(frac * model_.activation_slots));
                    s = std::clamp<std::int64_t>(s, 0, model_.activation_slots - 1);
                    schedule_[std::size_t(s)][c].push_back(next_id_++);
                }
            }
        } else if (model_.rate > 0.0) {
            const double total = double(model_.total());
            for (long p : model_.populations)
                weights_.push_back(double(p) / total);
        }
    }

    const traffic_model &model() const { return model_; }

    std::vector<std::vector<user_id>> arrivals(std::int64_t slot)
    {
        std::vector<std::vector<user_id>> out(model_.classes());
        if (slot < 0)
            return out;
        if (model_.type == traffic_model::kind::beta_burst) {
            if (slot < model_.activation_slots)
                out = std::move(schedule_[std::size_t(slot)]);
            return out;
        }
        if (model_.rate <= 0.0)
            return out;
        int n = std::poisson_distribution<int>(model_.rate)(rng_);
        double mass = 1.0;
        for (std::size_t c = 0; c < out.size() && n > 0; ++c) {
            int k = n;
            if (c + 1 < out.size()) {
                const double q = mass > 0.0 ? std::clamp(weights_[c] / mass, 0.0, 1.0) : 1.0;
                k = std::binomial_distribution<int>(n, q)(rng_);
            }
            mass -= weights_[c];
            for (int i = 0; i < k; ++i)
                out[c].push_back(next_id_++);
            n -= k;
        }
        return out;
    }

    /// True once no further activation can occur.
    bool exhausted(std::int64_t slot) const
    {
        if (model_.type == traffic_model::kind::beta_burst)
            return slot >= model_.activation_slots;
        return model_.rate <= 0.0;
    }

    user_id issued() const { return next_id_; }

private:
    traffic_model model_;
    rng_type rng_;
    std::vector<double> weights_;
    std::vector<std::vector<std::vector<user_id>>> schedule_;
    user_id next_id_ = 0;
};

} // namespace acdc

#endif // ACDC_TRAFFIC_HPP
