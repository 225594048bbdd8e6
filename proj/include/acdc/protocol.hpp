#ifndef ACDC_PROTOCOL_HPP
#define ACDC_PROTOCOL_HPP

#include <acdc/admission.hpp>
#include <acdc/channel.hpp>
#include <acdc/errors.hpp>
#include <acdc/estimation.hpp>
#include <acdc/lut.hpp>
#include <acdc/profile.hpp>
#include <acdc/traffic.hpp>
#include <acdc/tree.hpp>

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace acdc {

/// Independent engine for one purpose ("traffic", "protocol", ...) of a run.
inline rng_type derive_rng(std::uint64_t seed, std::uint32_t purpose)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), purpose};
    return rng_type(seq);
}

inline constexpr std::uint32_t traffic_stream = 0x7261u;
inline constexpr std::uint32_t protocol_stream = 0x9e37u;

/// Life cycle of one packet. Resolving refines A_R after an accept.
enum class packet_state : std::uint8_t { off, tx, a_r, resolving, suc, fail };

inline const char *to_string(packet_state s)
{
    switch (s) {
    case packet_state::off: return "Off";
    case packet_state::tx: return "Tx";
    case packet_state::a_r: return "A_R";
    case packet_state::resolving: return "Resolving";
    case packet_state::suc: return "Suc";
    case packet_state::fail: return "Fail";
    }
    return "?";
}

inline bool legal_transition(packet_state from, packet_state to)
{
    using s = packet_state;
    switch (from) {
    case s::off: return to == s::tx;
    case s::tx: return to == s::suc || to == s::a_r;
    case s::a_r: return to == s::resolving || to == s::fail || to == s::suc;
    case s::resolving: return to == s::suc || to == s::fail;
    case s::suc:
    case s::fail: return to == s::off;
    }
    return false;
}

struct class_metrics {
    long activations = 0;
    long successes = 0;
    long drops = 0;
    long rejects = 0;
    long still_active = 0;
    double delay_sum = 0.0;
    /// Users handed to a resolution and how many of them met the deadline.
    long admitted_users = 0;
    long admitted_in_time = 0;
    /// Admission requests (one per collided AC resource).
    long requests = 0;
    long rejected_infeasible = 0;
    long rejected_capacity = 0;

    static double ratio(long a, long b) { return b == 0 ? 0.0 : double(a) / double(b); }
    double success_ratio() const { return ratio(successes, activations); }
    double drop_ratio() const { return ratio(drops, activations); }
    double reject_ratio() const { return ratio(rejects, activations); }
    double drop_reject_ratio() const { return ratio(drops + rejects, activations); }
    double mean_delay() const { return successes == 0 ? 0.0 : delay_sum / double(successes); }
    double in_time_ratio() const { return ratio(admitted_in_time, admitted_users); }
    double request_rejection() const { return ratio(rejected_infeasible + rejected_capacity, requests); }
};

struct metrics_report {
    std::string protocol;
    std::vector<class_metrics> classes;
    long slots = 0;
    long collisions = 0;
    long contention_resource_slots = 0;
    long requests = 0;
    long rejected_requests = 0;
    long rejected_capacity = 0;
    std::vector<int> collisions_per_slot;
    std::vector<admission_log_entry> admission_log;
    std::map<std::string, std::string> metadata;

    double collision_rate() const { return slots == 0 ? 0.0 : double(collisions) / double(slots); }
    double collision_probability() const
    {
        return class_metrics::ratio(collisions, contention_resource_slots);
    }
    double admission_rejection() const { return class_metrics::ratio(rejected_requests, requests); }
    double capacity_rejection() const { return class_metrics::ratio(rejected_capacity, requests); }
};

enum class estimator_mode { ccp, exact };

inline const char *to_string(estimator_mode m) { return m == estimator_mode::ccp ? "ccp" : "exact"; }

struct class_spec {
    int delay = 10;
    double reliability = 0.95;
    std::size_t ac_resources = 4;
    selection_profile profile;
};

struct dab_coefficients {
    double collision = 2.39;
    double success = 1.0;
    double idle = 0.81;
};

struct scenario {
    enum class kind { acdc, dab };
    kind protocol = kind::acdc;
    std::vector<class_spec> classes;
    std::size_t rc_frequencies = 12;
    traffic_model traffic;
    std::shared_ptr<const parallelization_lut> lut;
    estimator_mode estimator = estimator_mode::ccp;
    /// Buffered admission when > 0.
    int max_wait = 0;
    int pessimism_runs = 2000;
    std::uint64_t pessimism_seed = 0x5eed;
    /// Measured slots and warm-up for open (poisson) traffic.
    long slots = 10000;
    long warmup = 1000;
    dab_coefficients dab;
    bool admission_log = false;

    std::size_t pooled_resources() const
    {
        std::size_t m = rc_frequencies;
        for (const auto &c : classes)
            m += c.ac_resources;
        return m;
    }
};

inline const char *to_string(scenario::kind k) { return k == scenario::kind::acdc ? "acdc" : "dab"; }

namespace detail {

struct packet {
    std::uint8_t cls = 0;
    packet_state state = packet_state::off;
    bool counted = false;
    std::int64_t activation = 0;
};

class packet_table {
public:
    packet &operator[](user_id id)
    {
        if (id >= packets_.size())
            packets_.resize(std::size_t(id) + 1);
        return packets_[std::size_t(id)];
    }

    void move(user_id id, packet_state to)
    {
        auto &p = (*this)[id];
        if (!legal_transition(p.state, to))
            throw internal_error(std::string("illegal transition ") + to_string(p.state) + " -> " + to_string(to));
        p.state = to;
    }

    std::size_t size() const { return packets_.size(); }

private:
    std::vector<packet> packets_;
};

} // namespace detail

/// Admission channels per class, a shared resolution channel, and the
/// admission gate in between.
class acdc_world {
public:
    acdc_world(const scenario &sc, rng_type rng)
        : sc_(sc), rng_(std::move(rng)), ledger_(sc.rc_frequencies)
    {
        if (!sc_.lut)
            throw config_error("lut: no parallelization table configured");
        std::size_t next = 0;
        for (std::size_t c = 0; c < sc_.classes.size(); ++c) {
            const auto &spec = sc_.classes[c];
            if (spec.profile.size() != spec.ac_resources)
                throw config_error("classes[" + std::to_string(c) + "].profile: size differs from ac_resources");
            qos_class q;
            q.index = int(c) + 1;
            q.delay = spec.delay;
            q.reliability = spec.reliability;
            q.ac_profile = spec.profile;
            for (std::size_t i = 0; i < spec.ac_resources; ++i)
                q.ac_resources.push_back(next++);
            classes_.push_back(std::move(q));
            pickers_.emplace_back(spec.profile.probabilities());
            ccp_.emplace_back(spec.profile);
            double factor = 0.0;
            if (sc_.estimator == estimator_mode::ccp) {
                rng_type prng(sc_.pessimism_seed);
                factor = pessimism_factor(spec.profile, sc_.pessimism_runs, prng);
            }
            pessimism_.push_back(factor);
        }
        metrics_.classes.resize(classes_.size());
        metrics_.protocol = "acdc";
    }

    const capacity_ledger &ledger() const { return ledger_; }
    const metrics_report &metrics() const { return metrics_; }
    metrics_report &metrics() { return metrics_; }
    double pessimism(std::size_t cls) const { return pessimism_[cls]; }
    bool idle() const { return jobs_.empty(); }
    const detail::packet_table &packets() const { return packets_; }

    /// One slot: live resolutions advance, then the new arrivals contend on
    /// their admission channel and every collision meets the admission gate.
    void slot(std::int64_t t, const std::vector<std::vector<user_id>> &arrivals, bool counted)
    {
        step_jobs(t);

        int slot_collisions = 0;
        for (std::size_t c = 0; c < classes_.size(); ++c) {
            const auto &users = c < arrivals.size() ? arrivals[c] : std::vector<user_id>{};
            auto &cm = metrics_.classes[c];
            for (user_id u : users) {
                auto &p = packets_[u];
                p.cls = std::uint8_t(c);
                p.activation = t;
                p.counted = counted;
                packets_.move(u, packet_state::tx);
                if (counted)
                    ++cm.activations;
            }
            if (counted)
                metrics_.contention_resource_slots += long(classes_[c].ac_resources.size());
            if (users.empty())
                continue;

            const auto outcomes = contend(std::span<const user_id>(users), pickers_[c], rng_);
            const auto obs = observe(outcomes);
            backlog_estimate est;
            if (sc_.estimator == estimator_mode::ccp)
                est = estimate_backlog(obs, ccp_[c], pessimism_[c]);

            for (std::size_t r = 0; r < outcomes.size(); ++r) {
                const auto &o = outcomes[r];
                if (obs[r] == symbol::success) {
                    const user_id u = o.users().front();
                    packets_.move(u, packet_state::suc);
                    finish_success(u, t);
                    continue;
                }
                if (obs[r] != symbol::collision)
                    continue;
                ++slot_collisions;
                admit(c, r, o, est, t);
            }
        }
        if (counted) {
            metrics_.collisions += slot_collisions;
            ++metrics_.slots;
            metrics_.collisions_per_slot.push_back(slot_collisions);
        }
        ledger_.collect(t + 1);
    }

    void finalize()
    {
        for (const auto &job : jobs_)
            for (user_id u : job.unresolved()) {
                const auto &p = packets_[u];
                if (p.counted)
                    ++metrics_.classes[p.cls].still_active;
            }
    }

private:
    void finish_success(user_id u, std::int64_t t)
    {
        auto &p = packets_[u];
        if (!p.counted)
            return;
        auto &cm = metrics_.classes[p.cls];
        ++cm.successes;
        cm.delay_sum += double(t - p.activation);
    }

    void admit(std::size_t c, std::size_t r, const ternary_outcome &o, const backlog_estimate &est,
               std::int64_t t)
    {
        const auto &cls = classes_[c];
        auto &cm = metrics_.classes[c];
        const int truth = int(o.multiplicity());
        const int u_hat = sc_.estimator == estimator_mode::ccp ? est.per_resource[r] : truth;
        const int u_dagger = sc_.estimator == estimator_mode::ccp ? est.per_resource_pessimistic[r] : truth;
        for (user_id u : o.users())
            packets_.move(u, packet_state::a_r);

        const std::uint64_t id = next_job_++;
        const auto d = sc_.max_wait > 0 ? decide_buffered(cls, u_dagger, *sc_.lut, ledger_, t, id, sc_.max_wait)
                                        : decide(cls, u_dagger, *sc_.lut, ledger_, t, id);
        const bool counted = packets_[o.users().front()].counted;
        if (counted) {
            ++cm.requests;
            ++metrics_.requests;
            if (!d.accepted()) {
                ++metrics_.rejected_requests;
                if (d.outcome == verdict::reject_infeasible)
                    ++cm.rejected_infeasible;
                else {
                    ++cm.rejected_capacity;
                    ++metrics_.rejected_capacity;
                }
            }
        }
        if (sc_.admission_log)
            metrics_.admission_log.push_back({t, cls.index, cls.ac_resources[r], u_hat, u_dagger, d.outcome, d.m_p,
                                              d.free_before, d.free_after});
        if (!d.accepted()) {
            for (user_id u : o.users()) {
                packets_.move(u, packet_state::fail);
                if (packets_[u].counted)
                    ++cm.rejects;
            }
            return;
        }
        for (user_id u : o.users()) {
            packets_.move(u, packet_state::resolving);
            if (packets_[u].counted)
                ++cm.admitted_users;
        }
        jobs_.emplace_back(id, o.users(), d.m_p, d.first_slot, d.deadline_slot, u_dagger);
    }

    void step_jobs(std::int64_t t)
    {
        for (auto &job : jobs_) {
            if (job.start_slot() > t)
                continue;
            for (user_id u : job.step(rng_)) {
                packets_.move(u, packet_state::suc);
                finish_success(u, t);
                if (packets_[u].counted)
                    ++metrics_.classes[packets_[u].cls].admitted_in_time;
            }
            if (job.complete()) {
                ledger_.release(job.id(), t);
            } else if (t >= job.deadline_slot()) {
                for (user_id u : job.unresolved()) {
                    packets_.move(u, packet_state::fail);
                    if (packets_[u].counted)
                        ++metrics_.classes[packets_[u].cls].drops;
                }
                ledger_.release(job.id(), t);
            }
        }
        std::erase_if(jobs_, [t](const resolution_job &j) { return j.complete() || t >= j.deadline_slot(); });
    }

    const scenario &sc_;
    rng_type rng_;
    capacity_ledger ledger_;
    std::vector<qos_class> classes_;
    std::vector<resource_picker> pickers_;
    std::vector<ccp_estimator> ccp_;
    std::vector<double> pessimism_;
    std::vector<resolution_job> jobs_;
    detail::packet_table packets_;
    metrics_report metrics_;
    std::uint64_t next_job_ = 0;
};

/// Slotted ALOHA over the pooled resources with a dynamic barring factor and
/// strict class priority.
class dab_world {
public:
    struct state {
        double barring_factor = 1.0;
        double backlog_estimate = 0.0;
    };

    dab_world(const scenario &sc, rng_type rng)
        : sc_(sc), rng_(std::move(rng)), resources_(sc.pooled_resources()), pending_(sc.classes.size())
    {
        if (resources_ == 0)
            throw config_error("resources: DAB needs at least one resource");
        metrics_.classes.resize(sc_.classes.size());
        metrics_.protocol = "dab";
    }

    const state &control() const { return control_; }
    const metrics_report &metrics() const { return metrics_; }
    metrics_report &metrics() { return metrics_; }
    std::size_t resources() const { return resources_; }
    bool idle() const
    {
        return std::all_of(pending_.begin(), pending_.end(), [](const auto &q) { return q.empty(); });
    }
    std::size_t pending(std::size_t cls) const { return pending_[cls].size(); }
    /// Index of the only class allowed to transmit, or the class count when none is pending.
    std::size_t permitted_class() const
    {
        for (std::size_t c = 0; c < pending_.size(); ++c)
            if (!pending_[c].empty())
                return c;
        return pending_.size();
    }

    /// Transmit probability of a pending user of class c in the coming slot.
    double transmit_probability(std::size_t cls) const
    {
        return cls == permitted_class() ? control_.barring_factor : 0.0;
    }

    void slot(std::int64_t t, const std::vector<std::vector<user_id>> &arrivals, bool counted)
    {
        for (std::size_t c = 0; c < pending_.size() && c < arrivals.size(); ++c)
            for (user_id u : arrivals[c]) {
                auto &p = packets_[u];
                p.cls = std::uint8_t(c);
                p.activation = t;
                p.counted = counted;
                packets_.move(u, packet_state::tx);
                if (counted)
                    ++metrics_.classes[c].activations;
                pending_[c].push_back(u);
            }
        if (counted)
            metrics_.contention_resource_slots += long(resources_);

        std::vector<ternary_outcome> outcomes(resources_);
        const std::size_t allowed = permitted_class();
        if (allowed < pending_.size()) {
            std::bernoulli_distribution tx(control_.barring_factor);
            std::uniform_int_distribution<std::size_t> pick(0, resources_ - 1);
            for (user_id u : pending_[allowed])
                if (tx(rng_))
                    outcomes[pick(rng_)].add(u);
        }

        long idle = 0, success = 0, collision = 0;
        for (const auto &o : outcomes) {
            switch (o.observable()) {
            case symbol::idle: ++idle; break;
            case symbol::success: {
                ++success;
                const user_id u = o.users().front();
                packets_.move(u, packet_state::suc);
                const auto &p = packets_[u];
                if (p.counted) {
                    auto &cm = metrics_.classes[p.cls];
                    ++cm.successes;
                    cm.delay_sum += double(t - p.activation);
                }
                break;
            }
            case symbol::collision: ++collision; break;
            }
        }
        if (success > 0)
            for (auto &q : pending_)
                std::erase_if(q, [this](user_id u) { return packets_[u].state == packet_state::suc; });

        for (std::size_t c = 0; c < pending_.size(); ++c) {
            const std::int64_t delay = sc_.classes[c].delay;
            std::erase_if(pending_[c], [&](user_id u) {
                auto &p = packets_[u];
                if (t < p.activation + delay)
                    return false;
                // No admission stage here: a backlogged packet fails straight from Tx.
                p.state = packet_state::fail;
                if (p.counted)
                    ++metrics_.classes[c].drops;
                return true;
            });
        }

        control_.backlog_estimate =
            std::max(0.0, control_.backlog_estimate + sc_.dab.collision * double(collision) -
                              sc_.dab.success * double(success) - sc_.dab.idle * double(idle));
        control_.barring_factor = control_.backlog_estimate <= double(resources_)
                                      ? 1.0
                                      : std::min(1.0, double(resources_) / control_.backlog_estimate);
        if (counted) {
            metrics_.collisions += collision;
            ++metrics_.slots;
            metrics_.collisions_per_slot.push_back(int(collision));
        }
    }

    void finalize()
    {
        for (const auto &q : pending_)
            for (user_id u : q)
                if (packets_[u].counted)
                    ++metrics_.classes[packets_[u].cls].still_active;
    }

private:
    const scenario &sc_;
    rng_type rng_;
    std::size_t resources_;
    std::vector<std::vector<user_id>> pending_;
    state control_;
    detail::packet_table packets_;
    metrics_report metrics_;
};

inline void validate(const scenario &sc)
{
    if (sc.classes.empty())
        throw config_error("classes: at least one class required");
    for (std::size_t c = 0; c < sc.classes.size(); ++c) {
        const auto &k = sc.classes[c];
        const std::string where = "classes[" + std::to_string(c) + "]";
        if (k.delay < 1)
            throw config_error(where + ".delay: must be >= 1");
        if (!(k.reliability > 0.0 && k.reliability < 1.0))
            throw config_error(where + ".reliability: must lie in (0, 1)");
        if (sc.protocol == scenario::kind::acdc && k.ac_resources == 0)
            throw config_error(where + ".ac_resources: must be >= 1");
    }
    if (sc.traffic.classes() != sc.classes.size())
        throw config_error("traffic.populations: one entry per class required");
    sc.traffic.validate();
    if (sc.traffic.type == traffic_model::kind::poisson && sc.slots < 1)
        throw config_error("slots: must be >= 1 for poisson traffic");
    if (sc.warmup < 0)
        throw config_error("warmup: must be >= 0");
    if (sc.max_wait < 0)
        throw config_error("buffering.max_wait: must be >= 0");
    if (sc.protocol == scenario::kind::acdc && sc.rc_frequencies == 0)
        throw config_error("resources.rc: must be >= 1");
}

/// One run. Poisson traffic is measured for `slots` slots after `warmup`;
/// a burst runs until every activation has terminated.
inline metrics_report run_scenario(const scenario &sc, std::uint64_t seed)
{
    validate(sc);
    auto traffic_rng = derive_rng(seed, traffic_stream);
    traffic_source source(sc.traffic, traffic_rng());

    const bool open = sc.traffic.type == traffic_model::kind::poisson;
    const std::int64_t horizon = open ? sc.warmup + sc.slots : std::int64_t(sc.traffic.activation_slots);
    const auto drive = [&](auto &world) {
        std::int64_t t = 0;
        for (; t < horizon; ++t)
            world.slot(t, source.arrivals(t), !open || t >= sc.warmup);
        const std::vector<std::vector<user_id>> none(sc.classes.size());
        // Drain: nothing new arrives, everything in flight runs to its end.
        for (; !world.idle(); ++t)
            world.slot(t, none, !open);
        world.finalize();
        auto report = std::move(world.metrics());
        return report;
    };

    metrics_report report;
    if (sc.protocol == scenario::kind::acdc) {
        acdc_world world(sc, derive_rng(seed, protocol_stream));
        report = drive(world);
        report.metadata["estimator"] = to_string(sc.estimator);
        report.metadata["buffering_max_wait"] = std::to_string(sc.max_wait);
        std::string factors;
        for (std::size_t c = 0; c < sc.classes.size(); ++c)
            factors += (c ? ";" : "") + std::to_string(world.pessimism(c));
        report.metadata["pessimism"] = factors;
    } else {
        dab_world world(sc, derive_rng(seed, protocol_stream));
        report = drive(world);
        report.metadata["dab_estimator"] = "drift: N <- max(0, N + " + std::to_string(sc.dab.collision) + "*C - " +
                                           std::to_string(sc.dab.success) + "*S - " +
                                           std::to_string(sc.dab.idle) + "*I) (implementation-defined)";
        report.metadata["dab_deadline_rule"] = "drop after slot activation + L (implementation-defined)";
    }
    report.metadata["seed"] = std::to_string(seed);
    return report;
}

} // namespace acdc

#endif // ACDC_PROTOCOL_HPP
