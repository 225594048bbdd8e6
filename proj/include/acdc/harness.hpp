#ifndef ACDC_HARNESS_HPP
#define ACDC_HARNESS_HPP

#include <acdc/analytics.hpp>
#include <acdc/errors.hpp>
#include <acdc/estimation.hpp>
#include <acdc/lut.hpp>
#include <acdc/profile.hpp>
#include <acdc/protocol.hpp>
#include <acdc/traffic.hpp>

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <map>
#include <memory>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace acdc {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// JSON field access with errors that name the offending field
// ---------------------------------------------------------------------------

namespace cfg {

inline std::string join(const std::string &path, const std::string &key)
{
    return path.empty() ? key : path + "." + key;
}

inline void allow_keys(const json &j, const std::string &path, std::initializer_list<const char *> keys)
{
    if (!j.is_object())
        throw config_error((path.empty() ? std::string("config") : path) + ": expected an object");
    for (const auto &[k, v] : j.items()) {
        bool known = false;
        for (const char *a : keys)
            known = known || k == a;
        if (!known)
            throw config_error(join(path, k) + ": unknown field");
    }
}

template <class T>
T as(const json &v, const std::string &where)
{
    if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean())
            throw config_error(where + ": expected true or false");
        return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string())
            throw config_error(where + ": expected a string");
        return v.get<std::string>();
    } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number())
            throw config_error(where + ": expected a number");
        return v.get<T>();
    } else if constexpr (std::is_unsigned_v<T>) {
        if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0))
            throw config_error(where + ": expected a non-negative integer");
        return v.get<T>();
    } else {
        if (!v.is_number_integer())
            throw config_error(where + ": expected an integer");
        return v.get<T>();
    }
}

template <class T>
T get(const json &j, const std::string &path, const char *key, T fallback)
{
    auto it = j.find(key);
    return it == j.end() ? fallback : as<T>(*it, join(path, key));
}

template <class T>
T need(const json &j, const std::string &path, const char *key)
{
    auto it = j.find(key);
    if (it == j.end())
        throw config_error(join(path, key) + ": required field missing");
    return as<T>(*it, join(path, key));
}

template <class T>
std::vector<T> list(const json &j, const std::string &where)
{
    if (!j.is_array())
        throw config_error(where + ": expected an array");
    std::vector<T> out;
    for (std::size_t i = 0; i < j.size(); ++i)
        out.push_back(as<T>(j[i], where + "[" + std::to_string(i) + "]"));
    return out;
}

/// Integer grid given as [a, b, ...] or {"from": a, "to": b, "step": s}.
inline std::vector<int> grid(const json &j, const std::string &where)
{
    if (j.is_array())
        return list<int>(j, where);
    allow_keys(j, where, {"from", "to", "step"});
    const int from = need<int>(j, where, "from"), to = need<int>(j, where, "to");
    const int step = get<int>(j, where, "step", 1);
    if (step < 1 || to < from)
        throw config_error(where + ": need from <= to and step >= 1");
    std::vector<int> out;
    for (int v = from; v <= to; v += step)
        out.push_back(v);
    return out;
}

inline std::string format(double v)
{
    if (std::isnan(v))
        return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

} // namespace cfg

/// FNV-1a over the canonical (sorted-key, compact) JSON text.
inline std::string config_hash(const json &j)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : j.dump()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---------------------------------------------------------------------------
// Config sections
// ---------------------------------------------------------------------------

inline selection_profile parse_profile(const json &j, const std::string &path, std::size_t resources)
{
    const std::string family = cfg::need<std::string>(j, path, "family");
    if (family == "uniform") {
        cfg::allow_keys(j, path, {"family"});
        return selection_profile::uniform(resources);
    }
    if (family == "power") {
        cfg::allow_keys(j, path, {"family", "p0"});
        return selection_profile::power(cfg::need<double>(j, path, "p0"), resources);
    }
    if (family == "geometric") {
        cfg::allow_keys(j, path, {"family", "p"});
        return selection_profile::geometric(cfg::need<double>(j, path, "p"), resources);
    }
    if (family == "poisson") {
        cfg::allow_keys(j, path, {"family", "lambda"});
        return selection_profile::poisson(cfg::need<double>(j, path, "lambda"), resources);
    }
    if (family == "custom") {
        cfg::allow_keys(j, path, {"family", "probabilities"});
        auto probs = cfg::list<double>(j.at("probabilities"), path + ".probabilities");
        if (probs.size() != resources)
            throw config_error(path + ".probabilities: expected " + std::to_string(resources) + " entries");
        return selection_profile::custom(std::move(probs));
    }
    throw config_error(path + ".family: unknown profile family '" + family + "'");
}

/// LUTs are deterministic in their parameters, so built tables are shared
/// within a process.
inline std::shared_ptr<const parallelization_lut> load_lut(const json &j, const std::string &path)
{
    static std::map<std::string, std::shared_ptr<const parallelization_lut>> cache;
    const std::string key = j.dump();
    if (auto it = cache.find(key); it != cache.end())
        return it->second;

    const std::string source = cfg::get<std::string>(j, path, "source", "table2");
    std::shared_ptr<const parallelization_lut> lut;
    if (source == "table2") {
        cfg::allow_keys(j, path, {"source"});
        lut = std::make_shared<parallelization_lut>(table2());
    } else if (source == "file") {
        cfg::allow_keys(j, path, {"source", "path"});
        lut = std::make_shared<parallelization_lut>(parallelization_lut::load(cfg::need<std::string>(j, path, "path")));
    } else if (source == "monte-carlo") {
        cfg::allow_keys(j, path, {"source", "reliability", "delays", "users", "m_p_max", "runs", "seed", "convention"});
        lut_build_options o;
        o.reliability = cfg::get<double>(j, path, "reliability", 0.95);
        if (!j.contains("delays") || !j.contains("users"))
            throw config_error(path + ": monte-carlo source needs delays and users");
        o.delays = cfg::grid(j.at("delays"), path + ".delays");
        o.users = cfg::grid(j.at("users"), path + ".users");
        o.m_p_max = cfg::get<int>(j, path, "m_p_max", 12);
        o.runs = cfg::get<long>(j, path, "runs", 10000);
        o.seed = cfg::get<std::uint64_t>(j, path, "seed", 1);
        const auto conv = cfg::get<std::string>(j, path, "convention", "rc-slots-from-admission");
        if (conv == "rc-slots-from-admission")
            o.convention = delay_convention::rc_slots_from_admission;
        else if (conv == "root-slot-included")
            o.convention = delay_convention::root_slot_included;
        else
            throw config_error(path + ".convention: unknown delay convention '" + conv + "'");
        if (o.m_p_max < 1 || o.runs < 1)
            throw config_error(path + ": m_p_max and runs must be >= 1");
        lut = std::make_shared<parallelization_lut>(build_lut(o));
    } else {
        throw config_error(path + ".source: unknown lut source '" + source + "'");
    }
    cache.emplace(key, lut);
    return lut;
}

inline traffic_model parse_traffic(const json &j, const std::string &path)
{
    const auto kind = cfg::need<std::string>(j, path, "kind");
    if (!j.contains("populations"))
        throw config_error(path + ".populations: required field missing");
    auto pops = cfg::list<long>(j.at("populations"), path + ".populations");
    traffic_model m;
    if (kind == "poisson") {
        cfg::allow_keys(j, path, {"kind", "rate", "populations"});
        m.type = traffic_model::kind::poisson;
        m.rate = cfg::need<double>(j, path, "rate");
    } else if (kind == "beta_burst") {
        cfg::allow_keys(j, path, {"kind", "activation_slots", "shape_a", "shape_b", "populations"});
        m.type = traffic_model::kind::beta_burst;
        m.activation_slots = cfg::get<int>(j, path, "activation_slots", 100);
        m.shape_a = cfg::get<double>(j, path, "shape_a", 3.0);
        m.shape_b = cfg::get<double>(j, path, "shape_b", 4.0);
    } else {
        throw config_error(path + ".kind: unknown traffic kind '" + kind + "'");
    }
    m.populations = std::move(pops);
    try {
        m.validate();
    } catch (const config_error &e) {
        // Model messages start with "traffic."; restore the enclosing path.
        throw config_error(path.substr(0, path.size() - std::string("traffic").size()) + e.what());
    }
    return m;
}

inline scenario parse_scenario(const json &j, const std::string &path = "scenario")
{
    cfg::allow_keys(j, path, {"protocol", "resources", "classes", "traffic", "lut", "estimator", "pessimism",
                              "buffering", "horizon", "dab", "admission_log"});
    scenario sc;
    const auto proto = cfg::get<std::string>(j, path, "protocol", "acdc");
    if (proto == "acdc")
        sc.protocol = scenario::kind::acdc;
    else if (proto == "dab")
        sc.protocol = scenario::kind::dab;
    else
        throw config_error(path + ".protocol: expected \"acdc\" or \"dab\"");

    const std::string rp = path + ".resources";
    if (!j.contains("resources"))
        throw config_error(rp + ": required field missing");
    const auto &res = j.at("resources");
    cfg::allow_keys(res, rp, {"ac", "rc"});
    if (!res.contains("ac"))
        throw config_error(rp + ".ac: required field missing");
    const auto ac = cfg::list<std::size_t>(res.at("ac"), rp + ".ac");
    sc.rc_frequencies = cfg::need<std::size_t>(res, rp, "rc");

    const std::string cp = path + ".classes";
    if (!j.contains("classes") || !j.at("classes").is_array())
        throw config_error(cp + ": expected an array of classes");
    const auto &classes = j.at("classes");
    if (classes.size() != ac.size())
        throw config_error(rp + ".ac: one entry per class required (" + std::to_string(classes.size()) +
                           " classes)");
    for (std::size_t c = 0; c < classes.size(); ++c) {
        const std::string p = cp + "[" + std::to_string(c) + "]";
        const auto &k = classes[c];
        cfg::allow_keys(k, p, {"delay", "reliability", "profile"});
        class_spec spec;
        spec.delay = cfg::need<int>(k, p, "delay");
        spec.reliability = cfg::get<double>(k, p, "reliability", 0.95);
        spec.ac_resources = ac[c];
        if (spec.ac_resources == 0) {
            if (sc.protocol == scenario::kind::acdc)
                throw config_error(rp + ".ac[" + std::to_string(c) + "]: must be >= 1");
        } else {
            const json prof = k.contains("profile") ? k.at("profile") : json{{"family", "power"}, {"p0", 0.05}};
            spec.profile = parse_profile(prof, p + ".profile", spec.ac_resources);
        }
        sc.classes.push_back(std::move(spec));
    }

    if (!j.contains("traffic"))
        throw config_error(path + ".traffic: required field missing");
    sc.traffic = parse_traffic(j.at("traffic"), path + ".traffic");

    if (sc.protocol == scenario::kind::acdc)
        sc.lut = load_lut(j.contains("lut") ? j.at("lut") : json{{"source", "table2"}}, path + ".lut");

    const auto est = cfg::get<std::string>(j, path, "estimator", "ccp");
    if (est == "ccp")
        sc.estimator = estimator_mode::ccp;
    else if (est == "exact")
        sc.estimator = estimator_mode::exact;
    else
        throw config_error(path + ".estimator: expected \"ccp\" or \"exact\"");

    if (j.contains("pessimism")) {
        const auto &p = j.at("pessimism");
        cfg::allow_keys(p, path + ".pessimism", {"runs", "seed"});
        sc.pessimism_runs = cfg::get<int>(p, path + ".pessimism", "runs", sc.pessimism_runs);
        sc.pessimism_seed = cfg::get<std::uint64_t>(p, path + ".pessimism", "seed", sc.pessimism_seed);
        if (sc.pessimism_runs < 1)
            throw config_error(path + ".pessimism.runs: must be >= 1");
    }
    if (j.contains("buffering")) {
        const auto &b = j.at("buffering");
        cfg::allow_keys(b, path + ".buffering", {"enabled", "max_wait"});
        const bool on = cfg::get<bool>(b, path + ".buffering", "enabled", false);
        const int w = cfg::get<int>(b, path + ".buffering", "max_wait", 0);
        if (w < 0)
            throw config_error(path + ".buffering.max_wait: must be >= 0");
        sc.max_wait = on ? w : 0;
    }
    if (j.contains("horizon")) {
        const auto &h = j.at("horizon");
        cfg::allow_keys(h, path + ".horizon", {"slots", "warmup"});
        sc.slots = cfg::get<long>(h, path + ".horizon", "slots", sc.slots);
        sc.warmup = cfg::get<long>(h, path + ".horizon", "warmup", sc.warmup);
    }
    if (j.contains("dab")) {
        const auto &d = j.at("dab");
        cfg::allow_keys(d, path + ".dab", {"collision", "success", "idle"});
        sc.dab.collision = cfg::get<double>(d, path + ".dab", "collision", sc.dab.collision);
        sc.dab.success = cfg::get<double>(d, path + ".dab", "success", sc.dab.success);
        sc.dab.idle = cfg::get<double>(d, path + ".dab", "idle", sc.dab.idle);
    }
    sc.admission_log = cfg::get<bool>(j, path, "admission_log", false);

    try {
        validate(sc);
    } catch (const config_error &e) {
        throw config_error(path + "." + e.what());
    }
    return sc;
}

/// Top-level experiment document.
struct experiment_config {
    std::string name;
    std::uint64_t seed = 1;
    int runs = 1;
    json document;

    /// Hash of everything except seed, runs and output settings.
    std::string hash() const
    {
        json j = document;
        j.erase("seed");
        j.erase("runs");
        j.erase("output");
        return config_hash(j);
    }

    bool has(const char *section) const { return document.contains(section); }
    const json &section(const char *name) const
    {
        if (!document.contains(name))
            throw config_error(std::string(name) + ": required section missing");
        return document.at(name);
    }
};

inline experiment_config parse_experiment(const json &j)
{
    cfg::allow_keys(j, "", {"name", "seed", "runs", "output", "scenario", "compare", "analyze", "estimate_bench",
                            "lut", "comment"});
    experiment_config e;
    e.document = j;
    e.name = cfg::get<std::string>(j, "", "name", "experiment");
    e.seed = cfg::get<std::uint64_t>(j, "", "seed", 1);
    e.runs = cfg::get<int>(j, "", "runs", 1);
    if (e.runs < 1)
        throw config_error("runs: must be >= 1");
    return e;
}

inline experiment_config load_experiment(const std::string &file)
{
    std::ifstream in(file);
    if (!in)
        throw config_error("cannot open config file " + file);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error &e) {
        throw config_error(file + ": invalid JSON (" + e.what() + ")");
    }
    return parse_experiment(j);
}

// ---------------------------------------------------------------------------
// Reports and aggregation
// ---------------------------------------------------------------------------

/// Flattened metric name -> value, in a fixed order.
inline std::vector<std::pair<std::string, double>> flatten(const metrics_report &r)
{
    std::vector<std::pair<std::string, double>> out;
    for (std::size_t c = 0; c < r.classes.size(); ++c) {
        const auto &m = r.classes[c];
        const std::string p = "class" + std::to_string(c + 1) + ".";
        out.emplace_back(p + "activations", double(m.activations));
        out.emplace_back(p + "success_ratio", m.success_ratio());
        out.emplace_back(p + "drop_ratio", m.drop_ratio());
        out.emplace_back(p + "reject_ratio", m.reject_ratio());
        out.emplace_back(p + "drop_reject_ratio", m.drop_reject_ratio());
        out.emplace_back(p + "still_active", double(m.still_active));
        out.emplace_back(p + "mean_delay", m.mean_delay());
        out.emplace_back(p + "in_time_ratio", m.in_time_ratio());
        out.emplace_back(p + "request_rejection", m.request_rejection());
    }
    out.emplace_back("collision_rate", r.collision_rate());
    out.emplace_back("collision_probability", r.collision_probability());
    out.emplace_back("admission_rejection", r.admission_rejection());
    out.emplace_back("capacity_rejection", r.capacity_rejection());
    return out;
}

inline json to_json(const metrics_report &r)
{
    json j;
    j["protocol"] = r.protocol;
    json classes = json::array();
    for (std::size_t c = 0; c < r.classes.size(); ++c) {
        const auto &m = r.classes[c];
        classes.push_back({{"class", c + 1},
                           {"activations", m.activations},
                           {"successes", m.successes},
                           {"drops", m.drops},
                           {"rejects", m.rejects},
                           {"still_active", m.still_active},
                           {"success_ratio", m.success_ratio()},
                           {"drop_ratio", m.drop_ratio()},
                           {"reject_ratio", m.reject_ratio()},
                           {"drop_reject_ratio", m.drop_reject_ratio()},
                           {"mean_delay", m.mean_delay()},
                           {"admitted_users", m.admitted_users},
                           {"admitted_in_time", m.admitted_in_time},
                           {"in_time_ratio", m.in_time_ratio()},
                           {"requests", m.requests},
                           {"rejected_infeasible", m.rejected_infeasible},
                           {"rejected_capacity", m.rejected_capacity}});
    }
    j["classes"] = classes;
    j["global"] = {{"slots", r.slots},
                   {"collisions", r.collisions},
                   {"collision_rate", r.collision_rate()},
                   {"collision_probability", r.collision_probability()},
                   {"requests", r.requests},
                   {"rejected_requests", r.rejected_requests},
                   {"admission_rejection", r.admission_rejection()},
                   {"capacity_rejection", r.capacity_rejection()}};
    j["metadata"] = r.metadata;
    return j;
}

struct metric_summary {
    double mean = 0.0;
    double half_width = 0.0;
    long n = 0;
};

struct aggregate_report {
    std::string config_hash;
    std::vector<std::uint64_t> seeds;
    std::vector<std::pair<std::string, metric_summary>> metrics;

    const metric_summary &at(const std::string &name) const
    {
        for (const auto &[k, v] : metrics)
            if (k == name)
                return v;
        throw config_error("aggregate: no metric " + name);
    }
};

/// Mean and 95% normal-approximation half-width across runs, folded in
/// seed order. A single run has width 0.
inline aggregate_report aggregate(std::vector<metrics_report> reports)
{
    if (reports.empty())
        throw config_error("aggregate: no reports");
    const auto hash_of = [](const metrics_report &r) {
        auto it = r.metadata.find("config_hash");
        return it == r.metadata.end() ? std::string() : it->second;
    };
    const auto seed_of = [](const metrics_report &r) {
        auto it = r.metadata.find("seed");
        return it == r.metadata.end() ? std::uint64_t{0} : std::stoull(it->second);
    };
    aggregate_report out;
    out.config_hash = hash_of(reports.front());
    for (const auto &r : reports)
        if (hash_of(r) != out.config_hash)
            throw config_error("aggregate: reports come from different configurations (" + out.config_hash +
                               " vs " + hash_of(r) + ")");
    std::stable_sort(reports.begin(), reports.end(),
                     [&](const auto &a, const auto &b) { return seed_of(a) < seed_of(b); });

    std::vector<std::vector<std::pair<std::string, double>>> flat;
    for (const auto &r : reports) {
        out.seeds.push_back(seed_of(r));
        flat.push_back(flatten(r));
    }
    const std::size_t n = flat.size();
    for (std::size_t k = 0; k < flat.front().size(); ++k) {
        metric_summary s;
        s.n = long(n);
        for (const auto &f : flat)
            s.mean += f[k].second;
        s.mean /= double(n);
        if (n > 1) {
            // Shifted by the first run so identical runs give exactly zero.
            const double x0 = flat.front()[k].second;
            double dm = 0.0;
            for (const auto &f : flat)
                dm += f[k].second - x0;
            dm /= double(n);
            double ss = 0.0;
            for (const auto &f : flat)
                ss += (f[k].second - x0 - dm) * (f[k].second - x0 - dm);
            s.half_width = 1.96 * std::sqrt(ss / double(n - 1)) / std::sqrt(double(n));
        }
        out.metrics.emplace_back(flat.front()[k].first, s);
    }
    return out;
}

inline json to_json(const aggregate_report &a)
{
    json j;
    j["config_hash"] = a.config_hash;
    j["seeds"] = a.seeds;
    json m = json::object();
    for (const auto &[k, s] : a.metrics)
        m[k] = {{"mean", s.mean}, {"ci_low", s.mean - s.half_width}, {"ci_high", s.mean + s.half_width}, {"n", s.n}};
    j["metrics"] = m;
    return j;
}

/// Runs seeds seed, seed+1, ... and stamps every report with the config hash.
inline std::vector<metrics_report> run_many(const scenario &sc, std::uint64_t seed, int runs, const std::string &hash)
{
    std::vector<metrics_report> out;
    for (int r = 0; r < runs; ++r) {
        auto rep = run_scenario(sc, seed + std::uint64_t(r));
        rep.metadata["config_hash"] = hash;
        out.push_back(std::move(rep));
    }
    return out;
}

/// Minimal CSV table with fixed number formatting.
struct csv_table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    template <class... T>
    void add(const T &...cells)
    {
        std::vector<std::string> row;
        (row.push_back(cell(cells)), ...);
        rows.push_back(std::move(row));
    }

    void write(std::ostream &os) const
    {
        for (std::size_t i = 0; i < header.size(); ++i)
            os << (i ? "," : "") << header[i];
        os << '\n';
        for (const auto &r : rows) {
            for (std::size_t i = 0; i < r.size(); ++i)
                os << (i ? "," : "") << r[i];
            os << '\n';
        }
    }

    void save(const std::string &path) const
    {
        std::ofstream out(path);
        if (!out)
            throw config_error("cannot write " + path);
        write(out);
    }

private:
    static std::string cell(const std::string &s) { return s; }
    static std::string cell(const char *s) { return s; }
    static std::string cell(double v) { return cfg::format(v); }
    template <class I>
        requires std::is_integral_v<I>
    static std::string cell(I v)
    {
        return std::to_string(v);
    }
};

// ---------------------------------------------------------------------------
// Estimator benchmark
// ---------------------------------------------------------------------------

/// Power profile whose estimation ceiling equals `ceiling` (p0 by bisection
/// in log space).
inline selection_profile power_profile_for_ceiling(double ceiling, std::size_t resources)
{
    const double uniform_ceiling = selection_profile::uniform(resources).n_max_ceiling();
    if (!(ceiling > uniform_ceiling))
        throw config_error("power profile: ceiling must exceed the uniform ceiling " + cfg::format(uniform_ceiling));
    double lo = std::log(1e-7), hi = std::log(1.0 / double(resources));
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double c = selection_profile::power(std::exp(mid), resources).n_max_ceiling();
        (c > ceiling ? lo : hi) = mid;
    }
    return selection_profile::power(std::exp(0.5 * (lo + hi)), resources);
}

struct bench_options {
    std::size_t resources = 18;
    std::vector<double> ceilings{500, 1000, 2000};
    std::vector<int> users;
    int runs = 1000;
    /// Search cap of the uniform MLEs.
    int n_cap = 100;
    std::uint64_t seed = 1;
};

struct bench_row {
    std::string estimator;
    std::size_t resources = 0;
    double n_max = 0;
    int true_n = 0;
    double mean_abs_error = 0;
    int runs = 0;
    std::uint64_t seed = 0;
};

/// Per run the error is sum_i |u_hat_i - u_i| over the resources; the row
/// reports its mean over runs. CCP runs on power profiles, the MLEs on a
/// uniform channel.
inline std::vector<bench_row> estimator_bench(const bench_options &o)
{
    std::vector<bench_row> rows;
    const auto cell_rng = [&](std::uint32_t tag, int n) {
        std::seed_seq seq{std::uint32_t(o.seed), std::uint32_t(o.seed >> 32), tag, std::uint32_t(n)};
        return rng_type(seq);
    };
    const std::size_t m = o.resources;

    for (std::size_t k = 0; k < o.ceilings.size(); ++k) {
        const auto profile = power_profile_for_ceiling(o.ceilings[k], m);
        ccp_estimator ccp(profile);
        for (int n : o.users) {
            auto rng = cell_rng(std::uint32_t(100 + k), n);
            double err = 0.0;
            for (int r = 0; r < o.runs; ++r) {
                const auto truth = place_users(n, profile.probabilities(), rng);
                const auto obs = observe_counts(truth);
                const auto est = heuristic_partition(obs, ccp(obs), profile);
                for (std::size_t i = 0; i < m; ++i)
                    err += std::abs(est[i] - truth[i]);
            }
            rows.push_back({"ccp", m, o.ceilings[k], n, err / o.runs, o.runs, o.seed});
        }
    }

    const auto uniform = selection_profile::uniform(m);
    std::vector<int> stirling(m + 1);
    for (std::size_t busy = 0; busy <= m; ++busy)
        stirling[busy] = mle_stirling(int(busy), int(m), o.n_cap);
    for (int n : o.users) {
        auto rng = cell_rng(1, n);
        double err_s = 0.0, err_z = 0.0;
        for (int r = 0; r < o.runs; ++r) {
            const auto truth = place_users(n, uniform.probabilities(), rng);
            const auto obs = observe_counts(truth);
            const auto c = count_symbols(obs);
            const auto est = heuristic_partition(obs, double(stirling[c.success + c.collision]), uniform);
            double avg = 0.0;
            if (c.collision > 0)
                avg = mle_zanella(int(c.success), int(c.collision), int(m), double(o.n_cap)).avg_collision_size;
            for (std::size_t i = 0; i < m; ++i) {
                err_s += std::abs(est[i] - truth[i]);
                const double z = obs[i] == symbol::collision ? avg : double(est[i]);
                err_z += std::abs(z - double(truth[i]));
            }
        }
        rows.push_back({"mle-stirling", m, double(o.n_cap), n, err_s / o.runs, o.runs, o.seed});
        rows.push_back({"mle-zanella", m, double(o.n_cap), n, err_z / o.runs, o.runs, o.seed});
    }
    return rows;
}

inline csv_table bench_csv(const std::vector<bench_row> &rows)
{
    csv_table t;
    t.header = {"estimator", "M", "n_max", "true_N", "mean_abs_error", "runs", "seed"};
    for (const auto &r : rows)
        t.add(r.estimator, r.resources, r.n_max, r.true_n, r.mean_abs_error, r.runs, r.seed);
    return t;
}

inline bench_options parse_bench(const json &j, std::uint64_t seed, int runs_override)
{
    const std::string p = "estimate_bench";
    cfg::allow_keys(j, p, {"resources", "n_max", "users", "runs", "n_cap"});
    bench_options o;
    o.resources = cfg::get<std::size_t>(j, p, "resources", 18);
    if (j.contains("n_max"))
        o.ceilings = cfg::list<double>(j.at("n_max"), p + ".n_max");
    o.users = j.contains("users") ? cfg::grid(j.at("users"), p + ".users") : cfg::grid(json{{"from", 1}, {"to", 1000}}, p);
    o.runs = runs_override > 0 ? runs_override : cfg::get<int>(j, p, "runs", 1000);
    o.n_cap = cfg::get<int>(j, p, "n_cap", 100);
    o.seed = seed;
    if (o.resources < 2 || o.runs < 1 || o.n_cap < 1)
        throw config_error(p + ": resources >= 2, runs >= 1 and n_cap >= 1 required");
    return o;
}

// ---------------------------------------------------------------------------
// Analysis sweeps
// ---------------------------------------------------------------------------

/// Monte Carlo fraction of collided resources with Poisson(mean) users.
inline double simulate_pc(double mean, const selection_profile &profile, long samples, std::uint64_t seed)
{
    std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(profile.size()),
                      std::uint32_t(std::llround(mean * 1000.0))};
    rng_type rng(seq);
    std::poisson_distribution<int> users(mean);
    long collided = 0;
    for (long s = 0; s < samples; ++s) {
        const auto counts = place_users(users(rng), profile.probabilities(), rng);
        for (int c : counts)
            collided += c >= 2;
    }
    return double(collided) / (double(samples) * double(profile.size()));
}

struct pc_row {
    std::size_t m_ac = 0;
    double mean_users = 0;
    double analytic = std::nan("");
    double simulated = 0;
    long samples = 0;
};

inline std::vector<pc_row> pc_sweep(const std::vector<int> &m_ac, const std::vector<double> &means, double p0,
                                    long samples, std::uint64_t seed, const analytics_guard &guard)
{
    std::vector<pc_row> rows;
    for (int m : m_ac)
        for (double mean : means) {
            const auto prof = selection_profile::power(p0, std::size_t(m));
            pc_row r{std::size_t(m), mean, std::nan(""), simulate_pc(mean, prof, samples, seed), samples};
            try {
                r.analytic = poisson_adjusted_pc(mean, prof, guard);
            } catch (const config_error &) {
                // Outside the size guard: simulation only.
            }
            rows.push_back(r);
        }
    return rows;
}

struct raq_row {
    std::size_t m_ac = 0;
    std::size_t m_rc = 0;
    int delay = 0;
    double reliability = 0;
    double mean_users = 0;
    double pc_alpha = std::nan("");
    double expected_mp = std::nan("");
    int servers = -1;
    double p_r = std::nan("");
    erlang_variant variant = erlang_variant::from_one;
    double p_r_sim = std::nan("");
    double p_r_sim_half_width = std::nan("");
};

struct raq_sweep_options {
    std::vector<std::pair<std::size_t, std::size_t>> points;  // (M_AC, M_RC)
    int delay = 20;
    double reliability = 0.95;
    double mean_users = 30;
    double p0 = 0.05;
    erlang_variant variant = erlang_variant::from_one;
    analytics_guard guard{10, 80};
    std::shared_ptr<const parallelization_lut> lut;
    /// Simulation of the admission rejection ratio (0 runs disables it).
    int sim_runs = 0;
    long sim_slots = 2000;
    long sim_warmup = 200;
    estimator_mode estimator = estimator_mode::ccp;
    std::uint64_t seed = 1;
};

inline std::vector<raq_row> raq_sweep(const raq_sweep_options &o)
{
    if (!o.lut)
        throw config_error("analyze.lut: required for the blocking sweep");
    std::vector<raq_row> rows;
    for (auto [m_ac, m_rc] : o.points) {
        raq_row r;
        r.m_ac = m_ac;
        r.m_rc = m_rc;
        r.delay = o.delay;
        r.reliability = o.reliability;
        r.mean_users = o.mean_users;
        r.variant = o.variant;
        const auto prof = selection_profile::power(o.p0, m_ac);
        try {
            const auto mix = poisson_mixture(o.mean_users, prof, o.guard);
            r.pc_alpha = mix.collision_probability();
            r.expected_mp = expected_parallelization(*o.lut, mix, o.delay, o.reliability);
            const auto raq = raq_blocking(o.delay, double(m_ac), m_rc, r.expected_mp, o.variant);
            r.servers = raq.servers;
            r.p_r = raq.blocking;
        } catch (const config_error &) {
            // Outside the size guard (or no collisions): simulation only.
        }
        if (o.sim_runs > 0) {
            scenario sc;
            sc.protocol = scenario::kind::acdc;
            sc.classes.push_back({o.delay, o.reliability, m_ac, prof});
            sc.rc_frequencies = m_rc;
            sc.traffic = traffic_model::poisson(o.mean_users, {1});
            sc.lut = o.lut;
            sc.estimator = o.estimator;
            sc.slots = o.sim_slots;
            sc.warmup = o.sim_warmup;
            std::vector<double> v;
            for (int k = 0; k < o.sim_runs; ++k)
                v.push_back(run_scenario(sc, o.seed + std::uint64_t(k)).admission_rejection());
            const double mean = std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
            double ss = 0.0;
            for (double x : v)
                ss += (x - mean) * (x - mean);
            r.p_r_sim = mean;
            r.p_r_sim_half_width = v.size() > 1 ? 1.96 * std::sqrt(ss / double(v.size() - 1) / double(v.size())) : 0.0;
        }
        rows.push_back(r);
    }
    return rows;
}

inline csv_table raq_csv(const std::vector<raq_row> &rows)
{
    csv_table t;
    t.header = {"M_AC", "M_RC", "L", "R", "N_c", "p_c_alpha", "E_Mp", "M_G", "p_r", "variant", "p_r_sim", "p_r_sim_ci"};
    for (const auto &r : rows)
        t.add(r.m_ac, r.m_rc, r.delay, r.reliability, r.mean_users, r.pc_alpha, r.expected_mp,
              r.servers < 0 ? std::string("nan") : std::to_string(r.servers), r.p_r, std::string(to_string(r.variant)),
              r.p_r_sim, r.p_r_sim_half_width);
    return t;
}

inline csv_table pc_csv(const std::vector<pc_row> &rows)
{
    csv_table t;
    t.header = {"M_AC", "N_c", "p_c_alpha", "p_c_sim", "samples"};
    for (const auto &r : rows)
        t.add(r.m_ac, r.mean_users, r.analytic, r.simulated, r.samples);
    return t;
}

inline analytics_guard parse_guard(const json &j, const std::string &path, analytics_guard g)
{
    cfg::allow_keys(j, path, {"max_resources", "max_users"});
    g.max_resources = cfg::get<std::size_t>(j, path, "max_resources", g.max_resources);
    g.max_users = cfg::get<int>(j, path, "max_users", g.max_users);
    return g;
}

struct collision_sweep_options {
    std::vector<int> m_ac;
    std::vector<double> means{10, 20, 30, 40};
    double p0 = 0.05;
    long samples = 20000;
    analytics_guard guard;
};

inline collision_sweep_options parse_collision_sweep(const json &j)
{
    const std::string p = "analyze";
    cfg::allow_keys(j, p, {"kind", "m_ac", "n_c", "p0", "samples", "guard"});
    collision_sweep_options o;
    o.m_ac = j.contains("m_ac") ? cfg::grid(j.at("m_ac"), p + ".m_ac") : std::vector<int>{2, 3, 4, 5, 6, 7, 8, 9, 10};
    if (j.contains("n_c"))
        o.means = cfg::list<double>(j.at("n_c"), p + ".n_c");
    o.p0 = cfg::get<double>(j, p, "p0", o.p0);
    o.samples = cfg::get<long>(j, p, "samples", o.samples);
    if (j.contains("guard"))
        o.guard = parse_guard(j.at("guard"), p + ".guard", o.guard);
    for (int m : o.m_ac)
        if (m < 2)
            throw config_error(p + ".m_ac: every entry must be >= 2");
    if (o.samples < 1)
        throw config_error(p + ".samples: must be >= 1");
    return o;
}

/// Blocking sweeps: each entry fixes one channel and varies the other.
inline raq_sweep_options parse_blocking_sweep(const json &j, std::uint64_t seed, int runs_override,
                                              erlang_variant variant)
{
    const std::string p = "analyze";
    cfg::allow_keys(j, p, {"kind", "sweeps", "delay", "reliability", "n_c", "p0", "guard", "lut", "simulate"});
    raq_sweep_options o;
    o.delay = cfg::get<int>(j, p, "delay", o.delay);
    o.reliability = cfg::get<double>(j, p, "reliability", o.reliability);
    o.mean_users = cfg::get<double>(j, p, "n_c", o.mean_users);
    o.p0 = cfg::get<double>(j, p, "p0", o.p0);
    o.variant = variant;
    o.seed = seed;
    if (j.contains("guard"))
        o.guard = parse_guard(j.at("guard"), p + ".guard", o.guard);
    o.lut = load_lut(j.contains("lut") ? j.at("lut") : json{{"source", "table2"}}, p + ".lut");
    if (!j.contains("sweeps") || !j.at("sweeps").is_array())
        throw config_error(p + ".sweeps: expected an array");
    for (std::size_t i = 0; i < j.at("sweeps").size(); ++i) {
        const auto &s = j.at("sweeps")[i];
        const std::string sp = p + ".sweeps[" + std::to_string(i) + "]";
        cfg::allow_keys(s, sp, {"fix", "value", "vary"});
        const auto fix = cfg::need<std::string>(s, sp, "fix");
        const auto value = cfg::need<std::size_t>(s, sp, "value");
        if (!s.contains("vary"))
            throw config_error(sp + ".vary: required field missing");
        for (int v : cfg::grid(s.at("vary"), sp + ".vary")) {
            if (v < 1)
                throw config_error(sp + ".vary: entries must be >= 1");
            if (fix == "rc")
                o.points.emplace_back(std::size_t(v), value);
            else if (fix == "ac")
                o.points.emplace_back(value, std::size_t(v));
            else
                throw config_error(sp + ".fix: expected \"ac\" or \"rc\"");
        }
    }
    if (j.contains("simulate")) {
        const auto &s = j.at("simulate");
        const std::string sp = p + ".simulate";
        cfg::allow_keys(s, sp, {"runs", "slots", "warmup", "estimator"});
        o.sim_runs = runs_override > 0 ? runs_override : cfg::get<int>(s, sp, "runs", 1);
        o.sim_slots = cfg::get<long>(s, sp, "slots", o.sim_slots);
        o.sim_warmup = cfg::get<long>(s, sp, "warmup", o.sim_warmup);
        const auto est = cfg::get<std::string>(s, sp, "estimator", "ccp");
        if (est != "ccp" && est != "exact")
            throw config_error(sp + ".estimator: expected \"ccp\" or \"exact\"");
        o.estimator = est == "ccp" ? estimator_mode::ccp : estimator_mode::exact;
    }
    return o;
}

// ---------------------------------------------------------------------------
// Paired-seed protocol comparison
// ---------------------------------------------------------------------------

struct compare_variant {
    std::string label;
    scenario::kind protocol = scenario::kind::acdc;
    int max_wait = 0;
};

struct compare_options {
    /// "delay": every class gets the value as L. "users": the high class gets
    /// the value, every other class low_fraction of it.
    std::string sweep = "delay";
    std::vector<int> values;
    std::size_t high_class = 1;
    double low_fraction = 0.1;
    std::vector<compare_variant> variants;
};

struct compare_row {
    std::string variant;
    std::string sweep;
    int value = 0;
    int cls = 0;
    long population = 0;
    metric_summary drop_reject;
    metric_summary drop;
    metric_summary reject;
    metric_summary success;
    int runs = 0;
    std::string config_hash;
};

inline compare_options parse_compare(const json &j)
{
    const std::string p = "compare";
    cfg::allow_keys(j, p, {"sweep", "values", "high_class", "low_fraction", "variants"});
    compare_options o;
    o.sweep = cfg::get<std::string>(j, p, "sweep", "delay");
    if (o.sweep != "delay" && o.sweep != "users")
        throw config_error(p + ".sweep: expected \"delay\" or \"users\"");
    if (!j.contains("values"))
        throw config_error(p + ".values: required field missing");
    o.values = cfg::grid(j.at("values"), p + ".values");
    o.high_class = cfg::get<std::size_t>(j, p, "high_class", 1);
    o.low_fraction = cfg::get<double>(j, p, "low_fraction", 0.1);
    if (!j.contains("variants") || !j.at("variants").is_array() || j.at("variants").empty())
        throw config_error(p + ".variants: expected a non-empty array");
    for (std::size_t i = 0; i < j.at("variants").size(); ++i) {
        const auto &v = j.at("variants")[i];
        const std::string vp = p + ".variants[" + std::to_string(i) + "]";
        cfg::allow_keys(v, vp, {"label", "protocol", "max_wait"});
        compare_variant cv;
        const auto proto = cfg::need<std::string>(v, vp, "protocol");
        if (proto != "acdc" && proto != "dab")
            throw config_error(vp + ".protocol: expected \"acdc\" or \"dab\"");
        cv.protocol = proto == "acdc" ? scenario::kind::acdc : scenario::kind::dab;
        cv.label = cfg::get<std::string>(v, vp, "label", proto);
        cv.max_wait = cfg::get<int>(v, vp, "max_wait", 0);
        if (cv.max_wait < 0)
            throw config_error(vp + ".max_wait: must be >= 0");
        o.variants.push_back(cv);
    }
    return o;
}

/// Every variant sees the same seeds, hence the same arrivals.
inline std::vector<compare_row> compare(const scenario &base, const compare_options &o, std::uint64_t seed, int runs,
                                        const std::string &hash)
{
    std::vector<compare_row> rows;
    for (int value : o.values) {
        scenario sc = base;
        if (o.sweep == "delay") {
            for (auto &c : sc.classes)
                c.delay = value;
        } else {
            if (o.high_class < 1 || o.high_class > sc.classes.size())
                throw config_error("compare.high_class: no such class");
            for (std::size_t c = 0; c < sc.classes.size(); ++c)
                sc.traffic.populations[c] =
                    c + 1 == o.high_class ? long(value) : std::lround(double(value) * o.low_fraction);
        }
        for (const auto &v : o.variants) {
            scenario vs = sc;
            vs.protocol = v.protocol;
            vs.max_wait = v.max_wait;
            if (vs.protocol == scenario::kind::acdc && !vs.lut)
                throw config_error("scenario.lut: required for acdc variants");
            const auto agg = aggregate(run_many(vs, seed, runs, hash));
            for (std::size_t c = 0; c < vs.classes.size(); ++c) {
                const std::string p = "class" + std::to_string(c + 1) + ".";
                compare_row r;
                r.variant = v.label;
                r.sweep = o.sweep;
                r.value = value;
                r.cls = int(c + 1);
                r.population = vs.traffic.populations[c];
                r.drop_reject = agg.at(p + "drop_reject_ratio");
                r.drop = agg.at(p + "drop_ratio");
                r.reject = agg.at(p + "reject_ratio");
                r.success = agg.at(p + "success_ratio");
                r.runs = runs;
                r.config_hash = hash;
                rows.push_back(r);
            }
        }
    }
    return rows;
}

inline csv_table compare_csv(const std::vector<compare_row> &rows)
{
    csv_table t;
    t.header = {"variant", "sweep", "value", "class", "population", "drop_reject_ratio", "drop_reject_ci",
                "drop_ratio", "reject_ratio", "success_ratio", "runs", "config_hash"};
    for (const auto &r : rows)
        t.add(r.variant, r.sweep, r.value, r.cls, r.population, r.drop_reject.mean, r.drop_reject.half_width,
              r.drop.mean, r.reject.mean, r.success.mean, r.runs, r.config_hash);
    return t;
}

} // namespace acdc

#endif // ACDC_HARNESS_HPP
