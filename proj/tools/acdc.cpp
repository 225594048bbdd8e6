// Command line front end: estimator benchmark, LUT build/verify, analysis
// sweeps, single scenarios and paired protocol comparisons.

#include <acdc/harness.hpp>

#include "CLI11.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace acdc;

namespace {

struct common_flags {
    std::string config;
    std::uint64_t seed = 0;
    bool seed_given = false;
    int runs = 0;
    std::string out = "out";
    std::string erlang = "paper";
    bool wall_time = false;
};

void add_common(CLI::App *app, common_flags &f)
{
    app->add_option("--config", f.config, "Experiment config (JSON)");
    app->add_option("--seed", f.seed, "Base seed (overrides the config)")->each([&](const std::string &) {
        f.seed_given = true;
    });
    app->add_option("--runs", f.runs, "Runs per point (overrides the config)");
    app->add_option("--out", f.out, "Output directory");
    app->add_flag("--record-wall-time", f.wall_time, "Store wall time in report metadata");
}

experiment_config load(const common_flags &f)
{
    experiment_config e = f.config.empty() ? parse_experiment(json::object()) : load_experiment(f.config);
    if (f.seed_given)
        e.seed = f.seed;
    if (f.runs > 0)
        e.runs = f.runs;
    return e;
}

fs::path out_dir(const common_flags &f)
{
    fs::path p(f.out);
    fs::create_directories(p);
    return p;
}

void write_json(const fs::path &path, const json &j)
{
    std::ofstream out(path);
    if (!out)
        throw config_error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

int cmd_bench(const common_flags &f)
{
    const auto e = load(f);
    const auto opt = parse_bench(e.has("estimate_bench") ? e.section("estimate_bench") : json::object(), e.seed,
                                 f.runs);
    const auto rows = estimator_bench(opt);
    const auto path = out_dir(f) / "estimate_bench.csv";
    bench_csv(rows).save(path.string());
    std::cout << "wrote " << path.string() << " (" << rows.size() << " rows)\n";
    return 0;
}

int cmd_lut(const common_flags &f, bool verify, const std::string &convention, int m_p_max)
{
    const auto dir = out_dir(f);
    if (verify) {
        const auto conv = convention == "root-slot-included" ? delay_convention::root_slot_included
                                                             : delay_convention::rc_slots_from_admission;
        if (convention != "root-slot-included" && convention != "rc-slots-from-admission")
            throw config_error("--convention: expected rc-slots-from-admission or root-slot-included");
        const long runs = f.runs > 0 ? f.runs : 20000;
        const std::uint64_t seed = f.seed_given ? f.seed : 1;
        const auto v = verify_table2(runs, seed, conv, m_p_max);
        csv_table t;
        t.header = {"N", "L", "table", "monte_carlo", "ok", "convention", "runs", "seed"};
        for (const auto &c : v.cells)
            t.add(c.n, c.delay, c.table, c.simulated, c.ok ? 1 : 0, std::string(to_string(conv)), runs, seed);
        const auto path = dir / "table2_verify.csv";
        t.save(path.string());
        for (const auto &c : v.cells)
            if (!c.ok)
                std::cout << "mismatch N=" << c.n << " L=" << c.delay << ": table " << c.table << ", monte carlo "
                          << c.simulated << '\n';
        std::cout << "table verification (" << to_string(conv) << "): " << v.cells.size() - v.failures() << "/"
                  << v.cells.size() << " cells agree; wrote " << path.string() << '\n';
        return v.passed() ? 0 : 3;
    }
    parallelization_lut lut;
    if (f.config.empty()) {
        lut = table2();
    } else {
        const auto e = load(f);
        lut = *load_lut(e.section("lut"), "lut");
    }
    const auto path = dir / "lut.csv";
    std::ofstream out(path);
    lut.write_csv(out);
    std::cout << "wrote " << path.string() << '\n';
    return 0;
}

int cmd_analyze(const common_flags &f)
{
    const auto e = load(f);
    const auto &a = e.section("analyze");
    const auto kind = cfg::need<std::string>(a, "analyze", "kind");
    const auto dir = out_dir(f);
    if (f.erlang != "paper" && f.erlang != "standard")
        throw config_error("--erlang-variant: expected paper or standard");
    const auto variant = f.erlang == "paper" ? erlang_variant::from_one : erlang_variant::standard;
    if (kind == "collision") {
        const auto o = parse_collision_sweep(a);
        const auto rows = pc_sweep(o.m_ac, o.means, o.p0, o.samples, e.seed, o.guard);
        const auto path = dir / "collision_sweep.csv";
        pc_csv(rows).save(path.string());
        std::cout << "wrote " << path.string() << '\n';
        return 0;
    }
    if (kind == "blocking") {
        const auto o = parse_blocking_sweep(a, e.seed, f.runs, variant);
        const auto rows = raq_sweep(o);
        const auto path = dir / "blocking_sweep.csv";
        raq_csv(rows).save(path.string());
        std::cout << "wrote " << path.string() << '\n';
        return 0;
    }
    throw config_error("analyze.kind: expected \"collision\" or \"blocking\"");
}

int cmd_simulate(const common_flags &f)
{
    const auto e = load(f);
    const auto sc = parse_scenario(e.section("scenario"));
    const auto hash = e.hash();
    const auto dir = out_dir(f);
    const auto start = std::chrono::steady_clock::now();
    auto reports = run_many(sc, e.seed, e.runs, hash);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    for (auto &r : reports) {
        if (f.wall_time)
            r.metadata["wall_time_s"] = cfg::format(wall / double(reports.size()));
        const auto seed = r.metadata.at("seed");
        write_json(dir / ("report_seed" + seed + ".json"), to_json(r));
        if (!r.admission_log.empty()) {
            std::ofstream log(dir / ("admission_seed" + seed + ".csv"));
            write_admission_log(log, r.admission_log);
        }
        csv_table slots;
        slots.header = {"slot", "collisions"};
        for (std::size_t s = 0; s < r.collisions_per_slot.size(); ++s)
            slots.add(s, r.collisions_per_slot[s]);
        slots.save((dir / ("collisions_seed" + seed + ".csv")).string());
    }
    auto agg = to_json(aggregate(reports));
    agg["name"] = e.name;
    write_json(dir / "aggregate.json", agg);
    for (const auto &[k, s] : aggregate(reports).metrics)
        if (k.find("drop_reject_ratio") != std::string::npos || k == "admission_rejection")
            std::cout << k << " = " << cfg::format(s.mean) << " +/- " << cfg::format(s.half_width) << '\n';
    std::cout << "wrote " << reports.size() << " report(s) to " << dir.string() << '\n';
    return 0;
}

int cmd_compare(const common_flags &f)
{
    const auto e = load(f);
    const auto sc = parse_scenario(e.section("scenario"));
    const auto opt = parse_compare(e.section("compare"));
    const auto rows = compare(sc, opt, e.seed, e.runs, e.hash());
    const auto path = out_dir(f) / "compare.csv";
    compare_csv(rows).save(path.string());
    std::cout << "wrote " << path.string() << " (" << rows.size() << " rows)\n";
    return 0;
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"AC/DC-RA random access simulator and dimensioning toolkit"};
    app.require_subcommand(1);
    common_flags f;

    auto *bench = app.add_subcommand("estimate-bench", "Estimator error sweep (CSV)");
    add_common(bench, f);

    auto *lut = app.add_subcommand("lut", "Build a parallelization table or verify the bundled one");
    add_common(lut, f);
    bool verify = false;
    std::string convention = "rc-slots-from-admission";
    int m_p_max = 64;
    lut->add_flag("--verify-table2", verify, "Rebuild the bundled table by Monte Carlo and compare");
    lut->add_option("--convention", convention, "Delay convention: rc-slots-from-admission or root-slot-included");
    lut->add_option("--m-p-max", m_p_max, "Largest parallelization tried during verification");

    auto *analyze = app.add_subcommand("analyze", "Analytic sweeps (collision probability, blocking)");
    add_common(analyze, f);
    analyze->add_option("--erlang-variant", f.erlang, "Blocking formula: paper (denominator from o = 1) or standard (Erlang B)");

    auto *simulate = app.add_subcommand("simulate", "Run one scenario and emit reports");
    add_common(simulate, f);

    auto *cmp = app.add_subcommand("compare", "Paired-seed protocol comparison sweep");
    add_common(cmp, f);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        return app.exit(e);
    }

    try {
        if (*bench)
            return cmd_bench(f);
        if (*lut)
            return cmd_lut(f, verify, convention, m_p_max);
        if (*analyze)
            return cmd_analyze(f);
        if (*simulate)
            return cmd_simulate(f);
        if (*cmp)
            return cmd_compare(f);
    } catch (const config_error &e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
