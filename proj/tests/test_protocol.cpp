#include <acdc/protocol.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <memory>

using namespace acdc;

namespace {

std::shared_ptr<const parallelization_lut> bundled() { return std::make_shared<parallelization_lut>(table2()); }

class_spec make_class(int delay, std::size_t ac)
{
    class_spec c;
    c.delay = delay;
    c.reliability = 0.95;
    c.ac_resources = ac;
    c.profile = ac == 1 ? selection_profile::uniform(1) : selection_profile::power(0.05, ac);
    return c;
}

scenario two_class(traffic_model traffic)
{
    scenario sc;
    sc.classes = {make_class(10, 4), make_class(20, 4)};
    sc.rc_frequencies = 12;
    sc.traffic = std::move(traffic);
    sc.lut = bundled();
    sc.pessimism_runs = 300;
    sc.slots = 1500;
    sc.warmup = 200;
    return sc;
}

void expect_accounting(const metrics_report &r)
{
    for (std::size_t c = 0; c < r.classes.size(); ++c) {
        const auto &m = r.classes[c];
        EXPECT_EQ(m.activations, m.successes + m.drops + m.rejects + m.still_active) << "class " << c;
        EXPECT_LE(m.admitted_in_time, m.admitted_users);
        EXPECT_EQ(m.rejected_infeasible + m.rejected_capacity <= m.requests, true);
        EXPECT_GE(m.drop_reject_ratio(), 0.0);
        EXPECT_LE(m.drop_reject_ratio(), 1.0);
    }
}

} // namespace

TEST(Transitions, Table)
{
    using s = packet_state;
    EXPECT_TRUE(legal_transition(s::off, s::tx));
    EXPECT_TRUE(legal_transition(s::tx, s::suc));
    EXPECT_TRUE(legal_transition(s::tx, s::a_r));
    EXPECT_TRUE(legal_transition(s::a_r, s::fail));
    EXPECT_TRUE(legal_transition(s::a_r, s::resolving));
    EXPECT_TRUE(legal_transition(s::resolving, s::suc));
    EXPECT_TRUE(legal_transition(s::resolving, s::fail));
    EXPECT_TRUE(legal_transition(s::suc, s::off));
    EXPECT_FALSE(legal_transition(s::off, s::suc));
    EXPECT_FALSE(legal_transition(s::tx, s::fail));
    EXPECT_FALSE(legal_transition(s::fail, s::suc));
    EXPECT_FALSE(legal_transition(s::suc, s::resolving));
}

TEST(Acdc, LoneUserSucceedsWithoutResolution)
{
    scenario sc;
    sc.classes = {make_class(10, 4)};
    sc.traffic = traffic_model::beta_burst(10, {1});
    sc.lut = bundled();
    sc.pessimism_runs = 100;
    const auto r = run_scenario(sc, 3);
    EXPECT_EQ(r.classes[0].activations, 1);
    EXPECT_EQ(r.classes[0].successes, 1);
    EXPECT_EQ(r.requests, 0);
    EXPECT_EQ(r.collisions, 0);
    EXPECT_DOUBLE_EQ(r.classes[0].mean_delay(), 0.0);
}

TEST(Acdc, AccountingIdentityHolds)
{
    for (auto est : {estimator_mode::ccp, estimator_mode::exact})
        for (int wait : {0, 3}) {
            auto sc = two_class(traffic_model::beta_burst(100, {300, 600}));
            sc.estimator = est;
            sc.max_wait = wait;
            expect_accounting(run_scenario(sc, 11));

            auto open = two_class(traffic_model::poisson(6.0, {1, 1}));
            open.estimator = est;
            open.max_wait = wait;
            const auto r = run_scenario(open, 12);
            expect_accounting(r);
            EXPECT_EQ(r.slots, open.slots);
            for (const auto &m : r.classes)
                EXPECT_EQ(m.still_active, 0);
        }
}

TEST(Acdc, ZeroArrivalsGiveZeroMetrics)
{
    auto sc = two_class(traffic_model::poisson(0.0, {1, 1}));
    const auto r = run_scenario(sc, 1);
    for (const auto &m : r.classes) {
        EXPECT_EQ(m.activations, 0);
        EXPECT_EQ(m.drop_reject_ratio(), 0.0);
        EXPECT_EQ(m.in_time_ratio(), 0.0);
    }
    EXPECT_EQ(r.collisions, 0);
    EXPECT_EQ(r.admission_rejection(), 0.0);
}

TEST(Acdc, DeterministicPerSeed)
{
    auto sc = two_class(traffic_model::beta_burst(100, {400, 400}));
    sc.admission_log = true;
    const auto a = run_scenario(sc, 5), b = run_scenario(sc, 5), c = run_scenario(sc, 6);
    EXPECT_EQ(a.collisions_per_slot, b.collisions_per_slot);
    EXPECT_EQ(a.admission_log.size(), b.admission_log.size());
    for (std::size_t i = 0; i < a.classes.size(); ++i) {
        EXPECT_EQ(a.classes[i].successes, b.classes[i].successes);
        EXPECT_EQ(a.classes[i].delay_sum, b.classes[i].delay_sum);
    }
    EXPECT_NE(a.collisions_per_slot, c.collisions_per_slot);
}

TEST(Acdc, SecondCollisionRejectedWhenResolutionChannelFull)
{
    const auto lut = bundled();
    const int need = lut->query(10, 0.95, 2);
    ASSERT_GE(need, 1);
    scenario sc;
    sc.classes = {make_class(10, 1), make_class(10, 1)};
    sc.rc_frequencies = std::size_t(need);
    sc.traffic = traffic_model::poisson(0.0, {1, 1});
    sc.lut = lut;
    sc.estimator = estimator_mode::exact;
    sc.admission_log = true;
    acdc_world w(sc, rng_type(9));
    w.slot(0, {{0, 1}, {2, 3}}, true);
    const auto &m = w.metrics();
    EXPECT_EQ(m.requests, 2);
    EXPECT_EQ(m.classes[0].admitted_users, 2);
    EXPECT_EQ(m.classes[1].rejected_capacity, 1);
    EXPECT_EQ(m.classes[1].rejects, 2);
    ASSERT_EQ(m.admission_log.size(), 2u);
    EXPECT_EQ(m.admission_log[1].free_before, 0u);
}

TEST(Acdc, ProfileSizeMustMatch)
{
    scenario sc;
    sc.classes = {make_class(10, 4)};
    sc.classes[0].profile = selection_profile::uniform(3);
    sc.traffic = traffic_model::poisson(1.0, {1});
    sc.lut = bundled();
    EXPECT_THROW(run_scenario(sc, 1), config_error);
    sc.classes[0].profile = selection_profile::uniform(4);
    sc.lut.reset();
    EXPECT_THROW(run_scenario(sc, 1), config_error);
}

TEST(Dab, BarringStaysOpenBelowResourceCount)
{
    auto sc = two_class(traffic_model::poisson(0.0, {1, 1}));
    sc.protocol = scenario::kind::dab;
    dab_world w(sc, rng_type(1));
    EXPECT_EQ(w.resources(), 20u);
    EXPECT_DOUBLE_EQ(w.control().barring_factor, 1.0);
    w.slot(0, {{0, 1, 2}, {}}, true);
    EXPECT_LE(w.control().backlog_estimate, 20.0);
    EXPECT_DOUBLE_EQ(w.control().barring_factor, 1.0);
}

TEST(Dab, OnlyHighestPendingClassTransmits)
{
    auto sc = two_class(traffic_model::poisson(0.0, {1, 1}));
    sc.protocol = scenario::kind::dab;
    sc.classes[0].delay = 1000;
    sc.classes[1].delay = 1000;
    dab_world w(sc, rng_type(2));
    std::vector<user_id> hi, lo;
    for (user_id u = 0; u < 200; ++u)
        (u % 2 ? lo : hi).push_back(u);
    w.slot(0, {hi, lo}, true);
    EXPECT_EQ(w.permitted_class(), 0u);
    EXPECT_EQ(w.transmit_probability(1), 0.0);
    EXPECT_EQ(w.metrics().classes[1].successes, 0);
    while (w.pending(0) > 0)
        w.slot(1, {}, true);
    EXPECT_EQ(w.permitted_class(), 1u);
    EXPECT_GT(w.transmit_probability(1), 0.0);
}

TEST(Dab, SaturatedThroughputNearAlohaOptimum)
{
    // With a correct backlog the barred slotted ALOHA approaches M/e successes per slot.
    scenario sc;
    sc.protocol = scenario::kind::dab;
    sc.classes = {make_class(100000, 10)};
    sc.rc_frequencies = 0;
    sc.traffic = traffic_model::poisson(0.0, {1});
    dab_world w(sc, rng_type(4));
    std::vector<user_id> burst(5000);
    for (user_id u = 0; u < burst.size(); ++u)
        burst[u] = u;
    w.slot(0, {burst}, true);
    for (std::int64_t t = 1; t < 100; ++t)
        w.slot(t, {}, true);
    const long before = w.metrics().classes[0].successes;
    const int measured = 600;
    for (std::int64_t t = 100; t < 100 + measured; ++t)
        w.slot(t, {}, true);
    const double rate = double(w.metrics().classes[0].successes - before) / measured;
    EXPECT_NEAR(rate, 10.0 / std::exp(1.0), 0.1 * 10.0 / std::exp(1.0));
}

TEST(Paired, TrafficIdenticalAcrossProtocols)
{
    auto sc = two_class(traffic_model::beta_burst(100, {500, 700}));
    const auto a = run_scenario(sc, 17);
    sc.protocol = scenario::kind::dab;
    const auto d = run_scenario(sc, 17);
    sc.protocol = scenario::kind::acdc;
    sc.max_wait = 4;
    const auto b = run_scenario(sc, 17);
    EXPECT_EQ(a.classes[0].activations, 500);
    EXPECT_EQ(a.classes[1].activations, 700);
    for (std::size_t c = 0; c < 2; ++c) {
        EXPECT_EQ(a.classes[c].activations, d.classes[c].activations);
        EXPECT_EQ(a.classes[c].activations, b.classes[c].activations);
    }
    expect_accounting(d);
}
