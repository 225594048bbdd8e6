#include <acdc/traffic.hpp>

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

using namespace acdc;

TEST(BetaBurst, EveryUserActivatesOnceInsideTheWindow)
{
    const auto m = traffic_model::beta_burst(100, {200, 2000});
    traffic_source src(m, 5);
    std::vector<long> per_class(2, 0);
    std::set<user_id> seen;
    for (std::int64_t t = 0; t < 150; ++t) {
        const auto a = src.arrivals(t);
        for (std::size_t c = 0; c < a.size(); ++c) {
            per_class[c] += long(a[c].size());
            for (auto u : a[c]) {
                EXPECT_TRUE(seen.insert(u).second);
                EXPECT_LT(t, 100);
            }
        }
    }
    EXPECT_EQ(per_class, (std::vector<long>{200, 2000}));
    EXPECT_TRUE(src.exhausted(100));
    EXPECT_FALSE(src.exhausted(99));
}

TEST(BetaBurst, HistogramPeaksAtTheBetaMode)
{
    const auto m = traffic_model::beta_burst(100, {100000});
    traffic_source src(m, 6);
    std::vector<long> hist(100, 0);
    for (std::int64_t t = 0; t < 100; ++t)
        hist[std::size_t(t)] = long(src.arrivals(t)[0].size());
    // Smooth over 5 slots before locating the peak.
    std::vector<double> smooth(100, 0.0);
    for (int t = 2; t < 98; ++t)
        for (int k = -2; k <= 2; ++k)
            smooth[std::size_t(t)] += double(hist[std::size_t(t + k)]);
    const auto peak = std::max_element(smooth.begin(), smooth.end()) - smooth.begin();
    const double mode = (3.0 - 1.0) / (3.0 + 4.0 - 2.0) * 100.0;
    EXPECT_NEAR(double(peak), mode, 5.0);
}

TEST(Poisson, MeanWithinThreeStandardErrors)
{
    const double rate = 3.7;
    traffic_source src(traffic_model::poisson(rate, {1, 3}), 7);
    const long slots = 100000;
    long total = 0, first = 0;
    for (long t = 0; t < slots; ++t) {
        const auto a = src.arrivals(t);
        first += long(a[0].size());
        total += long(a[0].size() + a[1].size());
    }
    const double se = std::sqrt(rate / double(slots));
    EXPECT_NEAR(double(total) / slots, rate, 3 * se);
    EXPECT_NEAR(double(first) / double(total), 0.25, 0.01);
}

TEST(Poisson, ZeroRateGivesNoArrivals)
{
    traffic_source src(traffic_model::poisson(0.0, {1}), 8);
    long total = 0;
    for (long t = 0; t < 10000; ++t)
        total += long(src.arrivals(t)[0].size());
    EXPECT_EQ(total, 0);
    EXPECT_TRUE(src.exhausted(0));
}

TEST(Poisson, TinyRateGivesAlmostNothing)
{
    traffic_source src(traffic_model::poisson(1e-6, {1}), 9);
    long total = 0;
    for (long t = 0; t < 10000; ++t)
        total += long(src.arrivals(t)[0].size());
    EXPECT_LE(total, 2);
}

TEST(TrafficModel, Validation)
{
    EXPECT_THROW(traffic_model::poisson(-1.0, {1}), config_error);
    EXPECT_THROW(traffic_model::beta_burst(0, {10}), config_error);
    EXPECT_THROW(traffic_model::beta_burst(100, {}), config_error);
    EXPECT_THROW(traffic_model::beta_burst(100, {-5}), config_error);
}

TEST(TrafficSource, SameSeedSameArrivals)
{
    const auto m = traffic_model::beta_burst(50, {300, 30});
    traffic_source a(m, 42), b(m, 42);
    for (std::int64_t t = 0; t < 50; ++t)
        EXPECT_EQ(a.arrivals(t), b.arrivals(t));
}
