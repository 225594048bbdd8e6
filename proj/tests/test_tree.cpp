#include <acdc/tree.hpp>

#include <gtest/gtest.h>

#include <set>

using namespace acdc;

namespace {

std::vector<user_id> ids(int n)
{
    std::vector<user_id> v(n);
    for (int i = 0; i < n; ++i)
        v[i] = user_id(100 + i);
    return v;
}

} // namespace

TEST(ResolutionJob, SingletonResolvesWithoutSplit)
{
    rng_type rng(1);
    resolution_job job(0, {42}, 1, 0, 10);
    EXPECT_TRUE(job.frontier().empty());
    const auto r = job.step(rng);
    EXPECT_EQ(r, std::vector<user_id>{42});
    EXPECT_TRUE(job.complete());
    EXPECT_EQ(job.slots_used(), 1);
}

TEST(ResolutionJob, RejectsBadArguments)
{
    EXPECT_THROW(resolution_job(0, {1, 2}, 0, 0, 5), config_error);
    EXPECT_THROW(resolution_job(0, {}, 1, 0, 5), config_error);
}

TEST(ResolutionJob, TwoUsersResolveInOneSlotHalfTheTime)
{
    rng_type rng(2);
    const int trials = 40000;
    for (int m_p : {1, 2}) {
        int one = 0;
        for (int t = 0; t < trials; ++t) {
            resolution_job job(0, ids(2), m_p, 0, 10);
            job.step(rng);
            one += job.complete();
        }
        EXPECT_NEAR(double(one) / trials, 0.5, 0.01) << "m_p = " << m_p;
    }
}

TEST(ResolutionJob, TwoUserCompletionIsGeometric)
{
    // Each split separates the pair with probability 1/2, otherwise the pair
    // reappears as a single node: P(T = k) = 2^-k.
    rng_type rng(3);
    const int trials = 100000;
    std::vector<int> hist(8, 0);
    for (int t = 0; t < trials; ++t) {
        const int s = run_to_completion(2, 1, rng);
        if (s < 8)
            ++hist[s];
    }
    for (int k = 1; k < 6; ++k)
        EXPECT_NEAR(double(hist[k]) / trials, std::ldexp(1.0, -k), 0.005) << "k = " << k;
}

TEST(ResolutionJob, ConservesUsersEverySlot)
{
    rng_type rng(4);
    for (int n : {2, 5, 17, 40}) {
        for (int m_p : {1, 3, 8}) {
            const auto users = ids(n);
            resolution_job job(0, users, m_p, 0, 1000);
            std::multiset<user_id> resolved;
            while (!job.complete()) {
                for (auto u : job.step(rng))
                    resolved.insert(u);
                std::multiset<user_id> all(resolved);
                for (auto u : job.unresolved())
                    all.insert(u);
                ASSERT_EQ(all, std::multiset<user_id>(users.begin(), users.end()));
            }
            EXPECT_EQ(job.resolved_count(), std::size_t(n));
        }
    }
}

TEST(ResolutionJob, NeverExceedsParallelization)
{
    rng_type rng(5);
    for (int m_p : {1, 2, 4}) {
        resolution_job job(0, ids(30), m_p, 0, 1000);
        while (!job.complete())
            job.step(rng);
        for (const auto &levels : job.level_log())
            EXPECT_LE(levels.size(), std::size_t(m_p));
    }
}

TEST(ResolutionJob, BreadthFirstOrder)
{
    rng_type rng(6);
    for (int trial = 0; trial < 200; ++trial) {
        resolution_job job(0, ids(25), 3, 0, 1000);
        while (!job.complete())
            job.step(rng);
        int last = 0;
        for (const auto &levels : job.level_log())
            for (int l : levels) {
                EXPECT_GE(l, last);
                last = l;
            }
    }
}

TEST(ResolutionJob, WideAllocationExploresOneLevelPerSlot)
{
    rng_type rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        resolution_job job(0, ids(8), 64, 0, 1000);
        while (!job.complete())
            job.step(rng);
        const auto &log = job.level_log();
        for (std::size_t s = 0; s < log.size(); ++s)
            for (int l : log[s])
                EXPECT_EQ(l, int(s));
    }
}

TEST(SimulateTree, MatchesJobStepping)
{
    // Same model through two code paths: compare completion-time means.
    rng_type a(8), b(9);
    const int trials = 20000;
    for (int n : {3, 10}) {
        double job_mean = 0.0, count_mean = 0.0;
        for (int t = 0; t < trials; ++t) {
            resolution_job job(0, ids(n), 2, 0, 1000);
            while (!job.complete())
                job.step(a);
            job_mean += job.slots_used();
            count_mean += run_to_completion(n, 2, b);
        }
        EXPECT_NEAR(job_mean / trials, count_mean / trials, 0.05) << "n = " << n;
    }
}

TEST(SimulateTree, MoreParallelismNeverSlower)
{
    double prev = 1e9;
    for (int m_p : {1, 2, 4, 8}) {
        rng_type rng(10);
        double mean = 0.0;
        for (int t = 0; t < 5000; ++t)
            mean += run_to_completion(20, m_p, rng);
        mean /= 5000;
        EXPECT_LE(mean, prev + 0.05);
        prev = mean;
    }
}

TEST(SimulateTree, Preconditions)
{
    rng_type rng(11);
    EXPECT_THROW(run_to_completion(1, 1, rng), config_error);
    EXPECT_THROW(run_to_completion(5, 0, rng), config_error);
}
