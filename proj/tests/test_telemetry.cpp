#include <gtest/gtest.h>

#include <random>
#include <thread>
#include <vector>

#include "biokm/telemetry.hpp"
#include "oracles/reference_values.hpp"

using namespace biokm;
using namespace biokm::telemetry;

TEST(ByteSize, ReferenceRuns) {
    for (const auto& r : reference::kRuns) {
        EXPECT_NEAR(byte_size(r.bytes_received, r.total_time_ms), r.byte_size, reference::kRateTol) << r.label;
    }
    EXPECT_EQ(byte_size(0, 1234), 0.0);
}

TEST(Capacity, ReferenceRuns) {
    for (const auto& r : reference::kRuns) {
        EXPECT_NEAR(capacity(r.bytes_received, r.service_time_ms), r.capacity, reference::kRateTol) << r.label;
    }
    EXPECT_EQ(capacity(0, 1234), 0.0);
}

TEST(Rates, ReferenceRuns) {
    for (const auto& r : reference::kRuns) {
        const auto lm = rates(r.packets_received, r.total_time_ms, r.service_time_ms);
        EXPECT_NEAR(lm.lambda, r.lambda, reference::kRateTol) << r.label;
        EXPECT_NEAR(lm.mu, r.mu, reference::kRateTol) << r.label;
    }
    const auto zero = rates(0, 10, 5);
    EXPECT_EQ(zero.lambda, 0.0);
    EXPECT_EQ(zero.mu, 0.0);
}

TEST(Durations, ZeroIsRejected) {
    EXPECT_THROW(byte_size(1, 0), Error);
    EXPECT_THROW(capacity(1, 0), Error);
    EXPECT_THROW(rates(1, 0, 1), Error);
    EXPECT_THROW(rates(1, 1, -3), Error);
    try {
        byte_size(1, 0);
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ZeroDuration);
    }
}

TEST(AggregateResponse, Examples) {
    const auto t5 = aggregate_response(reference::kAvgByteSize, reference::kAvgCapacity);
    EXPECT_NEAR(t5.q, reference::kAggregateResponse, 1e-9);
    EXPECT_NEAR(t5.idle, reference::kBioIdle, 1e-9);
    EXPECT_TRUE(t5.constraint_ok);

    EXPECT_NEAR(aggregate_response(420.3, 640.2).q, 0.6565, 5e-5);

    const auto over = aggregate_response(500, 400);
    EXPECT_DOUBLE_EQ(over.q, 1.25);
    EXPECT_FALSE(over.constraint_ok);

    try {
        aggregate_response(1, 0);
        ADD_FAILURE();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ZeroCapacity);
    }
}

TEST(AverageRuns, ReferenceAverages) {
    std::vector<RunMetrics> printed;
    for (const auto& r : reference::kRuns) {
        RunMetrics m;
        m.byte_size = r.byte_size;
        m.capacity = r.capacity;
        m.lambda = r.lambda;
        m.mu = r.mu;
        printed.push_back(m);
    }
    const auto avg = average_runs(printed);
    EXPECT_NEAR(avg.byte_size, reference::kAvgByteSize, 0.05);
    EXPECT_NEAR(avg.capacity, reference::kAvgCapacity, 0.05);
    EXPECT_NEAR(avg.lambda, reference::kLambda, 0.05);
    EXPECT_NEAR(avg.mu, reference::kMu, 0.05);
}

TEST(AverageRuns, SingleAndEmpty) {
    const auto one = derive_run("x", 100, 10, 2000, 1000);
    const auto avg = average_runs(std::vector<RunMetrics>{one});
    EXPECT_EQ(avg.label, "x");
    EXPECT_EQ(avg.byte_size, one.byte_size);
    EXPECT_EQ(avg.mu, one.mu);
    try {
        average_runs(std::vector<RunMetrics>{});
        ADD_FAILURE();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyInput);
    }
}

TEST(Identity, RatioOfRatesEqualsTimeRatio) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(1.0, 1e6);
    for (int k = 0; k < 1000; ++k) {
        const double tt = u(rng), ts = u(rng), p = std::floor(u(rng)), opl = std::floor(u(rng));
        const auto m = derive_run("r", opl, p, tt, ts);
        const double q = aggregate_response(m.byte_size, m.capacity).q;
        const double rho = m.lambda / m.mu;
        const double ratio = ts / tt;
        EXPECT_NEAR(q, ratio, 1e-12 * ratio);
        EXPECT_NEAR(rho, ratio, 1e-12 * ratio);
    }
}

TEST(Scaling, LinearInBytesInverseInTime) {
    EXPECT_NEAR(byte_size(2000, 1000), 2 * byte_size(1000, 1000), 1e-12);
    EXPECT_NEAR(byte_size(1000, 2000), byte_size(1000, 1000) / 2, 1e-12);
    EXPECT_NEAR(capacity(3000, 500), 3 * capacity(1000, 500), 1e-12);
}

TEST(LiveCounters, ConcurrentIncrementsAreExact) {
    LiveCounters c;
    std::vector<std::thread> ts;
    for (int t = 0; t < 8; ++t) {
        ts.emplace_back([&] {
            for (int k = 0; k < 10000; ++k) {
                c.record_received(3);
                c.record_sent(5);
            }
        });
    }
    for (auto& t : ts) t.join();
    const auto s = c.snapshot(10, 25);
    EXPECT_EQ(s.packets_received, 80000u);
    EXPECT_EQ(s.bytes_received, 240000u);
    EXPECT_EQ(s.packets_sent, 80000u);
    EXPECT_EQ(s.bytes_sent, 400000u);
    EXPECT_DOUBLE_EQ(s.service_time_ms(), 15.0);
    EXPECT_GE(s.bytes_sent, s.packets_sent);
}
