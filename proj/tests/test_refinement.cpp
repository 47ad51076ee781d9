#include <algorithm>

#include <gtest/gtest.h>

#include "hyperscen/error.hpp"
#include "hyperscen/refinement.hpp"
#include "support.hpp"

using namespace hyperscen;
using namespace hyperscen::alloc;

namespace {

HardwareCapacity cores_only(std::int64_t p) {
    HardwareCapacity cap;
    cap.p_cores = p;
    return cap;
}

// Measured throughput grows 30 per P-core.
double linear_tps(std::size_t, const std::string&, const Allocation& a) { return 30.0 * static_cast<double>(a.c_p); }

bool meets_all(const RefinementScenario& sc, const std::vector<Allocation>& allocs) {
    const auto oracle = scenario_oracle(sc);
    return std::all_of(sc.thresholds.begin(), sc.thresholds.end(), [&](const QosThreshold& t) {
        return shortfall(t, oracle(t.vm, t.metric, allocs[t.vm])) <= 0.0;
    });
}

}  // namespace

TEST(Shortfall, SignConvention) {
    const QosThreshold tput{0, "tps", qos::MetricKind::Throughput, 100.0};
    EXPECT_DOUBLE_EQ(shortfall(tput, 80.0), 0.2);
    EXPECT_LE(shortfall(tput, 100.0), 0.0);
    EXPECT_LT(shortfall(tput, 120.0), 0.0);
    const QosThreshold lat{0, "p99", qos::MetricKind::Latency, 10.0};
    EXPECT_DOUBLE_EQ(shortfall(lat, 12.0), 0.2);
    EXPECT_LT(shortfall(lat, 8.0), 0.0);
}

TEST(RefineSearch, AlreadySatisfiedTakesNoTrial) {
    const std::vector<objective::VmSpec> specs{test::pcore_spec("a", 1, 6)};
    const std::vector<QosThreshold> th{{0, "tps", qos::MetricKind::Throughput, 60.0}};
    Allocation start;
    start.c_p = 2;
    const auto r = refine_search(specs, cores_only(6), board::default_quanta(cores_only(6)), {start}, th,
                                 linear_tps, 10);
    EXPECT_TRUE(r.satisfied);
    EXPECT_EQ(r.trials, 0u);
    EXPECT_EQ(r.final_allocations[0].c_p, 2);
}

TEST(RefineSearch, GrowsFromFreeCapacity) {
    const std::vector<objective::VmSpec> specs{test::pcore_spec("a", 1, 6)};
    const std::vector<QosThreshold> th{{0, "tps", qos::MetricKind::Throughput, 90.0}};
    Allocation start;
    start.c_p = 1;
    const auto r = refine_search(specs, cores_only(6), board::default_quanta(cores_only(6)), {start}, th,
                                 linear_tps, 10);
    EXPECT_TRUE(r.satisfied);
    EXPECT_EQ(r.trials, 2u);
    EXPECT_EQ(r.final_allocations[0].c_p, 3);
}

TEST(RefineSearch, TakesFromDonorWhenBoardIsFull) {
    const std::vector<objective::VmSpec> specs{test::pcore_spec("a", 1, 6), test::pcore_spec("b", 1, 6)};
    const std::vector<QosThreshold> th{{0, "tps", qos::MetricKind::Throughput, 90.0},
                                       {1, "tps", qos::MetricKind::Throughput, 30.0}};
    Allocation a, b;
    a.c_p = 1;
    b.c_p = 3;
    const auto r = refine_search(specs, cores_only(4), board::default_quanta(cores_only(4)), {a, b}, th,
                                 linear_tps, 10);
    EXPECT_TRUE(r.satisfied);
    EXPECT_EQ(r.final_allocations[0].c_p, 3);
    EXPECT_EQ(r.final_allocations[1].c_p, 1);
    EXPECT_TRUE(within_capacity(r.final_allocations, cores_only(4)));
}

TEST(RefineSearch, UnreachableStopsWithinBudget) {
    const std::vector<objective::VmSpec> specs{test::pcore_spec("a", 1, 6)};
    const std::vector<QosThreshold> th{{0, "tps", qos::MetricKind::Throughput, 1000.0}};
    Allocation start;
    start.c_p = 1;
    const auto r = refine_search(specs, cores_only(6), board::default_quanta(cores_only(6)), {start}, th,
                                 linear_tps, 3);
    EXPECT_FALSE(r.satisfied);
    EXPECT_LE(r.trials, 3u);
    EXPECT_TRUE(within_capacity(r.final_allocations, cores_only(6)));

    const auto all = refine_search(specs, cores_only(6), board::default_quanta(cores_only(6)), {start}, th,
                                   linear_tps, 100);
    EXPECT_FALSE(all.satisfied);
    EXPECT_EQ(all.final_allocations[0].c_p, 6);
}

TEST(RefineSearch, LengthMismatch) {
    const std::vector<objective::VmSpec> specs{test::pcore_spec("a", 1, 6)};
    const std::vector<QosThreshold> th;
    EXPECT_THROW(refine_search(specs, cores_only(6), board::default_quanta(cores_only(6)), {}, th, linear_tps, 3),
                 Error);
}

TEST(RefinementScenario, ReferenceMeetsThresholdsAndFits) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto sc = make_refinement_scenario(seed);
        EXPECT_EQ(sc.specs.size(), 3u);
        EXPECT_TRUE(within_capacity(sc.reference, sc.cap)) << seed;
        EXPECT_TRUE(meets_all(sc, sc.reference)) << seed;
        for (const auto& s : sc.specs) EXPECT_NO_THROW(s.validate());
    }
}

TEST(RefinementScenario, DeterministicPerSeed) {
    const auto a = make_refinement_scenario(7);
    const auto b = make_refinement_scenario(7);
    EXPECT_EQ(a.specs, b.specs);
    EXPECT_EQ(a.reference, b.reference);
    EXPECT_EQ(a.oracles, b.oracles);
    const auto c = make_refinement_scenario(8);
    EXPECT_NE(a.specs, c.specs);
}

TEST(CompareStrategies, ReportsAreConsistent) {
    const std::vector<Strategy> all{Strategy::EqualSplit, Strategy::ProportionalSplit, Strategy::OptimizedSplit};
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto sc = make_refinement_scenario(seed);
        const auto reports = compare_strategies(sc, all, 200);
        ASSERT_EQ(reports.size(), 3u);
        for (std::size_t i = 0; i < 3; ++i) {
            const auto& r = reports[i];
            EXPECT_EQ(r.strategy, all[i]);
            EXPECT_LE(r.trials, 200u);
            EXPECT_TRUE(within_capacity(r.final_allocations, sc.cap));
            EXPECT_EQ(r.satisfied, meets_all(sc, r.final_allocations)) << seed << " " << to_string(r.strategy);
        }
        // Starting points are the strategies' own allocations.
        EXPECT_EQ(starting_allocation(sc, Strategy::EqualSplit), equal_split(sc.specs, sc.cap, sc.quanta));
    }
}
