#include <algorithm>

#include <gtest/gtest.h>

#include "hyperscen/error.hpp"
#include "hyperscen/objective.hpp"
#include "support.hpp"

using namespace hyperscen;
using namespace hyperscen::objective;

namespace {

// Memory-only workload peaking at `peak_mib` of RSS and half of the P-cores
// of the testbed.
profiling::ProfileVector memory_profile(double peak_mib) {
    profiling::ProfileVector p;
    p.baseline = test::testbed().as_allocation();
    p.cpu_p = {50.0, 40.0};
    p.mem = {peak_mib, peak_mib * 0.8, false};
    p.r_prof.c_p = 3;
    p.r_prof.mem_mib = static_cast<std::int64_t>(peak_mib);
    p.r_min.c_p = 1;
    p.r_min.mem_mib = 1024;
    return p;
}

qos::QosModel memory_model(qos::ModelKind kind, double anchor) {
    qos::QosModel m;
    m.kind = kind;
    m.anchor = anchor;
    m.factors.emplace(Resource::Memory, qos::ImpactFactor(0.0006, 896.0, 2048.0));
    return m;
}

VmSpec base_spec() {
    VmSpec s;
    s.vm_id = "vm";
    s.profile = memory_profile(2048);
    s.feasibility[Resource::PCore] = {1, 6};
    s.feasibility[Resource::Memory] = {1024, 8192};
    s.util_weights[index_of(Resource::Memory)] = 1.0;
    return s;
}

Allocation grant(std::int64_t c_p, std::int64_t mem) {
    Allocation a;
    a.c_p = c_p;
    a.mem_mib = mem;
    return a;
}

ErrorCode validate_error(const VmSpec& s) {
    try {
        s.validate();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "spec validated";
    return ErrorCode::InvalidValue;
}

}  // namespace

TEST(PerfScore, SingleMetric) {
    auto s = base_spec();
    s.qos_metrics = {{"p99", qos::MetricKind::Latency, 1.0, 500.0}};
    s.qos_models.emplace("p99", memory_model(qos::ModelKind::Latency, 250.0));
    EXPECT_NEAR(vm_perf_score(s, grant(3, 2048)), 0.5, 1e-12);
}

TEST(PerfScore, WeightedSum) {
    auto s = base_spec();
    s.qos_metrics = {{"fps", qos::MetricKind::Throughput, 0.4, 60.0}, {"lat", qos::MetricKind::Latency, 0.6, 10.0}};
    s.qos_models.emplace("fps", memory_model(qos::ModelKind::Throughput, 60.0));
    s.qos_models.emplace("lat", memory_model(qos::ModelKind::Latency, 10.0));
    EXPECT_NEAR(vm_perf_score(s, grant(3, 2048)), 0.4, 1e-12);
}

TEST(PerfScore, WebTemplateShape) {
    const auto cap = test::testbed();
    const auto quanta = board::default_quanta(cap);
    const auto p = test::synthetic_profile(WorkloadClass::WebMicroservice, 1.0, 4);
    const std::map<std::string, double> anchors{{"p99_latency_us", 250.0}, {"rps_under_slo", 800.0}};
    const auto s = make_vm_spec("web", WorkloadClass::WebMicroservice, p, anchors, cap, quanta);
    const auto r = p.r_prof;
    const auto q = predicted_qos(s, r);
    const double expected = 0.8 * std::max(0.0, 1.0 - *q.at("p99_latency_us") / 500.0) +
                            0.2 * std::min(1.0, *q.at("rps_under_slo") / 1000.0);
    EXPECT_NEAR(vm_perf_score(s, r), expected, 1e-12);
    EXPECT_NEAR(*q.at("p99_latency_us"), 250.0, 1e-9);
}

TEST(PerfScore, BelowMinimumScoresZero) {
    auto s = base_spec();
    s.qos_metrics = {{"fps", qos::MetricKind::Throughput, 1.0, 60.0}};
    s.qos_models.emplace("fps", memory_model(qos::ModelKind::Throughput, 60.0));
    EXPECT_EQ(vm_perf_score(s, grant(3, 896)), 0.0);
    EXPECT_FALSE(predicted_qos(s, grant(3, 896)).at("fps").has_value());
}

TEST(UtilScore, HalfOfGrantedMemory) {
    auto s = base_spec();
    s.qos_metrics = {{"fps", qos::MetricKind::Throughput, 1.0, 60.0}};
    s.qos_models.emplace("fps", memory_model(qos::ModelKind::Throughput, 60.0));
    EXPECT_EQ(predicted_utilization(s, grant(3, 4096))[index_of(Resource::Memory)], 0.5);
    EXPECT_EQ(vm_util_score(s, grant(3, 4096)), 0.5);
    EXPECT_EQ(vm_util_score(s, grant(3, 2048)), 1.0);
}

TEST(UtilScore, WeightedTerms) {
    auto s = base_spec();
    s.qos_metrics = {{"fps", qos::MetricKind::Throughput, 1.0, 60.0}};
    s.qos_models.emplace("fps", memory_model(qos::ModelKind::Throughput, 60.0));
    s.util_weights = {};
    s.util_weights[index_of(Resource::Memory)] = 0.5;
    s.util_weights[index_of(Resource::PCore)] = 0.1;
    s.util_weights[index_of(Resource::ECore)] = 0.4;
    s.feasibility[Resource::ECore] = {1, 8};
    // P-core demand 3 of 3 granted; E-core demand 0 of 2 granted.
    Allocation a = grant(3, 4096);
    a.c_e = 2;
    EXPECT_NEAR(vm_util_score(s, a), 0.5 * 0.5 + 0.1 * 1.0 + 0.4 * 0.0, 1e-12);
}

TEST(UtilScore, ZeroAllocationOfWeightedResource) {
    auto s = base_spec();
    try {
        (void)vm_util_score(s, grant(3, 0));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ZeroAllocation);
    }
}

TEST(OptScore, Combination) {
    auto s = base_spec();
    s.qos_metrics = {{"fps", qos::MetricKind::Throughput, 1.0, 60.0}};
    s.qos_models.emplace("fps", memory_model(qos::ModelKind::Throughput, 48.0));
    s.lambda_util = 0.1;
    // perf 0.8 at r_prof; halving the recorded peak makes util 0.5 there.
    const auto a = grant(3, 2048);
    EXPECT_NEAR(vm_perf_score(s, a), 0.8, 1e-12);
    s.profile.mem.peak_rss_mib = 1024;
    EXPECT_NEAR(vm_util_score(s, a), 0.5, 1e-12);
    EXPECT_NEAR(vm_opt_score(s, a), 0.85, 1e-12);
    s.lambda_util = 0.0;
    EXPECT_EQ(vm_opt_score(s, a), vm_perf_score(s, a));
}

TEST(OptScore, DefaultLambdaInRecommendedBand) {
    const VmSpec s;
    EXPECT_GE(s.lambda_util, 0.01);
    EXPECT_LE(s.lambda_util, 0.1);
}

TEST(GlobalScore, SumAndPermutation) {
    Rng rng(2);
    const auto inst = test::random_instance(rng, 3, 20);
    std::vector<Allocation> allocs;
    for (const auto& set : inst.sets) allocs.push_back(set.candidates.front());
    const double total = global_score(inst.specs, allocs);
    double sum = 0.0;
    for (std::size_t i = 0; i < 3; ++i) sum += vm_opt_score(inst.specs[i], allocs[i]);
    EXPECT_NEAR(total, sum, 1e-12);
    std::vector<VmSpec> rs(inst.specs.rbegin(), inst.specs.rend());
    std::vector<Allocation> ra(allocs.rbegin(), allocs.rend());
    EXPECT_NEAR(global_score(rs, ra), total, 1e-12);
    EXPECT_EQ(global_score(std::span(inst.specs).first(1), std::span(allocs).first(1)),
              vm_opt_score(inst.specs[0], allocs[0]));
    EXPECT_THROW(global_score(inst.specs, std::span(allocs).first(2)), Error);
}

TEST(GlobalScore, TwoVmArithmetic) {
    auto a = base_spec();
    a.qos_metrics = {{"fps", qos::MetricKind::Throughput, 1.0, 100.0}};
    a.qos_models.emplace("fps", memory_model(qos::ModelKind::Throughput, 90.0));
    a.lambda_util = 0.0;
    auto b = a;
    b.qos_models.at("fps").anchor = 70.0;
    const std::vector<VmSpec> specs{a, b};
    const std::vector<Allocation> allocs{grant(3, 2048), grant(3, 2048)};
    EXPECT_NEAR(global_score(specs, allocs), 1.6, 1e-12);
}

TEST(VmSpecValidate, Invariants) {
    auto s = base_spec();
    s.qos_metrics = {{"fps", qos::MetricKind::Throughput, 1.0, 60.0}};
    s.qos_models.emplace("fps", memory_model(qos::ModelKind::Throughput, 60.0));
    EXPECT_NO_THROW(s.validate());

    auto w = s;
    w.qos_metrics[0].weight = 0.7;
    EXPECT_EQ(validate_error(w), ErrorCode::InvalidSpec);

    auto m = s;
    m.qos_models.clear();
    EXPECT_EQ(validate_error(m), ErrorCode::InvalidSpec);

    auto l = s;
    l.lambda_util = 1.5;
    EXPECT_EQ(validate_error(l), ErrorCode::InvalidSpec);

    auto b = s;
    b.feasibility[Resource::Memory] = {4096, 1024};
    EXPECT_EQ(validate_error(b), ErrorCode::InvalidSpec);

    auto u = s;
    u.util_weights = {};
    u.util_weights[index_of(Resource::GpuSlice)] = 1.0;
    EXPECT_EQ(validate_error(u), ErrorCode::InvalidSpec);
}

TEST(PerfScore, MonotoneInEachResourceAboveMinimum) {
    Rng rng(31);
    for (int i = 0; i < 200; ++i) {
        const auto inst = test::random_instance(rng, 1, 64);
        const auto& s = inst.specs[0];
        for (auto res : kAllResources) {
            const auto bounds = s.feasibility[res];
            if (bounds.max <= bounds.min) continue;
            const auto step = std::max<std::int64_t>(1, board::step_of(inst.quanta, res));
            Allocation a = inst.sets[0].candidates[static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<std::int64_t>(inst.sets[0].candidates.size()) - 1))];
            a[res] = bounds.min;
            double prev = vm_perf_score(s, a);
            for (auto v = bounds.min + step; v <= bounds.max; v += step) {
                a[res] = v;
                const double cur = vm_perf_score(s, a);
                ASSERT_GE(cur, prev - 1e-12) << s.vm_id << " " << to_string(res) << " " << v;
                prev = cur;
            }
        }
    }
}

TEST(DefaultFeasibility, SpansLowestUsableToBoard) {
    const auto cap = test::testbed();
    const auto quanta = board::default_quanta(cap);
    const auto p = test::synthetic_profile(WorkloadClass::AiInference, 1.0, 2);
    const auto f = default_feasibility(p, cap, quanta);
    for (auto r : kAllResources) {
        if (p.r_prof[r] == 0) {
            EXPECT_EQ(f[r].max, 0);
            continue;
        }
        EXPECT_GE(f[r].min, p.r_min[r]);
        EXPECT_LE(f[r].min, p.r_prof[r]);
        EXPECT_GE(f[r].max, std::min<std::int64_t>(p.r_prof[r], cap.as_allocation()[r]));
        EXPECT_LE(f[r].max, cap.as_allocation()[r]);
    }
}
