#include <benchmark/benchmark.h>

#include <map>
#include <vector>

#include "hyperscen/allocator.hpp"
#include "hyperscen/board.hpp"
#include "hyperscen/mlp.hpp"
#include "hyperscen/objective.hpp"
#include "hyperscen/profiling.hpp"
#include "hyperscen/qos_model.hpp"
#include "hyperscen/random.hpp"

using namespace hyperscen;

namespace {

HardwareCapacity testbed() {
    HardwareCapacity cap;
    cap.p_cores = 6;
    cap.e_cores = 8;
    cap.memory_mib = 65536;
    cap.gpu_slices = 10;
    cap.gpu_slice_percent = 10;
    cap.gpu_mem_mib = 16384;
    return cap;
}

std::map<std::string, double> anchors(WorkloadClass cls) {
    std::map<std::string, double> out;
    for (const auto& m : qos::qos_template(cls)) {
        out[m.name] = m.kind == qos::MetricKind::Throughput ? 0.9 * m.slo_target : 0.5 * m.slo_target;
    }
    return out;
}

// Gaming / AI / Web / RTOS VMs cycled up to n, each profiled from a synthetic trace.
std::vector<objective::VmSpec> specs_for(std::size_t n, const HardwareCapacity& cap) {
    constexpr WorkloadClass classes[] = {WorkloadClass::Gaming, WorkloadClass::AiInference,
                                         WorkloadClass::WebMicroservice, WorkloadClass::RtosControl};
    const auto grant = profiling::synthetic_profiling_board();
    const auto quanta = board::default_quanta(cap);
    std::vector<objective::VmSpec> specs;
    for (std::size_t i = 0; i < n; ++i) {
        const auto cls = classes[i % 4];
        profiling::SyntheticTraceSpec ts;
        ts.cls = cls;
        ts.size = 0.4;
        ts.seed = 100 + i;
        const auto p = profiling::summarize_profile(profiling::generate_synthetic_trace(ts),
                                                    board::default_quanta(grant), grant.as_allocation());
        specs.push_back(objective::make_vm_spec("vm" + std::to_string(i), cls, p, anchors(cls), cap, quanta));
    }
    return specs;
}

void BM_ImpactFactor(benchmark::State& state) {
    const qos::ImpactFactor f(0.1, 0.0, 8.0);
    double r = 0.5;
    for (auto _ : state) {
        benchmark::DoNotOptimize(f(r));
        r = r < 20.0 ? r + 0.25 : 0.5;
    }
}
BENCHMARK(BM_ImpactFactor);

void BM_CandidateGeneration(benchmark::State& state) {
    const auto cap = testbed();
    const auto specs = specs_for(1, cap);
    const auto quanta = board::default_quanta(cap);
    for (auto _ : state) {
        benchmark::DoNotOptimize(alloc::generate_candidates(specs[0], cap, quanta));
    }
}
BENCHMARK(BM_CandidateGeneration)->Unit(benchmark::kMicrosecond);

void BM_Backtrack(benchmark::State& state) {
    const auto cap = testbed();
    const auto quanta = board::default_quanta(cap);
    const auto specs = specs_for(static_cast<std::size_t>(state.range(0)), cap);
    std::vector<alloc::CandidateSet> sets;
    for (const auto& s : specs) sets.push_back(alloc::generate_candidates(s, cap, quanta, 64));
    alloc::SearchOptions opts;
    opts.prune = state.range(1) != 0;
    std::uint64_t nodes = 0;
    for (auto _ : state) {
        const auto r = alloc::backtrack_allocate(specs, cap, sets, opts);
        nodes = r.nodes_visited;
    }
    state.counters["nodes"] = static_cast<double>(nodes);
}
BENCHMARK(BM_Backtrack)
    ->ArgNames({"vms", "prune"})
    ->Args({2, 1})
    ->Args({3, 1})
    ->Args({4, 1})
    ->Args({3, 0})
    ->Unit(benchmark::kMillisecond);

void BM_MlpEpoch(benchmark::State& state) {
    const auto data = profiling::generate_dataset(100, 42);
    std::vector<profiling::DatasetRecord> recs;
    for (const auto& r : data.records) {
        if (r.qos_kind == qos::ModelKind::Throughput) recs.push_back(r);
    }
    learned::Matrix x(recs.size(), learned::kFeatureCount);
    std::vector<double> y;
    for (std::size_t i = 0; i < recs.size(); ++i) {
        const auto f = learned::features(recs[i].r, recs[i].p, profiling::workload_class_of(recs[i].workload_id));
        std::copy(f.begin(), f.end(), x.row(i).begin());
        y.push_back(recs[i].qos_value);
    }
    learned::TrainConfig cfg;
    cfg.max_epochs = 1;
    cfg.patience = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(learned::fit_regressor(x, y, learned::Matrix{}, {}, cfg, 1));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(recs.size()));
}
BENCHMARK(BM_MlpEpoch)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
