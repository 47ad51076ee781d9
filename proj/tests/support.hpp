#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "hyperscen/allocator.hpp"
#include "hyperscen/board.hpp"
#include "hyperscen/error.hpp"
#include "hyperscen/objective.hpp"
#include "hyperscen/profiling.hpp"
#include "hyperscen/random.hpp"

namespace hyperscen::test {

inline std::filesystem::path fixture(const std::string& name) {
    return std::filesystem::path(HYPERSCEN_FIXTURE_DIR) / name;
}

inline std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// The 6P/8E/64 GiB evaluation board with ten 10 % GPU slices.
inline HardwareCapacity testbed() {
    HardwareCapacity cap;
    cap.p_cores = 6;
    cap.e_cores = 8;
    cap.memory_mib = 65536;
    cap.gpu_slices = 10;
    cap.gpu_slice_percent = 10;
    cap.gpu_mem_mib = 16384;
    return cap;
}

// Anchor for every template metric: throughput a little under target,
// latency comfortably inside it.
inline std::map<std::string, double> anchors_for(WorkloadClass cls) {
    std::map<std::string, double> out;
    for (const auto& m : qos::qos_template(cls)) {
        switch (m.kind) {
            case qos::MetricKind::Throughput: out[m.name] = 0.9 * m.slo_target; break;
            case qos::MetricKind::Latency: out[m.name] = 0.5 * m.slo_target; break;
            case qos::MetricKind::Ratio: out[m.name] = 0.5 * m.slo_target; break;
        }
    }
    return out;
}

inline profiling::ProfileVector synthetic_profile(WorkloadClass cls, double size, std::uint64_t seed) {
    profiling::SyntheticTraceSpec ts;
    ts.cls = cls;
    ts.size = size;
    ts.seed = seed;
    const auto grant = profiling::synthetic_profiling_board();
    return profiling::summarize_profile(profiling::generate_synthetic_trace(ts), board::default_quanta(grant),
                                        grant.as_allocation());
}

// P-core-only VM with a single throughput metric.
inline objective::VmSpec pcore_spec(const std::string& id, std::int64_t lo, std::int64_t hi) {
    objective::VmSpec s;
    s.vm_id = id;
    s.qos_metrics = {{"tps", qos::MetricKind::Throughput, 1.0, 100.0}};
    qos::QosModel m;
    m.anchor = 90.0;
    m.factors.emplace(Resource::PCore, qos::ImpactFactor(0.3, 0.0, 2.0));
    s.qos_models.emplace("tps", m);
    s.util_weights[index_of(Resource::PCore)] = 1.0;
    s.feasibility[Resource::PCore] = {lo, hi};
    s.profile.baseline.c_p = 4;
    s.profile.cpu_p = {50.0, 25.0};
    s.profile.r_prof.c_p = 2;
    s.profile.r_min.c_p = 1;
    return s;
}

struct Instance {
    HardwareCapacity cap;
    board::QuantumSet quanta;
    std::vector<objective::VmSpec> specs;
    std::vector<alloc::CandidateSet> sets;
};

// Random contended instance with n VMs and at most max_candidates per VM.
inline Instance random_instance(Rng& rng, std::size_t n, std::size_t max_candidates) {
    constexpr std::array<WorkloadClass, 4> classes{WorkloadClass::Gaming, WorkloadClass::AiInference,
                                                   WorkloadClass::WebMicroservice, WorkloadClass::RtosControl};
    for (;;) {
        Instance inst;
        inst.cap.p_cores = rng.uniform_int(2, 6);
        inst.cap.e_cores = rng.uniform_int(1, 8);
        inst.cap.memory_mib = 128 * rng.uniform_int(24, 160);
        inst.cap.gpu_slices = rng.uniform_int(2, 10);
        inst.cap.gpu_slice_percent = 10;
        inst.cap.gpu_mem_mib = 16384;
        inst.quanta = board::default_quanta(inst.cap);
        try {
            for (std::size_t i = 0; i < n; ++i) {
                const auto cls = classes[static_cast<std::size_t>(rng.uniform_int(0, 3))];
                const auto p = synthetic_profile(cls, rng.uniform(0.3, 1.2), rng.next());
                auto spec = objective::make_vm_spec("vm" + std::to_string(i), cls, p, anchors_for(cls), inst.cap,
                                                    inst.quanta, rng.uniform(0.01, 0.1));
                inst.sets.push_back(alloc::generate_candidates(spec, inst.cap, inst.quanta, max_candidates));
                inst.specs.push_back(std::move(spec));
            }
            return inst;
        } catch (const Error&) {
            // Profile does not fit this board; draw again.
        }
    }
}

}  // namespace hyperscen::test
