#include "hyperscen/refinement.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "hyperscen/error.hpp"

namespace hyperscen::alloc {

std::string_view to_string(Strategy s) noexcept {
    switch (s) {
        case Strategy::EqualSplit: return "equal";
        case Strategy::ProportionalSplit: return "proportional";
        case Strategy::OptimizedSplit: return "optimized";
    }
    return "?";
}

double shortfall(const QosThreshold& t, double measured) noexcept {
    if (t.kind == qos::MetricKind::Throughput) return (t.value - measured) / t.value;
    return (measured - t.value) / t.value;
}

namespace {

constexpr double kUnblockGain = 1e9;

std::optional<double> predict(const qos::QosModel& model, const Allocation& r) {
    try {
        return qos::predict_qos(model, r);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::BelowMinimum) throw;
        return std::nullopt;
    }
}

// Predicted relative improvement of `metric` when `r` grows by one quantum of `res`.
double predicted_gain(const qos::QosModel& model, qos::ModelKind kind, const Allocation& r,
                      Resource res, std::int64_t step) {
    const auto factor = model.factors.find(res);
    if (factor == model.factors.end()) return 0.0;
    Allocation next = r;
    next[res] += step;
    const auto now = predict(model, r);
    const auto after = predict(model, next);
    if (!now) {
        // Stuck below a minimum: raising a resource that is itself below its
        // minimum is the only way forward.
        return static_cast<double>(r[res]) <= factor->second.r_min() ? kUnblockGain : 0.0;
    }
    if (!after) return 0.0;
    return kind == qos::ModelKind::Throughput ? (*after - *now) / *now : (*now - *after) / *now;
}

// Worst margin of VM `vm` across its thresholds if `r` replaced its current
// allocation: each measurement is scaled by the model's predicted ratio.
// +inf when the VM has no thresholds.
double projected_margin(const objective::VmSpec& spec, std::size_t vm, const Allocation& now,
                        const Allocation& after, std::span<const QosThreshold> thresholds,
                        std::span<const double> measured) {
    double margin = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < thresholds.size(); ++k) {
        const auto& t = thresholds[k];
        if (t.vm != vm) continue;
        double q = measured[k];
        const auto it = spec.qos_models.find(t.metric);
        if (it != spec.qos_models.end()) {
            const auto p_now = predict(it->second, now);
            const auto p_after = predict(it->second, after);
            if (!p_after) return -std::numeric_limits<double>::infinity();
            if (p_now && *p_now > 0) q *= *p_after / *p_now;
        }
        margin = std::min(margin, -shortfall(t, q));
    }
    return margin;
}

struct Move {
    std::size_t target;
    Resource resource;
    std::int64_t step;
    std::optional<std::size_t> donor;
};

std::optional<Move> choose_move(std::span<const objective::VmSpec> specs, const HardwareCapacity& cap,
                                const board::QuantumSet& quanta, const std::vector<Allocation>& current,
                                const QosThreshold& worst, std::span<const QosThreshold> thresholds,
                                std::span<const double> measured) {
    const auto& spec = specs[worst.vm];
    const auto model_it = spec.qos_models.find(worst.metric);
    if (model_it == spec.qos_models.end()) return std::nullopt;
    const auto& model = model_it->second;

    std::vector<std::pair<double, Resource>> ranked;
    for (auto r : kAllResources) {
        const auto step = board::step_of(quanta, r);
        if (step <= 0) continue;
        if (current[worst.vm][r] + step > spec.feasibility[r].max) continue;
        const double gain = predicted_gain(model, model.kind, current[worst.vm], r, step);
        if (gain > 0) ranked.emplace_back(gain, r);
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });

    Allocation used{};
    for (const auto& a : current) used += a;
    const Allocation free = cap.as_allocation() - used;
    std::optional<Move> fallback;

    for (const auto& [gain, r] : ranked) {
        const auto step = board::step_of(quanta, r);
        if (free[r] >= step) return Move{worst.vm, r, step, std::nullopt};

        // Donor: the VM projected to keep the widest margin after giving up
        // one quantum; projected-safe donors first, utilization slack breaks ties.
        std::optional<std::size_t> donor;
        double best_margin = -std::numeric_limits<double>::infinity();
        double best_slack = best_margin;
        for (std::size_t j = 0; j < specs.size(); ++j) {
            if (j == worst.vm) continue;
            if (current[j][r] - step < specs[j].feasibility[r].min) continue;
            Allocation after = current[j];
            after[r] -= step;
            const double margin = projected_margin(specs[j], j, current[j], after, thresholds, measured);
            const double slack = static_cast<double>(current[j][r]) -
                                 profiling::peak_demand(specs[j].profile)[index_of(r)];
            const bool better = !donor || margin > best_margin || (margin == best_margin && slack > best_slack);
            if (better) {
                donor = j;
                best_margin = margin;
                best_slack = slack;
            }
        }
        if (donor && best_margin >= 0.0) return Move{worst.vm, r, step, donor};
        if (!fallback && donor) fallback = Move{worst.vm, r, step, donor};
    }
    // No move keeps every donor within its thresholds: take the least harmful
    // one for the most valuable resource.
    return fallback;
}

}  // namespace

RefinementReport refine_search(std::span<const objective::VmSpec> specs, const HardwareCapacity& cap,
                               const board::QuantumSet& quanta, std::vector<Allocation> start,
                               std::span<const QosThreshold> thresholds, const QosOracle& oracle,
                               std::size_t max_trials, Strategy strategy) {
    if (start.size() != specs.size()) {
        throw Error(ErrorCode::LengthMismatch, "start allocation does not match the VM list");
    }
    RefinementReport report;
    report.strategy = strategy;
    report.final_allocations = std::move(start);
    auto& current = report.final_allocations;

    while (true) {
        const QosThreshold* worst = nullptr;
        double worst_gap = 0.0;
        std::vector<double> measured;
        for (const auto& t : thresholds) {
            measured.push_back(oracle(t.vm, t.metric, current[t.vm]));
            const double gap = shortfall(t, measured.back());
            if (gap > worst_gap) {
                worst_gap = gap;
                worst = &t;
            }
        }
        if (worst == nullptr) {
            report.satisfied = true;
            break;
        }
        if (report.trials >= max_trials) break;
        const auto move = choose_move(specs, cap, quanta, current, *worst, thresholds, measured);
        if (!move) break;
        current[move->target][move->resource] += move->step;
        if (move->donor) current[*move->donor][move->resource] -= move->step;
        ++report.trials;
    }
    return report;
}

// ---------------------------------------------------------------------------
// seeded scenario

RefinementScenario make_refinement_scenario(std::uint64_t seed) {
    Rng rng(seed);
    const HardwareCapacity grant_board = profiling::synthetic_profiling_board();
    const auto quanta = board::default_quanta(grant_board);
    const Allocation grant = grant_board.as_allocation();

    struct Vm {
        WorkloadClass cls;
        std::string metric;
        qos::MetricKind kind;
        double anchor_lo;
        double anchor_hi;
    };
    const std::array<Vm, 3> vms{{
        {WorkloadClass::Gaming, "fps", qos::MetricKind::Throughput, 45.0, 75.0},
        {WorkloadClass::AiInference, "tokens_per_s", qos::MetricKind::Throughput, 60.0, 120.0},
        {WorkloadClass::WebMicroservice, "p99_latency_us", qos::MetricKind::Latency, 150.0, 350.0},
    }};

    RefinementScenario sc;
    sc.quanta = quanta;
    std::vector<profiling::ProfileVector> profiles;
    std::vector<qos::QosModel> estimates;
    Allocation total{};
    for (std::size_t i = 0; i < vms.size(); ++i) {
        const auto& vm = vms[i];
        profiling::SyntheticTraceSpec ts;
        ts.cls = vm.cls;
        ts.size = rng.uniform(0.6, 1.4);
        ts.seed = rng.next();
        const auto profile =
            profiling::summarize_profile(profiling::generate_synthetic_trace(ts), quanta, grant);
        const auto kind = qos::model_kind_for(vm.kind);
        auto oracle = profiling::make_oracle(kind, rng.uniform(vm.anchor_lo, vm.anchor_hi), profile,
                                             quanta, rng, 0.0);

        // The planner's estimate: profiled anchor, alpha off by up to 20 %, no
        // curvature term.
        qos::QosModel estimate = oracle.truth;
        for (auto& [res, f] : estimate.factors) {
            const double bound = f.alpha_bound();
            const double a = std::clamp(f.alpha() * rng.uniform(0.8, 1.2), 0.05 * bound, 0.95 * bound);
            f = qos::ImpactFactor(a, f.r_min(), f.r_prof());
        }

        // What this VM really needs, as a fraction of its profiled envelope.
        // Drawn per VM so that needs are not proportional to peak demand.
        const double need = rng.uniform(0.35, 1.25);
        Allocation reference{};
        for (const auto& [res, f] : oracle.truth.factors) {
            const auto step = board::step_of(quanta, res);
            const auto lowest = std::max(profile.r_min[res], step);
            const double target = static_cast<double>(lowest) + need * (f.r_prof() - static_cast<double>(lowest));
            reference[res] = std::max(profiling::round_up_to_quantum(target, step), lowest);
        }
        const double at_reference = oracle.measure(reference);
        const double threshold =
            kind == qos::ModelKind::Throughput ? 0.99 * at_reference : at_reference / 0.99;
        sc.thresholds.push_back({i, vm.metric, vm.kind, threshold});
        sc.reference.push_back(reference);
        total += reference;
        profiles.push_back(profile);
        estimates.push_back(std::move(estimate));
        sc.oracles.push_back(std::move(oracle));
    }

    sc.cap.p_cores = total.c_p + 1;
    sc.cap.e_cores = total.c_e + 1;
    sc.cap.memory_mib = total.mem_mib + 2 * board::step_of(quanta, Resource::Memory);
    sc.cap.gpu_slices = total.gpu_slices + 1;
    sc.cap.gpu_slice_percent = std::max<std::int64_t>(1, 100 / sc.cap.gpu_slices);
    sc.cap.gpu_mem_mib = grant_board.gpu_mem_mib;

    for (std::size_t i = 0; i < vms.size(); ++i) {
        objective::VmSpec spec;
        spec.vm_id = std::string(to_string(vms[i].cls));
        spec.workload_class = vms[i].cls;
        const double slo = vms[i].kind == qos::MetricKind::Throughput ? sc.thresholds[i].value
                                                                      : 2.0 * sc.thresholds[i].value;
        spec.qos_metrics = {{vms[i].metric, vms[i].kind, 1.0, slo}};
        spec.qos_models.emplace(vms[i].metric, estimates[i]);
        spec.profile = profiles[i];
        spec.lambda_util = 0.05;
        spec.feasibility = objective::default_feasibility(profiles[i], sc.cap, quanta);
        int used = 0;
        for (auto r : kAllResources) used += profiles[i].r_prof[r] > 0 ? 1 : 0;
        for (auto r : kAllResources) {
            spec.util_weights[index_of(r)] = profiles[i].r_prof[r] > 0 ? 1.0 / used : 0.0;
        }
        spec.validate();
        sc.specs.push_back(std::move(spec));
    }
    return sc;
}

QosOracle scenario_oracle(const RefinementScenario& scenario) {
    return [&scenario](std::size_t vm, const std::string&, const Allocation& r) {
        return scenario.oracles.at(vm).measure(r);
    };
}

std::vector<Allocation> starting_allocation(const RefinementScenario& scenario, Strategy strategy) {
    switch (strategy) {
        case Strategy::EqualSplit: return equal_split(scenario.specs, scenario.cap, scenario.quanta);
        case Strategy::ProportionalSplit:
            return proportional_split(scenario.specs, scenario.cap, scenario.quanta);
        case Strategy::OptimizedSplit: break;
    }
    std::vector<CandidateSet> sets;
    for (const auto& spec : scenario.specs) {
        sets.push_back(generate_candidates(spec, scenario.cap, scenario.quanta));
    }
    return backtrack_allocate(scenario.specs, scenario.cap, sets).allocations;
}

std::vector<RefinementReport> compare_strategies(const RefinementScenario& scenario,
                                                 std::span<const Strategy> strategies,
                                                 std::size_t max_trials) {
    const auto oracle = scenario_oracle(scenario);
    std::vector<RefinementReport> out;
    for (auto s : strategies) {
        out.push_back(refine_search(scenario.specs, scenario.cap, scenario.quanta,
                                    starting_allocation(scenario, s), scenario.thresholds, oracle,
                                    max_trials, s));
    }
    return out;
}

}  // namespace hyperscen::alloc
