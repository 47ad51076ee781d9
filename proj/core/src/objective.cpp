#include "hyperscen/objective.hpp"

#include <cmath>
#include <numeric>

#include "hyperscen/error.hpp"

namespace hyperscen::objective {

namespace {

constexpr double kWeightTolerance = 1e-9;

void require(bool ok, const std::string& vm_id, const std::string& what) {
    if (!ok) throw Error(ErrorCode::InvalidSpec, "vm '" + vm_id + "': " + what);
}

}  // namespace

bool Feasibility::contains(const Allocation& a) const noexcept {
    for (auto r : kAllResources) {
        const auto& b = (*this)[r];
        if (a[r] < b.min || a[r] > b.max) return false;
    }
    return true;
}

void VmSpec::validate() const {
    require(!vm_id.empty(), vm_id, "empty vm_id");
    require(!qos_metrics.empty(), vm_id, "at least one QoS metric is required");
    double w_sum = 0.0;
    for (const auto& m : qos_metrics) {
        require(m.weight >= 0.0 && m.weight <= 1.0, vm_id, "metric weight outside [0,1]: " + m.name);
        require(m.slo_target > 0.0, vm_id, "slo_target must be positive: " + m.name);
        const auto it = qos_models.find(m.name);
        require(it != qos_models.end(), vm_id, "no QoS model for metric " + m.name);
        try {
            it->second.validate();
        } catch (const Error& e) {
            require(false, vm_id, "model for " + m.name + ": " + e.what());
        }
        w_sum += m.weight;
    }
    require(std::abs(w_sum - 1.0) <= kWeightTolerance, vm_id, "QoS weights must sum to 1");
    const double v_sum = std::accumulate(util_weights.begin(), util_weights.end(), 0.0);
    require(std::abs(v_sum - 1.0) <= kWeightTolerance, vm_id, "utilization weights must sum to 1");
    for (auto r : kAllResources) {
        const double v = util_weights[index_of(r)];
        require(v >= 0.0, vm_id, "negative utilization weight");
        const auto& b = feasibility[r];
        require(b.min >= 0 && b.min <= b.max, vm_id,
                "feasibility bounds for " + std::string(to_string(r)) + " need 0 <= min <= max");
        require(v == 0.0 || b.min > 0, vm_id,
                "utilization weight on " + std::string(to_string(r)) + " requires a positive minimum");
    }
    require(lambda_util >= 0.0 && lambda_util <= 1.0, vm_id, "lambda_util outside [0,1]");
}

Feasibility default_feasibility(const profiling::ProfileVector& p, const HardwareCapacity& cap,
                                const board::QuantumSet& quanta) {
    Feasibility f;
    const Allocation capacity = cap.as_allocation();
    for (auto r : kAllResources) {
        if (p.r_prof[r] <= 0) continue;
        const auto step = std::max<std::int64_t>(board::step_of(quanta, r), 1);
        const auto lo = std::max<std::int64_t>(p.r_min[r], step);
        // Headroom above the envelope equal to the width of the usable range
        // (at least one quantum): for cores this is close to 2 r_prof, for
        // memory it stays near the working set instead of doubling it.
        auto hi = std::min(capacity[r], p.r_prof[r] + std::max(step, p.r_prof[r] - lo));
        hi = (hi / step) * step;
        f[r] = {lo, std::max(lo, hi)};
    }
    return f;
}

VmSpec make_vm_spec(std::string vm_id, WorkloadClass cls, const profiling::ProfileVector& profile,
                    const std::map<std::string, double>& anchors, const HardwareCapacity& cap,
                    const board::QuantumSet& quanta, double lambda_util) {
    VmSpec spec;
    spec.vm_id = std::move(vm_id);
    spec.workload_class = cls;
    spec.lambda_util = lambda_util;
    spec.profile = profile;
    spec.feasibility = default_feasibility(profile, cap, quanta);

    double w_sum = 0.0;
    for (auto metric : qos::qos_template(cls)) {
        const auto it = anchors.find(metric.name);
        if (it == anchors.end()) continue;
        spec.qos_models.emplace(metric.name,
                                profiling::model_from_profile(qos::model_kind_for(metric.kind),
                                                              it->second, profile, quanta));
        w_sum += metric.weight;
        spec.qos_metrics.push_back(std::move(metric));
    }
    if (spec.qos_metrics.empty()) {
        throw Error(ErrorCode::InvalidSpec, "vm '" + spec.vm_id + "': no anchors for any template metric");
    }
    for (auto& m : spec.qos_metrics) m.weight /= w_sum;

    int used = 0;
    for (auto r : kAllResources) used += profile.r_prof[r] > 0 ? 1 : 0;
    for (auto r : kAllResources) {
        spec.util_weights[index_of(r)] = profile.r_prof[r] > 0 ? 1.0 / used : 0.0;
    }
    spec.validate();
    return spec;
}

std::map<std::string, std::optional<double>> predicted_qos(const VmSpec& spec, const Allocation& r) {
    std::map<std::string, std::optional<double>> out;
    for (const auto& m : spec.qos_metrics) {
        try {
            out[m.name] = qos::predict_qos(spec.qos_models.at(m.name), r);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::BelowMinimum) throw;
            out[m.name] = std::nullopt;
        }
    }
    return out;
}

double vm_perf_score(const VmSpec& spec, const Allocation& r) {
    double score = 0.0;
    for (const auto& m : spec.qos_metrics) {
        const auto& model = spec.qos_models.at(m.name);
        try {
            score += m.weight * qos::normalize_score(m, qos::predict_qos(model, r));
        } catch (const Error& e) {
            if (e.code() != ErrorCode::BelowMinimum) throw;
        }
    }
    return score;
}

std::array<double, kResourceCount> predicted_utilization(const VmSpec& spec, const Allocation& r) {
    const auto demand = profiling::peak_demand(spec.profile);
    std::array<double, kResourceCount> u{};
    for (auto res : kAllResources) {
        const auto k = index_of(res);
        const auto alloc = static_cast<double>(r[res]);
        if (alloc <= 0) {
            if (spec.util_weights[k] > 0) {
                throw Error(ErrorCode::ZeroAllocation,
                            "vm '" + spec.vm_id + "' has utilization weight on " +
                                std::string(to_string(res)) + " but nothing allocated",
                            std::nullopt, std::string(to_string(res)));
            }
            continue;
        }
        u[k] = std::min(1.0, demand[k] / alloc);
    }
    return u;
}

double vm_util_score(const VmSpec& spec, const Allocation& r) {
    const auto u = predicted_utilization(spec, r);
    double score = 0.0;
    for (std::size_t k = 0; k < kResourceCount; ++k) score += spec.util_weights[k] * u[k];
    return score;
}

double vm_opt_score(const VmSpec& spec, const Allocation& r) {
    return vm_perf_score(spec, r) + spec.lambda_util * vm_util_score(spec, r);
}

double global_score(std::span<const VmSpec> specs, std::span<const Allocation> allocations) {
    if (specs.size() != allocations.size()) {
        throw Error(ErrorCode::LengthMismatch, std::to_string(specs.size()) + " specs vs " +
                                                   std::to_string(allocations.size()) + " allocations");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < specs.size(); ++i) total += vm_opt_score(specs[i], allocations[i]);
    return total;
}

}  // namespace hyperscen::objective
