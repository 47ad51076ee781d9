#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hyperscen/board.hpp"
#include "hyperscen/profiling.hpp"
#include "hyperscen/qos_model.hpp"
#include "hyperscen/types.hpp"

namespace hyperscen::objective {

struct ResourceBounds {
    std::int64_t min = 0;
    std::int64_t max = 0;
    friend bool operator==(const ResourceBounds&, const ResourceBounds&) = default;
};

/// VM-specific feasibility box. Disallowing a core type is expressed as
/// max = 0 for that resource (e.g. P-core only for an RTOS guest).
struct Feasibility {
    std::array<ResourceBounds, kResourceCount> bounds{};

    ResourceBounds& operator[](Resource r) noexcept { return bounds[index_of(r)]; }
    const ResourceBounds& operator[](Resource r) const noexcept { return bounds[index_of(r)]; }
    bool contains(const Allocation& a) const noexcept;

    friend bool operator==(const Feasibility&, const Feasibility&) = default;
};

struct VmSpec {
    std::string vm_id;
    WorkloadClass workload_class = WorkloadClass::WebMicroservice;
    std::vector<qos::QosMetricSpec> qos_metrics;
    /// v_{i,k}, indexed by index_of(Resource); sums to 1.
    std::array<double, kResourceCount> util_weights{};
    double lambda_util = 0.05;
    Feasibility feasibility;
    /// Response model per metric name.
    std::map<std::string, qos::QosModel> qos_models;
    profiling::ProfileVector profile;

    /// Throws InvalidSpec on any broken invariant (weight sums, bounds,
    /// lambda range, missing models, util weight on a resource whose minimum is 0).
    void validate() const;

    friend bool operator==(const VmSpec&, const VmSpec&) = default;
};

/// Box spanning [lowest usable, min(capacity, r_prof + max(step, r_prof - lowest usable))]
/// for every resource the profile uses and [0, 0] for the rest.
Feasibility default_feasibility(const profiling::ProfileVector& p, const HardwareCapacity& cap,
                                const board::QuantumSet& quanta);

/// Assemble a VmSpec from a class template. `anchors` gives the profiled value
/// of each template metric (by name); metrics without an anchor are dropped
/// and the remaining weights renormalized. Utilization weights are spread
/// evenly over the resources the workload uses.
VmSpec make_vm_spec(std::string vm_id, WorkloadClass cls, const profiling::ProfileVector& profile,
                    const std::map<std::string, double>& anchors, const HardwareCapacity& cap,
                    const board::QuantumSet& quanta, double lambda_util = 0.05);

/// Predicted value of every metric; nullopt where the allocation is below a
/// model minimum.
std::map<std::string, std::optional<double>> predicted_qos(const VmSpec& spec, const Allocation& r);

/// sum_k w_k S_k(Q_k(r)); a metric whose prediction is below minimum scores 0.
double vm_perf_score(const VmSpec& spec, const Allocation& r);

/// U_k = min(1, demand_k / allocated_k). Throws ZeroAllocation when a weighted
/// resource gets nothing.
std::array<double, kResourceCount> predicted_utilization(const VmSpec& spec, const Allocation& r);

/// sum_k v_k U_k.
double vm_util_score(const VmSpec& spec, const Allocation& r);

/// perf + lambda_util * util.
double vm_opt_score(const VmSpec& spec, const Allocation& r);

/// sum_i vm_opt_score_i. Throws LengthMismatch.
double global_score(std::span<const VmSpec> specs, std::span<const Allocation> allocations);

}  // namespace hyperscen::objective
