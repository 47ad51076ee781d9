#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "hyperscen/allocator.hpp"
#include "hyperscen/objective.hpp"
#include "hyperscen/profiling.hpp"
#include "hyperscen/refinement.hpp"

namespace hyperscen::scenario {

inline constexpr std::string_view kToolVersion = "0.1.0";

struct VmEntry {
    std::string vm_id;
    WorkloadClass workload_class = WorkloadClass::WebMicroservice;
    Allocation allocation;
    /// Predicted value per metric; nullopt (JSON null) below a model minimum.
    std::map<std::string, std::optional<double>> predicted_qos;
    double perf_score = 0.0;
    double util_score = 0.0;
    double opt_score = 0.0;

    friend bool operator==(const VmEntry&, const VmEntry&) = default;
};

struct Metadata {
    std::string tool_version{kToolVersion};
    std::uint64_t seed = 0;
    std::string generated_at;
    std::string strategy = "optimized";
    std::uint64_t nodes_visited = 0;
    std::uint64_t nodes_pruned = 0;
    bool truncated = false;

    friend bool operator==(const Metadata&, const Metadata&) = default;
};

/// Everything an integrator needs to realize the static configuration.
/// Real numbers are rounded to 6 decimals when the document is built, so the
/// JSON form is canonical and read_scenario(write_scenario(d)) == d.
struct ScenarioDocument {
    HardwareCapacity board;
    std::vector<VmEntry> vms;
    double global_score = 0.0;
    Metadata metadata;

    friend bool operator==(const ScenarioDocument&, const ScenarioDocument&) = default;
};

double round6(double v) noexcept;

ScenarioDocument make_scenario(std::span<const objective::VmSpec> specs, const HardwareCapacity& cap,
                               std::span<const Allocation> allocations, Metadata metadata);

nlohmann::json to_json(const ScenarioDocument& doc);
ScenarioDocument scenario_from_json(const nlohmann::json& j);

/// Canonical JSON text: sorted keys, two-space indent, trailing newline.
std::string write_scenario(const ScenarioDocument& doc);
ScenarioDocument read_scenario(std::string_view text);

/// Inert POSIX shell script with one launcher block per VM.
std::string emit_launch_script(const ScenarioDocument& doc);

struct LaunchEntry {
    std::string vm_id;
    Allocation allocation;
    friend bool operator==(const LaunchEntry&, const LaunchEntry&) = default;
};

/// Re-extract (VM_ID, allocation) pairs from emit_launch_script output.
std::vector<LaunchEntry> parse_launch_script(std::string_view text);

// ---------------------------------------------------------------------------
// VM definitions and the end-to-end planning step shared by CLI and service

/// A VM as supplied by a user. Either a complete VmSpec, or a short form
/// `{vm_id, workload_class, anchors: {metric: value}, lambda_util?, profile?}`
/// from which the spec is derived once board and profile are known.
struct VmInput {
    std::optional<objective::VmSpec> spec;
    std::string vm_id;
    WorkloadClass workload_class = WorkloadClass::WebMicroservice;
    std::map<std::string, double> anchors;
    double lambda_util = 0.05;
    std::optional<profiling::ProfileVector> profile;

    const std::string& id() const noexcept { return spec ? spec->vm_id : vm_id; }
};

VmInput vm_input_from_json(const nlohmann::json& j);
nlohmann::json to_json(const VmInput& in);

/// Parse a JSON array of VM inputs; vm_ids must be unique (InvalidSpec).
std::vector<VmInput> vm_inputs_from_json(const nlohmann::json& j);

/// Complete VmSpec. An uploaded profile replaces the short form's embedded
/// one; full specs are used as given. Throws InvalidSpec when no profile is
/// available.
objective::VmSpec resolve_vm(const VmInput& in, const std::optional<profiling::ProfileVector>& uploaded,
                             const HardwareCapacity& cap, const board::QuantumSet& quanta);

struct PlanOptions {
    /// Unset: backtracking optimum. Otherwise the named baseline split.
    std::optional<alloc::Strategy> baseline;
    std::optional<std::chrono::milliseconds> time_budget;
    std::uint64_t seed = 0;
    std::string generated_at;
};

struct Plan {
    std::vector<objective::VmSpec> specs;
    alloc::SearchResult result;
    ScenarioDocument document;
};

Plan plan_scenario(std::vector<objective::VmSpec> specs, const HardwareCapacity& cap,
                   const PlanOptions& options);

/// Predicted QoS and scores of one candidate allocation per VM (what-if).
nlohmann::json whatif(std::span<const objective::VmSpec> specs, std::span<const Allocation> allocations);

}  // namespace hyperscen::scenario
