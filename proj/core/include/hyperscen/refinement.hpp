#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hyperscen/allocator.hpp"
#include "hyperscen/objective.hpp"
#include "hyperscen/profiling.hpp"

namespace hyperscen::alloc {

enum class Strategy : std::uint8_t { EqualSplit, ProportionalSplit, OptimizedSplit };

std::string_view to_string(Strategy s) noexcept;

/// User-defined acceptance threshold for one measured metric of one VM.
struct QosThreshold {
    std::size_t vm = 0;
    std::string metric;
    qos::MetricKind kind = qos::MetricKind::Throughput;
    double value = 0.0;
};

/// Measured QoS of (vm, metric) under an allocation; must be deterministic.
using QosOracle = std::function<double(std::size_t vm, const std::string& metric, const Allocation&)>;

struct RefinementReport {
    Strategy strategy = Strategy::OptimizedSplit;
    std::size_t trials = 0;
    std::vector<Allocation> final_allocations;
    bool satisfied = false;
};

/// Relative distance of a measurement from its threshold; > 0 means unmet.
double shortfall(const QosThreshold& t, double measured) noexcept;

/// Greedy trial-and-error loop starting from `start`. Each trial moves one
/// quantum of one resource to the VM with the worst normalized shortfall:
/// the resource with the largest predicted gain under that VM's model, taken
/// from free capacity if any, else from the VM with the largest utilization
/// slack on it (preferring donors predicted to stay within their thresholds).
/// Stops when all thresholds hold, when no move is possible, or after
/// `max_trials` trials.
RefinementReport refine_search(std::span<const objective::VmSpec> specs, const HardwareCapacity& cap,
                               const board::QuantumSet& quanta, std::vector<Allocation> start,
                               std::span<const QosThreshold> thresholds, const QosOracle& oracle,
                               std::size_t max_trials, Strategy strategy = Strategy::OptimizedSplit);

/// Seeded three-VM contention scenario (Gaming, AI inference, Web) for
/// comparing start strategies. Ground truth is a set of hidden oracles; the
/// VM specs carry a calibrated but imperfect estimate of them. Thresholds are
/// met by a known allocation that fits the board.
struct RefinementScenario {
    HardwareCapacity cap;
    board::QuantumSet quanta;
    std::vector<objective::VmSpec> specs;
    std::vector<profiling::OracleModel> oracles;
    std::vector<QosThreshold> thresholds;
    std::vector<Allocation> reference;
};

RefinementScenario make_refinement_scenario(std::uint64_t seed);

/// Oracle adapter measuring the scenario's hidden ground truth.
QosOracle scenario_oracle(const RefinementScenario& scenario);

/// Starting allocation of a strategy (the backtracking optimum for OptimizedSplit).
std::vector<Allocation> starting_allocation(const RefinementScenario& scenario, Strategy strategy);

inline constexpr std::size_t kDefaultMaxTrials = 500;

/// Run refine_search from each strategy's starting allocation.
std::vector<RefinementReport> compare_strategies(const RefinementScenario& scenario,
                                                 std::span<const Strategy> strategies,
                                                 std::size_t max_trials = kDefaultMaxTrials);

}  // namespace hyperscen::alloc
