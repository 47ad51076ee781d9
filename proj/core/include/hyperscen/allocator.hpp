#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hyperscen/board.hpp"
#include "hyperscen/objective.hpp"
#include "hyperscen/types.hpp"

namespace hyperscen::alloc {

inline constexpr std::size_t kDefaultMaxCandidates = 512;

/// Candidate allocations of one VM in heuristic order: descending
/// unconstrained vm_opt_score, ties by ascending (c_p, c_e, m, g).
/// `scores[j]` is vm_opt_score of `candidates[j]`.
struct CandidateSet {
    std::string vm_id;
    std::vector<Allocation> candidates;
    std::vector<double> scores;
};

/// Cartesian grid of quantum steps over the VM's feasibility box (clipped to
/// the board). While the grid exceeds `max_candidates`, the step of the
/// dimension with the most points is doubled; a dimension down to its two
/// ends collapses to the upper one. The upper end of every dimension is
/// always kept. Throws EmptyFeasibleSet.
CandidateSet generate_candidates(const objective::VmSpec& spec, const HardwareCapacity& cap,
                                 const board::QuantumSet& quanta,
                                 std::size_t max_candidates = kDefaultMaxCandidates);

/// Optimistic completion score for the VMs at positions [depth, N) of `sets`:
/// the sum of each VM's best candidate that individually fits `remaining`.
/// Returns 0 for depth == N and -infinity if some VM has no fitting candidate.
double upper_bound(std::size_t depth, const Allocation& remaining,
                   std::span<const CandidateSet> sets);

struct SearchOptions {
    bool prune = true;
    /// Stop early and return the incumbent (marked truncated).
    std::optional<std::chrono::milliseconds> time_budget;
};

struct SearchResult {
    /// One allocation per VM, in the order of the input specs.
    std::vector<Allocation> allocations;
    double best_score = 0.0;
    std::uint64_t nodes_visited = 0;
    std::uint64_t nodes_pruned = 0;
    bool truncated = false;
};

/// VMs are visited by descending best-candidate score (ties by input index).
std::vector<std::size_t> visit_order(std::span<const CandidateSet> sets);

/// Depth-first backtracking over the candidate sets maximizing the global
/// score under the four capacity sums. The incumbent is replaced only on
/// strict improvement, so the first optimum in heuristic order wins ties.
/// Throws NoFeasibleAssignment or LengthMismatch.
SearchResult backtrack_allocate(std::span<const objective::VmSpec> specs,
                                const HardwareCapacity& cap, std::span<const CandidateSet> sets,
                                const SearchOptions& options = {});

inline constexpr double kBruteForceLimit = 1e6;

/// Exhaustive enumeration with the same visiting order and tie rule as
/// backtrack_allocate. Throws TooLarge when the product of set sizes exceeds
/// kBruteForceLimit, and NoFeasibleAssignment.
SearchResult brute_force_allocate(std::span<const objective::VmSpec> specs,
                                  const HardwareCapacity& cap, std::span<const CandidateSet> sets);

/// Each resource divided by N in whole quanta; the remainder goes one quantum
/// at a time to VMs in index order.
std::vector<Allocation> equal_split(std::span<const objective::VmSpec> specs,
                                    const HardwareCapacity& cap, const board::QuantumSet& quanta);
std::vector<Allocation> equal_split(std::span<const objective::VmSpec> specs,
                                    const HardwareCapacity& cap);

/// Shares proportional to profiled peak demand, rounded to quanta with the
/// largest-remainder method so they sum to the capacity exactly. VMs whose
/// share falls below their lowest usable allocation are lifted to it when the
/// floors fit, and the rest is re-split among the others.
/// Throws ZeroTotalDemand.
std::vector<Allocation> proportional_split(std::span<const objective::VmSpec> specs,
                                           const HardwareCapacity& cap,
                                           const board::QuantumSet& quanta);
std::vector<Allocation> proportional_split(std::span<const objective::VmSpec> specs,
                                           const HardwareCapacity& cap);

/// True when every Σ constraint holds.
bool within_capacity(std::span<const Allocation> allocations, const HardwareCapacity& cap) noexcept;

}  // namespace hyperscen::alloc
