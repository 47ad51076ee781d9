#include "hyperscen/allocator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "hyperscen/error.hpp"

namespace hyperscen::alloc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
// A branch is pruned only if even its bound falls short of the incumbent by
// more than rounding noise; ties and near-ties are explored.
constexpr double kPruneSlack = 1e-9;

struct Axis {
    std::int64_t lo = 0;
    std::int64_t hi = 0;
    std::int64_t step = 1;

    std::size_t count() const { return static_cast<std::size_t>((hi - lo) / step) + ((hi - lo) % step ? 2 : 1); }

    std::vector<std::int64_t> values() const {
        std::vector<std::int64_t> v;
        for (auto x = lo; x <= hi; x += step) v.push_back(x);
        if (v.back() != hi) v.push_back(hi);
        return v;
    }
};

std::int64_t align_up(std::int64_t v, std::int64_t q) { return ((v + q - 1) / q) * q; }
std::int64_t align_down(std::int64_t v, std::int64_t q) { return (v / q) * q; }

void check_aligned(std::span<const objective::VmSpec> specs, std::span<const CandidateSet> sets) {
    if (specs.empty()) throw Error(ErrorCode::InvalidParams, "at least one VM is required");
    if (specs.size() != sets.size()) {
        throw Error(ErrorCode::LengthMismatch, std::to_string(specs.size()) + " specs vs " +
                                                   std::to_string(sets.size()) + " candidate sets");
    }
}

std::vector<CandidateSet> reorder(std::span<const CandidateSet> sets, const std::vector<std::size_t>& order) {
    std::vector<CandidateSet> out;
    out.reserve(order.size());
    for (auto i : order) out.push_back(sets[i]);
    return out;
}

SearchResult finish(std::span<const objective::VmSpec> specs, const std::vector<std::size_t>& order,
                    const std::vector<Allocation>& best_in_visit_order, SearchResult result) {
    result.allocations.assign(specs.size(), Allocation{});
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
        result.allocations[order[pos]] = best_in_visit_order[pos];
    }
    result.best_score = objective::global_score(specs, result.allocations);
    return result;
}

class Backtracker {
public:
    Backtracker(std::vector<CandidateSet> sets, const Allocation& capacity, const SearchOptions& options)
        : sets_(std::move(sets)), capacity_(capacity), options_(options) {
        if (options_.time_budget) deadline_ = std::chrono::steady_clock::now() + *options_.time_budget;
        stack_.reserve(sets_.size());
    }

    void run() { visit(0, 0.0); }

    bool found() const { return best_score_ > kNegInf; }
    const std::vector<Allocation>& best() const { return best_; }
    SearchResult stats() const {
        SearchResult r;
        r.nodes_visited = visited_;
        r.nodes_pruned = pruned_;
        r.truncated = truncated_;
        return r;
    }

private:
    void visit(std::size_t depth, double score) {
        ++visited_;
        if (out_of_time()) return;
        if (depth == sets_.size()) {
            if (score > best_score_) {
                best_score_ = score;
                best_ = stack_;
            }
            return;
        }
        const Allocation remaining = capacity_ - used_;
        if (options_.prune) {
            const double bound = upper_bound(depth, remaining, sets_);
            if (bound == kNegInf || score + bound + kPruneSlack <= best_score_) {
                ++pruned_;
                return;
            }
        }
        const auto& set = sets_[depth];
        for (std::size_t j = 0; j < set.candidates.size(); ++j) {
            const auto& r = set.candidates[j];
            if (!r.fits_within(remaining)) continue;
            stack_.push_back(r);
            used_ += r;
            visit(depth + 1, score + set.scores[j]);
            used_ -= r;
            stack_.pop_back();
            if (truncated_) return;
        }
    }

    bool out_of_time() {
        if (truncated_) return true;
        if (!deadline_ || (visited_ & 1023u) != 0) return false;
        if (std::chrono::steady_clock::now() >= *deadline_ && found()) truncated_ = true;
        return truncated_;
    }

    std::vector<CandidateSet> sets_;
    Allocation capacity_;
    SearchOptions options_;
    std::optional<std::chrono::steady_clock::time_point> deadline_;
    Allocation used_{};
    std::vector<Allocation> stack_;
    std::vector<Allocation> best_;
    double best_score_ = kNegInf;
    std::uint64_t visited_ = 0;
    std::uint64_t pruned_ = 0;
    bool truncated_ = false;
};

}  // namespace

// ---------------------------------------------------------------------------
// candidates

CandidateSet generate_candidates(const objective::VmSpec& spec, const HardwareCapacity& cap,
                                 const board::QuantumSet& quanta, std::size_t max_candidates) {
    const Allocation capacity = cap.as_allocation();
    std::array<Axis, kResourceCount> axes{};
    for (auto r : kAllResources) {
        const auto& b = spec.feasibility[r];
        const auto step = board::step_of(quanta, r);
        Axis& axis = axes[index_of(r)];
        if (step <= 0) {
            // No quantum: the resource cannot be allocated at all.
            if (b.min > 0) {
                throw Error(ErrorCode::EmptyFeasibleSet, "vm '" + spec.vm_id + "' needs " +
                                                             std::string(to_string(r)) +
                                                             " but the board has none");
            }
            axis = {0, 0, 1};
            continue;
        }
        axis.step = step;
        axis.lo = align_up(std::max<std::int64_t>(b.min, 0), step);
        axis.hi = align_down(std::min(b.max, capacity[r]), step);
        if (b.min > b.max || axis.lo > axis.hi) {
            throw Error(ErrorCode::EmptyFeasibleSet,
                        "vm '" + spec.vm_id + "': empty feasible range for " + std::string(to_string(r)));
        }
    }
    auto total = [&] {
        double n = 1.0;
        for (const auto& a : axes) n *= static_cast<double>(a.count());
        return n;
    };
    while (total() > static_cast<double>(std::max<std::size_t>(max_candidates, 1))) {
        auto widest = std::max_element(axes.begin(), axes.end(), [](const Axis& a, const Axis& b) {
            return a.count() < b.count();
        });
        if (widest->count() <= 1) break;
        const auto before = widest->count();
        widest->step *= 2;
        if (widest->count() >= before) {
            // Only the two ends were left; keep the upper one.
            widest->step /= 2;
            widest->lo = widest->hi;
        }
    }

    CandidateSet set;
    set.vm_id = spec.vm_id;
    for (auto cp : axes[0].values())
        for (auto ce : axes[1].values())
            for (auto m : axes[2].values())
                for (auto g : axes[3].values()) set.candidates.push_back({cp, ce, m, g});

    std::vector<double> scores;
    scores.reserve(set.candidates.size());
    for (const auto& c : set.candidates) scores.push_back(objective::vm_opt_score(spec, c));
    std::vector<std::size_t> idx(set.candidates.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return set.candidates[a] < set.candidates[b];
    });
    std::vector<Allocation> ordered;
    ordered.reserve(idx.size());
    for (auto i : idx) {
        ordered.push_back(set.candidates[i]);
        set.scores.push_back(scores[i]);
    }
    set.candidates = std::move(ordered);
    return set;
}

// ---------------------------------------------------------------------------
// search

double upper_bound(std::size_t depth, const Allocation& remaining, std::span<const CandidateSet> sets) {
    double bound = 0.0;
    for (std::size_t j = depth; j < sets.size(); ++j) {
        const auto& set = sets[j];
        double best = kNegInf;
        // Sets are sorted by descending score, so the first fit is the best.
        for (std::size_t c = 0; c < set.candidates.size(); ++c) {
            if (set.candidates[c].fits_within(remaining)) {
                best = set.scores[c];
                break;
            }
        }
        if (best == kNegInf) return kNegInf;
        bound += best;
    }
    return bound;
}

std::vector<std::size_t> visit_order(std::span<const CandidateSet> sets) {
    std::vector<std::size_t> order(sets.size());
    std::iota(order.begin(), order.end(), 0);
    auto best_of = [&](std::size_t i) { return sets[i].scores.empty() ? kNegInf : sets[i].scores.front(); };
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return best_of(a) > best_of(b); });
    return order;
}

SearchResult backtrack_allocate(std::span<const objective::VmSpec> specs, const HardwareCapacity& cap,
                                std::span<const CandidateSet> sets, const SearchOptions& options) {
    check_aligned(specs, sets);
    const auto order = visit_order(sets);
    Backtracker search(reorder(sets, order), cap.as_allocation(), options);
    search.run();
    if (!search.found()) {
        throw Error(ErrorCode::NoFeasibleAssignment, "no joint assignment fits the board capacity");
    }
    return finish(specs, order, search.best(), search.stats());
}

SearchResult brute_force_allocate(std::span<const objective::VmSpec> specs, const HardwareCapacity& cap,
                                  std::span<const CandidateSet> sets) {
    check_aligned(specs, sets);
    double product = 1.0;
    for (const auto& s : sets) product *= static_cast<double>(s.candidates.size());
    if (product > kBruteForceLimit) {
        throw Error(ErrorCode::TooLarge, "candidate product " + std::to_string(product) + " exceeds limit");
    }
    const auto order = visit_order(sets);
    const auto ordered = reorder(sets, order);
    const Allocation capacity = cap.as_allocation();
    const std::size_t n = ordered.size();

    SearchResult result;
    std::vector<Allocation> best;
    double best_score = kNegInf;
    if (product == 0.0) {
        throw Error(ErrorCode::NoFeasibleAssignment, "a VM has no candidates");
    }
    // Odometer over candidate indices, last VM fastest: the same lexicographic
    // order in which the depth-first search reaches complete assignments.
    std::vector<std::size_t> idx(n, 0);
    while (true) {
        ++result.nodes_visited;
        Allocation used{};
        double score = 0.0;
        for (std::size_t pos = 0; pos < n; ++pos) {
            used += ordered[pos].candidates[idx[pos]];
            score += ordered[pos].scores[idx[pos]];
        }
        if (used.fits_within(capacity) && score > best_score) {
            best_score = score;
            best.clear();
            for (std::size_t pos = 0; pos < n; ++pos) best.push_back(ordered[pos].candidates[idx[pos]]);
        }
        bool advanced = false;
        for (std::size_t pos = n; pos-- > 0;) {
            if (++idx[pos] < ordered[pos].candidates.size()) {
                advanced = true;
                break;
            }
            idx[pos] = 0;
        }
        if (!advanced) break;
    }
    if (best.empty()) {
        throw Error(ErrorCode::NoFeasibleAssignment, "no joint assignment fits the board capacity");
    }
    return finish(specs, order, best, result);
}

// ---------------------------------------------------------------------------
// baselines

bool within_capacity(std::span<const Allocation> allocations, const HardwareCapacity& cap) noexcept {
    Allocation used{};
    for (const auto& a : allocations) used += a;
    return used.fits_within(cap.as_allocation());
}

std::vector<Allocation> equal_split(std::span<const objective::VmSpec> specs, const HardwareCapacity& cap,
                                    const board::QuantumSet& quanta) {
    if (specs.empty()) throw Error(ErrorCode::InvalidParams, "at least one VM is required");
    const auto n = static_cast<std::int64_t>(specs.size());
    const Allocation capacity = cap.as_allocation();
    std::vector<Allocation> out(specs.size());
    for (auto r : kAllResources) {
        const auto step = board::step_of(quanta, r);
        if (step <= 0) continue;
        const auto units = capacity[r] / step;
        const auto base = units / n;
        const auto extra = units % n;
        for (std::int64_t i = 0; i < n; ++i) {
            out[static_cast<std::size_t>(i)][r] = (base + (i < extra ? 1 : 0)) * step;
        }
    }
    return out;
}

std::vector<Allocation> equal_split(std::span<const objective::VmSpec> specs, const HardwareCapacity& cap) {
    return equal_split(specs, cap, board::default_quanta(cap));
}

namespace {

// Largest-remainder apportionment of `units` over the `active` VMs in
// proportion to `demand`; ties in the fractional part go to the lower index.
void apportion(std::int64_t units, const std::vector<double>& demand, const std::vector<bool>& active,
               std::vector<std::int64_t>& shares) {
    double total = 0.0;
    for (std::size_t i = 0; i < demand.size(); ++i) {
        if (active[i]) total += demand[i];
    }
    std::vector<std::pair<double, std::size_t>> remainders;
    std::int64_t given = 0;
    for (std::size_t i = 0; i < demand.size(); ++i) {
        if (!active[i]) continue;
        const double exact = total > 0 ? static_cast<double>(units) * demand[i] / total : 0.0;
        const auto whole = static_cast<std::int64_t>(std::floor(exact));
        shares[i] = whole;
        given += whole;
        remainders.emplace_back(exact - static_cast<double>(whole), i);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t k = 0; given < units && !remainders.empty(); k = (k + 1) % remainders.size()) {
        ++shares[remainders[k].second];
        ++given;
    }
}

}  // namespace

std::vector<Allocation> proportional_split(std::span<const objective::VmSpec> specs,
                                           const HardwareCapacity& cap, const board::QuantumSet& quanta) {
    if (specs.empty()) throw Error(ErrorCode::InvalidParams, "at least one VM is required");
    const Allocation capacity = cap.as_allocation();
    const std::size_t n = specs.size();
    std::vector<Allocation> out(n);
    for (auto r : kAllResources) {
        const auto step = board::step_of(quanta, r);
        if (step <= 0 || capacity[r] <= 0) continue;
        const auto units = capacity[r] / step;
        std::vector<double> demand(n);
        std::vector<std::int64_t> floors(n);
        for (std::size_t i = 0; i < n; ++i) {
            demand[i] = profiling::peak_demand(specs[i].profile)[index_of(r)];
            floors[i] = (specs[i].profile.r_min[r] + step - 1) / step;
        }
        if (std::accumulate(demand.begin(), demand.end(), 0.0) <= 0.0) {
            throw Error(ErrorCode::ZeroTotalDemand,
                        "no VM has demand for " + std::string(to_string(r)), std::nullopt,
                        std::string(to_string(r)));
        }
        const bool floors_fit = std::accumulate(floors.begin(), floors.end(), std::int64_t{0}) <= units;
        std::vector<bool> active(n, true);
        std::vector<std::int64_t> shares(n, 0);
        std::int64_t pinned_units = 0;
        while (true) {
            apportion(units - pinned_units, demand, active, shares);
            if (!floors_fit) break;
            bool lifted = false;
            for (std::size_t i = 0; i < n; ++i) {
                if (active[i] && shares[i] < floors[i]) {
                    shares[i] = floors[i];
                    active[i] = false;
                    pinned_units += floors[i];
                    lifted = true;
                }
            }
            if (!lifted || std::none_of(active.begin(), active.end(), [](bool a) { return a; })) break;
        }
        // All pinned: any leftover goes to the first VM so shares still sum to capacity.
        std::int64_t sum = std::accumulate(shares.begin(), shares.end(), std::int64_t{0});
        if (sum < units) shares[0] += units - sum;
        for (std::size_t i = 0; i < n; ++i) out[i][r] = shares[i] * step;
    }
    return out;
}

std::vector<Allocation> proportional_split(std::span<const objective::VmSpec> specs,
                                           const HardwareCapacity& cap) {
    return proportional_split(specs, cap, board::default_quanta(cap));
}

}  // namespace hyperscen::alloc
