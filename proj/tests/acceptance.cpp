// Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.
// The model comparison is also repeated on held-out dataset seeds; those
// lines are informational and do not affect the result.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "hyperscen/allocator.hpp"
#include "hyperscen/board.hpp"
#include "hyperscen/mlp.hpp"
#include "hyperscen/objective.hpp"
#include "hyperscen/profiling.hpp"
#include "hyperscen/qos_model.hpp"
#include "hyperscen/refinement.hpp"
#include "hyperscen/scenario.hpp"
#include "support.hpp"

using namespace hyperscen;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

int failures = 0;

void report(int id, const char* name, double limit_s, const std::function<Outcome()>& check) {
    const auto t0 = Clock::now();
    Outcome out;
    try {
        out = check();
    } catch (const std::exception& e) {
        out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    if (limit_s > 0 && secs > limit_s) {
        out.pass = false;
        out.detail += " (over the " + std::to_string(limit_s) + " s limit)";
    }
    if (!out.pass) ++failures;
    std::printf("%s %2d %-28s %7.2fs  %s\n", out.pass ? "PASS" : "FAIL", id, name, secs, out.detail.c_str());
    std::fflush(stdout);
}

qos::ImpactFactor random_factor(Rng& rng) {
    const double r_min = rng.uniform(0.0, 8.0);
    const double r_prof = r_min + rng.uniform(1.0, 64.0);
    const double alpha = rng.uniform(0.05, 0.95) / (r_prof - r_min);
    return {alpha, r_min, r_prof};
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

char buf[512];

template <typename... Args>
std::string fmt(const char* f, Args... args) {
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

Outcome continuity() {
    Rng rng(1);
    double worst_gap = 0, worst_slope = 0;
    for (int i = 0; i < 1000; ++i) {
        const auto f = random_factor(rng);
        const double rp = f.r_prof();
        worst_gap = std::max(worst_gap, std::abs(f.linear_branch(rp) - f.saturating_branch(rp)));
        const double h = 1e-7 * (rp - f.r_min());
        const double left = (f(rp) - f(rp - h)) / h;
        const double right = (f(rp + h) - f(rp)) / h;
        worst_slope = std::max({worst_slope, std::abs(left - f.alpha()) / f.alpha(),
                                std::abs(right - f.alpha()) / f.alpha()});
    }
    return {worst_gap <= 1e-12 && worst_slope <= 1e-4,
            fmt("max branch gap %.2e (<=1e-12), max slope rel err %.2e (<=1e-4)", worst_gap, worst_slope)};
}

Outcome point_checks() {
    const qos::ImpactFactor f(0.1, 0.0, 8.0);
    const double at4 = f(4.0), at12 = f(12.0);
    // Closed form: c = 1 - 0.1 * 8 = 0.2, d = -0.1 / 0.2.
    const double oracle12 = 1.0 - 0.2 * std::exp(-0.5 * 4.0);
    return {at4 == 0.4 && std::abs(at12 - 0.97293) <= 1e-5 && std::abs(at12 - oracle12) <= 1e-15,
            fmt("F(4)=%.17g F(12)=%.8f", at4, at12)};
}

Outcome monotonicity() {
    Rng rng(3);
    int violations = 0;
    for (int i = 0; i < 100; ++i) {
        const auto f = random_factor(rng);
        const double lo = f.r_min() + 1e-6 * (f.r_prof() - f.r_min());
        // Past one span above r_prof a steep factor rounds to exactly 1 in double.
        const double hi = f.r_prof() + (f.r_prof() - f.r_min());
        double prev = f(lo);
        for (int k = 1; k < 1000; ++k) {
            const double v = f(lo + (hi - lo) * k / 999.0);
            if (!(v > prev)) ++violations;
            prev = v;
        }
    }
    int score_violations = 0;
    for (auto kind : {qos::MetricKind::Throughput, qos::MetricKind::Latency, qos::MetricKind::Ratio}) {
        const qos::QosMetricSpec spec{"m", kind, 1.0, 10.0};
        const double sign = kind == qos::MetricKind::Throughput ? 1.0 : -1.0;
        double prev = qos::normalize_score(spec, 0.0);
        for (int k = 1; k <= 4000; ++k) {
            const double s = qos::normalize_score(spec, k * 0.01);
            if (sign * (s - prev) < 0) ++score_violations;
            prev = s;
        }
    }
    int perf_violations = 0;
    for (int i = 0; i < 200; ++i) {
        const auto inst = test::random_instance(rng, 1, 64);
        const auto& s = inst.specs[0];
        for (auto res : kAllResources) {
            const auto b = s.feasibility[res];
            if (b.max <= b.min) continue;
            const auto step = std::max<std::int64_t>(1, board::step_of(inst.quanta, res));
            Allocation a = inst.sets[0].candidates.front();
            a[res] = b.min;
            double prev = objective::vm_perf_score(s, a);
            for (auto v = b.min + step; v <= b.max; v += step) {
                a[res] = v;
                const double cur = objective::vm_perf_score(s, a);
                if (cur < prev - 1e-12) ++perf_violations;
                prev = cur;
            }
        }
    }
    return {violations == 0 && score_violations == 0 && perf_violations == 0,
            fmt("violations: F %d, normalize_score %d, vm_perf_score %d", violations, score_violations,
                perf_violations)};
}

Outcome utilization() {
    objective::VmSpec s = test::pcore_spec("vm", 1, 4);
    s.profile.mem.peak_rss_mib = 2048;
    s.profile.r_prof.mem_mib = 2048;
    s.profile.r_min.mem_mib = 1024;
    s.feasibility[Resource::Memory] = {1024, 8192};
    Allocation a;
    a.c_p = 2;
    a.mem_mib = 4096;
    const double u = objective::predicted_utilization(s, a)[index_of(Resource::Memory)];
    return {u == 0.5, fmt("U_mem = %.17g", u)};
}

Outcome oracle_equivalence() {
    Rng rng(5);
    int mismatches = 0, node_violations = 0, infeasible = 0;
    for (int i = 0; i < 500; ++i) {
        const auto inst = test::random_instance(rng, static_cast<std::size_t>(rng.uniform_int(1, 3)), 20);
        alloc::SearchResult brute;
        try {
            brute = alloc::brute_force_allocate(inst.specs, inst.cap, inst.sets);
        } catch (const Error&) {
            ++infeasible;
            bool threw = false;
            try {
                alloc::backtrack_allocate(inst.specs, inst.cap, inst.sets);
            } catch (const Error&) {
                threw = true;
            }
            if (!threw) ++mismatches;
            continue;
        }
        const auto on = alloc::backtrack_allocate(inst.specs, inst.cap, inst.sets);
        alloc::SearchOptions no_prune;
        no_prune.prune = false;
        const auto off = alloc::backtrack_allocate(inst.specs, inst.cap, inst.sets, no_prune);
        if (on.best_score != brute.best_score || on.allocations != brute.allocations) ++mismatches;
        if (off.best_score != on.best_score || off.allocations != on.allocations) ++mismatches;
        if (on.nodes_visited > off.nodes_visited) ++node_violations;
    }
    return {mismatches == 0 && node_violations == 0,
            fmt("500 instances (%d infeasible): mismatches %d, pruned>unpruned nodes %d", infeasible, mismatches,
                node_violations)};
}

Outcome capacity_safety() {
    Rng rng(6);
    int violations = 0, runs = 0, split_errors = 0;
    for (int i = 0; i < 1000; ++i) {
        const auto inst = test::random_instance(rng, static_cast<std::size_t>(rng.uniform_int(1, 4)), 24);
        try {
            const auto r = alloc::backtrack_allocate(inst.specs, inst.cap, inst.sets);
            ++runs;
            if (!alloc::within_capacity(r.allocations, inst.cap)) ++violations;
        } catch (const Error&) {
        }
        std::vector<std::vector<Allocation>> splits{alloc::equal_split(inst.specs, inst.cap, inst.quanta)};
        try {
            splits.push_back(alloc::proportional_split(inst.specs, inst.cap, inst.quanta));
        } catch (const Error&) {
        }
        const auto cap = inst.cap.as_allocation();
        for (const auto& split : splits) {
            Allocation total{};
            for (const auto& a : split) total += a;
            for (auto res : kAllResources) {
                const auto step = board::step_of(inst.quanta, res);
                if (step > 0 && total[res] != cap[res] / step * step) ++split_errors;
            }
        }
    }
    return {violations == 0 && split_errors == 0,
            fmt("%d feasible optimize runs: %d violations; split conservation errors %d", runs, violations,
                split_errors)};
}

Outcome refinement_trials() {
    const std::vector<alloc::Strategy> all{alloc::Strategy::EqualSplit, alloc::Strategy::ProportionalSplit,
                                           alloc::Strategy::OptimizedSplit};
    std::vector<std::vector<double>> trials(3);
    int unsatisfied = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto reports = alloc::compare_strategies(alloc::make_refinement_scenario(seed), all);
        for (std::size_t k = 0; k < 3; ++k) {
            trials[k].push_back(static_cast<double>(reports[k].trials));
            if (!reports[k].satisfied) ++unsatisfied;
        }
    }
    const double eq = median(trials[0]), prop = median(trials[1]), opt = median(trials[2]);
    return {opt < prop && opt < eq,
            fmt("median trials equal %.1f, proportional %.1f, optimized %.1f (%d runs unsatisfied)", eq, prop, opt,
                unsatisfied)};
}

bool pattern_holds(const learned::ComparisonReport& r) {
    return r.mlp.latency_train.mean < r.parametric.latency_train.mean &&
           r.mlp.throughput_train.mean < r.parametric.throughput_train.mean &&
           r.mlp.latency_gap_ratio() > r.parametric.latency_gap_ratio() &&
           r.mlp.throughput_gap_ratio() > r.parametric.throughput_gap_ratio();
}

Outcome model_comparison() {
    const auto data = profiling::generate_dataset(100, 42);
    const auto r = learned::compare_models(data.records, 5, 42);
    return {pattern_holds(r),
            fmt("%zu records; latency train MSE mlp %.4g vs param %.4g, gap %.3f vs %.3f; throughput train MSE "
                "mlp %.4g vs param %.4g, gap %.3f vs %.3f",
                data.records.size(), r.mlp.latency_train.mean, r.parametric.latency_train.mean,
                r.mlp.latency_gap_ratio(), r.parametric.latency_gap_ratio(), r.mlp.throughput_train.mean,
                r.parametric.throughput_train.mean, r.mlp.throughput_gap_ratio(),
                r.parametric.throughput_gap_ratio())};
}

Outcome calibration() {
    Rng rng(9);
    double worst_lsq = 0, worst_inv = 0;
    for (int i = 0; i < 200; ++i) {
        const auto f = random_factor(rng);
        const double anchor = rng.uniform(10.0, 1000.0);
        const auto kind = rng.bernoulli(0.5) ? qos::ModelKind::Throughput : qos::ModelKind::Latency;
        const auto q = [&](double r) { return kind == qos::ModelKind::Throughput ? anchor * f(r) : anchor / f(r); };
        const double span = f.r_prof() - f.r_min();
        std::vector<qos::Sample> samples;
        for (int k = 1; k <= 24; ++k) {
            const double r = f.r_min() + span * k / 12.0;
            samples.push_back({r, q(r)});
        }
        const double lsq = qos::fit_alpha_least_squares(samples, anchor, f.r_min(), f.r_prof(), kind);
        worst_lsq = std::max(worst_lsq, std::abs(lsq - f.alpha()) / f.alpha());
        const double r_low = f.r_min() + rng.uniform(0.1, 0.9) * span;
        const double inv = qos::calibrate_alpha(anchor, f.r_prof(), f.r_min(), {r_low, q(r_low)}, kind);
        worst_inv = std::max(worst_inv, std::abs(inv - f.alpha()) / f.alpha());
    }
    return {worst_lsq <= 1e-4 && worst_inv <= 1e-12,
            fmt("max rel err: least squares %.2e (<=1e-4), inversion %.2e (<=1e-12)", worst_lsq, worst_inv)};
}

Outcome format_stability() {
    using test::fixture;
    using test::slurp;
    int failed = 0;
    for (const char* name : {"board_testbed.xml", "board_no_gpu.xml"}) {
        const auto text = slurp(fixture(name));
        if (board::serialize_board_config(board::parse_board_config(text)) != text) ++failed;
    }
    const auto trace = slurp(fixture("trace_small.csv"));
    if (profiling::write_trace_csv(profiling::ingest_trace(trace)) != trace) ++failed;
    const auto scenario = slurp(fixture("scenario_testbed.json"));
    const auto doc = scenario::read_scenario(scenario);
    if (scenario::write_scenario(doc) != scenario) ++failed;
    if (scenario::emit_launch_script(doc) != slurp(fixture("launch_testbed.sh"))) ++failed;
    return {failed == 0, fmt("%d of 5 golden files differ after a round trip", failed)};
}

Outcome gradient_check() {
    Rng rng(11);
    double worst = 0;
    for (int net_i = 0; net_i < 20; ++net_i) {
        const auto d_in = static_cast<std::size_t>(rng.uniform_int(2, 8));
        learned::Network net(d_in, static_cast<std::size_t>(rng.uniform_int(2, 8)),
                             static_cast<std::size_t>(rng.uniform_int(2, 6)));
        net.initialize(rng);
        for (auto& p : net.parameters()) p += rng.uniform(-0.1, 0.1);
        const auto n = static_cast<std::size_t>(rng.uniform_int(3, 10));
        learned::Matrix x(n, d_in);
        for (auto& v : x.data) v = rng.uniform(-1.0, 1.0);
        std::vector<double> y(n);
        for (auto& v : y) v = rng.uniform(-2.0, 2.0);
        std::vector<std::size_t> rows(n);
        std::iota(rows.begin(), rows.end(), 0);
        std::vector<double> grad;
        net.loss_and_gradient(x, y, rows, grad);
        const double h = 1e-6;
        for (std::size_t k = 0; k < grad.size(); ++k) {
            auto plus = net, minus = net;
            plus.parameters()[k] += h;
            minus.parameters()[k] -= h;
            const double numeric = (plus.loss(x, y) - minus.loss(x, y)) / (2 * h);
            // Relative error with a tiny floor so exactly-zero gradients (dead ReLUs) compare cleanly.
            const double rel = std::abs(grad[k] - numeric) / std::max({std::abs(grad[k]), std::abs(numeric), 1e-6});
            worst = std::max(worst, rel);
        }
    }
    return {worst <= 1e-4, fmt("20 random networks, max rel err %.2e (<=1e-4)", worst)};
}

void robustness() {
    int held = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto r = learned::compare_models(profiling::generate_dataset(100, seed).records, 5, seed);
        const bool ok = pattern_holds(r);
        held += ok;
        std::printf("INFO     model comparison on dataset seed %2llu: %s\n", static_cast<unsigned long long>(seed),
                    ok ? "pattern holds" : "pattern does not hold");
        std::fflush(stdout);
    }
    std::printf("INFO     model comparison pattern held on %d of 10 held-out seeds\n", held);
}

}  // namespace

int main() {
    report(1, "impact-factor continuity", 1.0, continuity);
    report(2, "impact-factor point checks", 0.1, point_checks);
    report(3, "monotonicity", 5.0, monotonicity);
    report(4, "utilization example", 0.1, utilization);
    report(5, "brute-force equivalence", 30.0, oracle_equivalence);
    report(6, "capacity safety", 0.0, capacity_safety);
    report(7, "refinement trials", 60.0, refinement_trials);
    report(8, "MLP vs parametric MSE", 300.0, model_comparison);
    report(9, "calibration round trip", 0.0, calibration);
    report(10, "format stability", 0.0, format_stability);
    report(11, "MLP gradient check", 0.0, gradient_check);
    robustness();
    std::printf("%s: %d of 11 criteria failed\n", failures ? "FAIL" : "PASS", failures);
    return failures ? 1 : 0;
}
