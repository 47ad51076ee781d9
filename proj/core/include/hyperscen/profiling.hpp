#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "hyperscen/board.hpp"
#include "hyperscen/qos_model.hpp"
#include "hyperscen/random.hpp"
#include "hyperscen/types.hpp"

namespace hyperscen::profiling {

inline constexpr std::string_view kTraceHeader =
    "timestamp_ms,cpu_p_util_pct,cpu_e_util_pct,mem_rss_mib,swap_mib,page_faults_per_s,"
    "gpu_busy_pct,gpu_mem_mib";

struct TraceSample {
    std::int64_t timestamp_ms = 0;
    double cpu_p_util_pct = 0;
    double cpu_e_util_pct = 0;
    double mem_rss_mib = 0;
    double swap_mib = 0;
    double page_faults_per_s = 0;
    double gpu_busy_pct = 0;
    double gpu_mem_mib = 0;

    friend bool operator==(const TraceSample&, const TraceSample&) = default;
};

struct TraceSeries {
    std::vector<TraceSample> samples;

    friend bool operator==(const TraceSeries&, const TraceSeries&) = default;
};

/// Parse a trace CSV (header must equal kTraceHeader). Rows are 1-based data
/// rows in error reports. Throws MalformedCsv, NonMonotonicTimestamp or
/// OutOfRangeValue.
TraceSeries ingest_trace(std::string_view csv_text);

/// Canonical CSV text; ingest_trace(write_trace_csv(t)) == t.
std::string write_trace_csv(const TraceSeries& trace);

struct UtilStats {
    double max_pct = 0;
    double median_pct = 0;
    friend bool operator==(const UtilStats&, const UtilStats&) = default;
};

struct MemoryStats {
    double peak_rss_mib = 0;
    double wss_mib = 0;
    bool swap_seen = false;
    friend bool operator==(const MemoryStats&, const MemoryStats&) = default;
};

struct GpuStats {
    double max_busy_pct = 0;
    double median_busy_pct = 0;
    double peak_mem_mib = 0;
    friend bool operator==(const GpuStats&, const GpuStats&) = default;
};

/// Condensed workload demand of one VM.
///
/// `baseline` is the grant the workload ran under while being profiled;
/// utilization percentages are relative to it. `r_prof` is the peak demand
/// envelope rounded up to quanta and `r_min` the lowest usable allocation
/// per resource (inclusive).
struct ProfileVector {
    UtilStats cpu_p;
    UtilStats cpu_e;
    MemoryStats mem;
    GpuStats gpu;
    Allocation baseline;
    Allocation r_prof;
    Allocation r_min;

    friend bool operator==(const ProfileVector&, const ProfileVector&) = default;
};

/// Max/median per column; WSS = median RSS; r_prof and r_min as documented
/// on ProfileVector. Throws EmptyTrace.
ProfileVector summarize_profile(const TraceSeries& trace, const board::QuantumSet& quanta,
                                const Allocation& baseline);

/// Peak demand per resource in native units: cores (rounded up), MiB of peak
/// RSS, GPU slices (rounded up). Indexed by index_of(Resource).
std::array<double, kResourceCount> peak_demand(const ProfileVector& p);

/// Smallest multiple of `quantum` that is >= value.
std::int64_t round_up_to_quantum(double value, std::int64_t quantum);

/// Impact-factor bounds (r_min, r_prof) implied by a profile, for every
/// resource the workload actually uses. The factor's r_min is exclusive (F
/// reaches zero there), so it sits one quantum below the profile's inclusive
/// lowest usable allocation.
std::map<Resource, std::pair<double, double>> factor_bounds(const ProfileVector& p,
                                                            const board::QuantumSet& quanta);

/// Parametric model over factor_bounds(p) with alpha = fraction / (r_prof - r_min)
/// for every factor (0.5 is the neutral default).
qos::QosModel model_from_profile(qos::ModelKind kind, double anchor, const ProfileVector& p,
                                 const board::QuantumSet& quanta, double alpha_fraction = 0.5);

/// Parameters of a synthetic trace. `size` scales every memory-like signal.
struct SyntheticTraceSpec {
    WorkloadClass cls = WorkloadClass::Gaming;
    double size = 1.0;
    std::size_t samples = 120;
    std::int64_t interval_ms = 1000;
    std::uint64_t seed = 0;
};

/// Class-shaped deterministic trace: Gaming is GPU-heavy, AI memory-heavy,
/// Web has bursty CPU, RTOS is small and steady.
TraceSeries generate_synthetic_trace(const SyntheticTraceSpec& spec);

/// Hidden ground truth used to synthesize QoS observations: a parametric
/// model whose factors are additionally bent by a per-resource exponent
/// (F_k^gamma_k) so that the parametric family cannot fit it exactly, plus
/// bounded multiplicative noise.
struct OracleModel {
    qos::QosModel truth;
    std::map<Resource, double> gamma;
    double noise = 0.05;

    /// Noise-free QoS at r. Allocations at or below a minimum give 0
    /// throughput or an effectively infinite latency.
    double measure(const Allocation& r) const;

    /// measure(r) scaled by a uniform factor in [1 - noise, 1 + noise].
    double measure_noisy(const Allocation& r, Rng& rng) const;

    friend bool operator==(const OracleModel&, const OracleModel&) = default;
};

struct DatasetRecord {
    std::string workload_id;
    Allocation r;
    ProfileVector p;
    qos::ModelKind qos_kind = qos::ModelKind::Throughput;
    double qos_value = 0;
    std::array<double, kResourceCount> util{};

    friend bool operator==(const DatasetRecord&, const DatasetRecord&) = default;
};

/// Class encoded in a workload id of the form "<class>-<index>".
WorkloadClass workload_class_of(std::string_view workload_id);

struct Dataset {
    std::vector<DatasetRecord> records;
    std::map<std::string, OracleModel> oracles;
};

/// Number of distinct workloads generated per class.
inline constexpr int kWorkloadsPerClass = 2;

/// Classes covered by generate_dataset: two throughput classes (Gaming FPS,
/// AI tokens/s) and one latency class (Web p99).
inline constexpr std::array<WorkloadClass, 3> kDatasetClasses{
    WorkloadClass::Gaming, WorkloadClass::AiInference, WorkloadClass::WebMicroservice};

/// Profiling grant used for synthetic workloads (a 6P/8E/64 GiB/10-slice board).
HardwareCapacity synthetic_profiling_board();

/// Build the ground-truth oracle for a profiled workload.
OracleModel make_oracle(qos::ModelKind kind, double anchor, const ProfileVector& profile,
                        const board::QuantumSet& quanta, Rng& rng, double noise = 0.05);

/// n_per_class records for each class in kDatasetClasses, ordered by
/// (class, index). Each workload gets a base record at r_prof, one-resource
/// sweeps (memory first) and random multi-resource perturbations; no
/// (workload_id, r) pair repeats.
Dataset generate_dataset(std::size_t n_per_class, std::uint64_t seed);

/// min(1, demand / allocated) per resource; 0 where nothing is allocated.
std::array<double, kResourceCount> utilization(const ProfileVector& p, const Allocation& r);

}  // namespace hyperscen::profiling
