#include "hyperscen/profiling.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <tuple>

#include "hyperscen/error.hpp"

namespace hyperscen::profiling {

namespace {

constexpr std::array<std::string_view, 8> kColumns{
    "timestamp_ms", "cpu_p_util_pct", "cpu_e_util_pct",    "mem_rss_mib",
    "swap_mib",     "page_faults_per_s", "gpu_busy_pct", "gpu_mem_mib"};

std::string_view strip_cr(std::string_view line) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.remove_suffix(1);
    return line;
}

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

template <typename T>
T parse_number(std::string_view text, std::size_t row, std::string_view column) {
    while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
    while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
    T value{};
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (text.empty() || ec != std::errc{} || ptr != end) {
        throw Error(ErrorCode::MalformedCsv,
                    "row " + std::to_string(row) + " column " + std::string(column) +
                        ": not a number '" + std::string(text) + "'",
                    row, std::string(column));
    }
    if constexpr (std::is_floating_point_v<T>) {
        if (!std::isfinite(value)) {
            throw Error(ErrorCode::MalformedCsv,
                        "row " + std::to_string(row) + " column " + std::string(column) +
                            ": non-finite value",
                        row, std::string(column));
        }
    }
    return value;
}

void check_range(double value, double lo, double hi, std::size_t row, std::string_view column) {
    if (value < lo || value > hi) {
        throw Error(ErrorCode::OutOfRangeValue,
                    "row " + std::to_string(row) + " column " + std::string(column) + ": value " +
                        std::to_string(value) + " outside [" + std::to_string(lo) + ", " +
                        (std::isinf(hi) ? std::string("inf") : std::to_string(hi)) + "]",
                    row, std::string(column));
    }
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

double median_of(std::vector<double> values) {
    const std::size_t n = values.size();
    const std::size_t mid = n / 2;
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
    const double upper = values[mid];
    if (n % 2 == 1) return upper;
    const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

template <typename Field>
UtilStats stats_of(const TraceSeries& trace, Field field) {
    std::vector<double> values;
    values.reserve(trace.samples.size());
    for (const auto& s : trace.samples) values.push_back(field(s));
    return {*std::max_element(values.begin(), values.end()), median_of(values)};
}

std::int64_t ceil_units(double value) {
    // Absorb floating noise such as 50% x 6 cores = 3.0000000000000004.
    return static_cast<std::int64_t>(std::ceil(value - 1e-9));
}

std::int64_t step_or_one(const board::QuantumSet& quanta, Resource r) {
    const auto step = board::step_of(quanta, r);
    return step > 0 ? step : 1;
}

}  // namespace

// ---------------------------------------------------------------------------
// CSV

TraceSeries ingest_trace(std::string_view csv_text) {
    TraceSeries trace;
    std::size_t pos = 0;
    bool header_seen = false;
    std::size_t row = 0;
    while (pos <= csv_text.size()) {
        auto nl = csv_text.find('\n', pos);
        if (nl == std::string_view::npos) nl = csv_text.size();
        const std::string_view line = strip_cr(csv_text.substr(pos, nl - pos));
        pos = nl + 1;
        if (!header_seen) {
            if (line != kTraceHeader) {
                throw Error(ErrorCode::MalformedCsv,
                            "unexpected header '" + std::string(line) + "', expected '" +
                                std::string(kTraceHeader) + "'",
                            0);
            }
            header_seen = true;
            continue;
        }
        if (line.empty()) continue;
        ++row;
        const auto cells = split_commas(line);
        if (cells.size() != kColumns.size()) {
            throw Error(ErrorCode::MalformedCsv,
                        "row " + std::to_string(row) + ": expected " +
                            std::to_string(kColumns.size()) + " columns, got " +
                            std::to_string(cells.size()),
                        row);
        }
        TraceSample s;
        s.timestamp_ms = parse_number<std::int64_t>(cells[0], row, kColumns[0]);
        double* fields[] = {&s.cpu_p_util_pct,    &s.cpu_e_util_pct, &s.mem_rss_mib, &s.swap_mib,
                            &s.page_faults_per_s, &s.gpu_busy_pct,   &s.gpu_mem_mib};
        for (std::size_t c = 1; c < kColumns.size(); ++c) {
            *fields[c - 1] = parse_number<double>(cells[c], row, kColumns[c]);
        }
        if (!trace.samples.empty() && s.timestamp_ms <= trace.samples.back().timestamp_ms) {
            throw Error(ErrorCode::NonMonotonicTimestamp,
                        "row " + std::to_string(row) + ": timestamp " +
                            std::to_string(s.timestamp_ms) + " does not increase",
                        row, "timestamp_ms");
        }
        constexpr double kInf = std::numeric_limits<double>::infinity();
        check_range(s.cpu_p_util_pct, 0, 100, row, kColumns[1]);
        check_range(s.cpu_e_util_pct, 0, 100, row, kColumns[2]);
        check_range(s.mem_rss_mib, 0, kInf, row, kColumns[3]);
        check_range(s.swap_mib, 0, kInf, row, kColumns[4]);
        check_range(s.page_faults_per_s, 0, kInf, row, kColumns[5]);
        check_range(s.gpu_busy_pct, 0, 100, row, kColumns[6]);
        check_range(s.gpu_mem_mib, 0, kInf, row, kColumns[7]);
        trace.samples.push_back(s);
    }
    if (!header_seen) throw Error(ErrorCode::MalformedCsv, "empty input, header missing", 0);
    return trace;
}

std::string write_trace_csv(const TraceSeries& trace) {
    std::string out(kTraceHeader);
    out += '\n';
    for (const auto& s : trace.samples) {
        out += std::to_string(s.timestamp_ms);
        for (double v : {s.cpu_p_util_pct, s.cpu_e_util_pct, s.mem_rss_mib, s.swap_mib,
                         s.page_faults_per_s, s.gpu_busy_pct, s.gpu_mem_mib}) {
            out += ',';
            out += format_double(v);
        }
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// summarization

std::int64_t round_up_to_quantum(double value, std::int64_t quantum) {
    if (value <= 0) return 0;
    return ceil_units(value / static_cast<double>(quantum)) * quantum;
}

ProfileVector summarize_profile(const TraceSeries& trace, const board::QuantumSet& quanta,
                                const Allocation& baseline) {
    if (trace.samples.empty()) throw Error(ErrorCode::EmptyTrace, "cannot summarize an empty trace");

    ProfileVector p;
    p.baseline = baseline;
    p.cpu_p = stats_of(trace, [](const TraceSample& s) { return s.cpu_p_util_pct; });
    p.cpu_e = stats_of(trace, [](const TraceSample& s) { return s.cpu_e_util_pct; });
    const UtilStats rss = stats_of(trace, [](const TraceSample& s) { return s.mem_rss_mib; });
    p.mem.peak_rss_mib = rss.max_pct;
    p.mem.wss_mib = rss.median_pct;
    p.mem.swap_seen = std::any_of(trace.samples.begin(), trace.samples.end(),
                                  [](const TraceSample& s) { return s.swap_mib > 0; });
    const UtilStats gpu = stats_of(trace, [](const TraceSample& s) { return s.gpu_busy_pct; });
    p.gpu.max_busy_pct = gpu.max_pct;
    p.gpu.median_busy_pct = gpu.median_pct;
    p.gpu.peak_mem_mib = stats_of(trace, [](const TraceSample& s) { return s.gpu_mem_mib; }).max_pct;

    const auto demand = peak_demand(p);
    for (auto r : kAllResources) {
        p.r_prof[r] = round_up_to_quantum(demand[index_of(r)], step_or_one(quanta, r));
    }
    p.r_min.c_p = p.r_prof.c_p > 0 ? step_or_one(quanta, Resource::PCore) : 0;
    p.r_min.c_e = p.r_prof.c_e > 0 ? step_or_one(quanta, Resource::ECore) : 0;
    p.r_min.mem_mib = std::min(
        p.r_prof.mem_mib, round_up_to_quantum(p.mem.wss_mib, step_or_one(quanta, Resource::Memory)));
    p.r_min.gpu_slices = p.r_prof.gpu_slices > 0 ? step_or_one(quanta, Resource::GpuSlice) : 0;
    return p;
}

std::array<double, kResourceCount> peak_demand(const ProfileVector& p) {
    std::array<double, kResourceCount> d{};
    d[index_of(Resource::PCore)] =
        static_cast<double>(ceil_units(p.cpu_p.max_pct / 100.0 * static_cast<double>(p.baseline.c_p)));
    d[index_of(Resource::ECore)] =
        static_cast<double>(ceil_units(p.cpu_e.max_pct / 100.0 * static_cast<double>(p.baseline.c_e)));
    d[index_of(Resource::Memory)] = p.mem.peak_rss_mib;
    d[index_of(Resource::GpuSlice)] = static_cast<double>(
        ceil_units(p.gpu.max_busy_pct / 100.0 * static_cast<double>(p.baseline.gpu_slices)));
    return d;
}

std::array<double, kResourceCount> utilization(const ProfileVector& p, const Allocation& r) {
    const auto demand = peak_demand(p);
    std::array<double, kResourceCount> u{};
    for (auto res : kAllResources) {
        const auto alloc = static_cast<double>(r[res]);
        u[index_of(res)] = alloc > 0 ? std::min(1.0, demand[index_of(res)] / alloc) : 0.0;
    }
    return u;
}

std::map<Resource, std::pair<double, double>> factor_bounds(const ProfileVector& p,
                                                            const board::QuantumSet& quanta) {
    std::map<Resource, std::pair<double, double>> out;
    for (auto r : kAllResources) {
        if (p.r_prof[r] <= 0) continue;
        const auto step = step_or_one(quanta, r);
        const auto floor = std::max<std::int64_t>(p.r_min[r], step);
        const double r_min = static_cast<double>(floor - step);
        const double r_prof = static_cast<double>(p.r_prof[r]);
        if (r_min < r_prof) out.emplace(r, std::make_pair(r_min, r_prof));
    }
    return out;
}

qos::QosModel model_from_profile(qos::ModelKind kind, double anchor, const ProfileVector& p,
                                 const board::QuantumSet& quanta, double alpha_fraction) {
    qos::QosModel model;
    model.kind = kind;
    model.anchor = anchor;
    model.renormalize = true;
    for (const auto& [r, bounds] : factor_bounds(p, quanta)) {
        const auto [r_min, r_prof] = bounds;
        model.factors.emplace(r, qos::ImpactFactor(alpha_fraction / (r_prof - r_min), r_min, r_prof));
    }
    model.validate();
    return model;
}

// ---------------------------------------------------------------------------
// synthetic traces

TraceSeries generate_synthetic_trace(const SyntheticTraceSpec& spec) {
    Rng rng(spec.seed);
    TraceSeries trace;
    trace.samples.reserve(spec.samples);
    auto pct = [](double v) { return std::clamp(v, 0.0, 100.0); };
    auto nonneg = [](double v) { return std::max(0.0, v); };
    // Every branch draws the same number of values per sample regardless of
    // `size`, so memory signals scale exactly linearly with it.
    for (std::size_t i = 0; i < spec.samples; ++i) {
        TraceSample s;
        s.timestamp_ms = static_cast<std::int64_t>(i) * spec.interval_ms;
        const double n1 = rng.normal();
        const double n2 = rng.normal();
        const double n3 = rng.normal();
        const double u1 = rng.uniform();
        const double u2 = rng.uniform();
        const bool burst = rng.bernoulli(0.1);
        switch (spec.cls) {
            case WorkloadClass::Gaming:
                s.cpu_p_util_pct = pct(55 + 8 * n1);
                s.cpu_e_util_pct = pct(12 + 4 * n2);
                s.mem_rss_mib = spec.size * 4096 * (0.85 + 0.15 * u1);
                s.gpu_busy_pct = pct(80 + 6 * n3);
                s.gpu_mem_mib = spec.size * 1600 * (0.9 + 0.1 * u2);
                s.page_faults_per_s = nonneg(200 + 50 * n2);
                break;
            case WorkloadClass::AiInference:
                s.cpu_p_util_pct = pct(70 + 10 * n1);
                s.cpu_e_util_pct = pct(35 + 8 * n2);
                s.mem_rss_mib = spec.size * 9216 * (0.8 + 0.2 * u1);
                s.swap_mib = burst && u2 > 0.8 ? spec.size * 64 * u2 : 0.0;
                s.gpu_busy_pct = pct(60 + 10 * n3);
                s.gpu_mem_mib = spec.size * 4096 * (0.9 + 0.1 * u2);
                s.page_faults_per_s = nonneg(400 + 120 * n2);
                break;
            case WorkloadClass::WebMicroservice:
                s.cpu_p_util_pct = pct(20 + 5 * n1 + (burst ? 40 + 30 * u2 : 0.0));
                s.cpu_e_util_pct = pct(25 + 6 * n2 + (burst ? 20 + 20 * u2 : 0.0));
                s.mem_rss_mib = spec.size * 3072 * (0.7 + 0.3 * u1);
                s.gpu_busy_pct = pct(8 + 3 * n3);
                s.gpu_mem_mib = spec.size * 512 * (0.9 + 0.1 * u2);
                s.page_faults_per_s = nonneg(150 + 80 * n2 + (burst ? 300 : 0));
                break;
            case WorkloadClass::RtosControl:
                s.cpu_p_util_pct = pct(30 + 3 * n1);
                s.cpu_e_util_pct = pct(2 + 1 * n2);
                s.mem_rss_mib = spec.size * 512 * (0.95 + 0.05 * u1);
                s.gpu_busy_pct = 0.0;
                s.gpu_mem_mib = 0.0;
                s.page_faults_per_s = nonneg(5 + 2 * n3);
                break;
        }
        trace.samples.push_back(s);
    }
    return trace;
}

// ---------------------------------------------------------------------------
// oracle + dataset

double OracleModel::measure(const Allocation& r) const {
    double f = 1.0;
    double at_prof = 1.0;
    for (const auto& [resource, factor] : truth.factors) {
        const double amount = static_cast<double>(r[resource]);
        if (amount <= factor.r_min()) {
            return truth.kind == qos::ModelKind::Throughput ? 0.0 : 1e12;
        }
        const auto it = gamma.find(resource);
        const double g = it == gamma.end() ? 1.0 : it->second;
        f *= std::pow(factor(amount), g);
        at_prof *= std::pow(factor(factor.r_prof()), g);
    }
    if (truth.renormalize) f /= at_prof;
    return truth.kind == qos::ModelKind::Throughput ? truth.anchor * f : truth.anchor / f;
}

double OracleModel::measure_noisy(const Allocation& r, Rng& rng) const {
    return measure(r) * rng.uniform(1.0 - noise, 1.0 + noise);
}

WorkloadClass workload_class_of(std::string_view workload_id) {
    const auto dash = workload_id.rfind('-');
    const auto cls = workload_class_from_string(workload_id.substr(0, dash));
    if (!cls) {
        throw Error(ErrorCode::InvalidValue, "cannot infer workload class from id '" +
                                                 std::string(workload_id) + "'");
    }
    return *cls;
}

HardwareCapacity synthetic_profiling_board() {
    HardwareCapacity cap;
    cap.p_cores = 6;
    cap.e_cores = 8;
    cap.memory_mib = 65536;
    cap.gpu_slices = 10;
    cap.gpu_slice_percent = 10;
    cap.gpu_mem_mib = 16384;
    return cap;
}

OracleModel make_oracle(qos::ModelKind kind, double anchor, const ProfileVector& profile,
                        const board::QuantumSet& quanta, Rng& rng, double noise) {
    OracleModel oracle;
    oracle.noise = noise;
    oracle.truth.kind = kind;
    oracle.truth.anchor = anchor;
    oracle.truth.renormalize = true;
    for (const auto& [r, bounds] : factor_bounds(profile, quanta)) {
        const auto [r_min, r_prof] = bounds;
        const double fraction = rng.uniform(0.6, 0.95);
        oracle.truth.factors.emplace(r, qos::ImpactFactor(fraction / (r_prof - r_min), r_min, r_prof));
        oracle.gamma.emplace(r, rng.uniform(0.75, 1.25));
    }
    oracle.truth.validate();
    return oracle;
}

namespace {

struct ClassTraits {
    qos::ModelKind kind;
    double anchor_lo;
    double anchor_hi;
};

ClassTraits traits_of(WorkloadClass cls) {
    switch (cls) {
        case WorkloadClass::Gaming: return {qos::ModelKind::Throughput, 45.0, 75.0};  // FPS
        case WorkloadClass::AiInference: return {qos::ModelKind::Throughput, 60.0, 120.0};  // tokens/s
        case WorkloadClass::WebMicroservice: return {qos::ModelKind::Latency, 150.0, 350.0};  // us
        case WorkloadClass::RtosControl: return {qos::ModelKind::Latency, 20.0, 60.0};  // us
    }
    return {qos::ModelKind::Throughput, 1.0, 2.0};
}

// Sweep interval per resource: from halfway between the factor's r_min and
// r_prof up to twice r_prof (capped near the profiling grant).
struct SweepRange {
    std::int64_t lo;
    std::int64_t hi;
    std::int64_t step;
};

std::int64_t draw_on_grid(const SweepRange& s, Rng& rng) {
    const auto n = (s.hi - s.lo) / s.step;
    return s.lo + rng.uniform_int(0, n) * s.step;
}

}  // namespace

Dataset generate_dataset(std::size_t n_per_class, std::uint64_t seed) {
    if (n_per_class < 1) throw Error(ErrorCode::InvalidParams, "n_per_class must be >= 1");
    const HardwareCapacity board = synthetic_profiling_board();
    const auto quanta = board::default_quanta(board);
    const Allocation grant = board.as_allocation();

    Dataset out;
    std::uint64_t class_no = 0;
    for (auto cls : kDatasetClasses) {
        const auto traits = traits_of(cls);
        const auto workloads = std::min<std::size_t>(kWorkloadsPerClass, n_per_class);
        for (std::size_t w = 0; w < workloads; ++w) {
            Rng rng(derive_seed(seed, class_no * 1000 + w));
            char id_buf[64];
            std::snprintf(id_buf, sizeof(id_buf), "%s-%02zu", std::string(to_string(cls)).c_str(), w);
            const std::string id = id_buf;

            SyntheticTraceSpec ts;
            ts.cls = cls;
            ts.size = rng.uniform(0.6, 1.6);
            ts.seed = rng.next();
            const auto profile = summarize_profile(generate_synthetic_trace(ts), quanta, grant);
            const double anchor = rng.uniform(traits.anchor_lo, traits.anchor_hi);
            OracleModel oracle = make_oracle(traits.kind, anchor, profile, quanta, rng);

            std::map<Resource, SweepRange> ranges;
            for (const auto& [r, f] : oracle.truth.factors) {
                const auto step = step_or_one(quanta, r);
                const double mid = f.r_min() + 0.5 * (f.r_prof() - f.r_min());
                auto lo = std::max(round_up_to_quantum(mid, step),
                                   static_cast<std::int64_t>(f.r_min()) + step);
                const auto prof = static_cast<std::int64_t>(f.r_prof());
                auto hi = std::max(prof + step, std::min(2 * prof, std::max(grant[r], prof)));
                hi = (hi / step) * step;
                lo = std::min(lo, prof);
                ranges.emplace(r, SweepRange{lo, hi, step});
            }

            const std::size_t count = n_per_class / workloads + (w < n_per_class % workloads ? 1 : 0);
            std::set<Allocation> seen;
            std::size_t attempts = 0;
            std::size_t t = 0;
            while (seen.size() < count) {
                if (++attempts > 100000) {
                    throw Error(ErrorCode::InvalidParams, "could not draw enough unique allocations for " + id);
                }
                Allocation r = profile.r_prof;
                if (t > 0) {
                    // Groups cycle: memory-only, P-core-only, GPU-only, E-core-only, mixed.
                    const std::array<Resource, 4> single{Resource::Memory, Resource::PCore,
                                                         Resource::GpuSlice, Resource::ECore};
                    const auto group = (t - 1) % 5;
                    if (group < 4) {
                        const auto it = ranges.find(single[group]);
                        if (it == ranges.end()) {
                            ++t;
                            continue;
                        }
                        r[it->first] = draw_on_grid(it->second, rng);
                    } else {
                        for (const auto& [res, range] : ranges) r[res] = draw_on_grid(range, rng);
                    }
                }
                ++t;
                if (!seen.insert(r).second) continue;
                DatasetRecord rec;
                rec.workload_id = id;
                rec.r = r;
                rec.p = profile;
                rec.qos_kind = traits.kind;
                rec.qos_value = oracle.measure_noisy(r, rng);
                rec.util = utilization(profile, r);
                out.records.push_back(std::move(rec));
            }
            out.oracles.emplace(id, std::move(oracle));
        }
        ++class_no;
    }
    return out;
}

}  // namespace hyperscen::profiling
