#include "hyperscen/qos_model.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "hyperscen/error.hpp"

namespace hyperscen::qos {

std::string_view to_string(ModelKind k) noexcept {
    return k == ModelKind::Throughput ? "throughput" : "latency";
}

std::string_view to_string(MetricKind k) noexcept {
    switch (k) {
        case MetricKind::Throughput: return "throughput";
        case MetricKind::Latency: return "latency";
        case MetricKind::Ratio: return "ratio";
    }
    return "?";
}

std::optional<ModelKind> model_kind_from_string(std::string_view s) noexcept {
    if (s == "throughput") return ModelKind::Throughput;
    if (s == "latency") return ModelKind::Latency;
    return std::nullopt;
}

std::optional<MetricKind> metric_kind_from_string(std::string_view s) noexcept {
    if (s == "throughput") return MetricKind::Throughput;
    if (s == "latency") return MetricKind::Latency;
    if (s == "ratio") return MetricKind::Ratio;
    return std::nullopt;
}

ModelKind model_kind_for(MetricKind kind) noexcept {
    return kind == MetricKind::Throughput ? ModelKind::Throughput : ModelKind::Latency;
}

// ---------------------------------------------------------------------------
// impact factor

ImpactFactor::ImpactFactor(double alpha, double r_min, double r_prof)
    : alpha_(alpha), r_min_(r_min), r_prof_(r_prof) {
    if (!std::isfinite(alpha) || !std::isfinite(r_min) || !std::isfinite(r_prof)) {
        throw Error(ErrorCode::InvalidParams, "impact factor parameters must be finite");
    }
    if (!(r_min < r_prof)) {
        throw Error(ErrorCode::InvalidParams, "impact factor needs r_min < r_prof");
    }
    if (!(alpha > 0.0) || !(alpha < alpha_bound())) {
        throw Error(ErrorCode::InvalidParams,
                    "alpha must lie in (0, 1/(r_prof - r_min)) = (0, " +
                        std::to_string(alpha_bound()) + "), got " + std::to_string(alpha));
    }
}

double ImpactFactor::saturating_branch(double r) const noexcept {
    return 1.0 - c() * std::exp(d() * (r - r_prof_));
}

double ImpactFactor::operator()(double r) const {
    if (r <= r_min_) {
        throw Error(ErrorCode::BelowMinimum, "allocation " + std::to_string(r) +
                                                 " is at or below the minimum " +
                                                 std::to_string(r_min_));
    }
    const double f = r < r_prof_ ? linear_branch(r) : saturating_branch(r);
    return std::clamp(f, kMinFactor, 1.0);
}

double impact_factor(const ImpactFactor& params, double r) { return params(r); }

double default_alpha(double r_min, double r_prof) { return 0.5 / (r_prof - r_min); }

// ---------------------------------------------------------------------------
// composition

void QosModel::validate() const {
    if (!(anchor > 0.0) || !std::isfinite(anchor)) {
        throw Error(ErrorCode::InvalidParams, "QoS anchor must be positive");
    }
    if (factors.empty()) {
        throw Error(ErrorCode::InvalidParams, "QoS model needs at least one impact factor");
    }
}

double compose_factors(const QosModel& model, const Allocation& r) {
    double f = 1.0;
    double at_prof = 1.0;
    for (const auto& [resource, factor] : model.factors) {
        const double amount = static_cast<double>(r[resource]);
        if (amount <= factor.r_min()) {
            throw Error(ErrorCode::BelowMinimum,
                        std::string(to_string(resource)) + " allocation " + std::to_string(amount) +
                            " is at or below its minimum " + std::to_string(factor.r_min()),
                        std::nullopt, std::string(to_string(resource)));
        }
        f *= factor(amount);
        at_prof *= factor(factor.r_prof());
    }
    return model.renormalize ? f / at_prof : f;
}

double predict_qos(const QosModel& model, const Allocation& r) {
    const double f = compose_factors(model, r);
    return model.kind == ModelKind::Throughput ? model.anchor * f : model.anchor / f;
}

// ---------------------------------------------------------------------------
// calibration

double calibrate_alpha(double anchor_qos, double r_prof, double r_min,
                       std::pair<double, double> low_point, ModelKind kind) {
    const auto [r_low, q_low] = low_point;
    if (!(anchor_qos > 0.0) || !(q_low > 0.0)) {
        throw Error(ErrorCode::InvalidParams, "QoS values must be positive");
    }
    if (!(r_min < r_low && r_low < r_prof)) {
        throw Error(ErrorCode::InvalidParams, "calibration point must satisfy r_min < r_low < r_prof");
    }
    const double ratio = kind == ModelKind::Throughput ? q_low / anchor_qos : anchor_qos / q_low;
    const double alpha = ratio / (r_low - r_min);
    const double bound = 1.0 / (r_prof - r_min);
    if (!(alpha > 0.0) || !(alpha < bound)) {
        throw Error(ErrorCode::CalibrationOutOfRange,
                    "implied alpha " + std::to_string(alpha) + " outside (0, " +
                        std::to_string(bound) + ")");
    }
    return alpha;
}

namespace {

// Grid scan followed by golden-section refinement inside the bracket around
// the best grid point. Only interior points of (lo, hi) are ever evaluated.
double minimize_on_interval(const std::function<double(double)>& objective, double lo, double hi) {
    constexpr int kGrid = 512;
    const double step = (hi - lo) / kGrid;
    int best = 1;
    double best_value = std::numeric_limits<double>::infinity();
    for (int j = 1; j < kGrid; ++j) {
        const double v = objective(lo + step * j);
        if (v < best_value) {
            best_value = v;
            best = j;
        }
    }
    double a = lo + step * (best - 1);
    double b = lo + step * (best + 1);
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = b - inv_phi * (b - a);
    double x2 = a + inv_phi * (b - a);
    double f1 = objective(x1);
    double f2 = objective(x2);
    for (int it = 0; it < 200 && (b - a) > 1e-15 * (hi - lo); ++it) {
        if (f1 <= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = objective(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = objective(x2);
        }
    }
    const double mid = 0.5 * (a + b);
    const double candidate = f1 <= f2 ? x1 : x2;
    const double fm = objective(mid);
    if (fm <= std::min(f1, f2) && fm <= best_value) return mid;
    if (std::min(f1, f2) <= best_value) return candidate;
    return lo + step * best;
}

double predict_single(double alpha, double r_min, double r_prof, double anchor, ModelKind kind,
                      bool renormalize, double r) {
    const ImpactFactor factor(alpha, r_min, r_prof);
    double f = factor(r);
    if (renormalize) f /= factor(r_prof);
    return kind == ModelKind::Throughput ? anchor * f : anchor / f;
}

}  // namespace

double fit_alpha_least_squares(std::span<const Sample> samples, double anchor, double r_min,
                               double r_prof, ModelKind kind, bool renormalize) {
    if (!(r_min < r_prof)) {
        throw Error(ErrorCode::InvalidParams, "fit needs r_min < r_prof");
    }
    std::vector<Sample> usable;
    for (const auto& s : samples) {
        if (s.r > r_min) usable.push_back(s);
    }
    if (usable.size() < 2) {
        throw Error(ErrorCode::DegenerateSamples, "need at least two samples above r_min");
    }
    const bool all_same = std::all_of(usable.begin(), usable.end(),
                                      [&](const Sample& s) { return s.r == usable.front().r; });
    if (all_same) {
        throw Error(ErrorCode::DegenerateSamples, "all samples share the same allocation");
    }
    auto sse = [&](double alpha) {
        double total = 0.0;
        for (const auto& s : usable) {
            const double e =
                s.q - predict_single(alpha, r_min, r_prof, anchor, kind, renormalize, s.r);
            total += e * e;
        }
        return total;
    };
    return minimize_on_interval(sse, 0.0, 1.0 / (r_prof - r_min));
}

double squared_error(const QosModel& model, std::span<const AllocationSample> samples) {
    double total = 0.0;
    for (const auto& s : samples) {
        const double e = s.q - predict_qos(model, s.r);
        total += e * e;
    }
    return total;
}

namespace {

bool above_minimum(const QosModel& model, const Allocation& r) {
    return std::all_of(model.factors.begin(), model.factors.end(), [&](const auto& kv) {
        return static_cast<double>(r[kv.first]) > kv.second.r_min();
    });
}

double best_anchor(const QosModel& model, std::span<const AllocationSample> samples) {
    // q = A * g with g = F (throughput) or 1/F (latency): A = sum(q g) / sum(g^2).
    double num = 0.0;
    double den = 0.0;
    for (const auto& s : samples) {
        const double f = compose_factors(model, s.r);
        const double g = model.kind == ModelKind::Throughput ? f : 1.0 / f;
        num += s.q * g;
        den += g * g;
    }
    return den > 0.0 && num > 0.0 ? num / den : model.anchor;
}

}  // namespace

QosModel calibrate_model(const QosModel& initial, std::span<const AllocationSample> samples,
                         int rounds) {
    initial.validate();
    std::vector<AllocationSample> usable;
    for (const auto& s : samples) {
        if (above_minimum(initial, s.r)) usable.push_back(s);
    }
    if (usable.size() < 2) {
        throw Error(ErrorCode::DegenerateSamples, "need at least two usable samples to calibrate");
    }
    QosModel model = initial;
    model.anchor = best_anchor(model, usable);
    for (int round = 0; round < rounds; ++round) {
        for (auto& [resource, factor] : model.factors) {
            const double r_min = factor.r_min();
            const double r_prof = factor.r_prof();
            // The anchor is re-solved for every trial alpha; the two are strongly
            // coupled and alternating them one at a time converges slowly.
            auto sse = [&](double alpha) {
                QosModel trial = model;
                trial.factors.insert_or_assign(resource, ImpactFactor(alpha, r_min, r_prof));
                trial.anchor = best_anchor(trial, usable);
                return squared_error(trial, usable);
            };
            const double alpha = minimize_on_interval(sse, 0.0, 1.0 / (r_prof - r_min));
            factor = ImpactFactor(alpha, r_min, r_prof);
        }
        model.anchor = best_anchor(model, usable);
    }
    return model;
}

// ---------------------------------------------------------------------------
// scoring

double normalize_score(const QosMetricSpec& spec, double q) {
    if (!(spec.slo_target > 0.0)) {
        throw Error(ErrorCode::InvalidParams, "slo_target must be positive for metric " + spec.name);
    }
    const double x = q / spec.slo_target;
    switch (spec.kind) {
        case MetricKind::Latency: return std::clamp(1.0 - x, 0.0, 1.0);
        case MetricKind::Throughput: return std::clamp(x, 0.0, 1.0);
        case MetricKind::Ratio:
            if (q <= spec.slo_target) return 1.0;
            return std::max(0.0, 1.0 - 10.0 * (q - spec.slo_target) / spec.slo_target);
    }
    return 0.0;
}

std::vector<QosMetricSpec> qos_template(WorkloadClass cls) {
    switch (cls) {
        case WorkloadClass::Gaming:
            // FPS : latency = 8 : 2
            return {{"fps", MetricKind::Throughput, 0.8, 60.0},
                    {"frame_time_jitter_ms", MetricKind::Latency, 0.2, 4.0}};
        case WorkloadClass::AiInference:
            return {{"p99_latency_ms", MetricKind::Latency, 0.8, 200.0},
                    {"tokens_per_s", MetricKind::Throughput, 0.2, 20.0}};
        case WorkloadClass::WebMicroservice:
            return {{"p99_latency_us", MetricKind::Latency, 0.8, 500.0},
                    {"rps_under_slo", MetricKind::Throughput, 0.2, 1000.0}};
        case WorkloadClass::RtosControl:
            return {{"deadline_miss_ratio", MetricKind::Ratio, 0.8, 0.001},
                    {"jitter_us", MetricKind::Latency, 0.2, 50.0}};
    }
    return {};
}

// ---------------------------------------------------------------------------
// curve library

namespace curves {

double saturation(double q_max, double a, double x) { return q_max * (1.0 - std::exp(-a * x)); }

double memory_knee(double l0, double l_page, double beta, double wss, double m) {
    if (!(wss > 0.0)) throw Error(ErrorCode::InvalidParams, "memory_knee needs wss > 0");
    return l0 + l_page * std::exp(beta * std::max(0.0, (wss - m) / wss));
}

double michaelis_menten(double t_inf, double k_half, double c) { return t_inf * c / (k_half + c); }

}  // namespace curves

}  // namespace hyperscen::qos
