#pragma once

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hyperscen/types.hpp"

namespace hyperscen::qos {

/// Kind of a response model: throughput scales with F, latency with 1/F.
enum class ModelKind : std::uint8_t { Throughput, Latency };

/// Kind of a scored metric. Ratio is a lower-is-better fraction with a hard
/// threshold (deadline-miss style).
enum class MetricKind : std::uint8_t { Throughput, Latency, Ratio };

std::string_view to_string(ModelKind k) noexcept;
std::string_view to_string(MetricKind k) noexcept;
std::optional<ModelKind> model_kind_from_string(std::string_view s) noexcept;
std::optional<MetricKind> metric_kind_from_string(std::string_view s) noexcept;

/// Smallest factor value ever returned; keeps latency predictions finite.
inline constexpr double kMinFactor = 1e-9;

/// Per-resource impact factor
///
///   F(r) = alpha * (r - r_min)                      r <  r_prof
///   F(r) = 1 - c * exp(d * (r - r_prof))            r >= r_prof
///
/// with c = 1 - alpha * (r_prof - r_min) and d = -alpha / c, which makes the
/// two branches meet with equal value and slope at r_prof. Construction
/// enforces r_min < r_prof and 0 < alpha < 1 / (r_prof - r_min).
class ImpactFactor {
public:
    ImpactFactor(double alpha, double r_min, double r_prof);

    double alpha() const noexcept { return alpha_; }
    double r_min() const noexcept { return r_min_; }
    double r_prof() const noexcept { return r_prof_; }
    double c() const noexcept { return 1.0 - alpha_ * (r_prof_ - r_min_); }
    double d() const noexcept { return -alpha_ / c(); }

    /// Upper end of the open validity interval for alpha.
    double alpha_bound() const noexcept { return 1.0 / (r_prof_ - r_min_); }

    /// Clamped to [kMinFactor, 1]. Throws BelowMinimum for r <= r_min.
    double operator()(double r) const;

    // Unclamped branch formulas, evaluated anywhere.
    double linear_branch(double r) const noexcept { return alpha_ * (r - r_min_); }
    double saturating_branch(double r) const noexcept;

    friend bool operator==(const ImpactFactor&, const ImpactFactor&) = default;

private:
    double alpha_;
    double r_min_;
    double r_prof_;
};

/// Free-function form of ImpactFactor::operator().
double impact_factor(const ImpactFactor& params, double r);

/// Default steepness when no calibration data exists: midpoint of the valid range.
double default_alpha(double r_min, double r_prof);

/// Parametric QoS response: anchor (T_prof or L_prof) scaled by the product of
/// per-resource impact factors.
///
/// With `renormalize` set the product is divided by its value at r_prof, so
/// predict_qos(r_prof) returns the anchor exactly.
struct QosModel {
    ModelKind kind = ModelKind::Throughput;
    double anchor = 1.0;
    std::map<Resource, ImpactFactor> factors;
    bool renormalize = true;

    void validate() const;
    friend bool operator==(const QosModel&, const QosModel&) = default;
};

/// F(r) = prod_k F_k(r_k), optionally divided by prod_k F_k(r_prof,k).
/// Throws BelowMinimum naming the offending resource.
double compose_factors(const QosModel& model, const Allocation& r);

/// Throughput: anchor * F(r). Latency: anchor / F(r).
double predict_qos(const QosModel& model, const Allocation& r);

/// Invert the linear branch from one measurement (r_low, q_low) below r_prof.
/// Throws CalibrationOutOfRange if the implied alpha is not valid.
double calibrate_alpha(double anchor_qos, double r_prof, double r_min,
                       std::pair<double, double> low_point, ModelKind kind);

struct Sample {
    double r;
    double q;
};

/// Least-squares alpha for a single-resource model, searched over the open
/// interval (0, 1/(r_prof - r_min)): coarse grid, then golden-section
/// refinement around the best grid point. Deterministic.
double fit_alpha_least_squares(std::span<const Sample> samples, double anchor, double r_min,
                               double r_prof, ModelKind kind, bool renormalize = false);

/// Multi-resource observation used by calibrate_model.
struct AllocationSample {
    Allocation r;
    double q;
};

/// Fit every factor's alpha to the samples by cyclic 1-D searches, with the
/// anchor solved in closed form for each trial alpha. r_min/r_prof are kept from
/// `initial`. Samples at or below a factor's r_min are ignored.
QosModel calibrate_model(const QosModel& initial, std::span<const AllocationSample> samples,
                         int rounds = 4);

/// Sum of squared residuals of `model` over `samples`.
double squared_error(const QosModel& model, std::span<const AllocationSample> samples);

/// One scored QoS metric of a VM. `weight` is w_{i,k}; `slo_target` is the
/// threshold the raw metric is normalized against, in metric units.
struct QosMetricSpec {
    std::string name;
    MetricKind kind = MetricKind::Throughput;
    double weight = 1.0;
    double slo_target = 1.0;

    friend bool operator==(const QosMetricSpec&, const QosMetricSpec&) = default;
};

/// Normalize a raw metric value into [0, 1]:
///   Latency    max(0, 1 - q/slo)
///   Throughput min(1, q/slo)
///   Ratio      1 if q <= slo, else max(0, 1 - 10 (q - slo)/slo)
double normalize_score(const QosMetricSpec& spec, double q);

/// Primary/secondary metric template per workload class, weights summing to 1.
std::vector<QosMetricSpec> qos_template(WorkloadClass cls);

/// Model kind used to predict a metric of the given kind.
ModelKind model_kind_for(MetricKind kind) noexcept;

namespace curves {

/// q_max * (1 - exp(-a x))
double saturation(double q_max, double a, double x);

/// l0 + l_page * exp(beta * max(0, (wss - m) / wss)); l0 + l_page once m >= wss.
double memory_knee(double l0, double l_page, double beta, double wss, double m);

/// t_inf * c / (k_half + c)
double michaelis_menten(double t_inf, double k_half, double c);

}  // namespace curves

}  // namespace hyperscen::qos
