#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hyperscen/profiling.hpp"
#include "hyperscen/types.hpp"

namespace hyperscen::learned {

/// Dense row-major matrix.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
    std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
};

struct TrainConfig {
    std::size_t hidden1 = 32;
    std::size_t hidden2 = 16;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::size_t batch_size = 4;
    std::size_t max_epochs = 3000;
    /// Epochs without validation improvement before stopping; 0 disables
    /// early stopping.
    std::size_t patience = 20;
    double dropout = 0.1;
};

/// Per-feature standardization fitted on the training split only. Constant
/// features keep a unit scale.
struct Scaler {
    std::vector<double> mean;
    std::vector<double> scale;

    static Scaler fit(const Matrix& x);
    void apply(std::span<const double> in, std::span<double> out) const;

    friend bool operator==(const Scaler&, const Scaler&) = default;
};

/// d_in -> h1 -> h2 -> 1 network with ReLU hidden layers. Parameters are a
/// single flat vector laid out as W1 (h1 x d_in), b1, W2 (h2 x h1), b2,
/// W3 (1 x h2), b3.
class Network {
public:
    Network() = default;
    Network(std::size_t d_in, std::size_t h1, std::size_t h2);

    std::size_t input_width() const noexcept { return d_in_; }
    std::size_t hidden1() const noexcept { return h1_; }
    std::size_t hidden2() const noexcept { return h2_; }
    std::size_t parameter_count() const noexcept;

    std::vector<double>& parameters() noexcept { return params_; }
    const std::vector<double>& parameters() const noexcept { return params_; }

    /// He-uniform weights, zero biases.
    void initialize(Rng& rng);

    double forward(std::span<const double> x) const;

    /// Mean squared error over the rows of `x` (no dropout).
    double loss(const Matrix& x, std::span<const double> y) const;

    /// loss() and its gradient with respect to parameters(). With a non-null
    /// `rng` and dropout > 0, inverted dropout is applied to both hidden layers.
    double loss_and_gradient(const Matrix& x, std::span<const double> y, std::span<const std::size_t> rows,
                             std::vector<double>& grad, double dropout = 0.0, Rng* rng = nullptr) const;

    friend bool operator==(const Network&, const Network&) = default;

private:
    std::size_t d_in_ = 0;
    std::size_t h1_ = 0;
    std::size_t h2_ = 0;
    std::vector<double> params_;
};

struct History {
    std::vector<double> train_mse;
    std::vector<double> val_mse;
    std::size_t best_epoch = 0;
    bool stopped_early = false;
};

/// Trained regressor: network + feature scaler + target standardization.
struct MlpModel {
    Network net;
    Scaler scaler;
    double target_mean = 0.0;
    double target_scale = 1.0;
    TrainConfig config;

    /// Throws FeatureMismatch if features.size() != input width.
    double predict(std::span<const double> features) const;
};

struct FitResult {
    MlpModel model;
    History history;
};

/// Adam on mini-batch MSE. If `x_val` has rows and config.patience > 0,
/// training stops after `patience` epochs without validation improvement and
/// the best-validation weights are restored. History is in raw target units.
FitResult fit_regressor(const Matrix& x_train, std::span<const double> y_train, const Matrix& x_val,
                        std::span<const double> y_val, const TrainConfig& config, std::uint64_t seed);

/// Feature vector of (r, p) plus a one-hot workload class: r (4), profile
/// statistics (10), profile envelope r_prof and floor r_min (8), r / r_prof
/// per resource (4), class (4).
/// The profiling grant is left out since it is the same for every record.
std::vector<double> features(const Allocation& r, const profiling::ProfileVector& p, WorkloadClass cls);
inline constexpr std::size_t kFeatureCount = 30;

struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
    std::vector<std::size_t> test;
};

/// Deterministic 70/15/15 permutation split of n items.
Split split_indices(std::size_t n, std::uint64_t seed);

struct DatasetFit {
    MlpModel model;
    History history;
    Split split;
};

inline constexpr std::size_t kMinRecords = 30;

/// Fit on the train split of `records` with early stopping on its val split.
/// Throws TooFewRecords.
DatasetFit mlp_fit(std::span<const profiling::DatasetRecord> records, std::uint64_t split_seed,
                   const TrainConfig& config = {});

/// Predicted QoS for an allocation/profile pair.
double mlp_predict(const MlpModel& model, const Allocation& r, const profiling::ProfileVector& p,
                   WorkloadClass cls);

struct MseCell {
    double mean = 0.0;
    double stddev = 0.0;
    std::vector<double> per_split;
};

struct ModelRow {
    std::string model;
    MseCell latency_train;
    MseCell latency_eval;
    MseCell throughput_train;
    MseCell throughput_eval;

    double latency_gap_ratio() const { return (latency_eval.mean - latency_train.mean) / latency_train.mean; }
    double throughput_gap_ratio() const {
        return (throughput_eval.mean - throughput_train.mean) / throughput_train.mean;
    }
};

struct ComparisonReport {
    ModelRow parametric;
    ModelRow mlp;
    std::size_t splits = 0;
};

/// Fit the per-workload calibrated parametric model and the MLP on identical
/// splits, separately for latency and throughput targets, and report train
/// and evaluation (test split) MSE over `splits` random splits.
ComparisonReport compare_models(std::span<const profiling::DatasetRecord> records, std::size_t splits,
                                std::uint64_t seed, const TrainConfig& config = {});

/// CSV in the layout model,latency_train,latency_eval,throughput_train,throughput_eval.
std::string comparison_csv(const ComparisonReport& report, bool with_spread = false);

}  // namespace hyperscen::learned
