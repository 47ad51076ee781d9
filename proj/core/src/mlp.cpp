#include "hyperscen/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>

#include "hyperscen/error.hpp"

namespace hyperscen::learned {

Scaler Scaler::fit(const Matrix& x) {
    Scaler s;
    s.mean.assign(x.cols, 0.0);
    s.scale.assign(x.cols, 1.0);
    if (x.rows == 0) return s;
    for (std::size_t i = 0; i < x.rows; ++i) {
        const auto row = x.row(i);
        for (std::size_t j = 0; j < x.cols; ++j) s.mean[j] += row[j];
    }
    for (auto& m : s.mean) m /= static_cast<double>(x.rows);
    std::vector<double> var(x.cols, 0.0);
    for (std::size_t i = 0; i < x.rows; ++i) {
        const auto row = x.row(i);
        for (std::size_t j = 0; j < x.cols; ++j) var[j] += (row[j] - s.mean[j]) * (row[j] - s.mean[j]);
    }
    for (std::size_t j = 0; j < x.cols; ++j) {
        const double sd = std::sqrt(var[j] / static_cast<double>(x.rows));
        s.scale[j] = sd > 1e-12 ? sd : 1.0;
    }
    return s;
}

void Scaler::apply(std::span<const double> in, std::span<double> out) const {
    for (std::size_t j = 0; j < in.size(); ++j) out[j] = (in[j] - mean[j]) / scale[j];
}

// ---------------------------------------------------------------------------
// network

Network::Network(std::size_t d_in, std::size_t h1, std::size_t h2)
    : d_in_(d_in), h1_(h1), h2_(h2), params_(parameter_count(), 0.0) {}

std::size_t Network::parameter_count() const noexcept {
    return h1_ * d_in_ + h1_ + h2_ * h1_ + h2_ + h2_ + 1;
}

void Network::initialize(Rng& rng) {
    std::fill(params_.begin(), params_.end(), 0.0);
    double* p = params_.data();
    const auto fill = [&](std::size_t n, std::size_t fan_in) {
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
        for (std::size_t i = 0; i < n; ++i) p[i] = rng.uniform(-limit, limit);
        p += n;
    };
    fill(h1_ * d_in_, d_in_);
    p += h1_;
    fill(h2_ * h1_, h1_);
    p += h2_;
    fill(h2_, h2_);
}

namespace {

struct Layout {
    const double* w1;
    const double* b1;
    const double* w2;
    const double* b2;
    const double* w3;
    const double* b3;
};

Layout layout(const double* p, std::size_t d, std::size_t h1, std::size_t h2) {
    Layout l{};
    l.w1 = p;
    l.b1 = l.w1 + h1 * d;
    l.w2 = l.b1 + h1;
    l.b2 = l.w2 + h2 * h1;
    l.w3 = l.b2 + h2;
    l.b3 = l.w3 + h2;
    return l;
}

}  // namespace

double Network::forward(std::span<const double> x) const {
    const auto l = layout(params_.data(), d_in_, h1_, h2_);
    std::vector<double> a1(h1_), a2(h2_);
    for (std::size_t i = 0; i < h1_; ++i) {
        double z = l.b1[i];
        for (std::size_t j = 0; j < d_in_; ++j) z += l.w1[i * d_in_ + j] * x[j];
        a1[i] = std::max(0.0, z);
    }
    for (std::size_t i = 0; i < h2_; ++i) {
        double z = l.b2[i];
        for (std::size_t j = 0; j < h1_; ++j) z += l.w2[i * h1_ + j] * a1[j];
        a2[i] = std::max(0.0, z);
    }
    double out = l.b3[0];
    for (std::size_t j = 0; j < h2_; ++j) out += l.w3[j] * a2[j];
    return out;
}

double Network::loss(const Matrix& x, std::span<const double> y) const {
    if (x.rows == 0) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i) {
        const double e = forward(x.row(i)) - y[i];
        sum += e * e;
    }
    return sum / static_cast<double>(x.rows);
}

double Network::loss_and_gradient(const Matrix& x, std::span<const double> y,
                                  std::span<const std::size_t> rows, std::vector<double>& grad,
                                  double dropout, Rng* rng) const {
    grad.assign(params_.size(), 0.0);
    if (rows.empty()) return 0.0;
    const auto l = layout(params_.data(), d_in_, h1_, h2_);
    const auto g = layout(grad.data(), d_in_, h1_, h2_);
    // Gradient buffers share the parameter layout.
    auto* gw1 = const_cast<double*>(g.w1);
    auto* gb1 = const_cast<double*>(g.b1);
    auto* gw2 = const_cast<double*>(g.w2);
    auto* gb2 = const_cast<double*>(g.b2);
    auto* gw3 = const_cast<double*>(g.w3);
    auto* gb3 = const_cast<double*>(g.b3);

    const bool drop = rng != nullptr && dropout > 0.0;
    const double keep_scale = drop ? 1.0 / (1.0 - dropout) : 1.0;
    std::vector<double> a1(h1_), a2(h2_), m1(h1_, 1.0), m2(h2_, 1.0), d1(h1_), d2(h2_);
    const double n = static_cast<double>(rows.size());
    double total = 0.0;

    for (const auto idx : rows) {
        const auto xi = x.row(idx);
        if (drop) {
            for (auto& m : m1) m = rng->uniform() < dropout ? 0.0 : keep_scale;
            for (auto& m : m2) m = rng->uniform() < dropout ? 0.0 : keep_scale;
        }
        for (std::size_t i = 0; i < h1_; ++i) {
            double z = l.b1[i];
            for (std::size_t j = 0; j < d_in_; ++j) z += l.w1[i * d_in_ + j] * xi[j];
            a1[i] = z > 0.0 ? z * m1[i] : 0.0;
        }
        for (std::size_t i = 0; i < h2_; ++i) {
            double z = l.b2[i];
            for (std::size_t j = 0; j < h1_; ++j) z += l.w2[i * h1_ + j] * a1[j];
            a2[i] = z > 0.0 ? z * m2[i] : 0.0;
        }
        double out = l.b3[0];
        for (std::size_t j = 0; j < h2_; ++j) out += l.w3[j] * a2[j];

        const double err = out - y[idx];
        total += err * err;
        const double dout = 2.0 * err / n;

        gb3[0] += dout;
        for (std::size_t j = 0; j < h2_; ++j) {
            gw3[j] += dout * a2[j];
            // a2 > 0 exactly when the unit was active and kept.
            d2[j] = a2[j] > 0.0 ? dout * l.w3[j] * m2[j] : 0.0;
        }
        std::fill(d1.begin(), d1.end(), 0.0);
        for (std::size_t i = 0; i < h2_; ++i) {
            if (d2[i] == 0.0) continue;
            gb2[i] += d2[i];
            for (std::size_t j = 0; j < h1_; ++j) {
                gw2[i * h1_ + j] += d2[i] * a1[j];
                d1[j] += d2[i] * l.w2[i * h1_ + j];
            }
        }
        for (std::size_t i = 0; i < h1_; ++i) {
            if (a1[i] <= 0.0) continue;
            const double di = d1[i] * m1[i];
            gb1[i] += di;
            for (std::size_t j = 0; j < d_in_; ++j) gw1[i * d_in_ + j] += di * xi[j];
        }
    }
    return total / n;
}

// ---------------------------------------------------------------------------
// training

double MlpModel::predict(std::span<const double> features) const {
    if (features.size() != net.input_width()) {
        throw Error(ErrorCode::FeatureMismatch, "expected " + std::to_string(net.input_width()) +
                                                    " features, got " + std::to_string(features.size()));
    }
    std::vector<double> scaled(features.size());
    scaler.apply(features, scaled);
    return target_mean + target_scale * net.forward(scaled);
}

namespace {

Matrix scaled_copy(const Matrix& x, const Scaler& s) {
    Matrix out(x.rows, x.cols);
    for (std::size_t i = 0; i < x.rows; ++i) s.apply(x.row(i), out.row(i));
    return out;
}

}  // namespace

FitResult fit_regressor(const Matrix& x_train, std::span<const double> y_train, const Matrix& x_val,
                        std::span<const double> y_val, const TrainConfig& config, std::uint64_t seed) {
    if (x_train.rows == 0 || x_train.rows != y_train.size() || x_val.rows != y_val.size()) {
        throw Error(ErrorCode::LengthMismatch, "feature rows and targets differ in length");
    }
    if (x_val.rows > 0 && x_val.cols != x_train.cols) {
        throw Error(ErrorCode::FeatureMismatch, "validation features have a different width");
    }

    FitResult result;
    auto& model = result.model;
    model.config = config;
    model.scaler = Scaler::fit(x_train);
    const double n_train = static_cast<double>(y_train.size());
    model.target_mean = std::accumulate(y_train.begin(), y_train.end(), 0.0) / n_train;
    double var = 0.0;
    for (double v : y_train) var += (v - model.target_mean) * (v - model.target_mean);
    const double sd = std::sqrt(var / n_train);
    model.target_scale = sd > 1e-12 ? sd : 1.0;

    const Matrix xs = scaled_copy(x_train, model.scaler);
    const Matrix xv = scaled_copy(x_val, model.scaler);
    std::vector<double> ys(y_train.size()), yv(y_val.size());
    for (std::size_t i = 0; i < ys.size(); ++i) ys[i] = (y_train[i] - model.target_mean) / model.target_scale;
    for (std::size_t i = 0; i < yv.size(); ++i) yv[i] = (y_val[i] - model.target_mean) / model.target_scale;
    const double to_raw = model.target_scale * model.target_scale;

    Rng rng(seed);
    model.net = Network(x_train.cols, config.hidden1, config.hidden2);
    model.net.initialize(rng);
    auto& params = model.net.parameters();

    std::vector<double> m(params.size(), 0.0), v(params.size(), 0.0), grad;
    std::vector<std::size_t> order(x_train.rows);
    std::iota(order.begin(), order.end(), 0);
    const bool early_stop = xv.rows > 0 && config.patience > 0;
    const std::size_t batch = std::max<std::size_t>(1, config.batch_size);

    std::vector<double> best = params;
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;
    std::uint64_t step = 0;

    for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
        }
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t len = std::min(batch, order.size() - start);
            model.net.loss_and_gradient(xs, ys, std::span(order).subspan(start, len), grad, config.dropout,
                                        &rng);
            ++step;
            const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
            const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
            for (std::size_t k = 0; k < params.size(); ++k) {
                m[k] = config.beta1 * m[k] + (1.0 - config.beta1) * grad[k];
                v[k] = config.beta2 * v[k] + (1.0 - config.beta2) * grad[k] * grad[k];
                params[k] -= config.learning_rate * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + config.epsilon);
            }
        }
        result.history.train_mse.push_back(model.net.loss(xs, ys) * to_raw);
        if (xv.rows == 0) continue;
        const double val = model.net.loss(xv, yv);
        result.history.val_mse.push_back(val * to_raw);
        if (val < best_val) {
            best_val = val;
            best = params;
            result.history.best_epoch = epoch;
            since_best = 0;
        } else if (early_stop && ++since_best >= config.patience) {
            result.history.stopped_early = true;
            break;
        }
    }
    if (early_stop) {
        params = best;
    } else {
        result.history.best_epoch = result.history.train_mse.empty() ? 0 : result.history.train_mse.size() - 1;
    }
    return result;
}

// ---------------------------------------------------------------------------
// dataset glue

std::vector<double> features(const Allocation& r, const profiling::ProfileVector& p, WorkloadClass cls) {
    std::vector<double> f;
    f.reserve(kFeatureCount);
    for (auto res : kAllResources) f.push_back(static_cast<double>(r[res]));
    f.push_back(p.cpu_p.max_pct);
    f.push_back(p.cpu_p.median_pct);
    f.push_back(p.cpu_e.max_pct);
    f.push_back(p.cpu_e.median_pct);
    f.push_back(p.mem.peak_rss_mib);
    f.push_back(p.mem.wss_mib);
    f.push_back(p.mem.swap_seen ? 1.0 : 0.0);
    f.push_back(p.gpu.max_busy_pct);
    f.push_back(p.gpu.median_busy_pct);
    f.push_back(p.gpu.peak_mem_mib);
    for (auto res : kAllResources) f.push_back(static_cast<double>(p.r_prof[res]));
    for (auto res : kAllResources) f.push_back(static_cast<double>(p.r_min[res]));
    for (auto res : kAllResources) {
        const auto prof = p.r_prof[res];
        f.push_back(prof > 0 ? static_cast<double>(r[res]) / static_cast<double>(prof) : 0.0);
    }
    for (auto c : {WorkloadClass::Gaming, WorkloadClass::AiInference, WorkloadClass::WebMicroservice,
                   WorkloadClass::RtosControl}) {
        f.push_back(c == cls ? 1.0 : 0.0);
    }
    return f;
}

Split split_indices(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(seed);
    for (std::size_t i = n; i > 1; --i) {
        std::swap(perm[i - 1], perm[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
    }
    const auto n_train = static_cast<std::size_t>(std::llround(0.70 * static_cast<double>(n)));
    const auto n_val = static_cast<std::size_t>(std::llround(0.15 * static_cast<double>(n)));
    Split s;
    s.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.val.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train),
                 perm.begin() + static_cast<std::ptrdiff_t>(std::min(n, n_train + n_val)));
    s.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(std::min(n, n_train + n_val)), perm.end());
    return s;
}

namespace {

void gather(std::span<const profiling::DatasetRecord> records, std::span<const std::size_t> idx, Matrix& x,
            std::vector<double>& y) {
    x = Matrix(idx.size(), kFeatureCount);
    y.resize(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const auto& rec = records[idx[i]];
        const auto f = features(rec.r, rec.p, profiling::workload_class_of(rec.workload_id));
        std::copy(f.begin(), f.end(), x.row(i).begin());
        y[i] = rec.qos_value;
    }
}

}  // namespace

DatasetFit mlp_fit(std::span<const profiling::DatasetRecord> records, std::uint64_t split_seed,
                   const TrainConfig& config) {
    if (records.size() < kMinRecords) {
        throw Error(ErrorCode::TooFewRecords, "need at least " + std::to_string(kMinRecords) + " records, got " +
                                                  std::to_string(records.size()));
    }
    DatasetFit out;
    out.split = split_indices(records.size(), split_seed);
    Matrix xt, xv;
    std::vector<double> yt, yv;
    gather(records, out.split.train, xt, yt);
    gather(records, out.split.val, xv, yv);
    auto fit = fit_regressor(xt, yt, xv, yv, config, derive_seed(split_seed, 1));
    out.model = std::move(fit.model);
    out.history = std::move(fit.history);
    return out;
}

double mlp_predict(const MlpModel& model, const Allocation& r, const profiling::ProfileVector& p,
                   WorkloadClass cls) {
    return model.predict(features(r, p, cls));
}

// ---------------------------------------------------------------------------
// parametric vs learned comparison

namespace {

struct SplitMse {
    double train = 0.0;
    double eval = 0.0;
};

double mse(std::span<const double> pred, std::span<const double> truth) {
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - truth[i]) * (pred[i] - truth[i]);
    return pred.empty() ? 0.0 : s / static_cast<double>(pred.size());
}

// Per-workload parametric fit: profile-derived bounds, anchor and alphas
// calibrated on the workload's training records. The fit uses the verbatim
// (unnormalized) form, where alpha sets the under-allocation slope; with
// renormalization alpha would only shape the curve above r_prof and the fit
// would be an extrapolation of that branch.
SplitMse parametric_split(std::span<const profiling::DatasetRecord> records, const Split& split) {
    const auto quanta = board::default_quanta(profiling::synthetic_profiling_board());
    std::map<std::string, std::vector<qos::AllocationSample>> samples;
    std::map<std::string, const profiling::DatasetRecord*> first;
    for (auto i : split.train) {
        const auto& rec = records[i];
        samples[rec.workload_id].push_back({rec.r, rec.qos_value});
        first.emplace(rec.workload_id, &rec);
    }
    std::map<std::string, qos::QosModel> models;
    for (const auto& [id, s] : samples) {
        const auto* rec = first.at(id);
        std::vector<double> qs;
        for (const auto& x : s) qs.push_back(x.q);
        std::nth_element(qs.begin(), qs.begin() + static_cast<std::ptrdiff_t>(qs.size() / 2), qs.end());
        auto initial = profiling::model_from_profile(rec->qos_kind, qs[qs.size() / 2], rec->p, quanta);
        initial.renormalize = false;
        models.emplace(id, qos::calibrate_model(initial, s));
    }
    double train_fallback = 0.0;
    for (auto i : split.train) train_fallback += records[i].qos_value;
    train_fallback /= static_cast<double>(std::max<std::size_t>(1, split.train.size()));

    const auto predict = [&](const profiling::DatasetRecord& rec) {
        const auto it = models.find(rec.workload_id);
        if (it == models.end()) return train_fallback;
        try {
            return qos::predict_qos(it->second, rec.r);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::BelowMinimum) throw;
            return train_fallback;
        }
    };
    std::vector<double> p, t;
    SplitMse out;
    for (auto i : split.train) {
        p.push_back(predict(records[i]));
        t.push_back(records[i].qos_value);
    }
    out.train = mse(p, t);
    p.clear();
    t.clear();
    for (auto i : split.test) {
        p.push_back(predict(records[i]));
        t.push_back(records[i].qos_value);
    }
    out.eval = mse(p, t);
    return out;
}

SplitMse mlp_split(std::span<const profiling::DatasetRecord> records, const Split& split,
                   const TrainConfig& config, std::uint64_t seed) {
    Matrix xt, xv, xe;
    std::vector<double> yt, yv, ye;
    gather(records, split.train, xt, yt);
    gather(records, split.val, xv, yv);
    gather(records, split.test, xe, ye);
    const auto fit = fit_regressor(xt, yt, xv, yv, config, seed);
    const auto eval = [&](const Matrix& x, const std::vector<double>& y) {
        std::vector<double> p(x.rows);
        for (std::size_t i = 0; i < x.rows; ++i) p[i] = fit.model.predict(x.row(i));
        return mse(p, y);
    };
    return {eval(xt, yt), eval(xe, ye)};
}

void finish(MseCell& cell) {
    const double n = static_cast<double>(cell.per_split.size());
    if (cell.per_split.empty()) return;
    cell.mean = std::accumulate(cell.per_split.begin(), cell.per_split.end(), 0.0) / n;
    double var = 0.0;
    for (double v : cell.per_split) var += (v - cell.mean) * (v - cell.mean);
    cell.stddev = std::sqrt(var / n);
}

}  // namespace

ComparisonReport compare_models(std::span<const profiling::DatasetRecord> records, std::size_t splits,
                                std::uint64_t seed, const TrainConfig& config) {
    std::vector<profiling::DatasetRecord> latency, throughput;
    for (const auto& r : records) {
        (r.qos_kind == qos::ModelKind::Latency ? latency : throughput).push_back(r);
    }
    if (latency.size() < kMinRecords || throughput.size() < kMinRecords) {
        throw Error(ErrorCode::TooFewRecords, "each target needs at least " + std::to_string(kMinRecords) +
                                                  " records");
    }
    ComparisonReport report;
    report.splits = splits;
    report.parametric.model = "parametric";
    report.mlp.model = "mlp";
    for (std::size_t s = 0; s < splits; ++s) {
        const auto split_seed = derive_seed(seed, s);
        const auto run = [&](const std::vector<profiling::DatasetRecord>& recs, MseCell& p_train,
                             MseCell& p_eval, MseCell& m_train, MseCell& m_eval, std::uint64_t stream) {
            const auto split = split_indices(recs.size(), derive_seed(split_seed, stream));
            const auto p = parametric_split(recs, split);
            const auto m = mlp_split(recs, split, config, derive_seed(split_seed, stream + 10));
            p_train.per_split.push_back(p.train);
            p_eval.per_split.push_back(p.eval);
            m_train.per_split.push_back(m.train);
            m_eval.per_split.push_back(m.eval);
        };
        run(latency, report.parametric.latency_train, report.parametric.latency_eval, report.mlp.latency_train,
            report.mlp.latency_eval, 0);
        run(throughput, report.parametric.throughput_train, report.parametric.throughput_eval,
            report.mlp.throughput_train, report.mlp.throughput_eval, 1);
    }
    for (auto* row : {&report.parametric, &report.mlp}) {
        finish(row->latency_train);
        finish(row->latency_eval);
        finish(row->throughput_train);
        finish(row->throughput_eval);
    }
    return report;
}

std::string comparison_csv(const ComparisonReport& report, bool with_spread) {
    std::string out = "model,latency_train,latency_eval,throughput_train,throughput_eval";
    if (with_spread) out += ",latency_train_sd,latency_eval_sd,throughput_train_sd,throughput_eval_sd";
    out += '\n';
    char buf[64];
    const auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.6g", v);
        return std::string(buf);
    };
    for (const auto* row : {&report.parametric, &report.mlp}) {
        out += row->model + ',' + num(row->latency_train.mean) + ',' + num(row->latency_eval.mean) + ',' +
               num(row->throughput_train.mean) + ',' + num(row->throughput_eval.mean);
        if (with_spread) {
            out += ',' + num(row->latency_train.stddev) + ',' + num(row->latency_eval.stddev) + ',' +
                   num(row->throughput_train.stddev) + ',' + num(row->throughput_eval.stddev);
        }
        out += '\n';
    }
    return out;
}

}  // namespace hyperscen::learned
