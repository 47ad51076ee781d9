#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <gtest/gtest.h>

#include "hyperscen/error.hpp"
#include "hyperscen/mlp.hpp"
#include "hyperscen/serialization.hpp"
#include "support.hpp"

using namespace hyperscen;
using namespace hyperscen::learned;

namespace {

Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
    Matrix m(rows, cols);
    for (auto& v : m.data) v = rng.uniform(-1.0, 1.0);
    return m;
}

std::vector<profiling::DatasetRecord> records_of(qos::ModelKind kind, std::size_t n_per_class, std::uint64_t seed) {
    std::vector<profiling::DatasetRecord> out;
    for (const auto& r : profiling::generate_dataset(n_per_class, seed).records) {
        if (r.qos_kind == kind) out.push_back(r);
    }
    return out;
}

}  // namespace

TEST(Features, LayoutAndRatios) {
    const auto p = test::synthetic_profile(WorkloadClass::AiInference, 1.0, 3);
    Allocation r = p.r_prof;
    r.c_p = p.r_prof.c_p * 2;
    const auto f = features(r, p, WorkloadClass::AiInference);
    ASSERT_EQ(f.size(), kFeatureCount);
    EXPECT_EQ(f[0], static_cast<double>(r.c_p));
    EXPECT_EQ(f[4], p.cpu_p.max_pct);
    EXPECT_EQ(f[14], static_cast<double>(p.r_prof.c_p));
    EXPECT_EQ(f[18], static_cast<double>(p.r_min.c_p));
    EXPECT_DOUBLE_EQ(f[22], 2.0);
    EXPECT_DOUBLE_EQ(f[24], 1.0);
    const std::vector<double> one_hot(f.end() - 4, f.end());
    EXPECT_EQ(one_hot, (std::vector<double>{0.0, 1.0, 0.0, 0.0}));
}

TEST(SplitIndices, Partition) {
    for (std::size_t n : {30u, 100u, 301u}) {
        const auto s = split_indices(n, 42);
        EXPECT_EQ(s.train.size(), static_cast<std::size_t>(std::llround(0.70 * static_cast<double>(n))));
        EXPECT_EQ(s.val.size(), static_cast<std::size_t>(std::llround(0.15 * static_cast<double>(n))));
        std::set<std::size_t> all(s.train.begin(), s.train.end());
        all.insert(s.val.begin(), s.val.end());
        all.insert(s.test.begin(), s.test.end());
        EXPECT_EQ(all.size(), n);
        EXPECT_EQ(s.train.size() + s.val.size() + s.test.size(), n);
        EXPECT_EQ(*all.rbegin(), n - 1);
    }
    EXPECT_EQ(split_indices(100, 1).train, split_indices(100, 1).train);
    EXPECT_NE(split_indices(100, 1).train, split_indices(100, 2).train);
}

TEST(Scaler, StandardizesAndKeepsConstantColumns) {
    Matrix x(4, 2);
    const double col0[] = {1, 2, 3, 4};
    for (std::size_t i = 0; i < 4; ++i) {
        x.row(i)[0] = col0[i];
        x.row(i)[1] = 7.0;
    }
    const auto s = Scaler::fit(x);
    EXPECT_DOUBLE_EQ(s.mean[0], 2.5);
    EXPECT_DOUBLE_EQ(s.scale[0], std::sqrt(1.25));
    EXPECT_DOUBLE_EQ(s.mean[1], 7.0);
    EXPECT_DOUBLE_EQ(s.scale[1], 1.0);
    std::vector<double> out(2);
    s.apply(x.row(3), out);
    EXPECT_DOUBLE_EQ(out[0], 1.5 / std::sqrt(1.25));
    EXPECT_DOUBLE_EQ(out[1], 0.0);
}

TEST(Network, GradientMatchesFiniteDifferences) {
    Rng rng(11);
    Network net(5, 6, 4);
    net.initialize(rng);
    // Nonzero biases so every parameter block is exercised.
    for (auto& p : net.parameters()) p += rng.uniform(-0.1, 0.1);
    const auto x = random_matrix(rng, 9, 5);
    std::vector<double> y(9);
    for (auto& v : y) v = rng.uniform(-2.0, 2.0);
    std::vector<std::size_t> rows(9);
    std::iota(rows.begin(), rows.end(), 0);

    std::vector<double> grad;
    const double loss = net.loss_and_gradient(x, y, rows, grad);
    EXPECT_NEAR(loss, net.loss(x, y), 1e-12);
    ASSERT_EQ(grad.size(), net.parameter_count());
    const double h = 1e-6;
    for (std::size_t k = 0; k < grad.size(); ++k) {
        Network plus = net, minus = net;
        plus.parameters()[k] += h;
        minus.parameters()[k] -= h;
        const double numeric = (plus.loss(x, y) - minus.loss(x, y)) / (2 * h);
        ASSERT_NEAR(grad[k], numeric, 1e-6 + 1e-4 * std::abs(numeric)) << "parameter " << k;
    }
}

TEST(Network, ParameterCount) {
    const Network net(30, 32, 16);
    EXPECT_EQ(net.parameter_count(), 30u * 32 + 32 + 32 * 16 + 16 + 16 + 1);
}

TEST(FitRegressor, LearnsSmoothFunction) {
    Rng rng(3);
    const auto make = [&](std::size_t n, Matrix& x, std::vector<double>& y) {
        x = random_matrix(rng, n, 2);
        y.resize(n);
        for (std::size_t i = 0; i < n; ++i) y[i] = 3.0 * x.row(i)[0] - 2.0 * x.row(i)[1] + 10.0;
    };
    Matrix xt, xv;
    std::vector<double> yt, yv;
    make(200, xt, yt);
    make(50, xv, yv);
    TrainConfig cfg;
    cfg.dropout = 0.0;
    cfg.max_epochs = 400;
    const auto fit = fit_regressor(xt, yt, xv, yv, cfg, 5);
    ASSERT_FALSE(fit.history.train_mse.empty());
    EXPECT_LT(fit.history.val_mse[fit.history.best_epoch], 0.05);
    EXPECT_LT(fit.history.train_mse.back(), fit.history.train_mse.front());
    double mse = 0;
    for (std::size_t i = 0; i < 50; ++i) {
        const double e = fit.model.predict(xv.row(i)) - yv[i];
        mse += e * e / 50.0;
    }
    // Best-validation weights are what the model holds.
    EXPECT_NEAR(mse, fit.history.val_mse[fit.history.best_epoch], 1e-9);
    EXPECT_EQ(fit.history.best_epoch,
              static_cast<std::size_t>(std::min_element(fit.history.val_mse.begin(), fit.history.val_mse.end()) -
                                       fit.history.val_mse.begin()));

    const std::vector<double> wrong(3, 0.0);
    try {
        (void)fit.model.predict(wrong);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::FeatureMismatch);
    }
}

TEST(FitRegressor, EarlyStoppingOnNoise) {
    Rng rng(9);
    const auto xt = random_matrix(rng, 40, 3);
    const auto xv = random_matrix(rng, 20, 3);
    std::vector<double> yt(40), yv(20);
    for (auto& v : yt) v = rng.normal();
    for (auto& v : yv) v = rng.normal();
    TrainConfig cfg;
    cfg.patience = 5;
    const auto fit = fit_regressor(xt, yt, xv, yv, cfg, 1);
    EXPECT_TRUE(fit.history.stopped_early);
    EXPECT_EQ(fit.history.val_mse.size(), fit.history.best_epoch + 1 + cfg.patience);
    EXPECT_LT(fit.history.train_mse.size(), cfg.max_epochs);
}

TEST(FitRegressor, DeterministicPerSeed) {
    Rng rng(4);
    const auto x = random_matrix(rng, 30, 3);
    std::vector<double> y(30);
    for (auto& v : y) v = rng.normal();
    TrainConfig cfg;
    cfg.max_epochs = 20;
    const auto a = fit_regressor(x, y, x, y, cfg, 7);
    const auto b = fit_regressor(x, y, x, y, cfg, 7);
    const auto c = fit_regressor(x, y, x, y, cfg, 8);
    EXPECT_EQ(a.model.net, b.model.net);
    EXPECT_NE(a.model.net, c.model.net);
}

TEST(MlpFit, TooFewRecords) {
    auto recs = records_of(qos::ModelKind::Throughput, 10, 1);
    recs.resize(kMinRecords - 1);
    try {
        (void)mlp_fit(recs, 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::TooFewRecords);
    }
}

TEST(MlpFit, CheckpointRoundTrip) {
    const auto recs = records_of(qos::ModelKind::Throughput, 30, 2);
    TrainConfig cfg;
    cfg.max_epochs = 50;
    const auto fit = mlp_fit(recs, 3, cfg);
    const auto back = io::mlp_from_json(io::parse_json(io::dump(io::to_json(fit.model))));
    for (std::size_t i = 0; i < 10; ++i) {
        const auto& r = recs[i];
        const auto cls = profiling::workload_class_of(r.workload_id);
        EXPECT_DOUBLE_EQ(mlp_predict(back, r.r, r.p, cls), mlp_predict(fit.model, r.r, r.p, cls));
    }
    EXPECT_EQ(fit.split.train.size() + fit.split.val.size() + fit.split.test.size(), recs.size());
}

TEST(CompareModels, SmallRunIsWellFormed) {
    const auto data = profiling::generate_dataset(30, 5);
    TrainConfig cfg;
    cfg.max_epochs = 60;
    const auto report = compare_models(data.records, 2, 5, cfg);
    EXPECT_EQ(report.splits, 2u);
    for (const auto* row : {&report.parametric, &report.mlp}) {
        for (const auto* cell : {&row->latency_train, &row->latency_eval, &row->throughput_train,
                                 &row->throughput_eval}) {
            EXPECT_EQ(cell->per_split.size(), 2u);
            EXPECT_TRUE(std::isfinite(cell->mean));
            EXPECT_GE(cell->mean, 0.0);
            EXPECT_GE(cell->stddev, 0.0);
        }
    }
    const auto csv = comparison_csv(report);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "model,latency_train,latency_eval,throughput_train,throughput_eval");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}
