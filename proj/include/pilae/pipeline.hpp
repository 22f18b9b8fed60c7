#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pilae/baseline.hpp"
#include "pilae/dataset.hpp"
#include "pilae/error.hpp"
#include "pilae/matrix.hpp"
#include "pilae/readout.hpp"
#include "pilae/report.hpp"
#include "pilae/stack.hpp"

namespace pilae {

struct TrainOptions {
    StackConfig stack;
    HeadKind head = HeadKind::shln;
    bool lambda_auto = true;     // seed Eq-style estimate, then grid search
    double lambda_fixed = 1e-6;  // used when lambda_auto is off
    double val_fraction = 0.2;
    SoftmaxOptions softmax;
    std::uint64_t seed = 0;
};

struct TrainedModel {
    StackedNetwork net;
    RunReport report;
};

struct EvalResult {
    double accuracy = 0.0;
    Matrix confusion;  // rows truth, columns prediction
};

inline std::uint64_t content_hash(const Dataset& ds) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const unsigned char* p, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) {
            h ^= p[i];
            h *= 1099511628211ull;
        }
    };
    const std::uint64_t dims[2] = {ds.x.rows(), ds.x.cols()};
    mix(reinterpret_cast<const unsigned char*>(dims), sizeof(dims));
    mix(reinterpret_cast<const unsigned char*>(ds.x.data()), ds.x.size() * sizeof(double));
    mix(reinterpret_cast<const unsigned char*>(ds.labels.data()),
        ds.labels.size() * sizeof(int));
    return h;
}

namespace detail {

struct HeadFitResult {
    ReadoutHead head;
    double lambda_hat = 0.0;
    std::vector<LambdaTrial> trials;
};

// shln and cascade heads: a preliminary ridge fit feeds the data-driven
// lambda estimate, which seeds the holdout grid search; softmax heads run
// logistic regression on the stacked features instead.
inline HeadFitResult fit_head(HeadKind kind, const Matrix& features,
                              const std::vector<int>& labels, std::size_t classes,
                              const TrainOptions& opt) {
    HeadFitResult out;
    if (kind == HeadKind::softmax) {
        SoftmaxFit fit = softmax_fit(features, labels, classes, opt.softmax);
        out.head.kind = kind;
        out.head.weights = std::move(fit.theta);
        out.head.classes = classes;
        out.head.lambda = 0.0;
        return out;
    }
    const Matrix targets = one_hot(labels, classes);
    double lambda = opt.lambda_fixed;
    if (opt.lambda_auto) {
        const Matrix w0 = fit_output_weights(features, targets, 1e-6);
        Matrix resid = matmul(w0, features);
        {
            double* r = resid.data();
            const double* t = targets.data();
            for (std::size_t i = 0, n = resid.size(); i < n; ++i) r[i] -= t[i];
        }
        out.lambda_hat = estimate_reg_param(frobenius_sq(resid), frobenius_sq(w0),
                                            features.rows(), features.cols());
        if (out.lambda_hat > 0.0) {
            LambdaSearch search =
                search_lambda(features, targets, labels, out.lambda_hat, opt.val_fraction);
            lambda = search.best;
            out.trials = std::move(search.trials);
        } else {
            lambda = opt.lambda_fixed;  // zero residual: estimate degenerates
        }
    }
    out.head.kind = kind;
    out.head.weights = fit_output_weights(features, targets, lambda);
    out.head.classes = classes;
    out.head.lambda = lambda;
    return out;
}

}  // namespace detail

inline EvalResult evaluate(const StackedNetwork& net, const Dataset& ds) {
    if (!net.readout) throw ArgumentError("evaluate: network has no readout head");
    if (net.layers.empty()) throw ArgumentError("evaluate: network has no layers");
    if (ds.dim() != net.input_dim)
        throw ArgumentError("evaluate: data dimension " + std::to_string(ds.dim()) +
                            " does not match the model input dimension " +
                            std::to_string(net.input_dim));
    const Matrix features = transform(net, ds.x);
    const std::vector<int> pred = net.readout->predict(features);
    EvalResult out;
    out.accuracy = accuracy(pred, ds.labels);
    const std::size_t k =
        std::max<std::size_t>(ds.classes, net.readout->weights.rows());
    out.confusion = Matrix(k, k);
    for (std::size_t i = 0; i < pred.size(); ++i)
        out.confusion(static_cast<std::size_t>(ds.labels[i]),
                      static_cast<std::size_t>(pred[i])) += 1.0;
    return out;
}

// Grows the stack, fits the requested head on the retained features and
// assembles the run report. test may be null.
inline TrainedModel train_pipeline(const Dataset& train, const Dataset* test,
                                   const TrainOptions& opt) {
    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();

    detail::GrownStack grown = detail::grow_stack_impl(train.x, opt.stack);
    StackedNetwork& net = grown.net;

    detail::HeadFitResult head =
        detail::fit_head(opt.head, grown.last_hidden, train.labels, train.classes, opt);
    net.readout = std::move(head.head);

    TrainedModel out;
    out.report.dataset = train.name;
    out.report.architecture = net.widths();
    out.report.layer_seconds = net.layer_seconds;
    out.report.head = to_string(net.readout->kind);
    out.report.rank_ratios = net.rank_ratios;
    out.report.identity_trace = net.identity_trace;
    out.report.stopping_reason = to_string(net.stop_reason);
    out.report.lambda = net.readout->lambda;
    out.report.lambda_hat = head.lambda_hat;
    out.report.input_rank = net.input_rank;
    out.report.input_dim = net.input_dim;
    out.report.split_hash = content_hash(train);

    out.report.train_accuracy =
        accuracy(net.readout->predict(grown.last_hidden), train.labels);
    out.report.total_seconds = std::chrono::duration<double>(clock::now() - t0).count();

    if (test) {
        out.net = std::move(net);
        out.report.test_accuracy = evaluate(out.net, *test).accuracy;
    } else {
        out.net = std::move(net);
    }
    return out;
}

struct BenchOptions {
    TrainOptions train;
    BaselineConfig baseline;  // hidden widths filled from the grown stack
    std::size_t limit = 0;    // optional subset of the training samples
};

struct BenchReport {
    RunReport pilae;
    double baseline_seconds = 0.0;
    double baseline_train_accuracy = -1.0;
    double baseline_test_accuracy = -1.0;
    std::vector<double> baseline_epoch_losses;
    std::uint64_t split_hash = 0;
    bool baseline_diverged = false;
    std::string baseline_error;
};

// Trains the closed-form pipeline and the Adam baseline on the same data
// and the same architecture, and reports wall-clock seconds side by side.
inline BenchReport bench_run(const Dataset& train_full, const Dataset* test,
                             const BenchOptions& opt) {
    const Dataset train =
        opt.limit > 0 ? head_subset(train_full, opt.limit) : train_full;

    BenchReport out;
    out.split_hash = content_hash(train);

    TrainedModel pilae_model = train_pipeline(train, test, opt.train);
    out.pilae = pilae_model.report;

    BaselineConfig bcfg = opt.baseline;
    bcfg.hidden_widths.clear();
    for (std::size_t w : pilae_model.net.widths()) bcfg.hidden_widths.push_back(w);
    try {
        BaselineResult bres = baseline_bp_train(train.x, train.labels, train.classes, bcfg);
        out.baseline_seconds = bres.seconds;
        out.baseline_epoch_losses = bres.epoch_losses;
        out.baseline_train_accuracy =
            accuracy(bres.model.predict(train.x), train.labels);
        if (test)
            out.baseline_test_accuracy =
                accuracy(bres.model.predict(test->x), test->labels);
    } catch (const DivergenceError& e) {
        out.baseline_diverged = true;
        out.baseline_error = e.what();
    }
    return out;
}

struct ScalingPoint {
    std::size_t n = 0;
    double seconds = 0.0;
};

struct ScalingProbe {
    std::vector<ScalingPoint> points;
    std::vector<double> ratios;     // seconds(N) / seconds(N/2)
    double empirical_exponent = 0;  // mean log2 of the ratios
};

// Times the full training pipeline on nested prefixes of the data.
inline ScalingProbe probe_scaling(const Dataset& train, const std::vector<std::size_t>& ns,
                                  const TrainOptions& opt) {
    ScalingProbe out;
    for (std::size_t n : ns) {
        if (n > train.count())
            throw ArgumentError("probe_scaling: subset size exceeds the data set");
        const Dataset sub = head_subset(train, n);
        const auto t0 = std::chrono::steady_clock::now();
        (void)train_pipeline(sub, nullptr, opt);
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        out.points.push_back({n, secs});
    }
    for (std::size_t i = 1; i < out.points.size(); ++i) {
        const double ratio = out.points[i].seconds / out.points[i - 1].seconds;
        out.ratios.push_back(ratio);
        out.empirical_exponent += std::log2(ratio);
    }
    if (!out.ratios.empty())
        out.empirical_exponent /= static_cast<double>(out.ratios.size());
    return out;
}

struct SweepEntry {
    double value = 0.0;
    std::size_t width = 0;
    double recon_error = 0.0;
    double recon_error_pre_tie = 0.0;
    bool used_decay_fallback = false;
};

// Reconstruction error of a single layer across a grid of alpha or beta
// values, the signal used to pick the width parameter.
inline std::vector<SweepEntry> sweep_width_parameter(const Dataset& train,
                                                     WidthRule::Kind kind,
                                                     const std::vector<double>& values,
                                                     const LayerConfig& base) {
    std::vector<SweepEntry> out;
    for (double v : values) {
        LayerConfig cfg = base;
        cfg.width_rule = kind == WidthRule::Kind::rank_blend ? WidthRule::rank_blend(v)
                                                             : WidthRule::decay(v);
        const auto [layer, hidden] = train_layer(train.x, cfg);
        (void)hidden;
        out.push_back({v, layer.width, layer.recon_error, layer.recon_error_pre_tie,
                       layer.used_decay_fallback});
    }
    return out;
}

}  // namespace pilae
