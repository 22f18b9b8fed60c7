#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "pilae/error.hpp"
#include "pilae/matrix.hpp"
#include "pilae/pinv.hpp"

namespace pilae {

enum class HeadKind { shln, softmax, cascade };

inline const char* to_string(HeadKind k) {
    switch (k) {
        case HeadKind::shln: return "shln";
        case HeadKind::softmax: return "softmax";
        case HeadKind::cascade: return "cascade";
    }
    return "?";
}

inline HeadKind head_kind_from_string(const std::string& s) {
    if (s == "shln") return HeadKind::shln;
    if (s == "softmax") return HeadKind::softmax;
    if (s == "cascade") return HeadKind::cascade;
    throw ArgumentError("unknown head kind '" + s + "'");
}

// Data-driven estimate of the output-layer regularization parameter:
// d_x^2 (1 + (d_x - 1)^2) * rss / (n * wss).
inline double estimate_reg_param(double residual_sq_sum, double weight_sq_sum,
                                 std::size_t d_x, std::size_t n) {
    if (n < 1) throw ArgumentError("estimate_reg_param: n must be at least 1");
    if (!(weight_sq_sum > 0.0))
        throw ArgumentError("estimate_reg_param: weight_sq_sum must be positive");
    if (residual_sq_sum < 0.0)
        throw ArgumentError("estimate_reg_param: negative residual sum");
    const double d = static_cast<double>(d_x);
    return d * d * (1.0 + (d - 1.0) * (d - 1.0)) * residual_sq_sum /
           (static_cast<double>(n) * weight_sq_sum);
}

// Ridge readout weights W = Z Y^T (Y Y^T + lambda I)^{-1}, shape m x p.
inline Matrix fit_output_weights(const Matrix& y, const Matrix& z, double lambda) {
    if (y.empty() || z.empty()) throw ArgumentError("fit_output_weights: empty input");
    if (z.cols() != y.cols())
        throw ArgumentError("fit_output_weights: targets and features disagree on N");
    if (!(lambda > 0.0)) throw ArgumentError("fit_output_weights: lambda must be positive");
    Matrix c = gram(y);
    add_scaled_identity(c, lambda);
    const Matrix l = cholesky(c);
    const Matrix wt = cholesky_solve_rows(l, matmul_abt(y, z));  // p x m
    Matrix w = transpose(wt);
    ensure_finite(w, "fit_output_weights");
    return w;
}

inline Matrix one_hot(const std::vector<int>& labels, std::size_t k) {
    Matrix z(k, labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= k)
            throw ArgumentError("one_hot: label " + std::to_string(labels[i]) +
                                " outside [0, " + std::to_string(k) + ")");
        z(static_cast<std::size_t>(labels[i]), i) = 1.0;
    }
    return z;
}

inline std::vector<int> argmax_columns(const Matrix& scores) {
    std::vector<int> out(scores.cols());
    for (std::size_t j = 0; j < scores.cols(); ++j) {
        std::size_t arg = 0;
        double best = scores(0, j);
        for (std::size_t i = 1; i < scores.rows(); ++i) {
            if (scores(i, j) > best) {
                best = scores(i, j);
                arg = i;
            }
        }
        out[j] = static_cast<int>(arg);
    }
    return out;
}

inline double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth) {
    if (predicted.size() != truth.size() || truth.empty())
        throw ArgumentError("accuracy: size mismatch or empty label set");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < truth.size(); ++i)
        if (predicted[i] == truth[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(truth.size());
}

// Column-wise softmax of theta * x with max subtraction for overflow
// safety. Every column sums to one.
inline Matrix softmax_predict(const Matrix& theta, const Matrix& x) {
    Matrix logits = matmul(theta, x);
    const std::size_t k = logits.rows(), n = logits.cols();
    for (std::size_t j = 0; j < n; ++j) {
        double mx = logits(0, j);
        for (std::size_t i = 1; i < k; ++i) mx = std::max(mx, logits(i, j));
        double sum = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            const double e = std::exp(logits(i, j) - mx);
            logits(i, j) = e;
            sum += e;
        }
        for (std::size_t i = 0; i < k; ++i) logits(i, j) /= sum;
    }
    return logits;
}

struct SoftmaxOptions {
    double step = 0.1;        // initial step; adapted to keep the loss monotone
    std::size_t epochs = 500;
    double slack = 1e-12;     // tolerated loss increase when accepting a step
};

struct SoftmaxFit {
    Matrix theta;  // K x p
    std::vector<double> loss_history;
    double final_step = 0.0;
};

namespace detail {

inline double softmax_loss(const Matrix& proba, const std::vector<int>& labels) {
    double loss = 0.0;
    for (std::size_t j = 0; j < labels.size(); ++j) {
        const double p = proba(static_cast<std::size_t>(labels[j]), j);
        loss -= std::log(std::max(p, 1e-300));
    }
    return loss / static_cast<double>(labels.size());
}

}  // namespace detail

// Multinomial logistic regression trained by full-batch gradient descent
// from a zero initialization. The gradient is -(1/N)(T - P) X^T. The step
// starts at opt.step, halves whenever a step would raise the loss and
// grows 5% on success, so the recorded loss never increases beyond slack.
inline SoftmaxFit softmax_fit(const Matrix& x, const std::vector<int>& labels,
                              std::size_t k, const SoftmaxOptions& opt = {}) {
    if (x.empty()) throw ArgumentError("softmax_fit: empty features");
    if (labels.size() != x.cols())
        throw ArgumentError("softmax_fit: label count does not match sample count");
    if (k < 1) throw ArgumentError("softmax_fit: need at least one class");
    if (x.cols() < k) throw ArgumentError("softmax_fit: fewer samples than classes");

    const std::size_t p = x.rows(), n = x.cols();
    const Matrix targets = one_hot(labels, k);
    SoftmaxFit fit;
    fit.theta = Matrix(k, p);
    double step = opt.step;

    Matrix proba = softmax_predict(fit.theta, x);
    double loss = detail::softmax_loss(proba, labels);
    if (!std::isfinite(loss))
        throw DivergenceError("softmax_fit: non-finite loss at initialization");
    fit.loss_history.push_back(loss);

    for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
        Matrix residual = proba;  // P - T
        {
            double* r = residual.data();
            const double* t = targets.data();
            for (std::size_t i = 0, sz = residual.size(); i < sz; ++i) r[i] -= t[i];
        }
        Matrix grad = matmul_abt(residual, x);
        {
            double* g = grad.data();
            const double inv_n = 1.0 / static_cast<double>(n);
            for (std::size_t i = 0, sz = grad.size(); i < sz; ++i) g[i] *= inv_n;
        }
        double grad_sq = frobenius_sq(grad);
        if (grad_sq == 0.0) {
            fit.loss_history.push_back(loss);
            continue;
        }

        Matrix candidate(k, p);
        double cand_loss = 0.0;
        Matrix cand_proba;
        int halvings = 0;
        for (;; ++halvings) {
            if (halvings > 200)
                throw DivergenceError("softmax_fit: step control exhausted at step " +
                                      std::to_string(step));
            for (std::size_t i = 0, sz = candidate.size(); i < sz; ++i)
                candidate.data()[i] = fit.theta.data()[i] - step * grad.data()[i];
            cand_proba = softmax_predict(candidate, x);
            cand_loss = detail::softmax_loss(cand_proba, labels);
            if (std::isnan(cand_loss))
                throw DivergenceError("softmax_fit: loss became NaN at step size " +
                                      std::to_string(step));
            if (cand_loss <= loss + opt.slack) break;
            step *= 0.5;
        }
        fit.theta = std::move(candidate);
        proba = std::move(cand_proba);
        loss = cand_loss;
        fit.loss_history.push_back(loss);
        step *= 1.05;
    }
    fit.final_step = step;
    ensure_finite(fit.theta, "softmax_fit parameters");
    return fit;
}

// Supervised head over the feature stack. shln holds ridge output weights;
// softmax holds logistic-regression parameters; cascade is shln whose
// scores are passed through a softmax to read as probabilities.
struct ReadoutHead {
    HeadKind kind = HeadKind::shln;
    Matrix weights;  // m x p (shln, cascade) or K x p (softmax)
    double lambda = 0.0;
    std::size_t classes = 0;

    Matrix scores(const Matrix& y) const {
        if (weights.cols() != y.rows())
            throw ArgumentError("readout: feature dimension mismatch (head expects " +
                                std::to_string(weights.cols()) + ", got " +
                                std::to_string(y.rows()) + ")");
        return matmul(weights, y);
    }
    Matrix probabilities(const Matrix& y) const {
        if (kind == HeadKind::shln) return scores(y);
        return softmax_predict(weights, y);
    }
    std::vector<int> predict(const Matrix& y) const { return argmax_columns(scores(y)); }
};

struct LambdaTrial {
    double lambda = 0.0;
    double val_accuracy = 0.0;
};

struct LambdaSearch {
    double best = 0.0;
    std::vector<LambdaTrial> trials;
};

// Holdout search around a point estimate: the grid {0.1, 0.5, 1, 2, 10} *
// lambda_hat is evaluated on a deterministic split (leading columns train,
// trailing fraction validates) and ties break toward the smaller lambda.
inline LambdaSearch search_lambda(const Matrix& y, const Matrix& z,
                                  const std::vector<int>& labels, double lambda_hat,
                                  double val_fraction) {
    if (!(lambda_hat > 0.0))
        throw ArgumentError("search_lambda: lambda_hat must be positive");
    if (!(val_fraction > 0.0 && val_fraction < 1.0))
        throw ArgumentError("search_lambda: val_fraction must lie in (0, 1)");
    const std::size_t n = y.cols();
    if (labels.size() != n) throw ArgumentError("search_lambda: label count mismatch");
    std::size_t n_val = static_cast<std::size_t>(
        std::max(1.0, std::round(static_cast<double>(n) * val_fraction)));
    if (n_val >= n) n_val = n - 1;
    const std::size_t n_train = n - n_val;

    const std::size_t k = z.rows();
    std::vector<bool> seen(k, false);
    for (std::size_t i = 0; i < n_train; ++i) seen[static_cast<std::size_t>(labels[i])] = true;
    for (std::size_t c = 0; c < k; ++c)
        if (!seen[c])
            throw TrainError("search_lambda: class " + std::to_string(c) +
                             " absent from the training part of the holdout split");

    const Matrix y_train = slice_cols(y, 0, n_train);
    const Matrix z_train = slice_cols(z, 0, n_train);
    const Matrix y_val = slice_cols(y, n_train, n);
    const std::vector<int> val_labels(labels.begin() + static_cast<long>(n_train),
                                      labels.end());

    LambdaSearch out;
    const double grid[] = {0.1, 0.5, 1.0, 2.0, 10.0};
    double best_acc = -1.0;
    for (double g : grid) {
        const double lam = g * lambda_hat;
        const Matrix w = fit_output_weights(y_train, z_train, lam);
        const double acc = accuracy(argmax_columns(matmul(w, y_val)), val_labels);
        out.trials.push_back({lam, acc});
        if (acc > best_acc) {
            best_acc = acc;
            out.best = lam;
        }
    }
    return out;
}

}  // namespace pilae
