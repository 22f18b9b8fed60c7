#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>

#include "pilae/activation.hpp"
#include "pilae/error.hpp"
#include "pilae/matrix.hpp"
#include "pilae/pinv.hpp"
#include "pilae/svd.hpp"

namespace pilae {

// Hidden-width policy: either blend between the input rank and dimension,
// p = floor(r + alpha (d - r)), or shrink the dimension by a fixed factor,
// p = floor(beta d).
struct WidthRule {
    enum class Kind { rank_blend, decay };
    Kind kind = Kind::rank_blend;
    double value = 0.5;

    static WidthRule rank_blend(double alpha) {
        if (!(alpha >= 0.0 && alpha <= 1.0))
            throw ArgumentError("rank_blend: alpha must lie in [0, 1]");
        return {Kind::rank_blend, alpha};
    }
    static WidthRule decay(double beta) {
        if (!(beta > 0.0 && beta <= 1.0))
            throw ArgumentError("decay: beta must lie in (0, 1]");
        return {Kind::decay, beta};
    }
    std::string describe() const {
        return kind == Kind::rank_blend ? "blend:" + std::to_string(value)
                                        : "decay:" + std::to_string(value);
    }
};

inline std::size_t select_width(const WidthRule& rule, std::size_t r, std::size_t d) {
    if (rule.kind == WidthRule::Kind::rank_blend) {
        if (r < 1 || r > d)
            throw ArgumentError("select_width: rank must lie in [1, d], got r = " +
                                std::to_string(r) + ", d = " + std::to_string(d));
        const double p = std::floor(static_cast<double>(r) +
                                    rule.value * static_cast<double>(d - r));
        return std::max<std::size_t>(1, static_cast<std::size_t>(p));
    }
    if (d < 1) throw ArgumentError("select_width: dimension must be positive");
    const double p = std::floor(rule.value * static_cast<double>(d));
    return std::max<std::size_t>(1, static_cast<std::size_t>(p));
}

struct LayerConfig {
    WidthRule width_rule = WidthRule::rank_blend(0.5);
    Activation activation = Activation::sigmoid;
    double lambda1 = 1e-6;
    bool tie_weights = true;
    bool add_bias_row = false;   // augment the input with a constant-1 row
    double fallback_beta = 0.9;  // decay factor used when blend falls back

    void validate() const {
        if (!(lambda1 > 0.0)) throw ArgumentError("LayerConfig: lambda1 must be positive");
        if (add_bias_row && tie_weights)
            throw ArgumentError(
                "LayerConfig: tie_weights cannot be combined with add_bias_row "
                "(a tied encoder has no column for the bias input)");
    }
};

// Near full rank the blend rule cannot compress, so it falls back to the
// decay rule. Returns the rule to apply and whether the fallback fired.
inline std::pair<WidthRule, bool> effective_width_rule(const LayerConfig& cfg,
                                                       std::size_t r, std::size_t d) {
    if (cfg.width_rule.kind == WidthRule::Kind::rank_blend &&
        static_cast<double>(d - r) < 0.02 * static_cast<double>(d))
        return {WidthRule::decay(cfg.fallback_beta), true};
    return {cfg.width_rule, false};
}

// One closed-form autoencoder: the encoder is a truncated pseudoinverse of
// the input (or the transposed ridge decoder once tied), plus diagnostics
// gathered while training.
struct AutoencoderLayer {
    Matrix encoder;  // p x d (p x (d+1) with a bias row)
    Activation activation = Activation::sigmoid;
    std::size_t width = 0;
    std::size_t input_dim = 0;
    std::size_t input_rank = 0;
    double recon_error = 0.0;
    double recon_error_pre_tie = 0.0;
    bool tied = false;
    bool used_decay_fallback = false;
    bool bias_row = false;
    std::optional<Matrix> decoder;  // retained only in reconstruct mode

    Matrix forward(const Matrix& x) const {
        if (x.rows() != input_dim)
            throw ArgumentError("layer forward: expected " + std::to_string(input_dim) +
                                " input rows, got " + std::to_string(x.rows()));
        if (!bias_row) return apply_activation(activation, matmul(encoder, x));
        Matrix aug(x.rows() + 1, x.cols());
        for (std::size_t i = 0; i < x.rows(); ++i)
            std::copy(x.row(i), x.row(i) + x.cols(), aug.row(i));
        for (std::size_t j = 0; j < x.cols(); ++j) aug(x.rows(), j) = 1.0;
        return apply_activation(activation, matmul(encoder, aug));
    }
};

// Mean squared reconstruction error (1/N) ||X - W_d H||_F^2, evaluated in
// column blocks so large inputs never need a full-size temporary.
inline double reconstruction_error(const Matrix& x, const Matrix& w_d, const Matrix& h) {
    if (w_d.rows() != x.rows() || w_d.cols() != h.rows() || h.cols() != x.cols())
        throw ArgumentError("reconstruction_error: shapes do not conform");
    const std::size_t n = x.cols();
    constexpr std::size_t NB = 4096;
    double total = 0.0;
    for (std::size_t c0 = 0; c0 < n; c0 += NB) {
        const std::size_t c1 = std::min(c0 + NB, n);
        const Matrix rec = matmul(w_d, slice_cols(h, c0, c1));
        const Matrix xb = slice_cols(x, c0, c1);
        const double* r = rec.data();
        const double* xp = xb.data();
        for (std::size_t i = 0, sz = rec.size(); i < sz; ++i) {
            const double dlt = xp[i] - r[i];
            total += dlt * dlt;
        }
    }
    return total / static_cast<double>(n);
}

namespace detail {

struct LayerTraining {
    AutoencoderLayer layer;
    Matrix hidden;
};

// Full layer pipeline on a precomputed factorization of the (possibly
// bias-augmented) input: width from the rank, encoder from the truncated
// pseudoinverse, ridge decoder, then an optional single tie-and-recompute
// pass. Iterating the tie is known to diverge, so exactly one pass runs.
inline LayerTraining train_layer_with_svd(const Matrix& x, const LayerConfig& cfg,
                                          const Matrix& x_in, const SvdFactors& f) {
    const std::size_t d = x_in.rows();
    const std::size_t r = numeric_rank(f.sigma, x_in.rows(), x_in.cols());
    if (r == 0) throw TrainError("train_layer: input matrix has numeric rank 0");

    const auto [rule, fell_back] = effective_width_rule(cfg, r, d);
    const std::size_t p = select_width(rule, r, d);

    AutoencoderLayer layer;
    layer.activation = cfg.activation;
    layer.width = p;
    layer.input_dim = x.rows();
    layer.input_rank = r;
    layer.used_decay_fallback = fell_back;
    layer.bias_row = cfg.add_bias_row;

    Matrix w_e = detail::truncated_pinv_from(f, x_in.rows(), x_in.cols(), p);
    Matrix hidden = apply_activation(cfg.activation, matmul(w_e, x_in));

    // Ridge decoder: W_d (H H^T + lambda I) = X H^T.
    Matrix c = gram(hidden);
    add_scaled_identity(c, cfg.lambda1);
    const Matrix l = cholesky(c);
    const Matrix w_d_t = cholesky_solve_rows(l, matmul_abt(hidden, x));  // p x d
    Matrix w_d = transpose(w_d_t);

    layer.recon_error_pre_tie = reconstruction_error(x, w_d, hidden);
    if (cfg.tie_weights) {
        layer.encoder = w_d_t;
        layer.tied = true;
        hidden = layer.forward(x);
        layer.recon_error = reconstruction_error(x, w_d, hidden);
    } else {
        layer.encoder = std::move(w_e);
        layer.recon_error = layer.recon_error_pre_tie;
    }
    if (!std::isfinite(layer.recon_error))
        throw NumericError("train_layer: non-finite reconstruction error");
    ensure_finite(layer.encoder, "train_layer encoder");
    ensure_finite(hidden, "train_layer hidden features");
    layer.decoder = std::move(w_d);  // callers drop it unless reconstruct mode is on
    return {std::move(layer), std::move(hidden)};
}

inline Matrix with_bias_row(const Matrix& x) {
    Matrix aug(x.rows() + 1, x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i)
        std::copy(x.row(i), x.row(i) + x.cols(), aug.row(i));
    for (std::size_t j = 0; j < x.cols(); ++j) aug(x.rows(), j) = 1.0;
    return aug;
}

}  // namespace detail

// Trains one autoencoder on x (d x N, samples as columns) and returns the
// layer together with its hidden feature matrix f(W_e X), which is the
// input for the next layer in a stack.
inline std::pair<AutoencoderLayer, Matrix> train_layer(const Matrix& x,
                                                       const LayerConfig& cfg) {
    cfg.validate();
    if (x.empty()) throw ArgumentError("train_layer: empty input");
    if (x.cols() < 2) throw ArgumentError("train_layer: need at least 2 samples");
    ensure_finite(x, "train_layer input");
    if (frobenius_sq(x) == 0.0) throw TrainError("train_layer: all-zero input matrix");

    detail::LayerTraining t =
        cfg.add_bias_row
            ? [&] {
                  const Matrix aug = detail::with_bias_row(x);
                  return detail::train_layer_with_svd(x, cfg, aug, svd(aug));
              }()
            : detail::train_layer_with_svd(x, cfg, x, svd(x));
    t.layer.decoder.reset();
    return {std::move(t.layer), std::move(t.hidden)};
}

}  // namespace pilae
