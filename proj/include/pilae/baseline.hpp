#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "pilae/activation.hpp"
#include "pilae/error.hpp"
#include "pilae/matrix.hpp"
#include "pilae/readout.hpp"

namespace pilae {

// Reference gradient-descent trainer: a dense MLP with sigmoid hidden
// layers, a softmax output and bias terms, optimized by mini-batch Adam.
struct BaselineConfig {
    double learning_rate = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::size_t batch_size = 128;
    std::size_t epochs = 20;
    std::uint64_t seed = 0;
    std::vector<std::size_t> hidden_widths;

    void validate() const {
        if (!(learning_rate > 0.0) || !(epsilon > 0.0) || batch_size < 1)
            throw ArgumentError("BaselineConfig: hyperparameters must be positive");
        if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0))
            throw ArgumentError("BaselineConfig: decay rates must lie in (0, 1)");
    }
};

struct MlpNetwork {
    struct DenseLayer {
        Matrix w;
        std::vector<double> b;
    };
    std::vector<DenseLayer> layers;  // all-but-last sigmoid, last linear

    Matrix forward(const Matrix& x) const {
        Matrix a = x;
        for (std::size_t i = 0; i < layers.size(); ++i) {
            Matrix z = matmul(layers[i].w, a);
            for (std::size_t r = 0; r < z.rows(); ++r) {
                double* zr = z.row(r);
                const double br = layers[i].b[r];
                for (std::size_t c = 0; c < z.cols(); ++c) zr[c] += br;
            }
            if (i + 1 < layers.size()) z = apply_activation(Activation::sigmoid, std::move(z));
            a = std::move(z);
        }
        return a;  // logits
    }

    std::vector<int> predict(const Matrix& x) const { return argmax_columns(forward(x)); }
};

struct MlpGradients {
    std::vector<Matrix> dw;
    std::vector<std::vector<double>> db;
    double loss = 0.0;
};

namespace detail {

inline Matrix softmax_columns(Matrix logits) {
    for (std::size_t j = 0; j < logits.cols(); ++j) {
        double mx = logits(0, j);
        for (std::size_t i = 1; i < logits.rows(); ++i) mx = std::max(mx, logits(i, j));
        double sum = 0.0;
        for (std::size_t i = 0; i < logits.rows(); ++i) {
            const double e = std::exp(logits(i, j) - mx);
            logits(i, j) = e;
            sum += e;
        }
        for (std::size_t i = 0; i < logits.rows(); ++i) logits(i, j) /= sum;
    }
    return logits;
}

}  // namespace detail

// One forward/backward pass over a batch: mean cross-entropy loss and its
// gradients for every weight matrix and bias vector. Shared between the
// training loop and the finite-difference checks.
inline MlpGradients mlp_loss_and_gradients(const MlpNetwork& net, const Matrix& x,
                                           const std::vector<int>& labels) {
    const std::size_t batch = x.cols();
    const std::size_t depth = net.layers.size();
    std::vector<Matrix> acts(depth + 1);
    acts[0] = x;
    for (std::size_t i = 0; i < depth; ++i) {
        Matrix z = matmul(net.layers[i].w, acts[i]);
        for (std::size_t r = 0; r < z.rows(); ++r) {
            double* zr = z.row(r);
            const double br = net.layers[i].b[r];
            for (std::size_t c = 0; c < batch; ++c) zr[c] += br;
        }
        acts[i + 1] = (i + 1 < depth) ? apply_activation(Activation::sigmoid, std::move(z))
                                      : std::move(z);
    }

    const Matrix proba = detail::softmax_columns(acts[depth]);
    MlpGradients g;
    g.dw.resize(depth);
    g.db.resize(depth);
    for (std::size_t j = 0; j < batch; ++j)
        g.loss -= std::log(std::max(proba(static_cast<std::size_t>(labels[j]), j), 1e-300));
    g.loss /= static_cast<double>(batch);

    Matrix delta = proba;  // (P - T) / batch
    {
        const double inv = 1.0 / static_cast<double>(batch);
        for (std::size_t j = 0; j < batch; ++j) {
            delta(static_cast<std::size_t>(labels[j]), j) -= 1.0;
        }
        double* dp = delta.data();
        for (std::size_t i = 0, n = delta.size(); i < n; ++i) dp[i] *= inv;
    }

    for (std::size_t i = depth; i-- > 0;) {
        g.dw[i] = matmul_abt(delta, acts[i]);
        g.db[i].assign(delta.rows(), 0.0);
        for (std::size_t r = 0; r < delta.rows(); ++r) {
            const double* dr = delta.row(r);
            double s = 0.0;
            for (std::size_t c = 0; c < batch; ++c) s += dr[c];
            g.db[i][r] = s;
        }
        if (i == 0) break;
        Matrix back = matmul_atb(net.layers[i].w, delta);
        // sigmoid derivative through the stored activation
        double* bp = back.data();
        const double* ap = acts[i].data();
        for (std::size_t e = 0, n = back.size(); e < n; ++e)
            bp[e] *= ap[e] * (1.0 - ap[e]);
        delta = std::move(back);
    }
    return g;
}

struct BaselineResult {
    MlpNetwork model;
    double seconds = 0.0;
    std::vector<double> epoch_losses;
};

namespace detail {

struct AdamState {
    std::vector<double> m, v;
    explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

inline void adam_step(double* param, const double* grad, AdamState& st, std::size_t n,
                      std::uint64_t t, const BaselineConfig& cfg) {
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < n; ++i) {
        st.m[i] = cfg.beta1 * st.m[i] + (1.0 - cfg.beta1) * grad[i];
        st.v[i] = cfg.beta2 * st.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
        const double mhat = st.m[i] / bc1;
        const double vhat = st.v[i] / bc2;
        param[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
    }
}

}  // namespace detail

inline MlpNetwork make_mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                           std::size_t classes, std::uint64_t seed) {
    MlpNetwork net;
    std::mt19937_64 rng(seed);
    std::size_t fan_in = input_dim;
    std::vector<std::size_t> outs = hidden;
    outs.push_back(classes);
    for (std::size_t w : outs) {
        const double lim = std::sqrt(6.0 / static_cast<double>(fan_in + w));
        std::uniform_real_distribution<double> dist(-lim, lim);
        MlpNetwork::DenseLayer layer;
        layer.w = Matrix(w, fan_in);
        for (std::size_t i = 0, n = layer.w.size(); i < n; ++i) layer.w.data()[i] = dist(rng);
        layer.b.assign(w, 0.0);
        net.layers.push_back(std::move(layer));
        fan_in = w;
    }
    return net;
}

inline BaselineResult baseline_bp_train(const Matrix& x, const std::vector<int>& labels,
                                        std::size_t classes, const BaselineConfig& cfg) {
    cfg.validate();
    if (x.empty() || labels.size() != x.cols())
        throw ArgumentError("baseline_bp_train: features and labels disagree");

    const auto t0 = std::chrono::steady_clock::now();
    MlpNetwork net = make_mlp(x.rows(), cfg.hidden_widths, classes, cfg.seed);

    std::vector<detail::AdamState> wstate, bstate;
    for (const auto& l : net.layers) {
        wstate.emplace_back(l.w.size());
        bstate.emplace_back(l.b.size());
    }

    std::mt19937_64 shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
    std::vector<std::size_t> order(x.cols());
    std::iota(order.begin(), order.end(), 0);

    BaselineResult out;
    std::uint64_t t = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double epoch_loss = 0.0;
        std::size_t seen = 0;
        for (std::size_t pos = 0; pos < order.size(); pos += cfg.batch_size) {
            const std::size_t end = std::min(pos + cfg.batch_size, order.size());
            const std::vector<std::size_t> idx(order.begin() + static_cast<long>(pos),
                                               order.begin() + static_cast<long>(end));
            Matrix bx = gather_cols(x, idx);
            std::vector<int> by(idx.size());
            for (std::size_t i = 0; i < idx.size(); ++i) by[i] = labels[idx[i]];

            MlpGradients g = mlp_loss_and_gradients(net, bx, by);
            if (!std::isfinite(g.loss))
                throw DivergenceError("baseline_bp_train: loss became non-finite at epoch " +
                                      std::to_string(epoch));
            epoch_loss += g.loss * static_cast<double>(idx.size());
            seen += idx.size();

            ++t;
            for (std::size_t i = 0; i < net.layers.size(); ++i) {
                detail::adam_step(net.layers[i].w.data(), g.dw[i].data(), wstate[i],
                                  net.layers[i].w.size(), t, cfg);
                detail::adam_step(net.layers[i].b.data(), g.db[i].data(), bstate[i],
                                  net.layers[i].b.size(), t, cfg);
            }
        }
        out.epoch_losses.push_back(epoch_loss / static_cast<double>(seen));
    }
    out.model = std::move(net);
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

}  // namespace pilae
