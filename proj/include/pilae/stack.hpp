#pragma once

#include <chrono>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pilae/error.hpp"
#include "pilae/layer.hpp"
#include "pilae/matrix.hpp"
#include "pilae/pinv.hpp"
#include "pilae/readout.hpp"
#include "pilae/svd.hpp"

namespace pilae {

enum class StopReason { epsilon, max_depth, min_width };

inline const char* to_string(StopReason r) {
    switch (r) {
        case StopReason::epsilon: return "epsilon";
        case StopReason::max_depth: return "max_depth";
        case StopReason::min_width: return "min_width";
    }
    return "?";
}

struct StackConfig {
    LayerConfig layer_cfg;
    double epsilon = 1e-3;
    std::size_t max_depth = 8;
    std::size_t min_width = 8;
    bool keep_decoders = false;

    void validate() const {
        layer_cfg.validate();
        if (!(epsilon > 0.0)) throw ArgumentError("StackConfig: epsilon must be positive");
        if (max_depth < 1) throw ArgumentError("StackConfig: max_depth must be at least 1");
        if (min_width < 1) throw ArgumentError("StackConfig: min_width must be at least 1");
    }
};

struct StackedNetwork {
    std::vector<AutoencoderLayer> layers;
    std::vector<double> rank_ratios;     // rank/width of each layer's features
    std::vector<double> identity_trace;  // identity distance after each layer
    std::vector<double> layer_seconds;
    StopReason stop_reason = StopReason::max_depth;
    std::size_t input_dim = 0;
    std::size_t input_rank = 0;
    std::optional<ReadoutHead> readout;

    std::size_t depth() const { return layers.size(); }
    std::vector<std::size_t> widths() const {
        std::vector<std::size_t> w;
        for (const auto& l : layers) w.push_back(l.width);
        return w;
    }
};

// Feeds x through every encoder and activation in order.
inline Matrix transform(const StackedNetwork& net, const Matrix& x) {
    if (net.layers.empty()) throw ArgumentError("transform: network has no layers");
    Matrix h = net.layers.front().forward(x);
    for (std::size_t i = 1; i < net.layers.size(); ++i) h = net.layers[i].forward(h);
    return h;
}

inline std::vector<Matrix> export_weights(const StackedNetwork& net) {
    std::vector<Matrix> out;
    out.reserve(net.layers.size());
    for (const auto& l : net.layers) out.push_back(l.encoder);
    return out;
}

// Maps features of the last hidden layer back to input space by chaining
// the retained linear decoders. Only available in reconstruct mode.
inline Matrix reconstruct(const StackedNetwork& net, const Matrix& features) {
    if (net.layers.empty()) throw ArgumentError("reconstruct: network has no layers");
    Matrix cur = features;
    for (std::size_t i = net.layers.size(); i-- > 0;) {
        const auto& dec = net.layers[i].decoder;
        if (!dec)
            throw ArgumentError("reconstruct: decoders were not retained; "
                                "grow the stack with keep_decoders");
        cur = matmul(*dec, cur);
    }
    return cur;
}

namespace detail {

struct GrownStack {
    StackedNetwork net;
    Matrix last_hidden;
};

inline double rank_ratio_of(const Matrix& h) {
    const SvdFactors f = svd(h);
    return static_cast<double>(numeric_rank(f.sigma, h.rows(), h.cols())) /
           static_cast<double>(h.rows());
}

// Layer-by-layer growth. Each round factorizes the current feature matrix
// once and reuses it for the rank record, the width rule and the encoder;
// the rank/width ratio of a layer's own features is therefore produced by
// the next round's factorization, or computed directly when growth stops.
inline GrownStack grow_stack_impl(const Matrix& x, const StackConfig& cfg) {
    cfg.validate();
    if (x.empty()) throw ArgumentError("grow_stack: empty input");
    if (x.cols() < 2) throw ArgumentError("grow_stack: need at least 2 samples");
    if (cfg.layer_cfg.add_bias_row)
        throw ArgumentError("grow_stack: bias augmentation is a single-layer feature");

    GrownStack out;
    StackedNetwork& net = out.net;
    net.input_dim = x.rows();

    const Matrix* input = &x;
    Matrix held;
    using clock = std::chrono::steady_clock;

    for (std::size_t level = 0;; ++level) {
        const auto t0 = clock::now();
        const SvdFactors f = svd(*input);
        const std::size_t r = numeric_rank(f.sigma, input->rows(), input->cols());
        const std::size_t d = input->rows();
        if (level == 0) {
            net.input_rank = r;
        } else {
            net.rank_ratios.push_back(static_cast<double>(r) / static_cast<double>(d));
        }
        if (r == 0) throw TrainError("grow_stack: feature matrix collapsed to rank 0");

        if (level > 0) {
            const auto [rule, fell_back] = effective_width_rule(cfg.layer_cfg, r, d);
            (void)fell_back;
            if (select_width(rule, r, d) < cfg.min_width) {
                net.stop_reason = StopReason::min_width;
                break;
            }
        }

        LayerTraining trained = train_layer_with_svd(*input, cfg.layer_cfg, *input, f);
        if (!cfg.keep_decoders) trained.layer.decoder.reset();
        net.layer_seconds.push_back(std::chrono::duration<double>(clock::now() - t0).count());
        net.layers.push_back(std::move(trained.layer));
        held = std::move(trained.hidden);
        input = &held;

        const double idist = identity_distance(held, cfg.layer_cfg.lambda1);
        net.identity_trace.push_back(idist);

        if (idist < cfg.epsilon) {
            net.stop_reason = StopReason::epsilon;
            net.rank_ratios.push_back(rank_ratio_of(held));
            break;
        }
        if (net.layers.size() >= cfg.max_depth) {
            net.stop_reason = StopReason::max_depth;
            net.rank_ratios.push_back(rank_ratio_of(held));
            break;
        }
    }
    out.last_hidden = std::move(held);
    return out;
}

}  // namespace detail

inline StackedNetwork grow_stack(const Matrix& x, const StackConfig& cfg) {
    return detail::grow_stack_impl(x, cfg).net;
}

}  // namespace pilae
