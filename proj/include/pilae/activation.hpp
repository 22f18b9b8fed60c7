#pragma once

#include <cmath>
#include <string>

#include "pilae/error.hpp"
#include "pilae/matrix.hpp"

namespace pilae {

enum class Activation { sigmoid, tanh, step };

inline const char* to_string(Activation a) {
    switch (a) {
        case Activation::sigmoid: return "sigmoid";
        case Activation::tanh: return "tanh";
        case Activation::step: return "step";
    }
    return "?";
}

inline Activation activation_from_string(const std::string& s) {
    if (s == "sigmoid") return Activation::sigmoid;
    if (s == "tanh") return Activation::tanh;
    if (s == "step") return Activation::step;
    throw ArgumentError("unknown activation '" + s + "'");
}

inline double apply_activation(Activation a, double x) {
    switch (a) {
        case Activation::sigmoid:
            if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
            else {
                const double e = std::exp(x);
                return e / (1.0 + e);
            }
        case Activation::tanh: return std::tanh(x);
        case Activation::step: return x >= 0.5 ? 1.0 : 0.0;
    }
    return 0.0;
}

inline Matrix apply_activation(Activation a, Matrix z) {
    double* p = z.data();
    for (std::size_t i = 0, n = z.size(); i < n; ++i) p[i] = apply_activation(a, p[i]);
    return z;
}

}  // namespace pilae
