#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "pilae/error.hpp"
#include "pilae/matrix.hpp"
#include "pilae/pinv.hpp"

namespace pilae {

// One observation for the last-hidden-width model: input-data rank,
// training-sample count and the best width found by search.
struct WidthRecord {
    std::size_t r = 0;
    std::size_t n = 0;
    std::size_t p_star = 0;
};

// Quadratic width predictor ceil(t0 + t1 r + t2 N + t3 r^2 + t4 N^2) with
// a blend-rule fallback for non-positive predictions.
struct WidthRegression {
    std::array<double, 5> theta{0.0, 0.0, 0.0, 0.0, 0.0};
    double alpha_fallback = 0.5;
};

inline long predict_width_raw(const WidthRegression& reg, std::size_t r, std::size_t n) {
    const double rr = static_cast<double>(r), nn = static_cast<double>(n);
    const double p = reg.theta[0] + reg.theta[1] * rr + reg.theta[2] * nn +
                     reg.theta[3] * rr * rr + reg.theta[4] * nn * nn;
    return static_cast<long>(std::ceil(p));
}

inline std::size_t estimate_last_width(std::size_t r, std::size_t n,
                                       const WidthRegression& reg, std::size_t d) {
    if (r == 0 || n == 0 || d == 0)
        throw ArgumentError("estimate_last_width: r, n and d must be positive");
    const long p = predict_width_raw(reg, r, n);
    if (p > 0) return static_cast<std::size_t>(p);
    const double fb = std::floor(static_cast<double>(r) +
                                 reg.alpha_fallback * static_cast<double>(d - r));
    return std::max<std::size_t>(1, static_cast<std::size_t>(fb));
}

struct WidthRegressionFit {
    WidthRegression reg;
    double residual_sq = 0.0;
};

namespace detail {

inline Matrix width_design_matrix(const std::vector<WidthRecord>& records) {
    Matrix d(records.size(), 5);
    for (std::size_t i = 0; i < records.size(); ++i) {
        const double r = static_cast<double>(records[i].r);
        const double n = static_cast<double>(records[i].n);
        d(i, 0) = 1.0;
        d(i, 1) = r;
        d(i, 2) = n;
        d(i, 3) = r * r;
        d(i, 4) = n * n;
    }
    return d;
}

}  // namespace detail

// Least-squares fit of p* against the basis [1, r, N, r^2, N^2].
inline WidthRegressionFit fit_width_regression(const std::vector<WidthRecord>& records) {
    if (records.size() < 5)
        throw ArgumentError("fit_width_regression: need at least 5 records, got " +
                            std::to_string(records.size()));
    const Matrix d = detail::width_design_matrix(records);
    const SvdFactors f = svd(d);
    if (numeric_rank(f.sigma, d.rows(), d.cols()) < 5) {
        static const char* names[] = {"1", "r", "N", "r^2", "N^2"};
        // The right singular vector of the smallest singular value spans
        // the dependence; its large components name the collinear columns.
        std::string cols;
        for (std::size_t i = 0; i < 5; ++i) {
            if (std::fabs(f.v(i, 4)) > 0.3) {
                if (!cols.empty()) cols += ", ";
                cols += names[i];
            }
        }
        throw ArgumentError("fit_width_regression: design matrix is rank deficient "
                            "(collinear basis columns: " + cols + ")");
    }

    const Matrix dp = pinv(d);  // 5 x k
    WidthRegressionFit fit;
    for (std::size_t i = 0; i < 5; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < records.size(); ++j)
            s += dp(i, j) * static_cast<double>(records[j].p_star);
        fit.reg.theta[i] = s;
    }
    for (std::size_t j = 0; j < records.size(); ++j) {
        double pred = 0.0;
        for (std::size_t i = 0; i < 5; ++i) pred += d(j, i) * fit.reg.theta[i];
        const double resid = static_cast<double>(records[j].p_star) - pred;
        fit.residual_sq += resid * resid;
    }
    return fit;
}

struct LooPrediction {
    WidthRecord record;
    WidthRegression reg;       // fitted without this record
    long predicted = 0;        // raw polynomial prediction, may be negative
    bool fallback = false;     // prediction was not positive
};

// Leave-one-out driver: refits the regression excluding each record and
// predicts that record's width from the rest.
inline std::vector<LooPrediction> leave_one_out_width(
    const std::vector<WidthRecord>& records) {
    if (records.size() < 6)
        throw ArgumentError("leave_one_out_width: need at least 6 records so every "
                            "fold keeps 5");
    std::vector<LooPrediction> out;
    for (std::size_t i = 0; i < records.size(); ++i) {
        std::vector<WidthRecord> rest;
        rest.reserve(records.size() - 1);
        for (std::size_t j = 0; j < records.size(); ++j)
            if (j != i) rest.push_back(records[j]);
        LooPrediction p;
        p.record = records[i];
        p.reg = fit_width_regression(rest).reg;
        p.predicted = predict_width_raw(p.reg, records[i].r, records[i].n);
        p.fallback = p.predicted <= 0;
        out.push_back(std::move(p));
    }
    return out;
}

// Width-records CSV: header "r,n,p_star" then one record per line.
inline std::vector<WidthRecord> load_width_records(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open width records file '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw ParseError("width records file is empty", 1);
    auto strip = [](std::string s) {
        s.erase(0, s.find_first_not_of(" \t\r"));
        s.erase(s.find_last_not_of(" \t\r") + 1);
        return s;
    };
    if (strip(line) != "r,n,p_star")
        throw ParseError("width records header must be 'r,n,p_star'", 1);

    std::vector<WidthRecord> out;
    long line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (strip(line).empty()) continue;
        std::istringstream ss(line);
        std::string field;
        unsigned long vals[3];
        for (int i = 0; i < 3; ++i) {
            if (!std::getline(ss, field, ','))
                throw ParseError("width record needs 3 fields", line_no);
            try {
                vals[i] = std::stoul(strip(field));
            } catch (const std::exception&) {
                throw ParseError("width record field '" + strip(field) +
                                 "' is not a non-negative integer", line_no);
            }
        }
        if (std::getline(ss, field, ','))
            throw ParseError("width record has more than 3 fields", line_no);
        if (vals[0] == 0 || vals[1] == 0 || vals[2] == 0)
            throw ParseError("width record fields must be positive", line_no);
        out.push_back({vals[0], vals[1], vals[2]});
    }
    return out;
}

}  // namespace pilae
