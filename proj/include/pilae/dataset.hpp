#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "pilae/error.hpp"
#include "pilae/matrix.hpp"

namespace pilae {

// A labeled data set with samples as columns of x (d x N).
struct Dataset {
    Matrix x;
    std::vector<int> labels;
    std::size_t classes = 0;
    std::string name;
    std::map<std::string, std::string> meta;

    std::size_t dim() const { return x.rows(); }
    std::size_t count() const { return x.cols(); }
};

namespace detail {

inline std::uint32_t read_be_u32(std::istream& in, const std::string& path) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw ParseError("truncated IDX header in '" + path + "'");
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

}  // namespace detail

// Reads a big-endian IDX image/label pair (the MNIST container format).
// Pixels are scaled to [0, 1] and each image becomes one column.
inline Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw IoError("cannot open IDX image file '" + images_path + "'");
    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw IoError("cannot open IDX label file '" + labels_path + "'");

    const std::uint32_t img_magic = detail::read_be_u32(img, images_path);
    if (img_magic != 0x00000803u)
        throw ParseError("'" + images_path + "' is not an IDX image file (magic " +
                         std::to_string(img_magic) + ", expected 2051)");
    const std::uint32_t n_images = detail::read_be_u32(img, images_path);
    const std::uint32_t n_rows = detail::read_be_u32(img, images_path);
    const std::uint32_t n_cols = detail::read_be_u32(img, images_path);

    const std::uint32_t lab_magic = detail::read_be_u32(lab, labels_path);
    if (lab_magic != 0x00000801u)
        throw ParseError("'" + labels_path + "' is not an IDX label file (magic " +
                         std::to_string(lab_magic) + ", expected 2049)");
    const std::uint32_t n_labels = detail::read_be_u32(lab, labels_path);
    if (n_labels != n_images)
        throw ParseError("IDX count mismatch: " + std::to_string(n_images) +
                         " images vs " + std::to_string(n_labels) + " labels");
    if (n_images == 0 || n_rows == 0 || n_cols == 0)
        throw ParseError("IDX file '" + images_path + "' declares an empty data set");

    const std::size_t d = static_cast<std::size_t>(n_rows) * n_cols;
    Dataset ds;
    ds.x = Matrix(d, n_images);
    std::vector<unsigned char> buf(d);
    for (std::size_t i = 0; i < n_images; ++i) {
        if (!img.read(reinterpret_cast<char*>(buf.data()), static_cast<long>(d)))
            throw ParseError("truncated IDX image data in '" + images_path +
                             "' at image " + std::to_string(i));
        for (std::size_t px = 0; px < d; ++px)
            ds.x(px, i) = static_cast<double>(buf[px]) / 255.0;
    }
    ds.labels.resize(n_images);
    std::vector<unsigned char> lbuf(n_images);
    if (!lab.read(reinterpret_cast<char*>(lbuf.data()), static_cast<long>(n_images)))
        throw ParseError("truncated IDX label data in '" + labels_path + "'");
    int max_label = 0;
    for (std::size_t i = 0; i < n_images; ++i) {
        ds.labels[i] = static_cast<int>(lbuf[i]);
        max_label = std::max(max_label, ds.labels[i]);
    }
    ds.classes = static_cast<std::size_t>(max_label) + 1;
    ds.meta["source_images"] = images_path;
    ds.meta["source_labels"] = labels_path;
    ds.meta["normalization"] = "pixel/255";
    return ds;
}

namespace detail {

// Minimal RFC-4180 field splitter: quoted fields, doubled-quote escapes,
// no embedded newlines.
inline std::vector<std::string> split_csv_line(const std::string& line, long line_no) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    if (quoted) throw ParseError("unterminated quoted field", line_no);
    fields.push_back(cur);
    return fields;
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace detail

// Loads a rectangular numeric CSV. Features are z-scored per dimension
// (constant columns map to zero), the label column becomes a class index
// through a first-seen vocabulary. label_column may be negative to count
// from the end (-1 is the last column).
inline Dataset load_csv(const std::string& path, long label_column = -1,
                        bool has_header = true) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open CSV file '" + path + "'");

    std::string line;
    long line_no = 0;
    if (has_header) {
        if (!std::getline(in, line)) throw ParseError("CSV file is empty", 1);
        ++line_no;
    }

    std::vector<std::vector<double>> rows;
    std::vector<std::string> raw_labels;
    std::size_t n_fields = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto fields = detail::split_csv_line(line, line_no);
        if (rows.empty() && raw_labels.empty()) {
            n_fields = fields.size();
            if (n_fields < 2)
                throw ParseError("CSV needs at least one feature and a label column",
                                 line_no);
        } else if (fields.size() != n_fields) {
            throw ParseError("ragged CSV row: expected " + std::to_string(n_fields) +
                             " fields, got " + std::to_string(fields.size()), line_no);
        }
        long lc = label_column < 0 ? static_cast<long>(n_fields) + label_column
                                   : label_column;
        if (lc < 0 || lc >= static_cast<long>(n_fields))
            throw ArgumentError("label column " + std::to_string(label_column) +
                                " out of range for " + std::to_string(n_fields) +
                                " columns");
        std::vector<double> feat;
        feat.reserve(n_fields - 1);
        for (std::size_t i = 0; i < n_fields; ++i) {
            if (static_cast<long>(i) == lc) {
                raw_labels.push_back(detail::trim(fields[i]));
                continue;
            }
            const std::string cell = detail::trim(fields[i]);
            double v = 0.0;
            const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (res.ec != std::errc() || res.ptr != cell.data() + cell.size())
                throw ParseError("non-numeric feature cell '" + cell + "'", line_no);
            feat.push_back(v);
        }
        rows.push_back(std::move(feat));
    }
    if (rows.empty()) throw ParseError("CSV file '" + path + "' holds no data rows");

    const std::size_t n = rows.size(), d = rows.front().size();
    Dataset ds;
    ds.x = Matrix(d, n);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < d; ++i) ds.x(i, j) = rows[j][i];

    // z-score per dimension; a zero spread divides by one instead
    std::string vocab_note;
    for (std::size_t i = 0; i < d; ++i) {
        double* r = ds.x.row(i);
        double mean = 0.0;
        for (std::size_t j = 0; j < n; ++j) mean += r[j];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t j = 0; j < n; ++j) var += (r[j] - mean) * (r[j] - mean);
        var /= static_cast<double>(n);
        const double sd = var > 0.0 ? std::sqrt(var) : 1.0;
        for (std::size_t j = 0; j < n; ++j) r[j] = (r[j] - mean) / sd;
    }

    std::map<std::string, int> vocab;
    std::vector<std::string> vocab_order;
    ds.labels.reserve(n);
    for (const auto& s : raw_labels) {
        auto it = vocab.find(s);
        if (it == vocab.end()) {
            it = vocab.emplace(s, static_cast<int>(vocab_order.size())).first;
            vocab_order.push_back(s);
        }
        ds.labels.push_back(it->second);
    }
    ds.classes = vocab_order.size();
    for (std::size_t i = 0; i < vocab_order.size(); ++i) {
        if (i) vocab_note += "|";
        vocab_note += vocab_order[i];
    }
    ds.meta["source"] = path;
    ds.meta["normalization"] = "z-score";
    ds.meta["label_vocab"] = vocab_note;
    ensure_finite(ds.x, "load_csv features");
    return ds;
}

// Deterministic shuffled k-fold partition: folds are disjoint, cover all
// indices and differ in size by at most one.
inline std::vector<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>>
kfold_split(const Dataset& ds, std::size_t k, std::uint64_t seed) {
    const std::size_t n = ds.count();
    if (k < 2) throw ArgumentError("kfold_split: k must be at least 2");
    if (k > n) throw ArgumentError("kfold_split: k exceeds the sample count");

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);

    std::vector<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> folds;
    const std::size_t base = n / k, extra = n % k;
    std::size_t pos = 0;
    for (std::size_t f = 0; f < k; ++f) {
        const std::size_t sz = base + (f < extra ? 1 : 0);
        std::vector<std::size_t> test(perm.begin() + static_cast<long>(pos),
                                      perm.begin() + static_cast<long>(pos + sz));
        std::vector<std::size_t> train;
        train.reserve(n - sz);
        for (std::size_t i = 0; i < n; ++i)
            if (i < pos || i >= pos + sz) train.push_back(perm[i]);
        std::sort(test.begin(), test.end());
        std::sort(train.begin(), train.end());
        folds.emplace_back(std::move(train), std::move(test));
        pos += sz;
    }
    return folds;
}

inline Dataset subset(const Dataset& ds, const std::vector<std::size_t>& idx) {
    Dataset out;
    out.x = gather_cols(ds.x, idx);
    out.labels.reserve(idx.size());
    for (auto i : idx) out.labels.push_back(ds.labels[i]);
    out.classes = ds.classes;
    out.name = ds.name;
    out.meta = ds.meta;
    return out;
}

inline Dataset head_subset(const Dataset& ds, std::size_t n) {
    if (n >= ds.count()) return ds;
    Dataset out;
    out.x = slice_cols(ds.x, 0, n);
    out.labels.assign(ds.labels.begin(), ds.labels.begin() + static_cast<long>(n));
    out.classes = ds.classes;
    out.name = ds.name;
    out.meta = ds.meta;
    return out;
}

}  // namespace pilae
