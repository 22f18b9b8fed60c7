#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "pilae/activation.hpp"
#include "pilae/error.hpp"
#include "pilae/matrix.hpp"
#include "pilae/readout.hpp"
#include "pilae/stack.hpp"

namespace pilae {
namespace detail {

// Model container: "PILAEv01", little-endian payload, FNV-1a checksum.
//   u64 layer_count
//   per layer: u64 rows, u64 cols, u8 activation, f64[rows*cols] row-major
//   u8 head kind (0 none, 1 shln, 2 softmax, 3 cascade)
//   if head: u64 rows, u64 cols, u64 classes, f64 lambda, f64[rows*cols]
//   u64 fnv1a(payload)

constexpr char kModelMagic[8] = {'P', 'I', 'L', 'A', 'E', 'v', '0', '1'};

inline std::uint64_t fnv1a(const std::vector<unsigned char>& bytes) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char b : bytes) {
        h ^= b;
        h *= 1099511628211ull;
    }
    return h;
}

struct ByteWriter {
    std::vector<unsigned char> bytes;
    void u8(std::uint8_t v) { bytes.push_back(v); }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<unsigned char>(v >> (8 * i)));
    }
    void f64(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        u64(bits);
    }
};

struct ByteReader {
    const std::vector<unsigned char>& bytes;
    std::size_t pos = 0;
    explicit ByteReader(const std::vector<unsigned char>& b) : bytes(b) {}
    void need(std::size_t n) const {
        if (pos + n > bytes.size())
            throw ModelFormatError("model file truncated inside the payload");
    }
    std::uint8_t u8() {
        need(1);
        return bytes[pos++];
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(bytes[pos + i]) << (8 * i);
        pos += 8;
        return v;
    }
    double f64() {
        const std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
};

}  // namespace detail

inline void save_model(const StackedNetwork& net, const std::string& path) {
    if (net.layers.empty()) throw ArgumentError("save_model: network has no layers");
    for (const auto& l : net.layers)
        if (l.bias_row)
            throw IoError("save_model: bias-augmented layers are not serializable "
                          "in model format v1");

    detail::ByteWriter w;
    w.u64(net.layers.size());
    for (const auto& l : net.layers) {
        w.u64(l.encoder.rows());
        w.u64(l.encoder.cols());
        w.u8(static_cast<std::uint8_t>(l.activation));
        for (std::size_t i = 0, n = l.encoder.size(); i < n; ++i) w.f64(l.encoder.data()[i]);
    }
    if (net.readout) {
        w.u8(static_cast<std::uint8_t>(net.readout->kind) + 1);
        w.u64(net.readout->weights.rows());
        w.u64(net.readout->weights.cols());
        w.u64(net.readout->classes);
        w.f64(net.readout->lambda);
        for (std::size_t i = 0, n = net.readout->weights.size(); i < n; ++i)
            w.f64(net.readout->weights.data()[i]);
    } else {
        w.u8(0);
    }

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out.write(detail::kModelMagic, 8);
    out.write(reinterpret_cast<const char*>(w.bytes.data()),
              static_cast<long>(w.bytes.size()));
    const std::uint64_t sum = detail::fnv1a(w.bytes);
    unsigned char sb[8];
    for (int i = 0; i < 8; ++i) sb[i] = static_cast<unsigned char>(sum >> (8 * i));
    out.write(reinterpret_cast<const char*>(sb), 8);
    if (!out) throw IoError("write to '" + path + "' failed");
}

inline StackedNetwork load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open model file '" + path + "'");
    std::vector<unsigned char> all((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
    if (all.size() < 16) throw ModelFormatError("model file is too short");
    if (std::memcmp(all.data(), detail::kModelMagic, 5) != 0)
        throw BadMagicError("'" + path + "' is not a model file");
    if (std::memcmp(all.data(), detail::kModelMagic, 8) != 0)
        throw UnknownVersionError("unsupported model version tag '" +
                                  std::string(all.begin() + 5, all.begin() + 8) + "'");

    std::vector<unsigned char> payload(all.begin() + 8, all.end() - 8);
    std::uint64_t stored = 0;
    for (int i = 0; i < 8; ++i)
        stored |= std::uint64_t(all[all.size() - 8 + static_cast<std::size_t>(i)]) << (8 * i);
    if (detail::fnv1a(payload) != stored)
        throw ChecksumError("model file '" + path + "' failed its checksum");

    detail::ByteReader r(payload);
    const std::uint64_t n_layers = r.u64();
    if (n_layers == 0) throw ShapeChainError("model file declares zero layers");
    if (n_layers > 4096) throw ModelFormatError("model file declares too many layers");

    StackedNetwork net;
    for (std::uint64_t i = 0; i < n_layers; ++i) {
        const std::uint64_t rows = r.u64(), cols = r.u64();
        const std::uint8_t act = r.u8();
        if (act > 2) throw ModelFormatError("unknown activation tag in model file");
        if (rows == 0 || cols == 0)
            throw ShapeChainError("model layer " + std::to_string(i) + " is empty");
        if (rows > (1u << 24) || cols > (1u << 24))
            throw ModelFormatError("model matrix dimensions are implausibly large");
        r.need(rows * cols * 8);
        AutoencoderLayer layer;
        layer.encoder = Matrix(rows, cols);
        for (std::size_t e = 0, n = layer.encoder.size(); e < n; ++e)
            layer.encoder.data()[e] = r.f64();
        layer.activation = static_cast<Activation>(act);
        layer.width = layer.encoder.rows();
        layer.input_dim = layer.encoder.cols();
        if (!net.layers.empty() && layer.input_dim != net.layers.back().width)
            throw ShapeChainError("model layer " + std::to_string(i) + " expects " +
                                  std::to_string(layer.input_dim) +
                                  " inputs but the previous layer is " +
                                  std::to_string(net.layers.back().width) + " wide");
        net.layers.push_back(std::move(layer));
    }
    net.input_dim = net.layers.front().input_dim;

    const std::uint8_t head_tag = r.u8();
    if (head_tag > 3) throw ModelFormatError("unknown readout tag in model file");
    if (head_tag != 0) {
        ReadoutHead head;
        head.kind = static_cast<HeadKind>(head_tag - 1);
        const std::uint64_t rows = r.u64(), cols = r.u64();
        head.classes = r.u64();
        head.lambda = r.f64();
        if (rows == 0 || cols == 0) throw ShapeChainError("model readout block is empty");
        if (cols != net.layers.back().width)
            throw ShapeChainError("model readout expects " + std::to_string(cols) +
                                  " features but the last layer is " +
                                  std::to_string(net.layers.back().width) + " wide");
        r.need(rows * cols * 8);
        head.weights = Matrix(rows, cols);
        for (std::size_t i = 0, n = head.weights.size(); i < n; ++i)
            head.weights.data()[i] = r.f64();
        net.readout = std::move(head);
    }
    if (r.pos != payload.size())
        throw ModelFormatError("model file carries trailing bytes after the payload");
    return net;
}

}  // namespace pilae
