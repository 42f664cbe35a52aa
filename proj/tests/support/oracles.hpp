#pragma once

// Independent reference implementations for tests. Plain loops in double,
// reading weights straight out of the layer records.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "gsvit/config.hpp"
#include "gsvit/decoder.hpp"
#include "gsvit/encoder.hpp"
#include "gsvit/rng.hpp"
#include "gsvit/tensor.hpp"

namespace gsvit::testing {

template <typename T = float>
BasicTensor<T> random_tensor_of(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    std::vector<T> data(shape_numel(shape));
    for (auto& v : data) {
        v = static_cast<T>(rng.uniform(lo, hi));
    }
    return BasicTensor<T>(std::move(shape), std::move(data));
}

template <typename T>
void fill_uniform(BasicTensor<T>& t, Rng& rng, double lo, double hi) {
    for (auto& v : t.mutable_data()) {
        v = static_cast<T>(rng.uniform(lo, hi));
    }
}

using Matrix = std::vector<std::vector<double>>;

template <typename T>
Matrix to_matrix(const BasicTensor<T>& t) {
    Matrix m(t.dim(0), std::vector<double>(t.dim(1)));
    for (std::size_t i = 0; i < t.dim(0); ++i) {
        for (std::size_t j = 0; j < t.dim(1); ++j) {
            m[i][j] = static_cast<double>(t[i * t.dim(1) + j]);
        }
    }
    return m;
}

// x W (+ b) with W stored [in x out].
template <typename T>
Matrix affine(const Matrix& x, const BasicTensor<T>& w, const BasicTensor<T>* b) {
    const std::size_t in = w.dim(0), out = w.dim(1);
    Matrix y(x.size(), std::vector<double>(out, 0.0));
    for (std::size_t r = 0; r < x.size(); ++r) {
        for (std::size_t o = 0; o < out; ++o) {
            double acc = (b && b->defined()) ? static_cast<double>((*b)[o]) : 0.0;
            for (std::size_t i = 0; i < in; ++i) {
                acc += x[r][i] * static_cast<double>(w[i * out + o]);
            }
            y[r][o] = acc;
        }
    }
    return y;
}

// softmax(Q K^T * scale) V, one row at a time.
inline Matrix naive_attention(const Matrix& q, const Matrix& k, const Matrix& v, double scale) {
    const std::size_t n = q.size();
    Matrix out(n, std::vector<double>(v.empty() ? 0 : v[0].size(), 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> s(n);
        double m = -1e300;
        for (std::size_t j = 0; j < n; ++j) {
            double dot = 0.0;
            for (std::size_t c = 0; c < q[i].size(); ++c) {
                dot += q[i][c] * k[j][c];
            }
            s[j] = dot * scale;
            m = std::max(m, s[j]);
        }
        double z = 0.0;
        for (auto& e : s) {
            e = std::exp(e - m);
            z += e;
        }
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t c = 0; c < out[i].size(); ++c) {
                out[i][c] += s[j] / z * v[j][c];
            }
        }
    }
    return out;
}

// Cascaded group attention written out term by term:
//   X'_1 = X_1;  X'_j = X_j + Xe_{j-1} (j > 1)
//   Xe_j = Attn(X'_j W_Qj, X'_j W_Kj, X'_j W_Vj)
//   out  = Concat_j(Xe_j) W_P + b_P
template <typename T>
Matrix cga_oracle(const CgaLayer<T>& layer, const Matrix& x) {
    const std::size_t h = layer.heads.size();
    const std::size_t n = x.size();
    const std::size_t s = x[0].size() / h;
    Matrix concat(n, std::vector<double>(s * h, 0.0));
    Matrix previous;
    for (std::size_t j = 0; j < h; ++j) {
        Matrix xj(n, std::vector<double>(s));
        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t c = 0; c < s; ++c) {
                xj[r][c] = x[r][j * s + c] + (j > 0 ? previous[r][c] : 0.0);
            }
        }
        const auto& head = layer.heads[j];
        const double scale = 1.0 / std::sqrt(static_cast<double>(head.query.out_features()));
        previous = naive_attention(affine(xj, head.query.weight, &head.query.bias),
                                   affine(xj, head.key.weight, &head.key.bias),
                                   affine(xj, head.value.weight, &head.value.bias), scale);
        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t c = 0; c < s; ++c) {
                concat[r][j * s + c] = previous[r][c];
            }
        }
    }
    return affine(concat, layer.proj.weight, &layer.proj.bias);
}

// Walks the config and sums closed-form per-layer counts.
inline std::size_t enumerate_encoder_params(const ModelConfig& c) {
    auto linear = [](std::size_t in, std::size_t out, bool bias = true) { return in * out + (bias ? out : 0); };
    auto norm = [](std::size_t d) { return 2 * d; };
    const std::size_t tokens = (c.image_size / c.patch_size) * (c.image_size / c.patch_size) + 1;
    std::size_t total = linear(c.patch_size * c.patch_size * c.in_channels, c.widths[0]);
    total += c.widths[0];           // class token
    total += tokens * c.widths[0];  // positional embedding
    for (std::size_t st = 0; st < c.widths.size(); ++st) {
        const std::size_t d = c.widths[st];
        const std::size_t h = c.heads[st];
        const std::size_t split = d / h;
        const auto hidden = static_cast<std::size_t>(std::max(1.0, std::round(double(d) * c.mlp_ratios[st])));
        const std::size_t mlp = linear(d, hidden) + linear(hidden, d);
        const std::size_t head = linear(split, split, false) * 2 + linear(split, split);
        const std::size_t cga = h * head + linear(d, d);
        const std::size_t block = 2 * c.mlp_layers * (norm(d) + mlp) + norm(d) + cga;
        total += c.depths[st] * block;
        if (st + 1 < c.widths.size()) {
            const std::size_t next = c.widths[st + 1];
            total += norm(4 * d) + linear(4 * d, next) + linear(d, next);
        }
    }
    return total;
}

inline std::size_t enumerate_decoder_params(const DecoderConfig& c, std::size_t latent_dim) {
    const std::size_t seed_units = c.channels[0] * c.seed_size * c.seed_size;
    std::size_t total = latent_dim * seed_units + seed_units + 2 * c.channels[0];
    std::size_t res = c.seed_size;
    std::vector<std::size_t> seen;
    for (std::size_t i = 0; i + 1 < c.channels.size(); ++i) {
        const std::size_t cin = c.channels[i], cout = c.channels[i + 1];
        total += cin * cout * c.kernels[i] * c.kernels[i];
        res = (res - 1) * c.strides[i] + c.kernels[i] - 2 * c.pads[i];
        if (i + 2 < c.channels.size()) {
            total += 2 * cout;  // batch-norm affine
            const bool is_scale = std::find(c.se_scales.begin(), c.se_scales.end(), res) != c.se_scales.end();
            const bool first = std::find(seen.begin(), seen.end(), res) == seen.end();
            seen.push_back(res);
            if (is_scale && first) {
                const std::size_t r = cout / c.se_reduction;
                total += cout * r + r + r * cout + cout;
            }
        } else {
            total += cout;  // output bias
        }
    }
    return total;
}

// 64x64 test variant used by the training suites.
inline Config tiny_config() {
    Config c;
    c.encoder.image_size = 64;
    c.encoder.patch_size = 8;
    c.encoder.widths = {32, 48};
    c.encoder.depths = {1, 1};
    c.encoder.heads = {2, 2};
    c.encoder.mlp_ratios = {2.0, 2.0};
    c.encoder.latent_dim = 48;
    c.decoder.seed_size = 4;
    c.decoder.channels = {64, 32, 16, 8, 3};
    c.decoder.kernels = {4, 4, 4, 4};
    c.decoder.strides = {2, 2, 2, 2};
    c.decoder.pads = {1, 1, 1, 1};
    c.decoder.se_scales = {16, 32};
    c.decoder.output_size = 64;
    c.validate();
    return c;
}

}  // namespace gsvit::testing
