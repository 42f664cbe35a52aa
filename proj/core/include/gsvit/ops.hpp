#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "gsvit/rng.hpp"
#include "gsvit/tensor.hpp"

// Differentiable tensor operations. Each op records a backward rule on the
// active tape when at least one input requires grad; with no active tape the
// ops run as plain inference kernels.
namespace gsvit::ops {

// ---- element-wise (numpy-style broadcasting) ----
template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& a, T factor);
template <typename T>
BasicTensor<T> add_scalar(const BasicTensor<T>& a, T value);

// ---- shape ----
template <typename T>
BasicTensor<T> reshape(const BasicTensor<T>& a, Shape shape);
// 2-d transpose.
template <typename T>
BasicTensor<T> transpose(const BasicTensor<T>& a);
template <typename T>
BasicTensor<T> concat(const std::vector<BasicTensor<T>>& parts, std::size_t axis);
template <typename T>
BasicTensor<T> stack(const std::vector<BasicTensor<T>>& parts);
template <typename T>
BasicTensor<T> slice(const BasicTensor<T>& a, std::size_t axis, std::size_t start, std::size_t length);
template <typename T>
std::vector<BasicTensor<T>> split(const BasicTensor<T>& a, std::size_t axis, const std::vector<std::size_t>& sizes);
// out.flat[i] = a.flat[index[i]], or 0 where index[i] < 0.
template <typename T>
BasicTensor<T> gather(const BasicTensor<T>& a, const std::vector<std::int64_t>& index, Shape out_shape);

// ---- reductions ----
template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& a);
template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& a, std::size_t axis);
template <typename T>
BasicTensor<T> mean(const BasicTensor<T>& a);
template <typename T>
BasicTensor<T> mean(const BasicTensor<T>& a, std::size_t axis);

// ---- linear algebra / convolution ----
template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b);

struct Conv2dGeometry {
    std::size_t stride = 1;
    std::size_t pad = 0;
};

// x [B x Cin x H x W], weight [Cout x Cin x k x k], bias [Cout] or undefined.
template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& x, const BasicTensor<T>& weight, const BasicTensor<T>& bias,
                      Conv2dGeometry geometry);
// x [B x Cin x H x W], weight [Cin x Cout x k x k], bias [Cout] or undefined.
// Output spatial size is (H - 1) * stride - 2 * pad + k.
template <typename T>
BasicTensor<T> conv2d_transposed(const BasicTensor<T>& x, const BasicTensor<T>& weight,
                                 const BasicTensor<T>& bias, Conv2dGeometry geometry);
std::size_t conv2d_output_size(std::size_t in, std::size_t kernel, Conv2dGeometry geometry);
std::size_t conv2d_transposed_output_size(std::size_t in, std::size_t kernel, Conv2dGeometry geometry);

// x [B x C x H x W] -> [B x C x out_h x out_w] with PyTorch-style bins.
template <typename T>
BasicTensor<T> adaptive_avg_pool2d(const BasicTensor<T>& x, std::size_t out_h, std::size_t out_w);

// ---- activations ----
template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x);
// Exact (erf-based) GELU.
template <typename T>
BasicTensor<T> gelu(const BasicTensor<T>& x);
template <typename T>
BasicTensor<T> elu(const BasicTensor<T>& x, T alpha = T(1));
template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& x);

// ---- normalisation ----
template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& x, std::size_t axis);
// Normalises over the last dimension; gamma/beta have that dimension's size.
template <typename T>
BasicTensor<T> layer_norm(const BasicTensor<T>& x, const BasicTensor<T>& gamma, const BasicTensor<T>& beta,
                          double eps);

struct BatchNormOptions {
    bool train = true;
    double momentum = 0.1;
    double eps = 1e-5;
};

// Per-channel normalisation of x [B x C x ...] over every axis except 1. In
// train mode, batch statistics are used and the running buffers are updated
// in place (running_var with the unbiased estimate).
template <typename T>
BasicTensor<T> batch_norm(const BasicTensor<T>& x, const BasicTensor<T>& gamma, const BasicTensor<T>& beta,
                          BasicTensor<T>& running_mean, BasicTensor<T>& running_var, BatchNormOptions options);

// Inverted dropout. Identity (same tensor) when train is false or p == 0.
template <typename T>
BasicTensor<T> dropout(const BasicTensor<T>& x, double p, bool train, Rng& rng);

// ---- losses ----
// Mean cross-entropy of logits [B x K] against class indices.
template <typename T>
BasicTensor<T> cross_entropy(const BasicTensor<T>& logits, const std::vector<std::size_t>& labels);
// Mean squared error over all elements.
template <typename T>
BasicTensor<T> mse_loss(const BasicTensor<T>& prediction, const BasicTensor<T>& target);

}  // namespace gsvit::ops

namespace gsvit {

template <typename T>
BasicTensor<T> operator+(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    return ops::add(a, b);
}
template <typename T>
BasicTensor<T> operator-(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    return ops::sub(a, b);
}
template <typename T>
BasicTensor<T> operator*(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    return ops::mul(a, b);
}

}  // namespace gsvit
