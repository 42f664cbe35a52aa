#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "gsvit/ops.hpp"
#include "gsvit/params.hpp"
#include "gsvit/rng.hpp"
#include "gsvit/tensor.hpp"

namespace gsvit {

// Standard deviation of the truncated-normal initialiser used for every
// projection and convolution kernel.
inline constexpr double kInitStd = 0.02;

template <typename T>
BasicTensor<T> truncated_normal(Shape shape, Rng& rng, double stddev = kInitStd);

// y = x W + b, with W [in x out]. Accepts [in] or [N x in].
template <typename T>
struct Linear {
    BasicTensor<T> weight;
    BasicTensor<T> bias;  // undefined when constructed without bias

    Linear() = default;
    Linear(std::size_t in, std::size_t out, Rng& rng, bool with_bias = true);

    std::size_t in_features() const { return weight.dim(0); }
    std::size_t out_features() const { return weight.dim(1); }
    BasicTensor<T> forward(const BasicTensor<T>& x) const;
    void collect(ParameterSet<T>& params, const std::string& prefix) const;
};

template <typename T>
struct LayerNorm {
    BasicTensor<T> gamma;
    BasicTensor<T> beta;
    double eps = 1e-5;

    LayerNorm() = default;
    explicit LayerNorm(std::size_t width, double eps = 1e-5);

    BasicTensor<T> forward(const BasicTensor<T>& x) const;
    void collect(ParameterSet<T>& params, const std::string& prefix) const;
};

template <typename T>
struct BatchNorm {
    BasicTensor<T> gamma;
    BasicTensor<T> beta;
    BasicTensor<T> running_mean;
    BasicTensor<T> running_var;
    double momentum = 0.1;
    double eps = 1e-5;

    BatchNorm() = default;
    explicit BatchNorm(std::size_t channels);

    // Train mode updates the running statistics in place.
    BasicTensor<T> forward(const BasicTensor<T>& x, bool train) const;
    void collect(ParameterSet<T>& params, const std::string& prefix) const;
};

enum class Activation { kGelu, kRelu, kElu };

template <typename T>
BasicTensor<T> activate(const BasicTensor<T>& x, Activation activation);

// Position-wise MLP: Linear -> activation -> Linear.
template <typename T>
struct Mlp {
    Linear<T> fc1;
    Linear<T> fc2;
    Activation activation = Activation::kGelu;

    Mlp() = default;
    Mlp(std::size_t width, std::size_t hidden, Rng& rng, Activation activation = Activation::kGelu);

    BasicTensor<T> forward(const BasicTensor<T>& x) const;
    void collect(ParameterSet<T>& params, const std::string& prefix) const;
};

// softmax(Q K^T * scale) V for Q, K [N x dk] and V [N x dv].
template <typename T>
BasicTensor<T> attention(const BasicTensor<T>& q, const BasicTensor<T>& k, const BasicTensor<T>& v, T scale);

// One attention head: bias-free Q/K projections, V projection with bias.
template <typename T>
struct AttentionHead {
    Linear<T> query;
    Linear<T> key;
    Linear<T> value;

    AttentionHead() = default;
    AttentionHead(std::size_t in, std::size_t head_dim, Rng& rng);

    std::size_t head_dim() const { return query.out_features(); }
    T scale() const;
    BasicTensor<T> forward(const BasicTensor<T>& x) const;
    void collect(ParameterSet<T>& params, const std::string& prefix) const;
};

// Squeeze-and-excitation: x * sigmoid(expand(relu(reduce(avgpool(x))))),
// gate broadcast per channel. Accepts [C x H x W] or [B x C x H x W].
template <typename T>
struct SEBlock {
    Linear<T> reduce;
    Linear<T> expand;
    std::size_t ratio = 4;

    SEBlock() = default;
    SEBlock(std::size_t channels, std::size_t ratio, Rng& rng);

    // Per-channel gate, shape [B x C].
    BasicTensor<T> gate(const BasicTensor<T>& x) const;
    BasicTensor<T> forward(const BasicTensor<T>& x) const;
    void collect(ParameterSet<T>& params, const std::string& prefix) const;
};

#define GSVIT_DECLARE_LAYERS(T)                  \
    extern template struct Linear<T>;            \
    extern template struct LayerNorm<T>;         \
    extern template struct BatchNorm<T>;         \
    extern template struct Mlp<T>;               \
    extern template struct AttentionHead<T>;     \
    extern template struct SEBlock<T>;

GSVIT_DECLARE_LAYERS(float)
GSVIT_DECLARE_LAYERS(double)
#undef GSVIT_DECLARE_LAYERS

}  // namespace gsvit
