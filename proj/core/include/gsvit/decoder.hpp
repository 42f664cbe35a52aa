#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "gsvit/config.hpp"
#include "gsvit/layers.hpp"
#include "gsvit/ops.hpp"
#include "gsvit/params.hpp"
#include "gsvit/rng.hpp"
#include "gsvit/tensor.hpp"

namespace gsvit {

// One transposed convolution; weight [Cin x Cout x k x k]. Intermediate
// stages are followed by batch norm and carry no bias; the output stage has a
// bias and no norm.
template <typename T>
struct DeconvStage {
    BasicTensor<T> weight;
    BasicTensor<T> bias;
    BatchNorm<T> norm;
    ops::Conv2dGeometry geometry;

    BasicTensor<T> forward(const BasicTensor<T>& x) const;
    void collect(ParameterSet<T>& params, const std::string& prefix) const;
};

// FC -> reshape to the seed map -> BN -> GELU, then deconv -> BN -> ReLU per
// stage with x + SE(x) at the configured scales, and a final deconv -> sigmoid.
// Normalising after the reshape gives per-channel statistics over batch and
// space, so a batch of one is valid in train mode.
template <typename T>
struct BasicDecoder {
    DecoderConfig config;
    Linear<T> fc;
    BatchNorm<T> fc_norm;
    std::vector<DeconvStage<T>> stages;
    std::vector<SEBlock<T>> se;
    std::vector<std::size_t> se_after;  // se[i] follows stages[se_after[i]]

    BasicDecoder() = default;
    BasicDecoder(const DecoderConfig& config, std::size_t latent_dim, Rng& rng);

    std::size_t latent_dim() const { return fc.in_features(); }
    std::size_t output_size() const { return config.output_size; }

    // latents [B x d] -> frames [B x C x H x W].
    BasicTensor<T> forward(const BasicTensor<T>& latents, bool train) const;
    // latent [d] -> frame [C x H x W], eval mode.
    BasicTensor<T> decode(const BasicTensor<T>& latent) const;

    void collect(ParameterSet<T>& params, const std::string& prefix = "decoder") const;
    ParameterSet<T> parameters() const;
};

using Decoder = BasicDecoder<float>;

// Mean squared error over every element; shapes must match.
template <typename T>
BasicTensor<T> reconstruction_loss(const BasicTensor<T>& prediction, const BasicTensor<T>& target);

extern template struct DeconvStage<float>;
extern template struct DeconvStage<double>;
extern template struct BasicDecoder<float>;
extern template struct BasicDecoder<double>;

}  // namespace gsvit
