#include "gsvit/decoder.hpp"

#include <algorithm>

#include "gsvit/error.hpp"

namespace gsvit {

template <typename T>
BasicTensor<T> DeconvStage<T>::forward(const BasicTensor<T>& x) const {
    return ops::conv2d_transposed(x, weight, bias, geometry);
}

template <typename T>
void DeconvStage<T>::collect(ParameterSet<T>& params, const std::string& prefix) const {
    params.add(prefix + ".weight", weight);
    if (bias.defined()) {
        params.add(prefix + ".bias", bias);
    }
    if (norm.gamma.defined()) {
        norm.collect(params, prefix + ".norm");
    }
}

template <typename T>
BasicDecoder<T>::BasicDecoder(const DecoderConfig& cfg, std::size_t latent_dim, Rng& rng) : config(cfg) {
    config.validate();
    if (latent_dim == 0) {
        throw ConfigError("decoder: latent width must be positive");
    }
    const std::size_t seed = config.seed_size;
    fc = Linear<T>(latent_dim, config.channels[0] * seed * seed, rng);
    fc_norm = BatchNorm<T>(config.channels[0]);
    const auto res = config.resolutions();
    for (std::size_t i = 0; i < config.stages(); ++i) {
        DeconvStage<T> stage;
        const std::size_t k = config.kernels[i];
        stage.weight = truncated_normal<T>({config.channels[i], config.channels[i + 1], k, k}, rng);
        stage.geometry = {config.strides[i], config.pads[i]};
        if (i + 1 < config.stages()) {
            stage.norm = BatchNorm<T>(config.channels[i + 1]);
        } else {
            stage.bias = BasicTensor<T>::zeros({config.channels[i + 1]});
        }
        stages.push_back(std::move(stage));
    }
    // Each SE scale attaches to the first intermediate stage of that resolution.
    for (std::size_t scale : config.se_scales) {
        for (std::size_t i = 0; i + 1 < config.stages(); ++i) {
            if (res[i + 1] == scale) {
                se_after.push_back(i);
                break;
            }
        }
    }
    std::sort(se_after.begin(), se_after.end());
    for (std::size_t i : se_after) {
        se.emplace_back(config.channels[i + 1], config.se_reduction, rng);
    }
}

template <typename T>
BasicTensor<T> BasicDecoder<T>::forward(const BasicTensor<T>& latents, bool train) const {
    if (latents.rank() != 2 || latents.dim(1) != latent_dim()) {
        throw ShapeError("decoder: latents " + shape_to_string(latents.shape()) + " are not [B x " +
                         std::to_string(latent_dim()) + "]");
    }
    const std::size_t batch = latents.dim(0);
    const std::size_t seed = config.seed_size;
    BasicTensor<T> x = ops::reshape(fc.forward(latents), {batch, config.channels[0], seed, seed});
    x = ops::gelu(fc_norm.forward(x, train));
    for (std::size_t i = 0; i < stages.size(); ++i) {
        x = stages[i].forward(x);
        if (i + 1 == stages.size()) {
            return ops::sigmoid(x);
        }
        x = ops::relu(stages[i].norm.forward(x, train));
        for (std::size_t j = 0; j < se.size(); ++j) {
            if (se_after[j] == i) {
                x = ops::add(x, se[j].forward(x));
            }
        }
    }
    return x;
}

template <typename T>
BasicTensor<T> BasicDecoder<T>::decode(const BasicTensor<T>& latent) const {
    if (latent.rank() != 1) {
        throw ShapeError("decoder: latent " + shape_to_string(latent.shape()) + " is not a vector");
    }
    BasicTensor<T> frames = forward(ops::reshape(latent, {1, latent.dim(0)}), false);
    return ops::reshape(frames, {frames.dim(1), frames.dim(2), frames.dim(3)});
}

template <typename T>
void BasicDecoder<T>::collect(ParameterSet<T>& params, const std::string& prefix) const {
    fc.collect(params, prefix + ".fc");
    fc_norm.collect(params, prefix + ".fc_norm");
    for (std::size_t i = 0; i < stages.size(); ++i) {
        stages[i].collect(params, prefix + ".deconv" + std::to_string(i));
    }
    for (std::size_t j = 0; j < se.size(); ++j) {
        se[j].collect(params, prefix + ".se" + std::to_string(j));
    }
}

template <typename T>
ParameterSet<T> BasicDecoder<T>::parameters() const {
    ParameterSet<T> params;
    collect(params);
    return params;
}

template <typename T>
BasicTensor<T> reconstruction_loss(const BasicTensor<T>& prediction, const BasicTensor<T>& target) {
    if (prediction.shape() != target.shape()) {
        throw ShapeError("reconstruction loss: prediction " + shape_to_string(prediction.shape()) +
                         " and target " + shape_to_string(target.shape()) + " differ");
    }
    return ops::mse_loss(prediction, target);
}

template struct DeconvStage<float>;
template struct DeconvStage<double>;
template struct BasicDecoder<float>;
template struct BasicDecoder<double>;
template BasicTensor<float> reconstruction_loss<float>(const BasicTensor<float>&, const BasicTensor<float>&);
template BasicTensor<double> reconstruction_loss<double>(const BasicTensor<double>&, const BasicTensor<double>&);

}  // namespace gsvit
