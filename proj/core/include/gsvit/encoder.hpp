#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "gsvit/config.hpp"
#include "gsvit/layers.hpp"
#include "gsvit/params.hpp"
#include "gsvit/rng.hpp"
#include "gsvit/tensor.hpp"

namespace gsvit {

// Cascaded group attention. Head j sees feature split j of width d/h; from the
// second head on, the previous head's output is added to its split first.
// Head outputs are concatenated and projected by W_P [d x d].
template <typename T>
struct CgaLayer {
    std::vector<AttentionHead<T>> heads;
    Linear<T> proj;

    CgaLayer() = default;
    CgaLayer(std::size_t width, std::size_t num_heads, Rng& rng);

    std::size_t width() const { return proj.in_features(); }
    std::size_t split_width() const { return width() / heads.size(); }
    BasicTensor<T> forward(const BasicTensor<T>& x) const;
    void collect(ParameterSet<T>& params, const std::string& prefix) const;
};

// N_f residual MLPs, one residual CGA layer, N_f residual MLPs. Every sub-layer
// is pre-normed: x + f(LN(x)).
template <typename T>
struct SandwichBlock {
    std::vector<LayerNorm<T>> pre_norms;
    std::vector<Mlp<T>> pre_mlps;
    LayerNorm<T> attn_norm;
    CgaLayer<T> attn;
    std::vector<LayerNorm<T>> post_norms;
    std::vector<Mlp<T>> post_mlps;

    SandwichBlock() = default;
    SandwichBlock(std::size_t width, std::size_t num_heads, std::size_t mlp_hidden, std::size_t mlp_layers, double eps,
                  Rng& rng);

    BasicTensor<T> forward(const BasicTensor<T>& x) const;
    void collect(ParameterSet<T>& params, const std::string& prefix) const;
};

// 2x2 patch merging between stages: neighbouring tokens are concatenated
// (zero-padded on odd grids), normalised and projected to the next width.
// The class token gets its own projection.
template <typename T>
struct PatchMerge {
    LayerNorm<T> norm;
    Linear<T> proj;
    Linear<T> class_proj;
    std::size_t grid_in = 0;
    std::vector<std::int64_t> index;

    PatchMerge() = default;
    PatchMerge(std::size_t width_in, std::size_t width_out, std::size_t grid_in, double eps, Rng& rng);

    std::size_t grid_out() const { return (grid_in + 1) / 2; }
    BasicTensor<T> forward(const BasicTensor<T>& tokens) const;
    void collect(ParameterSet<T>& params, const std::string& prefix) const;
};

template <typename T>
struct BasicEncoder {
    ModelConfig config;
    Linear<T> patch_proj;          // [(p*p*c) x d0]
    BasicTensor<T> class_token;    // [d0]
    BasicTensor<T> pos_embed;      // [(N+1) x d0]
    std::vector<std::vector<SandwichBlock<T>>> stages;
    std::vector<PatchMerge<T>> merges;  // merges[s] joins stage s and s+1

    BasicEncoder() = default;
    BasicEncoder(const ModelConfig& config, Rng& rng);

    std::size_t num_patches() const { return config.grid() * config.grid(); }

    // [N x p*p*c]: row i is raster-order patch i flattened as (row, col, channel).
    BasicTensor<T> patchify(const BasicTensor<T>& image) const;
    // [N x d0] projected patches.
    BasicTensor<T> patch_embed(const BasicTensor<T>& image) const;
    // [(N+1) x d0]: class token prepended, positional embedding added.
    BasicTensor<T> embed(const BasicTensor<T>& image) const;
    BasicTensor<T> run_stage(const BasicTensor<T>& tokens, std::size_t stage) const;
    // Final token state after every stage and merge.
    BasicTensor<T> tokens(const BasicTensor<T>& image) const;
    BasicTensor<T> readout(const BasicTensor<T>& tokens) const;
    // image [c x H x W] -> latent [d_latent].
    BasicTensor<T> encode(const BasicTensor<T>& image) const;
    // images [B x c x H x W] -> latents [B x d_latent].
    BasicTensor<T> encode_batch(const BasicTensor<T>& images) const;

    void collect(ParameterSet<T>& params, const std::string& prefix = "encoder") const;
    ParameterSet<T> parameters() const;

private:
    std::vector<std::int64_t> patch_index_;
};

using Encoder = BasicEncoder<float>;

// Parameter count of the encoder built from config; every entry tunable.
ParamCount count_params(const ModelConfig& config);

extern template struct CgaLayer<float>;
extern template struct CgaLayer<double>;
extern template struct SandwichBlock<float>;
extern template struct SandwichBlock<double>;
extern template struct PatchMerge<float>;
extern template struct PatchMerge<double>;
extern template struct BasicEncoder<float>;
extern template struct BasicEncoder<double>;

}  // namespace gsvit
