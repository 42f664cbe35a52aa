#include "gsvit/encoder.hpp"

#include "gsvit/error.hpp"
#include "gsvit/ops.hpp"

namespace gsvit {

template <typename T>
CgaLayer<T>::CgaLayer(std::size_t width, std::size_t num_heads, Rng& rng) {
    if (num_heads == 0 || width % num_heads != 0) {
        throw ConfigError("CGA: width " + std::to_string(width) + " is not divisible by " + std::to_string(num_heads) +
                          " heads");
    }
    const std::size_t split = width / num_heads;
    for (std::size_t j = 0; j < num_heads; ++j) {
        heads.emplace_back(split, split, rng);
    }
    proj = Linear<T>(width, width, rng);
}

template <typename T>
BasicTensor<T> CgaLayer<T>::forward(const BasicTensor<T>& x) const {
    if (x.rank() != 2 || x.dim(1) != width()) {
        throw ShapeError("CGA: input " + shape_to_string(x.shape()) + " does not have width " +
                         std::to_string(width()));
    }
    const auto splits = ops::split(x, 1, std::vector<std::size_t>(heads.size(), split_width()));
    std::vector<BasicTensor<T>> outputs;
    outputs.reserve(heads.size());
    for (std::size_t j = 0; j < heads.size(); ++j) {
        const BasicTensor<T> input = j == 0 ? splits[0] : ops::add(splits[j], outputs.back());
        outputs.push_back(heads[j].forward(input));
    }
    return proj.forward(outputs.size() == 1 ? outputs[0] : ops::concat(outputs, 1));
}

template <typename T>
void CgaLayer<T>::collect(ParameterSet<T>& params, const std::string& prefix) const {
    for (std::size_t j = 0; j < heads.size(); ++j) {
        heads[j].collect(params, prefix + ".head" + std::to_string(j));
    }
    proj.collect(params, prefix + ".proj");
}

template <typename T>
SandwichBlock<T>::SandwichBlock(std::size_t width, std::size_t num_heads, std::size_t mlp_hidden,
                                std::size_t mlp_layers, double eps, Rng& rng) {
    for (std::size_t i = 0; i < mlp_layers; ++i) {
        pre_norms.emplace_back(width, eps);
        pre_mlps.emplace_back(width, mlp_hidden, rng);
    }
    attn_norm = LayerNorm<T>(width, eps);
    attn = CgaLayer<T>(width, num_heads, rng);
    for (std::size_t i = 0; i < mlp_layers; ++i) {
        post_norms.emplace_back(width, eps);
        post_mlps.emplace_back(width, mlp_hidden, rng);
    }
}

template <typename T>
BasicTensor<T> SandwichBlock<T>::forward(const BasicTensor<T>& x) const {
    BasicTensor<T> h = x;
    for (std::size_t i = 0; i < pre_mlps.size(); ++i) {
        h = ops::add(h, pre_mlps[i].forward(pre_norms[i].forward(h)));
    }
    h = ops::add(h, attn.forward(attn_norm.forward(h)));
    for (std::size_t i = 0; i < post_mlps.size(); ++i) {
        h = ops::add(h, post_mlps[i].forward(post_norms[i].forward(h)));
    }
    return h;
}

template <typename T>
void SandwichBlock<T>::collect(ParameterSet<T>& params, const std::string& prefix) const {
    for (std::size_t i = 0; i < pre_mlps.size(); ++i) {
        pre_norms[i].collect(params, prefix + ".pre" + std::to_string(i) + ".norm");
        pre_mlps[i].collect(params, prefix + ".pre" + std::to_string(i) + ".mlp");
    }
    attn_norm.collect(params, prefix + ".attn.norm");
    attn.collect(params, prefix + ".attn");
    for (std::size_t i = 0; i < post_mlps.size(); ++i) {
        post_norms[i].collect(params, prefix + ".post" + std::to_string(i) + ".norm");
        post_mlps[i].collect(params, prefix + ".post" + std::to_string(i) + ".mlp");
    }
}

template <typename T>
PatchMerge<T>::PatchMerge(std::size_t width_in, std::size_t width_out, std::size_t grid_in_, double eps, Rng& rng)
    : norm(4 * width_in, eps), proj(4 * width_in, width_out, rng), class_proj(width_in, width_out, rng),
      grid_in(grid_in_) {
    const std::size_t g = grid_in;
    const std::size_t go = grid_out();
    index.reserve(go * go * 4 * width_in);
    for (std::size_t r = 0; r < go; ++r) {
        for (std::size_t c = 0; c < go; ++c) {
            for (std::size_t q = 0; q < 4; ++q) {
                const std::size_t y = 2 * r + q / 2;
                const std::size_t x = 2 * c + q % 2;
                for (std::size_t ch = 0; ch < width_in; ++ch) {
                    index.push_back(y < g && x < g ? static_cast<std::int64_t>((y * g + x) * width_in + ch) : -1);
                }
            }
        }
    }
}

template <typename T>
BasicTensor<T> PatchMerge<T>::forward(const BasicTensor<T>& tokens) const {
    const std::size_t width_in = class_proj.in_features();
    if (tokens.rank() != 2 || tokens.dim(0) != grid_in * grid_in + 1 || tokens.dim(1) != width_in) {
        throw ShapeError("patch merge: expected [" + std::to_string(grid_in * grid_in + 1) + "x" +
                         std::to_string(width_in) + "] tokens, got " + shape_to_string(tokens.shape()));
    }
    const std::size_t go = grid_out();
    BasicTensor<T> cls = class_proj.forward(ops::slice(tokens, 0, 0, 1));
    BasicTensor<T> patches = ops::slice(tokens, 0, 1, grid_in * grid_in);
    BasicTensor<T> merged = ops::gather(patches, index, {go * go, 4 * width_in});
    return ops::concat<T>({cls, proj.forward(norm.forward(merged))}, 0);
}

template <typename T>
void PatchMerge<T>::collect(ParameterSet<T>& params, const std::string& prefix) const {
    norm.collect(params, prefix + ".norm");
    proj.collect(params, prefix + ".proj");
    class_proj.collect(params, prefix + ".class_proj");
}

template <typename T>
BasicEncoder<T>::BasicEncoder(const ModelConfig& cfg, Rng& rng) : config(cfg) {
    config.validate();
    const std::size_t g = config.grid();
    const std::size_t p = config.patch_size;
    const std::size_t h = config.image_size;
    const std::size_t d0 = config.widths[0];
    patch_proj = Linear<T>(config.patch_width(), d0, rng);
    class_token = truncated_normal<T>({d0}, rng);
    pos_embed = truncated_normal<T>({num_patches() + 1, d0}, rng);

    std::size_t grid = g;
    for (std::size_t s = 0; s < config.stages(); ++s) {
        std::vector<SandwichBlock<T>> blocks;
        for (std::size_t b = 0; b < config.depths[s]; ++b) {
            blocks.emplace_back(config.widths[s], config.heads[s], config.mlp_hidden(s), config.mlp_layers,
                                config.norm_eps, rng);
        }
        stages.push_back(std::move(blocks));
        if (s + 1 < config.stages()) {
            merges.emplace_back(config.widths[s], config.widths[s + 1], grid, config.norm_eps, rng);
            grid = merges.back().grid_out();
        }
    }

    patch_index_.reserve(num_patches() * config.patch_width());
    for (std::size_t gy = 0; gy < g; ++gy) {
        for (std::size_t gx = 0; gx < g; ++gx) {
            for (std::size_t py = 0; py < p; ++py) {
                for (std::size_t px = 0; px < p; ++px) {
                    for (std::size_t c = 0; c < config.in_channels; ++c) {
                        patch_index_.push_back(
                            static_cast<std::int64_t>((c * h + gy * p + py) * h + gx * p + px));
                    }
                }
            }
        }
    }
}

template <typename T>
BasicTensor<T> BasicEncoder<T>::patchify(const BasicTensor<T>& image) const {
    const Shape expected{config.in_channels, config.image_size, config.image_size};
    if (image.shape() != expected) {
        throw ShapeError("encoder: image " + shape_to_string(image.shape()) + " does not match configured resolution " +
                         shape_to_string(expected));
    }
    return ops::gather(image, patch_index_, {num_patches(), config.patch_width()});
}

template <typename T>
BasicTensor<T> BasicEncoder<T>::patch_embed(const BasicTensor<T>& image) const {
    return patch_proj.forward(patchify(image));
}

template <typename T>
BasicTensor<T> BasicEncoder<T>::embed(const BasicTensor<T>& image) const {
    BasicTensor<T> cls = ops::reshape(class_token, {1, class_token.dim(0)});
    return ops::add(ops::concat<T>({cls, patch_embed(image)}, 0), pos_embed);
}

template <typename T>
BasicTensor<T> BasicEncoder<T>::run_stage(const BasicTensor<T>& tokens, std::size_t stage) const {
    BasicTensor<T> h = tokens;
    for (const auto& block : stages.at(stage)) {
        h = block.forward(h);
    }
    return h;
}

template <typename T>
BasicTensor<T> BasicEncoder<T>::tokens(const BasicTensor<T>& image) const {
    BasicTensor<T> h = embed(image);
    for (std::size_t s = 0; s < stages.size(); ++s) {
        h = run_stage(h, s);
        if (s < merges.size()) {
            h = merges[s].forward(h);
        }
    }
    return h;
}

template <typename T>
BasicTensor<T> BasicEncoder<T>::readout(const BasicTensor<T>& tokens) const {
    if (config.readout == Readout::kMean) {
        return ops::mean(ops::slice(tokens, 0, 1, tokens.dim(0) - 1), 0);
    }
    return ops::reshape(ops::slice(tokens, 0, 0, 1), {tokens.dim(1)});
}

template <typename T>
BasicTensor<T> BasicEncoder<T>::encode(const BasicTensor<T>& image) const {
    return readout(tokens(image));
}

template <typename T>
BasicTensor<T> BasicEncoder<T>::encode_batch(const BasicTensor<T>& images) const {
    if (images.rank() != 4) {
        throw ShapeError("encoder: batch " + shape_to_string(images.shape()) + " is not [B x c x H x W]");
    }
    const Shape one{images.dim(1), images.dim(2), images.dim(3)};
    std::vector<BasicTensor<T>> latents;
    latents.reserve(images.dim(0));
    for (std::size_t b = 0; b < images.dim(0); ++b) {
        latents.push_back(encode(ops::reshape(ops::slice(images, 0, b, 1), one)));
    }
    return ops::stack(latents);
}

template <typename T>
void BasicEncoder<T>::collect(ParameterSet<T>& params, const std::string& prefix) const {
    patch_proj.collect(params, prefix + ".patch_embed");
    params.add(prefix + ".class_token", class_token);
    params.add(prefix + ".pos_embed", pos_embed);
    for (std::size_t s = 0; s < stages.size(); ++s) {
        for (std::size_t b = 0; b < stages[s].size(); ++b) {
            stages[s][b].collect(params, prefix + ".stage" + std::to_string(s) + ".block" + std::to_string(b));
        }
        if (s < merges.size()) {
            merges[s].collect(params, prefix + ".merge" + std::to_string(s));
        }
    }
}

template <typename T>
ParameterSet<T> BasicEncoder<T>::parameters() const {
    ParameterSet<T> params;
    collect(params);
    return params;
}

ParamCount count_params(const ModelConfig& config) {
    Rng rng(0);
    const auto params = BasicEncoder<float>(config, rng).parameters();
    return {params.total_count(), params.tunable_count()};
}

template struct CgaLayer<float>;
template struct CgaLayer<double>;
template struct SandwichBlock<float>;
template struct SandwichBlock<double>;
template struct PatchMerge<float>;
template struct PatchMerge<double>;
template struct BasicEncoder<float>;
template struct BasicEncoder<double>;

}  // namespace gsvit
