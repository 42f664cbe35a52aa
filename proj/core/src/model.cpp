#include "gsvit/model.hpp"

#include <algorithm>

#include "gsvit/error.hpp"

namespace gsvit {

PhaseHead::PhaseHead(std::size_t latent_dim, const HeadConfig& config, Rng& rng) : dropout(config.dropout) {
    config.validate();
    std::size_t width = latent_dim;
    for (std::size_t h : config.hidden) {
        hidden.emplace_back(width, h, rng);
        norms.emplace_back(h);
        width = h;
    }
    out = Linear<float>(width, config.classes, rng);
}

Tensor PhaseHead::forward(const Tensor& latents, bool train, Rng& rng) const {
    Tensor x = latents;
    for (std::size_t i = 0; i < hidden.size(); ++i) {
        x = ops::dropout(norms[i].forward(ops::elu(hidden[i].forward(x))), dropout, train, rng);
    }
    return out.forward(x);
}

Tensor PhaseHead::forward(const Tensor& latents) const {
    Rng unused(0);
    return forward(latents, false, unused);
}

void PhaseHead::collect(ParameterSet<float>& params, const std::string& prefix) const {
    for (std::size_t i = 0; i < hidden.size(); ++i) {
        hidden[i].collect(params, prefix + ".hidden" + std::to_string(i));
        norms[i].collect(params, prefix + ".hidden" + std::to_string(i) + ".norm");
    }
    out.collect(params, prefix + ".out");
}

std::string_view assembly_name(Assembly assembly) {
    return assembly == Assembly::kPretrain ? "pretrain" : "classify";
}

Assembly parse_assembly(std::string_view name) {
    if (name == "pretrain") {
        return Assembly::kPretrain;
    }
    if (name == "classify") {
        return Assembly::kClassify;
    }
    throw CheckpointError("unknown model assembly '" + std::string(name) + "'");
}

Model::Model(const Config& cfg, Assembly asm_, std::uint64_t seed) : config(cfg), assembly(asm_) {
    config.validate();
    Rng encoder_rng = Rng::derive(seed, "init.encoder");
    encoder = Encoder(config.encoder, encoder_rng);
    if (assembly == Assembly::kPretrain) {
        Rng rng = Rng::derive(seed, "init.decoder");
        decoder.emplace(config.decoder, config.encoder.latent_dim, rng);
    } else {
        Rng rng = Rng::derive(seed, "init.head");
        head.emplace(config.encoder.latent_dim, config.head, rng);
    }
}

ParameterSet<float> Model::encoder_parameters() const {
    ParameterSet<float> params;
    encoder.collect(params);
    if (assembly == Assembly::kClassify) {
        params.set_tunable(false);
    }
    return params;
}

ParameterSet<float> Model::parameters() const {
    ParameterSet<float> params = encoder_parameters();
    if (decoder) {
        decoder->collect(params);
    }
    if (head) {
        head->collect(params);
    }
    return params;
}

void copy_encoder(const Model& source, Model& target) {
    const auto from = source.encoder_parameters();
    const auto to = target.encoder_parameters();
    if (from.size() != to.size()) {
        throw CheckpointError("encoder layouts differ: " + std::to_string(from.size()) + " vs " +
                              std::to_string(to.size()) + " tensors");
    }
    for (std::size_t i = 0; i < from.size(); ++i) {
        const auto& a = from.entries()[i];
        auto b = to.entries()[i];
        if (a.name != b.name || a.tensor.shape() != b.tensor.shape()) {
            throw CheckpointError("encoder tensor mismatch: " + a.name + " " + shape_to_string(a.tensor.shape()) +
                                  " vs " + b.name + " " + shape_to_string(b.tensor.shape()));
        }
        std::copy(a.tensor.data().begin(), a.tensor.data().end(), b.tensor.mutable_data().begin());
    }
}

Model clone_model(const Model& model) {
    Model copy(model.config, model.assembly, 0);
    const auto from = model.parameters();
    const auto to = copy.parameters();
    for (std::size_t i = 0; i < from.size(); ++i) {
        auto target = to.entries()[i].tensor;
        std::copy(from.entries()[i].tensor.data().begin(), from.entries()[i].tensor.data().end(),
                  target.mutable_data().begin());
    }
    return copy;
}

ParamCount count_params(const Config& config, Assembly assembly) {
    const auto params = Model(config, assembly, 0).parameters();
    return {params.total_count(), params.tunable_count()};
}

}  // namespace gsvit
