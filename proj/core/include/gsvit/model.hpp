#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gsvit/config.hpp"
#include "gsvit/decoder.hpp"
#include "gsvit/encoder.hpp"
#include "gsvit/layers.hpp"
#include "gsvit/params.hpp"

namespace gsvit {

// Classifier head: per hidden width Linear -> ELU -> LayerNorm -> dropout,
// then a Linear to the class logits.
struct PhaseHead {
    std::vector<Linear<float>> hidden;
    std::vector<LayerNorm<float>> norms;
    Linear<float> out;
    double dropout = 0.0;

    PhaseHead() = default;
    PhaseHead(std::size_t latent_dim, const HeadConfig& config, Rng& rng);

    std::size_t classes() const { return out.out_features(); }
    // latents [B x d] -> logits [B x classes]. Dropout draws from rng in train mode only.
    Tensor forward(const Tensor& latents, bool train, Rng& rng) const;
    Tensor forward(const Tensor& latents) const;
    void collect(ParameterSet<float>& params, const std::string& prefix = "head") const;
};

// Which modules a model carries. Pretrain: encoder + decoder, all tunable.
// Classify: frozen encoder + tunable phase head.
enum class Assembly { kPretrain, kClassify };

std::string_view assembly_name(Assembly assembly);
Assembly parse_assembly(std::string_view name);

struct Model {
    Config config;
    Assembly assembly = Assembly::kPretrain;
    Encoder encoder;
    std::optional<Decoder> decoder;
    std::optional<PhaseHead> head;

    Model(const Config& config, Assembly assembly, std::uint64_t seed);

    // Ordered, named tensors with tunable flags for the assembly.
    ParameterSet<float> parameters() const;
    ParameterSet<float> encoder_parameters() const;
};

// Copies encoder tensors from `source` into `target` (names and shapes must match).
void copy_encoder(const Model& source, Model& target);

// Independent copy: same config and assembly, tensors (buffers included) copied.
Model clone_model(const Model& model);

ParamCount count_params(const Config& config, Assembly assembly);

}  // namespace gsvit
