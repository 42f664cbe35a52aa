#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace gsvit {

// How the encoder reduces its final token matrix to the latent vector.
// kMean exists for testing token-level symmetries.
enum class Readout { kClass, kMean };

// Encoder architecture. Stage s has widths[s] channels, depths[s] sandwich
// blocks and heads[s] attention heads; mlp_ratios[s] is the per-stage
// reallocation multiplier giving the MLP hidden width.
struct ModelConfig {
    std::size_t image_size = 224;
    std::size_t in_channels = 3;
    std::size_t patch_size = 16;
    std::vector<std::size_t> widths{64, 128, 192};
    std::vector<std::size_t> depths{1, 2, 3};
    std::vector<std::size_t> heads{2, 4, 4};
    std::vector<double> mlp_ratios{2.0, 2.0, 2.0};
    std::size_t mlp_layers = 2;  // MLPs on each side of the attention layer
    std::size_t latent_dim = 192;
    Readout readout = Readout::kClass;
    double norm_eps = 1e-5;

    void validate() const;
    std::size_t stages() const { return widths.size(); }
    std::size_t grid() const { return image_size / patch_size; }
    std::size_t patch_width() const { return patch_size * patch_size * in_channels; }
    std::size_t mlp_hidden(std::size_t stage) const;

    bool operator==(const ModelConfig&) const = default;
};

// Asymmetric decoder: FC to channels[0] x seed x seed, then one transposed
// convolution per adjacent channel pair.
struct DecoderConfig {
    std::size_t seed_size = 7;
    std::vector<std::size_t> channels{256, 128, 64, 32, 16, 3};
    std::vector<std::size_t> kernels{4, 4, 4, 4, 4};
    std::vector<std::size_t> strides{2, 2, 2, 2, 2};
    std::vector<std::size_t> pads{1, 1, 1, 1, 1};
    std::vector<std::size_t> se_scales{56, 112};
    std::size_t se_reduction = 4;
    std::size_t output_size = 224;
    std::string loss = "mse";

    void validate() const;
    std::size_t stages() const { return channels.size() - 1; }
    // Spatial size after the seed reshape (index 0) and after each stage.
    std::vector<std::size_t> resolutions() const;

    bool operator==(const DecoderConfig&) const = default;
};

struct HeadConfig {
    std::vector<std::size_t> hidden{2048, 512};
    std::size_t classes = 7;
    double dropout = 0.1;

    void validate() const;

    bool operator==(const HeadConfig&) const = default;
};

// Phase-head training and the optimiser settings shared by every loop.
struct TrainConfig {
    std::string optimizer = "adam";
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double lr = 3e-4;
    double gamma = 0.95;
    std::size_t batch = 128;
    std::size_t epochs = 5;

    void validate() const;

    bool operator==(const TrainConfig&) const = default;
};

struct PretrainConfig {
    double lr = 1e-4;
    std::size_t batch = 8;
    std::size_t steps = 500;

    bool operator==(const PretrainConfig&) const = default;
};

struct FinetuneConfig {
    double lr = 1e-4;
    std::size_t batch = 8;

    bool operator==(const FinetuneConfig&) const = default;
};

struct AugmentConfig {
    bool enabled = true;
    double brightness = 0.2;
    std::vector<double> contrast{0.8, 1.25};
    std::vector<double> saturation{0.8, 1.25};
    double blur_prob = 0.5;
    double blur_sigma_max = 1.5;
    std::size_t blur_kernel = 5;

    void validate() const;

    bool operator==(const AugmentConfig&) const = default;
};

struct Config {
    ModelConfig encoder;
    DecoderConfig decoder;
    HeadConfig head;
    TrainConfig train;
    PretrainConfig pretrain;
    FinetuneConfig finetune;
    AugmentConfig augment;

    // Checks every section plus cross-section constraints; throws ConfigError.
    void validate() const;

    bool operator==(const Config&) const = default;
};

// Parses the `key = value` config format on top of the defaults. Unknown keys
// and malformed values throw ConfigError. The result is validated.
Config parse_config(std::string_view text, std::string_view origin = "<config>");
Config load_config(const std::filesystem::path& path);

// Every key in canonical order; parse_config(format_config(c)) == c.
std::string format_config(const Config& config);

}  // namespace gsvit
