#include "gsvit/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "gsvit/error.hpp"
#include "gsvit/text.hpp"

namespace gsvit {

namespace {

void check(bool ok, const std::string& message) {
    if (!ok) {
        throw ConfigError(message);
    }
}

std::string str(std::size_t v) { return std::to_string(v); }

}  // namespace

std::size_t ModelConfig::mlp_hidden(std::size_t stage) const {
    const auto hidden = std::llround(static_cast<double>(widths.at(stage)) * mlp_ratios.at(stage));
    return static_cast<std::size_t>(std::max<long long>(hidden, 1));
}

void ModelConfig::validate() const {
    check(image_size > 0 && patch_size > 0 && in_channels > 0, "encoder: image_size, patch_size and in_channels must be positive");
    check(image_size % patch_size == 0, "encoder: image " + str(image_size) + "x" + str(image_size) +
                                            " is not divisible by patch size " + str(patch_size));
    check(!widths.empty(), "encoder: at least one stage is required");
    check(depths.size() == widths.size() && heads.size() == widths.size() && mlp_ratios.size() == widths.size(),
          "encoder: widths, depths, heads and mlp_ratios must have one entry per stage");
    for (std::size_t s = 0; s < widths.size(); ++s) {
        check(widths[s] > 0 && heads[s] > 0, "encoder: stage " + str(s) + " needs positive width and heads");
        check(widths[s] % heads[s] == 0, "encoder: stage " + str(s) + " width " + str(widths[s]) +
                                             " is not divisible by " + str(heads[s]) + " heads");
        check(mlp_ratios[s] > 0.0, "encoder: stage " + str(s) + " mlp ratio must be positive");
    }
    check(latent_dim == widths.back(), "encoder: latent_dim " + str(latent_dim) + " must equal the last stage width " +
                                           str(widths.back()));
    check(norm_eps > 0.0, "encoder: norm_eps must be positive");
}

std::vector<std::size_t> DecoderConfig::resolutions() const {
    std::vector<std::size_t> out{seed_size};
    for (std::size_t i = 0; i + 1 < channels.size() && i < kernels.size() && i < strides.size() && i < pads.size(); ++i) {
        const long long r = (static_cast<long long>(out.back()) - 1) * static_cast<long long>(strides[i]) -
                            2 * static_cast<long long>(pads[i]) + static_cast<long long>(kernels[i]);
        out.push_back(r > 0 ? static_cast<std::size_t>(r) : 0);
    }
    return out;
}

void DecoderConfig::validate() const {
    check(seed_size > 0, "decoder: seed_size must be positive");
    check(channels.size() >= 2, "decoder: at least one deconvolution stage is required");
    check(kernels.size() == stages() && strides.size() == stages() && pads.size() == stages(),
          "decoder: kernels, strides and pads need one entry per stage (" + str(stages()) + ")");
    for (std::size_t i = 0; i < channels.size(); ++i) {
        check(channels[i] > 0, "decoder: channel counts must be positive");
    }
    for (std::size_t i = 0; i < stages(); ++i) {
        check(kernels[i] > 0 && strides[i] > 0, "decoder: stage " + str(i) + " needs positive kernel and stride");
    }
    const auto res = resolutions();
    for (std::size_t i = 1; i < res.size(); ++i) {
        check(res[i] > 0, "decoder: stage " + str(i - 1) + " produces an empty feature map");
    }
    check(res.back() == output_size, "decoder: stages produce " + str(res.back()) + "x" + str(res.back()) +
                                         ", configured output is " + str(output_size) + "x" + str(output_size));
    check(se_scales.size() == 2, "decoder: exactly two SE scales are required, got " + str(se_scales.size()));
    check(se_scales[0] != se_scales[1], "decoder: SE scales must differ");
    check(se_reduction > 0, "decoder: se_reduction must be positive");
    for (std::size_t scale : se_scales) {
        // SE residuals sit after an intermediate stage (never the output layer).
        std::size_t stage = stages();
        for (std::size_t i = 1; i + 1 < res.size(); ++i) {
            if (res[i] == scale) {
                stage = i - 1;
                break;
            }
        }
        check(stage < stages(), "decoder: SE scale " + str(scale) + " matches no intermediate stage resolution");
        check(channels[stage + 1] % se_reduction == 0, "decoder: SE scale " + str(scale) + " has " +
                                                           str(channels[stage + 1]) + " channels, not divisible by " +
                                                           str(se_reduction));
    }
    check(loss == "mse", "decoder: unsupported loss '" + loss + "' (supported: mse)");
}

void HeadConfig::validate() const {
    check(classes >= 2, "head: at least two classes are required");
    for (std::size_t h : hidden) {
        check(h > 0, "head: hidden widths must be positive");
    }
    check(dropout >= 0.0 && dropout < 1.0, "head: dropout must lie in [0, 1)");
}

void TrainConfig::validate() const {
    check(optimizer == "adam", "train: unsupported optimizer '" + optimizer + "' (supported: adam)");
    check(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, "train: betas must lie in [0, 1)");
    check(eps > 0.0 && lr > 0.0, "train: eps and lr must be positive");
    check(gamma > 0.0 && gamma <= 1.0, "train: gamma must lie in (0, 1]");
    check(batch > 0, "train: batch must be positive");
}

void AugmentConfig::validate() const {
    check(brightness >= 0.0, "augment: brightness must be non-negative");
    check(contrast.size() == 2 && contrast[0] > 0.0 && contrast[0] <= contrast[1],
          "augment: contrast must be 'lo,hi' with 0 < lo <= hi");
    check(saturation.size() == 2 && saturation[0] >= 0.0 && saturation[0] <= saturation[1],
          "augment: saturation must be 'lo,hi' with 0 <= lo <= hi");
    check(blur_prob >= 0.0 && blur_prob <= 1.0, "augment: blur_prob must lie in [0, 1]");
    check(blur_sigma_max >= 0.0, "augment: blur_sigma_max must be non-negative");
    check(blur_kernel % 2 == 1, "augment: blur_kernel must be odd");
}

void Config::validate() const {
    encoder.validate();
    decoder.validate();
    head.validate();
    train.validate();
    augment.validate();
    check(pretrain.lr > 0.0 && pretrain.batch > 0, "pretrain: lr and batch must be positive");
    check(finetune.lr > 0.0 && finetune.batch > 0, "finetune: lr and batch must be positive");
    check(decoder.channels.back() == encoder.in_channels,
          "decoder: output channels " + str(decoder.channels.back()) + " differ from encoder input channels " +
              str(encoder.in_channels));
    check(decoder.output_size == encoder.image_size, "decoder: output size " + str(decoder.output_size) +
                                                         " differs from encoder image size " + str(encoder.image_size));
}

namespace {

struct Field {
    const char* key;
    std::function<std::string(const Config&)> get;
    std::function<void(Config&, std::string_view, std::string_view)> set;
};

template <typename Member>
Field size_field(const char* key, Member member) {
    return {key, [member](const Config& c) { return std::to_string(member(const_cast<Config&>(c))); },
            [member](Config& c, std::string_view v, std::string_view what) {
                member(c) = static_cast<std::size_t>(parse_u64(v, what));
            }};
}

template <typename Member>
Field double_field(const char* key, Member member) {
    return {key, [member](const Config& c) { return format_double(member(const_cast<Config&>(c))); },
            [member](Config& c, std::string_view v, std::string_view what) { member(c) = parse_double(v, what); }};
}

template <typename Member>
Field size_list_field(const char* key, Member member) {
    return {key, [member](const Config& c) { return format_list(member(const_cast<Config&>(c))); },
            [member](Config& c, std::string_view v, std::string_view what) { member(c) = parse_size_list(v, what); }};
}

template <typename Member>
Field double_list_field(const char* key, Member member) {
    return {key, [member](const Config& c) { return format_list(member(const_cast<Config&>(c))); },
            [member](Config& c, std::string_view v, std::string_view what) { member(c) = parse_double_list(v, what); }};
}

template <typename Member>
Field string_field(const char* key, Member member) {
    return {key, [member](const Config& c) { return member(const_cast<Config&>(c)); },
            [member](Config& c, std::string_view v, std::string_view) { member(c) = std::string(v); }};
}

#define GSVIT_MEMBER(path) [](Config& c) -> auto& { return c.path; }

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        size_field("encoder.image_size", GSVIT_MEMBER(encoder.image_size)),
        size_field("encoder.in_channels", GSVIT_MEMBER(encoder.in_channels)),
        size_field("encoder.patch_size", GSVIT_MEMBER(encoder.patch_size)),
        size_list_field("encoder.widths", GSVIT_MEMBER(encoder.widths)),
        size_list_field("encoder.depths", GSVIT_MEMBER(encoder.depths)),
        size_list_field("encoder.heads", GSVIT_MEMBER(encoder.heads)),
        double_list_field("encoder.mlp_ratios", GSVIT_MEMBER(encoder.mlp_ratios)),
        size_field("encoder.mlp_layers", GSVIT_MEMBER(encoder.mlp_layers)),
        size_field("encoder.latent_dim", GSVIT_MEMBER(encoder.latent_dim)),
        {"encoder.readout",
         [](const Config& c) { return std::string(c.encoder.readout == Readout::kClass ? "class" : "mean"); },
         [](Config& c, std::string_view v, std::string_view what) {
             if (v == "class") {
                 c.encoder.readout = Readout::kClass;
             } else if (v == "mean") {
                 c.encoder.readout = Readout::kMean;
             } else {
                 throw ConfigError(std::string(what) + ": expected class or mean, got '" + std::string(v) + "'");
             }
         }},
        double_field("encoder.norm_eps", GSVIT_MEMBER(encoder.norm_eps)),
        size_field("decoder.seed_size", GSVIT_MEMBER(decoder.seed_size)),
        size_list_field("decoder.channels", GSVIT_MEMBER(decoder.channels)),
        size_list_field("decoder.kernels", GSVIT_MEMBER(decoder.kernels)),
        size_list_field("decoder.strides", GSVIT_MEMBER(decoder.strides)),
        size_list_field("decoder.pads", GSVIT_MEMBER(decoder.pads)),
        size_list_field("decoder.se_scales", GSVIT_MEMBER(decoder.se_scales)),
        size_field("decoder.se_reduction", GSVIT_MEMBER(decoder.se_reduction)),
        size_field("decoder.output_size", GSVIT_MEMBER(decoder.output_size)),
        string_field("decoder.loss", GSVIT_MEMBER(decoder.loss)),
        size_list_field("head.hidden", GSVIT_MEMBER(head.hidden)),
        size_field("head.classes", GSVIT_MEMBER(head.classes)),
        double_field("head.dropout", GSVIT_MEMBER(head.dropout)),
        string_field("train.optimizer", GSVIT_MEMBER(train.optimizer)),
        double_field("train.beta1", GSVIT_MEMBER(train.beta1)),
        double_field("train.beta2", GSVIT_MEMBER(train.beta2)),
        double_field("train.eps", GSVIT_MEMBER(train.eps)),
        double_field("train.lr", GSVIT_MEMBER(train.lr)),
        double_field("train.gamma", GSVIT_MEMBER(train.gamma)),
        size_field("train.batch", GSVIT_MEMBER(train.batch)),
        size_field("train.epochs", GSVIT_MEMBER(train.epochs)),
        double_field("pretrain.lr", GSVIT_MEMBER(pretrain.lr)),
        size_field("pretrain.batch", GSVIT_MEMBER(pretrain.batch)),
        size_field("pretrain.steps", GSVIT_MEMBER(pretrain.steps)),
        double_field("finetune.lr", GSVIT_MEMBER(finetune.lr)),
        size_field("finetune.batch", GSVIT_MEMBER(finetune.batch)),
        {"augment.enabled", [](const Config& c) { return std::string(c.augment.enabled ? "true" : "false"); },
         [](Config& c, std::string_view v, std::string_view what) { c.augment.enabled = parse_bool(v, what); }},
        double_field("augment.brightness", GSVIT_MEMBER(augment.brightness)),
        double_list_field("augment.contrast", GSVIT_MEMBER(augment.contrast)),
        double_list_field("augment.saturation", GSVIT_MEMBER(augment.saturation)),
        double_field("augment.blur_prob", GSVIT_MEMBER(augment.blur_prob)),
        double_field("augment.blur_sigma_max", GSVIT_MEMBER(augment.blur_sigma_max)),
        size_field("augment.blur_kernel", GSVIT_MEMBER(augment.blur_kernel)),
    };
    return table;
}

#undef GSVIT_MEMBER

}  // namespace

Config parse_config(std::string_view text, std::string_view origin) {
    Config config;
    for (const auto& kv : parse_key_values(text, origin)) {
        const auto& table = fields();
        auto it = std::find_if(table.begin(), table.end(), [&](const Field& f) { return kv.key == f.key; });
        const std::string where = std::string(origin) + ":" + std::to_string(kv.line);
        if (it == table.end()) {
            throw ConfigError(where + ": unknown key '" + kv.key + "'");
        }
        it->set(config, kv.value, where + ": " + kv.key);
    }
    config.validate();
    return config;
}

Config load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open config file " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path.string());
}

std::string format_config(const Config& config) {
    std::string out;
    for (const auto& f : fields()) {
        out += std::string(f.key) + " = " + f.get(config) + "\n";
    }
    return out;
}

}  // namespace gsvit
