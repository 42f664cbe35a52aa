#include "gsvit/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include "gsvit/error.hpp"
#include "gsvit/text.hpp"

namespace gsvit {

namespace {

constexpr char kMagic[4] = {'G', 'S', 'V', 'T'};
constexpr std::size_t kHeaderBytes = 16;

std::size_t align_up(std::size_t n) { return (n + kPayloadAlignment - 1) / kPayloadAlignment * kPayloadAlignment; }

void put_le(std::string& out, std::uint64_t value, int bytes) {
    for (int i = 0; i < bytes; ++i) {
        out.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
    }
}

std::uint64_t get_le(std::string_view in, std::size_t pos, int bytes) {
    std::uint64_t value = 0;
    for (int i = 0; i < bytes; ++i) {
        value |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
    }
    return value;
}

std::string float_bytes(const std::vector<float>& data) {
    std::string out(data.size() * 4, '\0');
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto bits = std::bit_cast<std::uint32_t>(data[i]);
        for (int b = 0; b < 4; ++b) {
            out[i * 4 + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
        }
    }
    return out;
}

std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) {
        s[static_cast<std::size_t>(i)] = digits[v & 0xf];
    }
    return s;
}

std::string shape_field(const Shape& shape) { return format_list(std::vector<std::size_t>(shape.begin(), shape.end())); }

[[noreturn]] void corrupt(std::string_view origin, const std::string& message) {
    throw CheckpointError(std::string(origin) + ": " + message);
}

}  // namespace

std::size_t Checkpoint::total_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors) {
        n += t.buffer ? 0 : shape_numel(t.shape);
    }
    return n;
}

std::size_t Checkpoint::tunable_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors) {
        n += (t.buffer || !t.tunable) ? 0 : shape_numel(t.shape);
    }
    return n;
}

const CheckpointTensor* Checkpoint::find(const std::string& name) const {
    for (const auto& t : tensors) {
        if (t.name == name) {
            return &t;
        }
    }
    return nullptr;
}

Checkpoint make_checkpoint(const ParameterSet<float>& params, const std::string& config_text,
                           const std::string& assembly) {
    Checkpoint ck;
    ck.assembly = assembly;
    ck.config_text = config_text;
    std::uint64_t offset = 0;
    for (const auto& e : params.entries()) {
        CheckpointTensor t;
        t.name = e.name;
        t.shape = e.tensor.shape();
        t.tunable = e.tunable && !e.buffer;
        t.buffer = e.buffer;
        t.data.assign(e.tensor.data().begin(), e.tensor.data().end());
        t.bytes = t.data.size() * 4;
        t.offset = offset;
        const std::string raw = float_bytes(t.data);
        t.checksum = fnv1a64(raw.data(), raw.size());
        offset = align_up(offset + t.bytes);
        ck.tensors.push_back(std::move(t));
    }
    return ck;
}

Checkpoint make_checkpoint(const Model& model) {
    return make_checkpoint(model.parameters(), format_config(model.config), std::string(assembly_name(model.assembly)));
}

std::string serialize_checkpoint(const Checkpoint& ck) {
    std::string manifest = "format = gsvit-checkpoint\n";
    manifest += "assembly = " + ck.assembly + "\n";
    manifest += "tensors = " + std::to_string(ck.tensors.size()) + "\n";
    const std::uint64_t payload = ck.tensors.empty() ? 0 : ck.tensors.back().offset + ck.tensors.back().bytes;
    manifest += "payload_bytes = " + std::to_string(payload) + "\n";
    for (std::size_t i = 0; i < ck.tensors.size(); ++i) {
        const auto& t = ck.tensors[i];
        const std::string p = "tensor." + std::to_string(i) + ".";
        manifest += p + "name = " + t.name + "\n";
        manifest += p + "shape = " + shape_field(t.shape) + "\n";
        manifest += p + "tunable = " + (t.tunable ? "true" : "false") + "\n";
        manifest += p + "buffer = " + (t.buffer ? "true" : "false") + "\n";
        manifest += p + "offset = " + std::to_string(t.offset) + "\n";
        manifest += p + "bytes = " + std::to_string(t.bytes) + "\n";
        manifest += p + "fnv1a64 = " + hex64(t.checksum) + "\n";
    }
    for (const auto& kv : parse_key_values(ck.config_text, "config snapshot")) {
        manifest += "config." + kv.key + " = " + kv.value + "\n";
    }

    std::string out(kMagic, 4);
    put_le(out, kCheckpointVersion, 4);
    put_le(out, manifest.size(), 8);
    out += manifest;
    if (ck.tensors.empty()) {
        return out;
    }
    const std::size_t payload_start = align_up(out.size());
    out.resize(payload_start + payload, '\0');
    for (const auto& t : ck.tensors) {
        const std::string raw = float_bytes(t.data);
        std::memcpy(out.data() + payload_start + t.offset, raw.data(), raw.size());
    }
    return out;
}

Checkpoint parse_checkpoint(std::string_view bytes, std::string_view origin) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
        corrupt(origin, "not a GSVT checkpoint");
    }
    if (bytes.size() < kHeaderBytes) {
        corrupt(origin, "truncated header: expected " + std::to_string(kHeaderBytes) + " bytes, found " +
                            std::to_string(bytes.size()));
    }
    const auto version = static_cast<std::uint32_t>(get_le(bytes, 4, 4));
    if (version != kCheckpointVersion) {
        corrupt(origin, "unsupported checkpoint version " + std::to_string(version));
    }
    const std::uint64_t manifest_len = get_le(bytes, 8, 8);
    if (manifest_len > bytes.size() - kHeaderBytes) {
        corrupt(origin, "truncated manifest: expected " + std::to_string(kHeaderBytes + manifest_len) +
                            " bytes, found " + std::to_string(bytes.size()));
    }
    std::map<std::string, std::string> fields;
    Checkpoint ck;
    try {
        for (auto& kv : parse_key_values(bytes.substr(kHeaderBytes, manifest_len), origin)) {
            if (kv.key.rfind("config.", 0) == 0) {
                ck.config_text += kv.key.substr(7) + " = " + kv.value + "\n";
            } else {
                fields[kv.key] = kv.value;
            }
        }
    } catch (const ConfigError& e) {
        corrupt(origin, std::string("malformed manifest: ") + e.what());
    }
    auto field = [&](const std::string& key) -> const std::string& {
        auto it = fields.find(key);
        if (it == fields.end()) {
            corrupt(origin, "manifest is missing '" + key + "'");
        }
        return it->second;
    };
    std::uint64_t count = 0;
    std::uint64_t payload = 0;
    try {
        if (field("format") != "gsvit-checkpoint") {
            corrupt(origin, "unknown manifest format '" + field("format") + "'");
        }
        ck.assembly = fields.count("assembly") ? fields["assembly"] : "";
        count = parse_u64(field("tensors"), "tensors");
        payload = parse_u64(field("payload_bytes"), "payload_bytes");
        std::uint64_t end = 0;
        for (std::uint64_t i = 0; i < count; ++i) {
            const std::string p = "tensor." + std::to_string(i) + ".";
            CheckpointTensor t;
            t.name = field(p + "name");
            const auto dims = parse_size_list(field(p + "shape"), p + "shape");
            t.shape = Shape(dims.begin(), dims.end());
            t.tunable = parse_bool(field(p + "tunable"), p + "tunable");
            t.buffer = parse_bool(field(p + "buffer"), p + "buffer");
            t.offset = parse_u64(field(p + "offset"), p + "offset");
            t.bytes = parse_u64(field(p + "bytes"), p + "bytes");
            const std::string& sum = field(p + "fnv1a64");
            if (sum.size() != 16) {
                corrupt(origin, "malformed checksum for tensor " + t.name);
            }
            t.checksum = std::stoull(sum, nullptr, 16);
            if (t.bytes != shape_numel(t.shape) * 4) {
                corrupt(origin, "tensor " + t.name + " has " + std::to_string(t.bytes) + " bytes for shape " +
                                    shape_to_string(t.shape));
            }
            if (t.offset % kPayloadAlignment != 0 || t.offset < end) {
                corrupt(origin, "tensor " + t.name + " offset " + std::to_string(t.offset) +
                                    " is unaligned or not increasing");
            }
            end = t.offset + t.bytes;
            ck.tensors.push_back(std::move(t));
        }
        if (end != payload) {
            corrupt(origin, "payload_bytes " + std::to_string(payload) + " disagrees with tensor extents " +
                                std::to_string(end));
        }
    } catch (const ConfigError& e) {
        corrupt(origin, std::string("malformed manifest: ") + e.what());
    } catch (const std::logic_error&) {
        corrupt(origin, "malformed manifest checksum");
    }
    const std::size_t manifest_end = kHeaderBytes + manifest_len;
    const std::size_t payload_start = count == 0 ? manifest_end : align_up(manifest_end);
    const std::size_t expected = payload_start + payload;
    if (bytes.size() != expected) {
        corrupt(origin, std::string(bytes.size() < expected ? "truncated payload" : "trailing bytes") +
                            ": expected " + std::to_string(expected) + " bytes, found " +
                            std::to_string(bytes.size()));
    }
    std::size_t cursor = manifest_end;
    auto check_padding = [&](std::size_t until) {
        for (; cursor < until; ++cursor) {
            if (bytes[cursor] != '\0') {
                corrupt(origin, "nonzero padding byte at offset " + std::to_string(cursor));
            }
        }
    };
    for (auto& t : ck.tensors) {
        check_padding(payload_start + t.offset);
        cursor = payload_start + t.offset + t.bytes;
        const char* raw = bytes.data() + payload_start + t.offset;
        if (fnv1a64(raw, t.bytes) != t.checksum) {
            corrupt(origin, "checksum mismatch for tensor " + t.name + " (payload corrupted)");
        }
        t.data.resize(t.bytes / 4);
        for (std::size_t i = 0; i < t.data.size(); ++i) {
            t.data[i] = std::bit_cast<float>(static_cast<std::uint32_t>(get_le(bytes, payload_start + t.offset + i * 4, 4)));
        }
    }
    return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
    const std::string bytes = serialize_checkpoint(checkpoint);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()))) {
        throw CheckpointError(path.string() + ": cannot write checkpoint");
    }
}

void save_checkpoint(const std::filesystem::path& path, const Model& model) {
    save_checkpoint(path, make_checkpoint(model));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw CheckpointError(path.string() + ": cannot open checkpoint");
    }
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_checkpoint(bytes, path.string());
}

void apply_checkpoint(const Checkpoint& ck, const ParameterSet<float>& params) {
    const auto& entries = params.entries();
    const std::size_t n = std::max(entries.size(), ck.tensors.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (i >= entries.size()) {
            throw CheckpointError("checkpoint has extra tensor " + ck.tensors[i].name);
        }
        if (i >= ck.tensors.size()) {
            throw CheckpointError("checkpoint is missing tensor " + entries[i].name);
        }
        const auto& e = entries[i];
        const auto& t = ck.tensors[i];
        if (e.name != t.name || e.tensor.shape() != t.shape || e.buffer != t.buffer) {
            throw CheckpointError("tensor mismatch at index " + std::to_string(i) + ": model has " + e.name + " " +
                                  shape_to_string(e.tensor.shape()) + ", checkpoint has " + t.name + " " +
                                  shape_to_string(t.shape));
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        BasicTensor<float> target = entries[i].tensor;
        std::copy(ck.tensors[i].data.begin(), ck.tensors[i].data.end(), target.mutable_data().begin());
    }
}

Model model_from_checkpoint(const Checkpoint& ck) {
    Config config;
    try {
        config = parse_config(ck.config_text, "checkpoint config");
    } catch (const ConfigError& e) {
        throw CheckpointError(std::string("checkpoint config is invalid: ") + e.what());
    }
    Model model(config, parse_assembly(ck.assembly), 0);
    apply_checkpoint(ck, model.parameters());
    return model;
}

Model load_model(const std::filesystem::path& path) { return model_from_checkpoint(load_checkpoint(path)); }

}  // namespace gsvit
