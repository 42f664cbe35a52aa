#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "gsvit/config.hpp"
#include "gsvit/model.hpp"
#include "gsvit/params.hpp"

namespace gsvit {

// File layout:
//   "GSVT" | u32 version | u64 manifest length | manifest (key = value text)
//   | zero padding to 64 bytes | payload
// Payload offsets are relative to the payload start and 64-byte aligned; data is
// little-endian float32. The manifest records every tensor's name, shape,
// tunable/buffer flags, offset, byte size and FNV-1a checksum, plus a snapshot
// of the config under `config.`.
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::size_t kPayloadAlignment = 64;

struct CheckpointTensor {
    std::string name;
    Shape shape;
    bool tunable = true;
    bool buffer = false;
    std::uint64_t offset = 0;
    std::uint64_t bytes = 0;
    std::uint64_t checksum = 0;
    std::vector<float> data;
};

struct Checkpoint {
    std::string assembly;  // "pretrain", "classify" or empty for a bare tensor list
    std::string config_text;
    std::vector<CheckpointTensor> tensors;

    std::size_t total_count() const;
    std::size_t tunable_count() const;
    const CheckpointTensor* find(const std::string& name) const;
};

Checkpoint make_checkpoint(const ParameterSet<float>& params, const std::string& config_text,
                           const std::string& assembly);
Checkpoint make_checkpoint(const Model& model);

std::string serialize_checkpoint(const Checkpoint& checkpoint);
// Verifies magic, version, manifest, offsets, payload length and checksums;
// failures throw CheckpointError.
Checkpoint parse_checkpoint(std::string_view bytes, std::string_view origin = "<checkpoint>");

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
void save_checkpoint(const std::filesystem::path& path, const Model& model);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Copies checkpoint tensors into params. Names, order, shapes and flags must
// agree; the first mismatch is named in the CheckpointError.
void apply_checkpoint(const Checkpoint& checkpoint, const ParameterSet<float>& params);

// Rebuilds the model described by the checkpoint's config and assembly.
Model model_from_checkpoint(const Checkpoint& checkpoint);
Model load_model(const std::filesystem::path& path);

}  // namespace gsvit
