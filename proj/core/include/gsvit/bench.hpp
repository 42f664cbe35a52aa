#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gsvit/model.hpp"
#include "gsvit/report.hpp"

namespace gsvit {

// Published GPU figures, printed for orientation and never compared against.
inline constexpr double kReferenceLatencyMs = 12.1;
inline constexpr double kReferenceLatencyStdMs = 0.1;
inline constexpr double kReferenceImagesPerSecond = 10621.0;

struct BenchOptions {
    std::size_t batch = 1;
    std::size_t warmup = 1;
    std::size_t iters = 10;
    std::size_t threads = 1;
    std::uint64_t seed = 0;
    // Also time 2 x batch and a single image for comparison.
    bool paired = true;

    void validate() const;
};

struct BenchRun {
    std::size_t batch = 0;
    std::size_t threads = 0;
    std::vector<double> latency_ms;  // one per timed iteration, warmup excluded
    double mean_ms = 0.0;
    double std_ms = 0.0;  // population
    double total_ms = 0.0;
    double images_per_second = 0.0;
    // Per worker: [first row, row count) of the batch and an FNV-1a hash of its latents.
    std::vector<std::size_t> slice_begin;
    std::vector<std::size_t> slice_rows;
    std::vector<std::uint64_t> worker_checksums;
    // True when every iteration reproduced the first iteration's outputs.
    bool stable = true;
};

struct BenchReport {
    BenchOptions options;
    BenchRun run;
    std::optional<BenchRun> doubled;
    std::optional<BenchRun> single;
    std::string config_text;

    double per_image_ms() const { return run.mean_ms / static_cast<double>(run.batch); }
    Report to_report() const;
};

// Statistics of a latency series: mean, population std, total, images/s.
void summarize(BenchRun& run);

// Deterministic input batch [batch x C x H x W] in [0,1].
Tensor synthetic_images(const ModelConfig& config, std::size_t batch, std::uint64_t seed);

// Rows [begin, begin + rows) hashed as float32 bytes.
std::uint64_t latent_checksum(const Tensor& latents, std::size_t begin, std::size_t rows);

// Encoder forward only, no tape. With threads > 1 the batch is split into
// contiguous slices, one per persistent worker.
BenchRun time_encoder(const Model& model, const Tensor& images, std::size_t warmup, std::size_t iters,
                      std::size_t threads);

BenchReport bench_inference(const Model& model, const BenchOptions& options);

}  // namespace gsvit
