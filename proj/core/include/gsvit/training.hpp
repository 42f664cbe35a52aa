#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "gsvit/config.hpp"
#include "gsvit/corpus.hpp"
#include "gsvit/model.hpp"
#include "gsvit/report.hpp"

namespace gsvit {

struct TrainReport {
    std::string kind;  // "pretrain", "finetune" or "train-phase"
    std::uint64_t seed = 0;
    std::vector<double> loss;     // one entry per optimizer step
    std::vector<double> step_ms;  // wall clock per step
    std::vector<double> lr;       // learning rate used at each step
    // Final metrics and run facts, e.g. "initial_loss", "final_loss".
    std::vector<std::pair<std::string, std::string>> metrics;
    std::string config_text;

    std::size_t steps() const { return loss.size(); }
    const std::string* metric(const std::string& key) const;
    Report to_report() const;
};

struct TrainResult {
    Model model;
    TrainReport report;
};

// Next-frame reconstruction over the pairs of `corpus`, `steps` Adam updates at
// config.pretrain.lr with batches drawn from a seeded shuffle. Starts from a
// fresh model initialized from `seed`.
TrainResult pretrain(const FrameCorpus& corpus, const Config& config, std::size_t steps, std::uint64_t seed);

// Same objective, continuing from `model`: exactly one pass over the pairs of
// the videos tagged `procedure` at config.finetune.lr.
TrainResult finetune(const Model& model, const FrameCorpus& corpus, const std::string& procedure,
                     const Config& config, std::uint64_t seed);

// Mean reconstruction MSE over `pairs` in eval mode, batched.
double reconstruction_mse(const Model& model, const FrameCorpus& corpus, const std::vector<FramePair>& pairs,
                          std::size_t batch = 16);

// Trains a phase head on top of the encoder taken from `source` (frozen).
// Cross-entropy, Adam, LR = config.train.lr * gamma^epoch, augmentation per
// config.augment. The returned model has the classify assembly.
TrainResult train_phase(const Model& source, const FrameCorpus& corpus, const Config& config, std::size_t epochs,
                        std::uint64_t seed);

// One frame in, one phase out.
int predict_phase(const Model& model, const Tensor& frame);
std::vector<int> predict_phases(const Model& model, const std::vector<Tensor>& frames, std::size_t batch = 128);

using Confusion = std::array<std::array<std::size_t, kNumPhases>, kNumPhases>;  // [truth][prediction]

struct VideoMetrics {
    std::string name;
    std::size_t frames = 0;
    Confusion confusion{};
    double accuracy = 0.0;
    // Macro averages over phases with a non-zero denominator.
    double precision = 0.0;
    double recall = 0.0;
};

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // population standard deviation across videos
};

struct PhaseMetrics {
    std::vector<VideoMetrics> videos;
    std::vector<std::string> skipped;  // videos without labels
    MeanStd accuracy;
    MeanStd precision;
    MeanStd recall;
};

// Frames with label -1 are ignored. Labels and predictions must be in [0, 7).
VideoMetrics video_metrics(const std::string& name, const std::vector<int>& labels,
                           const std::vector<int>& predictions);
MeanStd mean_std(const std::vector<double>& values);
PhaseMetrics aggregate_metrics(std::vector<VideoMetrics> videos, std::vector<std::string> skipped = {});

PhaseMetrics evaluate_phase(const Model& model, const FrameCorpus& corpus);
Report metrics_report(const PhaseMetrics& metrics);

}  // namespace gsvit
