#include "gsvit/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "gsvit/augment.hpp"
#include "gsvit/error.hpp"
#include "gsvit/ops.hpp"
#include "gsvit/optim.hpp"
#include "gsvit/text.hpp"

namespace gsvit {

const std::string* TrainReport::metric(const std::string& key) const {
    for (const auto& [k, v] : metrics) {
        if (k == key) {
            return &v;
        }
    }
    return nullptr;
}

Report TrainReport::to_report() const {
    Report r;
    r.set("kind", kind);
    r.set("seed", std::to_string(seed));
    r.set_count("steps", steps());
    for (const auto& [k, v] : metrics) {
        r.set(k, v);
    }
    r.add_snapshot("config", config_text);
    r.add_series("loss", loss);
    r.add_series("step_ms", step_ms);
    r.add_series("lr", lr);
    return r;
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

Tensor stack_frames(const FrameCorpus& corpus, const std::vector<FramePair>& pairs, std::size_t begin,
                    std::size_t end, bool target) {
    std::vector<Tensor> frames;
    frames.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
        const auto& p = pairs[i];
        frames.push_back(corpus.videos[p.video].frames[target ? p.target : p.input]);
    }
    return ops::stack(frames);
}

std::string at_step(const char* what, std::size_t step, double lr) {
    return std::string(what) + " at step " + std::to_string(step) + " (lr " + format_double(lr) + ")";
}

// Runs one training step; non-finite losses and NaN failures inside ops abort
// with the step index and learning rate.
template <typename Fn>
double guarded_step(const char* what, std::size_t step, double lr, Fn&& fn) {
    double loss = 0.0;
    try {
        loss = fn();
    } catch (const NumericError& e) {
        throw NumericError(at_step(what, step, lr) + ": " + e.what());
    }
    if (!std::isfinite(loss)) {
        throw NumericError(at_step(what, step, lr) + ": loss is " + format_double(loss));
    }
    return loss;
}

// Forward and backward on a reconstruction batch; returns the loss.
double reconstruction_step(Model& model, const Tensor& inputs, const Tensor& targets) {
    Tape<float> tape;
    double value = 0.0;
    {
        TapeScope<float> scope(tape);
        const Tensor latents = model.encoder.encode_batch(inputs);
        const Tensor recon = model.decoder->forward(latents, true);
        const Tensor loss = reconstruction_loss(recon, targets);
        value = loss.item();
        tape.backward(loss);
    }
    return value;
}

void require_pretrain(const Model& model, const char* what) {
    if (model.assembly != Assembly::kPretrain || !model.decoder) {
        throw CheckpointError(std::string(what) + ": model has no decoder (assembly " +
                              std::string(assembly_name(model.assembly)) + ")");
    }
}

AdamOptions adam_options(const TrainConfig& train, double lr) {
    if (train.optimizer != "adam") {
        throw ConfigError("unsupported optimizer '" + train.optimizer + "'");
    }
    return {lr, train.beta1, train.beta2, train.eps};
}

void finish_loss_metrics(TrainReport& report) {
    if (report.loss.empty()) {
        return;
    }
    const std::size_t tail = std::min<std::size_t>(10, report.loss.size());
    const double final_loss =
        std::accumulate(report.loss.end() - static_cast<long>(tail), report.loss.end(), 0.0) / static_cast<double>(tail);
    report.metrics.emplace_back("initial_loss", format_double(report.loss.front()));
    report.metrics.emplace_back("final_loss", format_double(final_loss));
    report.metrics.emplace_back("final_window", std::to_string(tail));
}

}  // namespace

TrainResult pretrain(const FrameCorpus& corpus, const Config& config, std::size_t steps, std::uint64_t seed) {
    config.validate();
    const auto pairs = build_frame_pairs(corpus);
    if (pairs.empty()) {
        throw DataError("pretrain: corpus " + corpus.root.string() + " yields no frame pairs");
    }
    TrainResult result{Model(config, Assembly::kPretrain, seed), {}};
    TrainReport& report = result.report;
    report.kind = "pretrain";
    report.seed = seed;
    report.config_text = format_config(config);

    const double lr = config.pretrain.lr;
    Adam adam(result.model.parameters(), adam_options(config.train, lr));
    Rng order_rng = Rng::derive(seed, "pretrain.order");
    std::vector<std::size_t> order(pairs.size());
    std::iota(order.begin(), order.end(), 0);
    order_rng.shuffle(order);
    std::size_t cursor = 0;
    const std::size_t batch = std::min(config.pretrain.batch, pairs.size());

    for (std::size_t step = 0; step < steps; ++step) {
        const auto start = Clock::now();
        std::vector<FramePair> chosen;
        while (chosen.size() < batch) {
            if (cursor == order.size()) {
                order_rng.shuffle(order);
                cursor = 0;
            }
            chosen.push_back(pairs[order[cursor++]]);
        }
        const Tensor inputs = stack_frames(corpus, chosen, 0, batch, false);
        const Tensor targets = stack_frames(corpus, chosen, 0, batch, true);
        const double loss =
            guarded_step("pretrain", step, lr, [&] { return reconstruction_step(result.model, inputs, targets); });
        adam.step();
        report.loss.push_back(loss);
        report.lr.push_back(lr);
        report.step_ms.push_back(elapsed_ms(start));
    }
    report.metrics.emplace_back("pairs", std::to_string(pairs.size()));
    report.metrics.emplace_back("batch", std::to_string(batch));
    finish_loss_metrics(report);
    return result;
}

TrainResult finetune(const Model& model, const FrameCorpus& corpus, const std::string& procedure,
                     const Config& config, std::uint64_t seed) {
    require_pretrain(model, "finetune");
    const FrameCorpus subset = corpus.filtered(procedure);
    const auto pairs = build_frame_pairs(subset);
    if (subset.videos.empty()) {
        throw DataError("finetune: no videos with procedure '" + procedure + "' in " + corpus.root.string());
    }
    if (pairs.empty()) {
        throw DataError("finetune: videos with procedure '" + procedure + "' yield no frame pairs");
    }
    TrainResult result{clone_model(model), {}};
    TrainReport& report = result.report;
    report.kind = "finetune";
    report.seed = seed;
    report.config_text = format_config(model.config);

    const double lr = config.finetune.lr;
    Adam adam(result.model.parameters(), adam_options(config.train, lr));
    std::vector<FramePair> order = pairs;
    Rng order_rng = Rng::derive(seed, "finetune.order");
    order_rng.shuffle(order);
    const std::size_t batch = config.finetune.batch;
    for (std::size_t begin = 0, step = 0; begin < order.size(); begin += batch, ++step) {
        const auto start = Clock::now();
        const std::size_t end = std::min(order.size(), begin + batch);
        const double loss = guarded_step("finetune", step, lr, [&] {
            return reconstruction_step(result.model, stack_frames(subset, order, begin, end, false),
                                       stack_frames(subset, order, begin, end, true));
        });
        adam.step();
        report.loss.push_back(loss);
        report.lr.push_back(lr);
        report.step_ms.push_back(elapsed_ms(start));
    }
    report.metrics.emplace_back("procedure", procedure);
    report.metrics.emplace_back("pairs", std::to_string(pairs.size()));
    finish_loss_metrics(report);
    return result;
}

double reconstruction_mse(const Model& model, const FrameCorpus& corpus, const std::vector<FramePair>& pairs,
                          std::size_t batch) {
    require_pretrain(model, "reconstruction_mse");
    if (pairs.empty() || batch == 0) {
        throw DataError("reconstruction_mse: no pairs");
    }
    double total = 0.0;
    for (std::size_t begin = 0; begin < pairs.size(); begin += batch) {
        const std::size_t end = std::min(pairs.size(), begin + batch);
        const Tensor latents = model.encoder.encode_batch(stack_frames(corpus, pairs, begin, end, false));
        const Tensor recon = model.decoder->forward(latents, false);
        total += reconstruction_loss(recon, stack_frames(corpus, pairs, begin, end, true)).item() *
                 static_cast<double>(end - begin);
    }
    return total / static_cast<double>(pairs.size());
}

TrainResult train_phase(const Model& source, const FrameCorpus& corpus, const Config& config, std::size_t epochs,
                        std::uint64_t seed) {
    config.validate();
    TrainResult result{Model(config, Assembly::kClassify, seed), {}};
    Model& model = result.model;
    copy_encoder(source, model);
    TrainReport& report = result.report;
    report.kind = "train-phase";
    report.seed = seed;
    report.config_text = format_config(config);

    struct Sample {
        std::size_t video;
        std::size_t frame;
        std::size_t label;
    };
    std::vector<Sample> samples;
    for (std::size_t v = 0; v < corpus.videos.size(); ++v) {
        const Video& video = corpus.videos[v];
        for (std::size_t f = 0; f < video.frames.size(); ++f) {
            const int label = video.label(f);
            if (label < 0) {
                continue;
            }
            if (label >= static_cast<int>(kNumPhases)) {
                throw DataError(video.frame_path(f).string() + ": phase " + std::to_string(label) +
                                " is outside [0," + std::to_string(kNumPhases) + ")");
            }
            samples.push_back({v, f, static_cast<std::size_t>(label)});
        }
    }
    if (samples.empty()) {
        throw DataError("train-phase: corpus " + corpus.root.string() + " has no labelled frames");
    }

    const std::uint64_t encoder_before = model.encoder_parameters().checksum();
    Adam adam(model.parameters(), adam_options(config.train, config.train.lr));
    Rng order_rng = Rng::derive(seed, "phase.order");
    Rng augment_rng = Rng::derive(seed, "phase.augment");
    Rng dropout_rng = Rng::derive(seed, "phase.dropout");
    const std::size_t batch = config.train.batch;
    std::vector<double> epoch_loss;
    std::vector<double> epoch_lr;

    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        const double lr = exponential_lr(config.train.lr, config.train.gamma, epoch);
        adam.set_lr(lr);
        epoch_lr.push_back(lr);
        order_rng.shuffle(samples);
        double sum = 0.0;
        for (std::size_t begin = 0; begin < samples.size(); begin += batch) {
            const auto start = Clock::now();
            const std::size_t end = std::min(samples.size(), begin + batch);
            std::vector<Tensor> frames;
            std::vector<std::size_t> labels;
            for (std::size_t i = begin; i < end; ++i) {
                const auto& s = samples[i];
                frames.push_back(augment(corpus.videos[s.video].frames[s.frame], config.augment, augment_rng));
                labels.push_back(s.label);
            }
            const double value = guarded_step("train-phase", report.loss.size(), lr, [&] {
                const Tensor latents = model.encoder.encode_batch(ops::stack(frames));
                Tape<float> tape;
                TapeScope<float> scope(tape);
                const Tensor loss = ops::cross_entropy(model.head->forward(latents, true, dropout_rng), labels);
                tape.backward(loss);
                return static_cast<double>(loss.item());
            });
            adam.step();
            sum += value * static_cast<double>(end - begin);
            report.loss.push_back(value);
            report.lr.push_back(lr);
            report.step_ms.push_back(elapsed_ms(start));
        }
        epoch_loss.push_back(sum / static_cast<double>(samples.size()));
    }

    const std::uint64_t encoder_after = model.encoder_parameters().checksum();
    if (encoder_after != encoder_before) {
        throw Error("train-phase: frozen encoder changed during training");
    }
    report.metrics.emplace_back("samples", std::to_string(samples.size()));
    report.metrics.emplace_back("epochs", std::to_string(epochs));
    report.metrics.emplace_back("encoder_checksum_before", std::to_string(encoder_before));
    report.metrics.emplace_back("encoder_checksum_after", std::to_string(encoder_after));
    report.metrics.emplace_back("epoch_loss", format_list(epoch_loss));
    report.metrics.emplace_back("epoch_lr", format_list(epoch_lr));
    finish_loss_metrics(report);
    return result;
}

namespace {

std::vector<int> argmax_rows(const Tensor& logits) {
    const std::size_t rows = logits.dim(0), cols = logits.dim(1);
    std::vector<int> out(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const auto row = logits.data().subspan(r * cols, cols);
        out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    return out;
}

void require_head(const Model& model) {
    if (!model.head) {
        throw CheckpointError("phase prediction needs a classify model (assembly " +
                              std::string(assembly_name(model.assembly)) + ")");
    }
}

}  // namespace

int predict_phase(const Model& model, const Tensor& frame) {
    require_head(model);
    const Tensor latent = model.encoder.encode(frame);
    return argmax_rows(model.head->forward(ops::reshape(latent, {1, latent.numel()})))[0];
}

std::vector<int> predict_phases(const Model& model, const std::vector<Tensor>& frames, std::size_t batch) {
    require_head(model);
    std::vector<int> out;
    out.reserve(frames.size());
    for (std::size_t begin = 0; begin < frames.size(); begin += batch) {
        const std::size_t end = std::min(frames.size(), begin + batch);
        const std::vector<Tensor> slice(frames.begin() + static_cast<long>(begin), frames.begin() + static_cast<long>(end));
        const auto preds = argmax_rows(model.head->forward(model.encoder.encode_batch(ops::stack(slice))));
        out.insert(out.end(), preds.begin(), preds.end());
    }
    return out;
}

VideoMetrics video_metrics(const std::string& name, const std::vector<int>& labels,
                           const std::vector<int>& predictions) {
    if (labels.size() != predictions.size()) {
        throw DataError(name + ": " + std::to_string(labels.size()) + " labels but " +
                        std::to_string(predictions.size()) + " predictions");
    }
    VideoMetrics m;
    m.name = name;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0) {
            continue;
        }
        if (labels[i] >= static_cast<int>(kNumPhases) || predictions[i] < 0 ||
            predictions[i] >= static_cast<int>(kNumPhases)) {
            throw DataError(name + ": phase out of range at frame " + std::to_string(i));
        }
        ++m.confusion[static_cast<std::size_t>(labels[i])][static_cast<std::size_t>(predictions[i])];
        ++m.frames;
    }
    if (m.frames == 0) {
        return m;
    }
    std::size_t correct = 0;
    double precision = 0.0, recall = 0.0;
    std::size_t precision_classes = 0, recall_classes = 0;
    for (std::size_t k = 0; k < kNumPhases; ++k) {
        correct += m.confusion[k][k];
        std::size_t truth = 0, predicted = 0;
        for (std::size_t j = 0; j < kNumPhases; ++j) {
            truth += m.confusion[k][j];
            predicted += m.confusion[j][k];
        }
        if (predicted > 0) {
            precision += static_cast<double>(m.confusion[k][k]) / static_cast<double>(predicted);
            ++precision_classes;
        }
        if (truth > 0) {
            recall += static_cast<double>(m.confusion[k][k]) / static_cast<double>(truth);
            ++recall_classes;
        }
    }
    m.accuracy = static_cast<double>(correct) / static_cast<double>(m.frames);
    m.precision = precision / static_cast<double>(precision_classes);
    m.recall = recall / static_cast<double>(recall_classes);
    return m;
}

MeanStd mean_std(const std::vector<double>& values) {
    MeanStd r;
    if (values.empty()) {
        return r;
    }
    const double n = static_cast<double>(values.size());
    r.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : values) {
        ss += (v - r.mean) * (v - r.mean);
    }
    r.std = std::sqrt(ss / n);
    return r;
}

PhaseMetrics aggregate_metrics(std::vector<VideoMetrics> videos, std::vector<std::string> skipped) {
    PhaseMetrics m;
    m.videos = std::move(videos);
    m.skipped = std::move(skipped);
    std::vector<double> acc, prec, rec;
    for (const auto& v : m.videos) {
        acc.push_back(v.accuracy);
        prec.push_back(v.precision);
        rec.push_back(v.recall);
    }
    m.accuracy = mean_std(acc);
    m.precision = mean_std(prec);
    m.recall = mean_std(rec);
    return m;
}

PhaseMetrics evaluate_phase(const Model& model, const FrameCorpus& corpus) {
    require_head(model);
    std::vector<VideoMetrics> videos;
    std::vector<std::string> skipped;
    for (const Video& video : corpus.videos) {
        std::vector<Tensor> frames;
        std::vector<int> labels;
        for (std::size_t f = 0; f < video.frames.size(); ++f) {
            if (video.label(f) >= 0) {
                frames.push_back(video.frames[f]);
                labels.push_back(video.label(f));
            }
        }
        if (frames.empty()) {
            skipped.push_back(video.name);
            continue;
        }
        videos.push_back(video_metrics(video.name, labels, predict_phases(model, frames)));
    }
    if (videos.empty()) {
        throw DataError("evaluate-phase: corpus " + corpus.root.string() + " has no labelled videos");
    }
    return aggregate_metrics(std::move(videos), std::move(skipped));
}

Report metrics_report(const PhaseMetrics& m) {
    Report r;
    r.set("kind", std::string("eval-phase"));
    r.set_count("videos", m.videos.size());
    r.set_count("skipped_videos", m.skipped.size());
    r.set("accuracy_mean", m.accuracy.mean);
    r.set("accuracy_std", m.accuracy.std);
    r.set("precision_mean", m.precision.mean);
    r.set("precision_std", m.precision.std);
    r.set("recall_mean", m.recall.mean);
    r.set("recall_std", m.recall.std);
    for (const auto& name : m.skipped) {
        r.set("skipped." + name, std::string("no labels"));
    }
    for (const auto& v : m.videos) {
        r.set("video." + v.name + ".frames", std::to_string(v.frames));
        r.set("video." + v.name + ".accuracy", v.accuracy);
        r.set("video." + v.name + ".precision", v.precision);
        r.set("video." + v.name + ".recall", v.recall);
    }
    return r;
}

}  // namespace gsvit
