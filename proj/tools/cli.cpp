#include "cli.hpp"

#include <CLI11.hpp>

#include <optional>

#include "gsvit/bench.hpp"
#include "gsvit/checkpoint.hpp"
#include "gsvit/config.hpp"
#include "gsvit/error.hpp"
#include "gsvit/synth.hpp"
#include "gsvit/text.hpp"
#include "gsvit/training.hpp"

namespace gsvit::cli {

namespace {

struct Options {
    std::string config;
    std::string corpus;
    std::string checkpoint;
    std::string out;
    std::string report;
    std::string procedure;
    std::uint64_t seed = 0;
    std::optional<std::size_t> steps;
    std::optional<std::size_t> epochs;
    std::optional<std::size_t> batch;
    std::size_t threads = 1;
    std::size_t warmup = 1;
    std::size_t iters = 10;
};

Config resolve_config(const Options& o, const Config& fallback) {
    return o.config.empty() ? fallback : load_config(o.config);
}

// Model from a checkpoint; with --config the checkpoint must match that config.
Model load_checked(const Options& o) {
    const Checkpoint ck = load_checkpoint(o.checkpoint);
    if (o.config.empty()) {
        return model_from_checkpoint(ck);
    }
    Model model(load_config(o.config), parse_assembly(ck.assembly), 0);
    apply_checkpoint(ck, model.parameters());
    return model;
}

void write_outputs(const Options& o, const TrainResult& result, std::ostream& out) {
    save_checkpoint(o.out, result.model);
    out << "checkpoint: " << o.out << "\n";
    if (!o.report.empty()) {
        save_report(o.report, result.report.to_report());
        out << "report: " << o.report << "\n";
    }
    out << "steps: " << result.report.steps() << "\n";
    for (const auto& [k, v] : result.report.metrics) {
        out << k << ": " << v << "\n";
    }
}

int cmd_pretrain(const Options& o, std::ostream& out) {
    Config cfg = resolve_config(o, Config{});
    if (o.batch) {
        cfg.pretrain.batch = *o.batch;
    }
    cfg.validate();
    const FrameCorpus corpus = load_corpus(o.corpus);
    write_outputs(o, pretrain(corpus, cfg, o.steps.value_or(cfg.pretrain.steps), o.seed), out);
    return kOk;
}

int cmd_finetune(const Options& o, std::ostream& out) {
    const Model model = load_checked(o);
    Config cfg = model.config;
    if (o.batch) {
        cfg.finetune.batch = *o.batch;
    }
    cfg.validate();
    const FrameCorpus corpus = load_corpus(o.corpus);
    write_outputs(o, finetune(model, corpus, o.procedure, cfg, o.seed), out);
    return kOk;
}

int cmd_train_phase(const Options& o, std::ostream& out) {
    const Model source = load_checked(o);
    Config cfg = source.config;
    if (o.batch) {
        cfg.train.batch = *o.batch;
    }
    cfg.validate();
    const FrameCorpus corpus = load_corpus(o.corpus);
    write_outputs(o, train_phase(source, corpus, cfg, o.epochs.value_or(cfg.train.epochs), o.seed), out);
    return kOk;
}

int cmd_eval_phase(const Options& o, std::ostream& out, std::ostream& err) {
    const Model model = load_checked(o);
    const FrameCorpus corpus = load_corpus(o.corpus);
    const PhaseMetrics m = evaluate_phase(model, corpus);
    for (const auto& name : m.skipped) {
        err << "warning: video " << name << " has no phase labels; skipped\n";
    }
    const Report report = metrics_report(m);
    if (!o.out.empty()) {
        save_report(o.out, report);
    }
    out << "videos: " << m.videos.size() << " (skipped " << m.skipped.size() << ")\n";
    out << "accuracy: " << format_double(m.accuracy.mean) << " +- " << format_double(m.accuracy.std) << "\n";
    out << "precision: " << format_double(m.precision.mean) << " +- " << format_double(m.precision.std) << "\n";
    out << "recall: " << format_double(m.recall.mean) << " +- " << format_double(m.recall.std) << "\n";
    return kOk;
}

int cmd_bench(const Options& o, std::ostream& out) {
    BenchOptions bo;
    bo.batch = o.batch.value_or(1);
    bo.threads = o.threads;
    bo.warmup = o.warmup;
    bo.iters = o.iters;
    bo.seed = o.seed;
    bo.validate();
    const Model model = o.checkpoint.empty() ? Model(resolve_config(o, Config{}), Assembly::kPretrain, o.seed)
                                             : load_checked(o);
    const BenchReport report = bench_inference(model, bo);
    if (!o.out.empty()) {
        save_report(o.out, report.to_report());
    }
    const BenchRun& r = report.run;
    out << "batch " << r.batch << ", threads " << r.threads << ", " << r.latency_ms.size() << " iterations\n";
    out << "latency: " << format_double(r.mean_ms) << " +- " << format_double(r.std_ms) << " ms\n";
    out << "throughput: " << format_double(r.images_per_second) << " images/s\n";
    if (report.single) {
        out << "single image: " << format_double(report.single->mean_ms) << " ms (per-image in batch "
            << format_double(report.per_image_ms()) << " ms)\n";
    }
    if (report.doubled) {
        out << "batch " << report.doubled->batch << ": " << format_double(report.doubled->images_per_second)
            << " images/s\n";
    }
    out << "reference (published GPU figures, not comparable): " << format_double(kReferenceLatencyMs) << " +- "
        << format_double(kReferenceLatencyStdMs) << " ms, " << format_double(kReferenceImagesPerSecond)
        << " images/s\n";
    return kOk;
}

int cmd_inspect(const Options& o, std::ostream& out) {
    const Checkpoint ck = load_checkpoint(o.checkpoint);
    out << "assembly: " << (ck.assembly.empty() ? "(none)" : ck.assembly) << "\n";
    out << "tensors: " << ck.tensors.size() << "\n";
    for (const auto& t : ck.tensors) {
        out << "  " << t.name << " " << shape_to_string(t.shape) << (t.buffer ? " buffer" : "")
            << (t.tunable ? " tunable" : (t.buffer ? "" : " frozen")) << "\n";
    }
    out << "parameters: " << ck.total_count() << " total, " << ck.tunable_count() << " tunable\n";
    return kOk;
}

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
    try {
        return fn();
    } catch (const std::exception& e) {
        const int code = exit_code_for(e);
        err << (code == kNumeric ? "numeric failure: " : "error: ") << e.what() << "\n";
        return code;
    }
}

int parse(CLI::App& app, const std::vector<std::string>& args, std::ostream& out, std::ostream& err, bool& done) {
    std::vector<std::string> storage{app.get_name()};
    storage.insert(storage.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& s : storage) {
        argv.push_back(s.c_str());
    }
    done = true;
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return kUsage;
    }
    done = false;
    return kOk;
}

}  // namespace

int exit_code_for(const std::exception& error) {
    if (dynamic_cast<const ConfigError*>(&error) != nullptr) {
        return kUsage;
    }
    if (dynamic_cast<const NumericError*>(&error) != nullptr) {
        return kNumeric;
    }
    return kData;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Surgical video encoder: pre-training, phase recognition and inference benchmarks", "gsvit"};
    app.require_subcommand(1);
    Options o;

    auto* pre = app.add_subcommand("pretrain", "Next-frame pre-training of encoder and decoder");
    pre->add_option("--config", o.config, "Config file (defaults when omitted)")->check(CLI::ExistingFile);
    pre->add_option("--corpus", o.corpus, "Frame corpus root")->required();
    pre->add_option("--out", o.out, "Checkpoint to write")->required();
    pre->add_option("--report", o.report, "Training report to write");
    pre->add_option("--seed", o.seed, "Random seed");
    pre->add_option("--steps", o.steps, "Optimizer steps (pretrain.steps when omitted)");
    pre->add_option("--batch", o.batch, "Batch size");

    auto* fine = app.add_subcommand("finetune", "One pass of next-frame training over one procedure");
    fine->add_option("--checkpoint", o.checkpoint, "Pre-trained checkpoint")->required();
    fine->add_option("--config", o.config, "Config the checkpoint must match");
    fine->add_option("--corpus", o.corpus, "Frame corpus root")->required();
    fine->add_option("--procedure", o.procedure, "Procedure tag to keep")->required();
    fine->add_option("--out", o.out, "Checkpoint to write")->required();
    fine->add_option("--report", o.report, "Training report to write");
    fine->add_option("--seed", o.seed, "Random seed");
    fine->add_option("--batch", o.batch, "Batch size");

    auto* phase = app.add_subcommand("train-phase", "Train the phase head on a frozen encoder");
    phase->add_option("--checkpoint", o.checkpoint, "Checkpoint providing the encoder")->required();
    phase->add_option("--config", o.config, "Config the checkpoint must match");
    phase->add_option("--corpus", o.corpus, "Labelled frame corpus root")->required();
    phase->add_option("--out", o.out, "Checkpoint to write")->required();
    phase->add_option("--report", o.report, "Training report to write");
    phase->add_option("--seed", o.seed, "Random seed");
    phase->add_option("--epochs", o.epochs, "Epochs (train.epochs when omitted)");
    phase->add_option("--batch", o.batch, "Batch size");

    auto* eval = app.add_subcommand("eval-phase", "Per-video phase accuracy, precision and recall");
    eval->add_option("--checkpoint", o.checkpoint, "Classify checkpoint")->required();
    eval->add_option("--config", o.config, "Config the checkpoint must match");
    eval->add_option("--corpus", o.corpus, "Labelled frame corpus root")->required();
    eval->add_option("--out", o.out, "Metrics report to write");

    auto* bench = app.add_subcommand("bench", "Encoder inference latency and throughput");
    bench->add_option("--checkpoint", o.checkpoint, "Checkpoint (random init when omitted)");
    bench->add_option("--config", o.config, "Config file");
    bench->add_option("--batch", o.batch, "Images per forward call");
    bench->add_option("--threads", o.threads, "Worker threads splitting the batch");
    bench->add_option("--warmup", o.warmup, "Untimed warmup iterations");
    bench->add_option("--iters", o.iters, "Timed iterations");
    bench->add_option("--seed", o.seed, "Input and init seed");
    bench->add_option("--out", o.out, "Bench report to write");

    auto* inspect = app.add_subcommand("inspect", "Print a checkpoint manifest");
    inspect->add_option("--checkpoint", o.checkpoint, "Checkpoint to read")->required();

    bool done = false;
    const int code = parse(app, args, out, err, done);
    if (done) {
        return code;
    }
    return guarded(err, [&] {
        if (pre->parsed()) {
            return cmd_pretrain(o, out);
        }
        if (fine->parsed()) {
            return cmd_finetune(o, out);
        }
        if (phase->parsed()) {
            return cmd_train_phase(o, out);
        }
        if (eval->parsed()) {
            return cmd_eval_phase(o, out, err);
        }
        if (bench->parsed()) {
            return cmd_bench(o, out);
        }
        return cmd_inspect(o, out);
    });
}

int run_synth(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Write synthetic frame corpora", "gsvit-synth"};
    app.require_subcommand(1);
    std::string dir;
    std::uint64_t seed = 0;
    MovingSquareOptions sq;
    PhaseCorpusOptions ph;

    auto* square = app.add_subcommand("moving-square", "Bright square translating over a dark background");
    square->add_option("--out", dir, "Corpus root to create")->required();
    square->add_option("--seed", seed, "Random seed");
    square->add_option("--videos", sq.videos, "Number of videos");
    square->add_option("--frames", sq.frames, "Frames per video");
    square->add_option("--fps", sq.fps, "Frame rate written to meta");
    square->add_option("--size", sq.image_size, "Image side in pixels");
    square->add_option("--square", sq.square, "Square side in pixels");
    square->add_option("--speed", sq.speed, "Pixels moved per frame");
    square->add_option("--procedure", sq.procedure, "Procedure tag");

    auto* phases = app.add_subcommand("phases", "Seven-phase corpus, one dominant color per phase");
    phases->add_option("--out", dir, "Corpus root to create")->required();
    phases->add_option("--seed", seed, "Random seed");
    phases->add_option("--videos", ph.videos, "Number of videos");
    phases->add_option("--frames", ph.frames, "Frames per video");
    phases->add_option("--fps", ph.fps, "Frame rate written to meta");
    phases->add_option("--size", ph.image_size, "Image side in pixels");
    phases->add_option("--noise", ph.noise, "Uniform pixel noise amplitude");
    phases->add_option("--procedure", ph.procedure, "Procedure tag");

    bool done = false;
    const int code = parse(app, args, out, err, done);
    if (done) {
        return code;
    }
    return guarded(err, [&] {
        const FrameCorpus corpus = square->parsed() ? make_moving_square_corpus(sq, seed) : make_phase_corpus(ph, seed);
        write_corpus(dir, corpus);
        out << "wrote " << corpus.videos.size() << " videos, " << corpus.frame_count() << " frames to " << dir << "\n";
        return static_cast<int>(kOk);
    });
}

}  // namespace gsvit::cli
