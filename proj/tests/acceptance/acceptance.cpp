// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "grad_cases.hpp"
#include "gsvit/bench.hpp"
#include "gsvit/checkpoint.hpp"
#include "gsvit/error.hpp"
#include "gsvit/optim.hpp"
#include "gsvit/synth.hpp"
#include "gsvit/text.hpp"
#include "gsvit/training.hpp"
#include "oracles.hpp"
#include "tempdir.hpp"

namespace gsvit {
namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail += (detail.empty() ? "" : "; ") + what;
        }
    }
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

// ---- gradients --------------------------------------------------------------

Outcome gradient_suite() {
    Outcome o;
    const auto t0 = Clock::now();
    double worst = 0.0;
    std::size_t checks = 0;
    const auto ops = testing::op_cases();
    for (std::size_t i = 0; i < ops.size(); ++i) {
        Rng rng(1000 + i);
        for (std::size_t v = 0; v < 3; ++v) {
            const auto r = testing::check_gradients(ops[i].fn, ops[i].make_inputs(rng, v));
            worst = std::max(worst, r.max_relative_error);
            o.require(r.max_relative_error < 1e-4, ops[i].name + " variant " + std::to_string(v));
            ++checks;
        }
    }
    const auto blocks = testing::block_cases();
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        Rng rng(2000 + i);
        for (std::size_t v = 0; v < 3; ++v) {
            const auto r = blocks[i].run(rng, v);
            worst = std::max(worst, r.max_relative_error);
            o.require(r.max_relative_error < 1e-4, blocks[i].name + " variant " + std::to_string(v));
            ++checks;
        }
    }
    const double secs = seconds_since(t0);
    o.require(secs < 60.0, "took " + fmt(secs) + " s");
    o.detail = std::to_string(ops.size()) + " ops + " + std::to_string(blocks.size()) + " blocks, " +
               std::to_string(checks) + " checks, worst rel err " + fmt(worst) + ", " + fmt(secs) + " s" +
               (o.pass ? "" : " (" + o.detail + ")");
    return o;
}

// ---- CGA ----------------------------------------------------------------------

Outcome cga_equivalence() {
    Outcome o;
    Rng rng(3);
    double worst_dense = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 1 + rng.uniform_index(8);
        const std::size_t d = 1 + rng.uniform_index(16);
        CgaLayer<float> cga(d, 1, rng);
        testing::fill_uniform(cga.proj.bias, rng, -0.5, 0.5);
        const Tensor x = testing::random_tensor_of({n, d}, rng, -2, 2);
        const auto& head = cga.heads[0];
        // Dense single-head attention evaluated by the independent oracle.
        const auto q = testing::affine(testing::to_matrix(x), head.query.weight, static_cast<const Tensor*>(nullptr));
        const auto k = testing::affine(testing::to_matrix(x), head.key.weight, static_cast<const Tensor*>(nullptr));
        const auto v = testing::affine(testing::to_matrix(x), head.value.weight, &head.value.bias);
        const auto attn = testing::naive_attention(q, k, v, 1.0 / std::sqrt(double(d)));
        const auto dense = testing::affine(attn, cga.proj.weight, &cga.proj.bias);
        const Tensor out = cga.forward(x);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < d; ++j) {
                worst_dense = std::max(worst_dense, std::abs(double(out[i * d + j]) - dense[i][j]));
            }
        }
    }
    o.require(worst_dense < 1e-6, "h=1 max diff " + fmt(worst_dense));
    double worst_oracle = 0.0;
    std::size_t trials = 0;
    for (std::size_t h : {2u, 4u}) {
        for (int trial = 0; trial < 100; ++trial, ++trials) {
            const std::size_t n = 1 + rng.uniform_index(8);
            const std::size_t d = h * (1 + rng.uniform_index(8));
            CgaLayer<float> cga(d, h, rng);
            for (auto& head : cga.heads) {
                testing::fill_uniform(head.query.weight, rng, -0.5, 0.5);
                testing::fill_uniform(head.key.weight, rng, -0.5, 0.5);
                testing::fill_uniform(head.value.bias, rng, -0.5, 0.5);
            }
            const Tensor x = testing::random_tensor_of({n, d}, rng, -2, 2);
            const auto expected = testing::cga_oracle(cga, testing::to_matrix(x));
            const Tensor out = cga.forward(x);
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < d; ++j) {
                    worst_oracle = std::max(worst_oracle, std::abs(double(out[i * d + j]) - expected[i][j]));
                }
            }
        }
    }
    o.require(worst_oracle < 1e-5, "h in {2,4} max diff " + fmt(worst_oracle));
    o.detail = "h=1 vs dense " + fmt(worst_dense) + " over 100 trials; h in {2,4} vs oracle " + fmt(worst_oracle) +
               " over " + std::to_string(trials) + " trials" + (o.pass ? "" : " (" + o.detail + ")");
    return o;
}

// ---- architecture -------------------------------------------------------------

std::size_t enumerate_head_params(std::size_t latent, const HeadConfig& c) {
    std::size_t total = 0;
    std::size_t in = latent;
    for (std::size_t w : c.hidden) {
        total += in * w + w + 2 * w;  // linear + layer norm
        in = w;
    }
    return total + in * c.classes + c.classes;
}

Outcome architecture_shapes() {
    Outcome o;
    const Config cfg;
    cfg.validate();
    const Model pre(cfg, Assembly::kPretrain, 1);
    const Tensor image = synthetic_images(cfg.encoder, 1, 2);
    const Tensor latent = pre.encoder.encode(ops::reshape(image, {3, 224, 224}));
    o.require(latent.shape() == Shape{cfg.encoder.latent_dim}, "latent shape " + shape_to_string(latent.shape()));
    const Tensor recon = pre.decoder->forward(ops::reshape(latent, {1, cfg.encoder.latent_dim}), false);
    o.require(recon.shape() == Shape{1, 3, 224, 224}, "decoder shape " + shape_to_string(recon.shape()));

    const std::size_t enc = testing::enumerate_encoder_params(cfg.encoder);
    const std::size_t dec = testing::enumerate_decoder_params(cfg.decoder, cfg.encoder.latent_dim);
    const std::size_t head = enumerate_head_params(cfg.encoder.latent_dim, cfg.head);
    const ParamCount pc = count_params(cfg, Assembly::kPretrain);
    const ParamCount cc = count_params(cfg, Assembly::kClassify);
    o.require(pc == ParamCount{enc + dec, enc + dec}, "pretrain count " + std::to_string(pc.total));
    o.require(cc == ParamCount{enc + head, head}, "classify count " + std::to_string(cc.total));
    o.require(pre.parameters().total_count() == enc + dec, "enumerated pretrain parameters");

    const Model cls(cfg, Assembly::kClassify, 1);
    const PhaseHead& h = *cls.head;
    const bool widths = h.hidden.size() == 2 && h.hidden[0].out_features() == 2048 &&
                        h.hidden[1].out_features() == 512 && h.out.out_features() == 7 &&
                        h.hidden[0].in_features() == cfg.encoder.latent_dim;
    o.require(widths, "head widths");
    const Tensor logits = h.forward(ops::reshape(latent, {1, cfg.encoder.latent_dim}));
    o.require(logits.shape() == Shape{1, 7}, "logits shape " + shape_to_string(logits.shape()));
    o.detail = "latent [" + std::to_string(latent.numel()) + "], decoder " + shape_to_string(recon.shape()) +
               ", params encoder " + std::to_string(enc) + " decoder " + std::to_string(dec) + " head " +
               std::to_string(head) + ", head " + std::to_string(h.hidden[0].out_features()) + "/" +
               std::to_string(h.hidden[1].out_features()) + "/" + std::to_string(h.out.out_features()) +
               (o.pass ? "" : " (" + o.detail + ")");
    return o;
}

// ---- pre-training -------------------------------------------------------------

std::optional<Model> pretrained_encoder;

Outcome pretrain_progress() {
    Outcome o;
    const Config cfg = testing::tiny_config();
    const FrameCorpus corpus = make_moving_square_corpus({}, 1);
    const auto t0 = Clock::now();
    std::size_t passed = 0;
    std::string ratios;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        TrainResult r = pretrain(corpus, cfg, 500, seed);
        const double initial = r.report.loss.front();
        const double final_loss = parse_double(*r.report.metric("final_loss"), "final_loss");
        const double ratio = final_loss / initial;
        passed += ratio < 0.5 ? 1 : 0;
        ratios += (ratios.empty() ? "" : " ") + fmt(ratio);
        if (seed == 1) {
            pretrained_encoder.emplace(std::move(r.model));
        }
    }
    const double secs = seconds_since(t0);
    o.require(passed >= 4, std::to_string(passed) + "/5 seeds below 50%");
    o.require(secs < 600.0, "took " + fmt(secs) + " s");
    o.detail = std::to_string(passed) + "/5 seeds below 50% of step-0 MSE (final/initial: " + ratios + "), " +
               fmt(secs) + " s" + (o.pass ? "" : " (" + o.detail + ")");
    return o;
}

// ---- phase head -----------------------------------------------------------------

Outcome phase_head() {
    Outcome o;
    const Config cfg = testing::tiny_config();
    PhaseCorpusOptions train_opts;
    train_opts.frames = 100;
    PhaseCorpusOptions eval_opts = train_opts;
    eval_opts.videos = 3;
    const FrameCorpus train = make_phase_corpus(train_opts, 1);
    const FrameCorpus eval = make_phase_corpus(eval_opts, 2);
    const Model source = pretrained_encoder ? *pretrained_encoder : Model(cfg, Assembly::kPretrain, 1);
    const auto before = source.encoder_parameters().checksum();
    const TrainResult r = train_phase(source, train, cfg, 5, 1);
    const PhaseMetrics m = evaluate_phase(r.model, eval);
    o.require(m.accuracy.mean > 0.90, "eval accuracy " + fmt(m.accuracy.mean));
    const auto after = r.model.encoder_parameters().checksum();
    o.require(after == before, "encoder checksum changed");
    o.require(source.encoder_parameters().checksum() == before, "source encoder changed");

    // Per-step LR must equal 3e-4 * 0.95^epoch exactly.
    const std::size_t per_epoch = r.report.steps() / 5;
    bool exact = r.report.steps() == per_epoch * 5 && per_epoch > 0;
    for (std::size_t s = 0; s < r.report.steps() && exact; ++s) {
        const std::size_t epoch = s / per_epoch;
        double expected = 3e-4;
        for (std::size_t e = 0; e < epoch; ++e) {
            expected *= 0.95;
        }
        exact = rel(r.report.lr[s], expected) < 1e-15;
    }
    o.require(exact, "lr schedule");
    o.require(r.report.lr.front() == 3e-4, "first lr");
    o.detail = "eval accuracy " + fmt(m.accuracy.mean) + " +- " + fmt(m.accuracy.std) + " on " +
               std::to_string(m.videos.size()) + " held-out videos after 5 epochs, encoder checksum " +
               (after == before ? "unchanged" : "changed") + ", lr " + fmt(r.report.lr.front()) + " .. " +
               fmt(r.report.lr.back()) + (o.pass ? "" : " (" + o.detail + ")");
    return o;
}

// ---- frame pairing -------------------------------------------------------------

Outcome frame_pairing() {
    Outcome o;
    Video v;
    v.name = "v";
    v.fps = 25.0;
    v.frames.assign(100, Tensor::zeros({3, 2, 2}));
    const auto pairs = build_frame_pairs(v);
    o.require(pairs.size() == 75, std::to_string(pairs.size()) + " pairs");
    bool gaps = true;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        gaps = gaps && pairs[i].input == i && pairs[i].target == i + 25;
    }
    o.require(gaps, "gap");
    o.detail = std::to_string(pairs.size()) + " pairs, gap " +
               (pairs.empty() ? std::string("-") : std::to_string(pairs.front().target - pairs.front().input)) +
               (o.pass ? "" : " (" + o.detail + ")");
    return o;
}

// ---- determinism and serialization ---------------------------------------------

Outcome determinism() {
    Outcome o;
    const Config cfg = testing::tiny_config();
    MovingSquareOptions sq;
    sq.videos = 2;
    sq.frames = 12;
    const FrameCorpus corpus = make_moving_square_corpus(sq, 5);
    const std::string a = serialize_checkpoint(make_checkpoint(pretrain(corpus, cfg, 4, 11).model));
    const std::string b = serialize_checkpoint(make_checkpoint(pretrain(corpus, cfg, 4, 11).model));
    o.require(a == b, "pretrain checkpoints differ");

    PhaseCorpusOptions ph;
    ph.videos = 2;
    ph.frames = 14;
    const FrameCorpus phases = make_phase_corpus(ph, 5);
    const Model source(cfg, Assembly::kPretrain, 3);
    const std::string c = serialize_checkpoint(make_checkpoint(train_phase(source, phases, cfg, 2, 7).model));
    const std::string d = serialize_checkpoint(make_checkpoint(train_phase(source, phases, cfg, 2, 7).model));
    o.require(c == d, "phase checkpoints differ");

    testing::TempDir dir;
    save_checkpoint(dir / "a.gsvt", parse_checkpoint(a));
    const Model loaded = load_model(dir / "a.gsvt");
    save_checkpoint(dir / "b.gsvt", loaded);
    o.require(testing::read_bytes(dir / "a.gsvt") == testing::read_bytes(dir / "b.gsvt"), "save/load/save differs");
    o.require(testing::read_bytes(dir / "a.gsvt") == a, "file bytes differ from serialization");

    std::size_t detected = 0;
    std::size_t tried = 0;
    Rng rng(17);
    for (int i = 0; i < 20; ++i, ++tried) {
        std::string bad = a;
        const std::size_t at = a.size() - 1 - rng.uniform_index(a.size() / 2);
        bad[at] = static_cast<char>(bad[at] ^ 0x10);
        try {
            parse_checkpoint(bad);
        } catch (const CheckpointError&) {
            ++detected;
        }
    }
    for (std::size_t cut : {std::size_t{3}, a.size() / 2, a.size() - 1}) {
        ++tried;
        try {
            parse_checkpoint(std::string_view(a).substr(0, cut));
        } catch (const CheckpointError&) {
            ++detected;
        }
    }
    o.require(detected == tried, std::to_string(tried - detected) + " corruptions undetected");
    o.detail = "pretrain and phase runs bitwise identical (" + std::to_string(a.size()) + " / " +
               std::to_string(c.size()) + " bytes), save/load/save identical, " + std::to_string(detected) + "/" +
               std::to_string(tried) + " corruptions detected" + (o.pass ? "" : " (" + o.detail + ")");
    return o;
}

// ---- bench -----------------------------------------------------------------------

bool rederives(const Report& report, const std::string& prefix, std::size_t batch, std::string& worst) {
    const auto* series = report.find_series(prefix + "latency_ms");
    if (series == nullptr || series->empty()) {
        worst = "missing " + prefix + "latency_ms";
        return false;
    }
    long double total = 0.0L;
    for (double x : *series) {
        total += x;
    }
    const long double n = static_cast<long double>(series->size());
    const long double mean = total / n;
    long double ss = 0.0L;
    for (double x : *series) {
        ss += (x - mean) * (x - mean);
    }
    const long double std_dev = std::sqrt(ss / n);
    const long double ips = static_cast<long double>(batch) * n / (total / 1000.0L);
    const double err = std::max({rel(report.number(prefix + "mean_ms"), double(mean)),
                                 rel(report.number(prefix + "std_ms"), double(std_dev)),
                                 rel(report.number(prefix + "images_per_second"), double(ips))});
    worst = fmt(err);
    return err < 1e-9;
}

Outcome bench_harness() {
    Outcome o;
    testing::TempDir dir;
    const Config cfg = testing::tiny_config();
    testing::write_text(dir / "tiny.conf", format_config(cfg));
    std::ostringstream out, err;
    const int code = cli::run({"bench", "--config", (dir / "tiny.conf").string(), "--batch", "5", "--threads", "2",
                               "--seed", "3", "--out", (dir / "bench.txt").string()},
                              out, err);
    o.require(code == 0, "bench exit " + std::to_string(code) + ": " + err.str());
    if (code != 0) {
        return o;
    }
    const Report report = load_report(dir / "bench.txt");
    std::string e_run, e_single, e_doubled;
    o.require(rederives(report, "", 5, e_run), "run stats " + e_run);
    o.require(rederives(report, "single.", 1, e_single), "single stats " + e_single);
    o.require(rederives(report, "doubled.", 10, e_doubled), "doubled stats " + e_doubled);
    o.require(out.str().find("latency: ") != std::string::npos && out.str().find(" +- ") != std::string::npos,
              "mean +- std line");

    const Model model(cfg, Assembly::kPretrain, 3);
    const Tensor reference = model.encoder.encode_batch(synthetic_images(cfg.encoder, 5, 3));
    std::size_t matched = 0;
    for (std::size_t w = 0; w < 2; ++w) {
        const std::string key = "worker" + std::to_string(w) + ".";
        const auto begin = static_cast<std::size_t>(report.number(key + "begin"));
        const auto rows = static_cast<std::size_t>(report.number(key + "rows"));
        const std::string expected = std::to_string(latent_checksum(reference, begin, rows));
        matched += *report.field(key + "checksum") == expected ? 1 : 0;
    }
    o.require(matched == 2, "worker slices differ from single-thread encode");
    o.detail = "stats rederive (max rel err run " + e_run + ", single " + e_single + ", doubled " + e_doubled +
               "), 2 workers, " + std::to_string(matched) + "/2 slices identical to single-thread encode" +
               (o.pass ? "" : " (" + o.detail + ")");
    return o;
}

// ---- metrics -------------------------------------------------------------------

Video labelled(const std::string& name, const std::vector<int>& labels) {
    Video v;
    v.name = name;
    v.fps = 1.0;
    v.procedure = "toy";
    v.labels = labels;
    v.frames.assign(labels.size(), Tensor::full({3, 64, 64}, 0.5f));
    return v;
}

Outcome metric_kernels() {
    Outcome o;
    // Classify model that always predicts phase 2.
    Model model(testing::tiny_config(), Assembly::kClassify, 3);
    auto w = model.head->out.weight.mutable_data();
    std::fill(w.begin(), w.end(), 0.0f);
    auto b = model.head->out.bias.mutable_data();
    std::fill(b.begin(), b.end(), 0.0f);
    b[2] = 1.0f;

    FrameCorpus corpus;
    corpus.videos.push_back(labelled("a", {2, 2, 2, 2}));
    corpus.videos.push_back(labelled("b", {0, 1, 2, 3, 4, 5, 6}));
    corpus.videos.push_back(labelled("c", {2, 2, 0, 0, -1}));
    corpus.videos.push_back(labelled("d", {}));
    const PhaseMetrics m = evaluate_phase(model, corpus);

    // Hand-computed. a: all correct -> acc 1, P 1, R 1.
    // b: one hit in seven -> acc 1/7; only phase 2 predicted so P = 1/7; recall over 7 phases = 1/7.
    // c: truth 2,2,0,0 -> acc 1/2; P = 2/4; R = (1 + 0) / 2.
    const std::vector<double> acc{1.0, 1.0 / 7.0, 0.5};
    const std::vector<double> prec{1.0, 1.0 / 7.0, 0.5};
    const std::vector<double> rec{1.0, 1.0 / 7.0, 0.5};
    o.require(m.videos.size() == 3 && m.skipped == std::vector<std::string>{"d"}, "video split");
    if (m.videos.size() == 3) {
        for (std::size_t i = 0; i < 3; ++i) {
            o.require(m.videos[i].accuracy == acc[i], "accuracy " + m.videos[i].name);
            o.require(m.videos[i].precision == prec[i], "precision " + m.videos[i].name);
            o.require(m.videos[i].recall == rec[i], "recall " + m.videos[i].name);
        }
        o.require(m.videos[2].confusion[0][2] == 2 && m.videos[2].confusion[2][2] == 2 && m.videos[2].frames == 4,
                  "confusion c");
        o.require(m.videos[1].confusion[6][2] == 1 && m.videos[1].confusion[6][6] == 0, "confusion b");
    }
    // Per-video mean and population standard deviation.
    const double mean = (1.0 + 1.0 / 7.0 + 0.5) / 3.0;
    const double var = ((1.0 - mean) * (1.0 - mean) + (1.0 / 7.0 - mean) * (1.0 / 7.0 - mean) +
                        (0.5 - mean) * (0.5 - mean)) / 3.0;
    o.require(rel(m.accuracy.mean, mean) < 1e-15, "mean " + fmt(m.accuracy.mean));
    o.require(rel(m.accuracy.std, std::sqrt(var)) < 1e-15, "std " + fmt(m.accuracy.std));

    const VideoMetrics x = video_metrics("x", {0, 0, 1, 1, 2}, {0, 1, 1, 1, 2});
    o.require(x.accuracy == 0.8 && x.precision == (1.0 + 2.0 / 3.0 + 1.0) / 3.0 && x.recall == (0.5 + 1.0 + 1.0) / 3.0,
              "3-class toy");
    o.detail = "per-video accuracy 1, 1/7, 1/2 exact; mean +- std " + fmt(m.accuracy.mean) + " +- " +
               fmt(m.accuracy.std) + " (population, per video); unlabelled video skipped" +
               (o.pass ? "" : " (" + o.detail + ")");
    return o;
}

struct Criterion {
    std::string name;
    std::function<Outcome()> run;
};

}  // namespace
}  // namespace gsvit

int main() {
    using namespace gsvit;
    const std::vector<Criterion> criteria = {
        {"gradient-oracle-suite", gradient_suite},
        {"cga-equivalence", cga_equivalence},
        {"architecture-shapes", architecture_shapes},
        {"pretraining-progress", pretrain_progress},
        {"phase-head-training", phase_head},
        {"frame-pairing", frame_pairing},
        {"determinism-serialization", determinism},
        {"bench-harness", bench_harness},
        {"metric-kernels", metric_kernels},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        failures += o.pass ? 0 : 1;
        std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", c.name.c_str(), o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%zu/%zu criteria passed\n", criteria.size() - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
