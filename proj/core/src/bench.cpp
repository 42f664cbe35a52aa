#include "gsvit/bench.hpp"

#include <algorithm>
#include <barrier>
#include <chrono>
#include <cmath>
#include <numeric>
#include <thread>

#include "gsvit/error.hpp"
#include "gsvit/ops.hpp"
#include "gsvit/rng.hpp"

namespace gsvit {

void BenchOptions::validate() const {
    if (batch == 0) {
        throw ConfigError("bench: --batch must be at least 1");
    }
    if (warmup < 1) {
        throw ConfigError("bench: warmup must be at least 1");
    }
    if (iters < 10) {
        throw ConfigError("bench: iterations must be at least 10");
    }
    if (threads == 0) {
        throw ConfigError("bench: --threads must be at least 1");
    }
    if (threads > batch) {
        throw ConfigError("bench: " + std::to_string(threads) + " threads need a batch of at least that size");
    }
}

void summarize(BenchRun& run) {
    const double n = static_cast<double>(run.latency_ms.size());
    if (run.latency_ms.empty()) {
        run.mean_ms = run.std_ms = run.total_ms = run.images_per_second = 0.0;
        return;
    }
    run.total_ms = std::accumulate(run.latency_ms.begin(), run.latency_ms.end(), 0.0);
    run.mean_ms = run.total_ms / n;
    double ss = 0.0;
    for (double x : run.latency_ms) {
        ss += (x - run.mean_ms) * (x - run.mean_ms);
    }
    run.std_ms = std::sqrt(ss / n);
    run.images_per_second = static_cast<double>(run.batch) * n / (run.total_ms / 1000.0);
}

Tensor synthetic_images(const ModelConfig& config, std::size_t batch, std::uint64_t seed) {
    Rng rng = Rng::derive(seed, "bench.input");
    const Shape shape{batch, config.in_channels, config.image_size, config.image_size};
    std::vector<float> data(shape_numel(shape));
    for (auto& x : data) {
        x = static_cast<float>(rng.uniform());
    }
    return Tensor(shape, std::move(data));
}

std::uint64_t latent_checksum(const Tensor& latents, std::size_t begin, std::size_t rows) {
    const std::size_t width = latents.numel() / latents.dim(0);
    return fnv1a64(latents.data().data() + begin * width, rows * width * sizeof(float));
}

BenchRun time_encoder(const Model& model, const Tensor& images, std::size_t warmup, std::size_t iters,
                      std::size_t threads) {
    using Clock = std::chrono::steady_clock;
    BenchRun run;
    run.batch = images.dim(0);
    run.threads = threads;
    std::vector<Tensor> slices;
    for (std::size_t w = 0, begin = 0; w < threads; ++w) {
        const std::size_t rows = run.batch / threads + (w < run.batch % threads ? 1 : 0);
        run.slice_begin.push_back(begin);
        run.slice_rows.push_back(rows);
        slices.push_back(ops::slice(images, 0, begin, rows).detach());
        begin += rows;
    }
    run.worker_checksums.assign(threads, 0);

    const std::size_t total = warmup + iters;
    std::vector<std::uint64_t> iteration_sums(threads, 0);
    std::vector<char> stable(threads, 1);
    std::barrier start(static_cast<std::ptrdiff_t>(threads + 1));
    std::barrier done(static_cast<std::ptrdiff_t>(threads + 1));

    auto work = [&](std::size_t w) {
        for (std::size_t it = 0; it < total; ++it) {
            start.arrive_and_wait();
            const Tensor latents = model.encoder.encode_batch(slices[w]);
            const std::uint64_t sum = latent_checksum(latents, 0, run.slice_rows[w]);
            if (it == 0) {
                iteration_sums[w] = sum;
            } else if (sum != iteration_sums[w]) {
                stable[w] = 0;
            }
            done.arrive_and_wait();
        }
    };
    std::vector<std::jthread> workers;
    for (std::size_t w = 0; w < threads; ++w) {
        workers.emplace_back(work, w);
    }
    for (std::size_t it = 0; it < total; ++it) {
        const auto t0 = Clock::now();
        start.arrive_and_wait();
        done.arrive_and_wait();
        const double ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
        if (it >= warmup) {
            run.latency_ms.push_back(ms);
        }
    }
    workers.clear();
    run.worker_checksums = iteration_sums;
    run.stable = std::all_of(stable.begin(), stable.end(), [](char s) { return s != 0; });
    summarize(run);
    return run;
}

BenchReport bench_inference(const Model& model, const BenchOptions& options) {
    options.validate();
    BenchReport report;
    report.options = options;
    report.config_text = format_config(model.config);
    const ModelConfig& cfg = model.config.encoder;
    report.run = time_encoder(model, synthetic_images(cfg, options.batch, options.seed), options.warmup,
                              options.iters, options.threads);
    if (options.paired) {
        report.doubled = time_encoder(model, synthetic_images(cfg, 2 * options.batch, options.seed), options.warmup,
                                      options.iters, options.threads);
        report.single = time_encoder(model, synthetic_images(cfg, 1, options.seed), options.warmup, options.iters, 1);
    }
    return report;
}

namespace {

void put_run(Report& r, const std::string& prefix, const BenchRun& run) {
    r.set_count(prefix + "batch", run.batch);
    r.set_count(prefix + "threads", run.threads);
    r.set(prefix + "mean_ms", run.mean_ms);
    r.set(prefix + "std_ms", run.std_ms);
    r.set(prefix + "total_ms", run.total_ms);
    r.set(prefix + "images_per_second", run.images_per_second);
    r.set(prefix + "stable", std::string(run.stable ? "true" : "false"));
    for (std::size_t w = 0; w < run.worker_checksums.size(); ++w) {
        const std::string p = prefix + "worker" + std::to_string(w) + ".";
        r.set_count(p + "begin", run.slice_begin[w]);
        r.set_count(p + "rows", run.slice_rows[w]);
        r.set(p + "checksum", std::to_string(run.worker_checksums[w]));
    }
}

}  // namespace

Report BenchReport::to_report() const {
    Report r;
    r.set("kind", std::string("bench"));
    r.set_count("batch", options.batch);
    r.set_count("warmup", options.warmup);
    r.set_count("iterations", options.iters);
    r.set_count("threads", options.threads);
    r.set("seed", std::to_string(options.seed));
    put_run(r, "", run);
    r.set("per_image_ms", per_image_ms());
    if (single) {
        put_run(r, "single.", *single);
        r.set("single_image_gap_ms", std::abs(single->mean_ms - per_image_ms()));
    }
    if (doubled) {
        put_run(r, "doubled.", *doubled);
        r.set("doubled.throughput_ratio", doubled->images_per_second / run.images_per_second);
    }
    r.set("reference.latency_ms", kReferenceLatencyMs);
    r.set("reference.latency_std_ms", kReferenceLatencyStdMs);
    r.set("reference.images_per_second", kReferenceImagesPerSecond);
    r.add_snapshot("config", config_text);
    r.add_series("latency_ms", run.latency_ms);
    if (single) {
        r.add_series("single.latency_ms", single->latency_ms);
    }
    if (doubled) {
        r.add_series("doubled.latency_ms", doubled->latency_ms);
    }
    return r;
}

}  // namespace gsvit
