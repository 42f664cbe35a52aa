#include <benchmark/benchmark.h>

#include "gsvit/bench.hpp"
#include "gsvit/checkpoint.hpp"
#include "gsvit/encoder.hpp"
#include "gsvit/model.hpp"
#include "gsvit/ops.hpp"
#include "gsvit/rng.hpp"

namespace gsvit {
namespace {

Tensor random_tensor(Shape shape, Rng& rng) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (auto& v : t.mutable_data()) {
        v = static_cast<float>(rng.uniform(-1.0, 1.0));
    }
    return t;
}

Config small_config() {
    Config c;
    c.encoder.image_size = 64;
    c.encoder.patch_size = 8;
    c.encoder.widths = {32, 48};
    c.encoder.depths = {1, 1};
    c.encoder.heads = {2, 2};
    c.encoder.mlp_ratios = {2.0, 2.0};
    c.encoder.latent_dim = 48;
    c.decoder.seed_size = 4;
    c.decoder.channels = {64, 32, 16, 8, 3};
    c.decoder.kernels = {4, 4, 4, 4};
    c.decoder.strides = {2, 2, 2, 2};
    c.decoder.pads = {1, 1, 1, 1};
    c.decoder.se_scales = {16, 32};
    c.decoder.output_size = 64;
    return c;
}

void BM_Matmul(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Rng rng(1);
    const Tensor a = random_tensor({n, n}, rng);
    const Tensor b = random_tensor({n, n}, rng);
    for (auto _ : state) {
        benchmark::DoNotOptimize(ops::matmul(a, b));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(196)->Arg(384);

void BM_ConvTransposed(benchmark::State& state) {
    const auto res = static_cast<std::size_t>(state.range(0));
    Rng rng(2);
    const Tensor x = random_tensor({1, 32, res, res}, rng);
    const Tensor w = random_tensor({32, 16, 4, 4}, rng);
    const Tensor bias = random_tensor({16}, rng);
    for (auto _ : state) {
        benchmark::DoNotOptimize(ops::conv2d_transposed(x, w, bias, {2, 1}));
    }
}
BENCHMARK(BM_ConvTransposed)->Arg(14)->Arg(28);

void BM_CgaForward(benchmark::State& state) {
    const auto heads = static_cast<std::size_t>(state.range(0));
    Rng rng(3);
    const CgaLayer<float> cga(128, heads, rng);
    const Tensor x = random_tensor({197, 128}, rng);
    for (auto _ : state) {
        benchmark::DoNotOptimize(cga.forward(x));
    }
}
BENCHMARK(BM_CgaForward)->Arg(1)->Arg(2)->Arg(4);

void BM_EncodeSmall(benchmark::State& state) {
    const auto batch = static_cast<std::size_t>(state.range(0));
    const Config cfg = small_config();
    const Model model(cfg, Assembly::kPretrain, 1);
    const Tensor images = synthetic_images(cfg.encoder, batch, 1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(model.encoder.encode_batch(images));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch));
}
BENCHMARK(BM_EncodeSmall)->Arg(1)->Arg(8);

void BM_EncodeDefault(benchmark::State& state) {
    const Config cfg;
    const Model model(cfg, Assembly::kPretrain, 1);
    const Tensor images = synthetic_images(cfg.encoder, 1, 1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(model.encoder.encode_batch(images));
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_EncodeDefault)->Unit(benchmark::kMillisecond);

void BM_CheckpointRoundTrip(benchmark::State& state) {
    const Checkpoint ck = make_checkpoint(Model(small_config(), Assembly::kPretrain, 1));
    for (auto _ : state) {
        benchmark::DoNotOptimize(parse_checkpoint(serialize_checkpoint(ck)));
    }
}
BENCHMARK(BM_CheckpointRoundTrip)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace gsvit

BENCHMARK_MAIN();
