#include "gsvit/synth.hpp"

#include <algorithm>

#include "gsvit/error.hpp"
#include "gsvit/rng.hpp"

namespace gsvit {

namespace {

std::string video_name(std::size_t i) {
    std::string s = std::to_string(i);
    return "video" + std::string(s.size() < 3 ? 3 - s.size() : 0, '0') + s;
}

void fill_rect(std::vector<float>& px, std::size_t size, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w,
               const std::array<float, 3>& color) {
    const std::size_t plane = size * size;
    for (std::size_t y = y0; y < std::min(size, y0 + h); ++y) {
        for (std::size_t x = x0; x < std::min(size, x0 + w); ++x) {
            for (std::size_t c = 0; c < 3; ++c) {
                px[c * plane + y * size + x] = color[c];
            }
        }
    }
}

// Position after `steps` moves of `speed` px, reflecting at 0 and `range`.
std::size_t bounce(std::size_t start, long dir, std::size_t steps, std::size_t speed, std::size_t range) {
    if (range == 0) {
        return 0;
    }
    const std::size_t period = 2 * range;
    const long travelled = static_cast<long>(steps * speed) * dir;
    long pos = (static_cast<long>(start) + travelled) % static_cast<long>(period);
    if (pos < 0) {
        pos += static_cast<long>(period);
    }
    return pos <= static_cast<long>(range) ? static_cast<std::size_t>(pos) : period - static_cast<std::size_t>(pos);
}

}  // namespace

FrameCorpus make_moving_square_corpus(const MovingSquareOptions& o, std::uint64_t seed) {
    if (o.square == 0 || o.square > o.image_size || o.frames == 0 || o.fps <= 0.0) {
        throw ConfigError("moving square: invalid options");
    }
    Rng rng = Rng::derive(seed, "synth.square");
    FrameCorpus corpus;
    const std::size_t range = o.image_size - o.square;
    const std::array<float, 3> background{0.1f, 0.1f, 0.12f};
    for (std::size_t v = 0; v < o.videos; ++v) {
        Video video;
        video.name = video_name(v + 1);
        video.fps = o.fps;
        video.procedure = o.procedure;
        const std::size_t y0 = rng.uniform_index(range + 1), x0 = rng.uniform_index(range + 1);
        const long dy = rng.bernoulli(0.5) ? 1 : -1, dx = rng.bernoulli(0.5) ? 1 : -1;
        const std::array<float, 3> color{static_cast<float>(rng.uniform(0.6, 1.0)),
                                         static_cast<float>(rng.uniform(0.6, 1.0)),
                                         static_cast<float>(rng.uniform(0.6, 1.0))};
        for (std::size_t f = 0; f < o.frames; ++f) {
            std::vector<float> px(3 * o.image_size * o.image_size);
            for (std::size_t c = 0; c < 3; ++c) {
                std::fill_n(px.begin() + static_cast<long>(c * o.image_size * o.image_size),
                            o.image_size * o.image_size, background[c]);
            }
            fill_rect(px, o.image_size, bounce(y0, dy, f, o.speed, range), bounce(x0, dx, f, o.speed, range),
                      o.square, o.square, color);
            video.frames.emplace_back(Shape{3, o.image_size, o.image_size}, std::move(px));
        }
        corpus.videos.push_back(std::move(video));
    }
    return corpus;
}

const std::array<std::array<float, 3>, kNumPhases>& phase_palette() {
    static const std::array<std::array<float, 3>, kNumPhases> palette{{
        {0.85f, 0.15f, 0.15f},
        {0.15f, 0.75f, 0.20f},
        {0.15f, 0.25f, 0.85f},
        {0.85f, 0.80f, 0.15f},
        {0.15f, 0.80f, 0.80f},
        {0.80f, 0.20f, 0.80f},
        {0.50f, 0.50f, 0.50f},
    }};
    return palette;
}

FrameCorpus make_phase_corpus(const PhaseCorpusOptions& o, std::uint64_t seed) {
    if (o.frames < kNumPhases || o.fps <= 0.0) {
        throw ConfigError("phase corpus: need at least " + std::to_string(kNumPhases) + " frames per video");
    }
    Rng rng = Rng::derive(seed, "synth.phase");
    const auto& palette = phase_palette();
    const std::size_t n = o.image_size, plane = n * n;
    FrameCorpus corpus;
    for (std::size_t v = 0; v < o.videos; ++v) {
        Video video;
        video.name = video_name(v + 1);
        video.fps = o.fps;
        video.procedure = o.procedure;
        // Segment boundaries: one frame per phase guaranteed, the rest spread at random.
        std::vector<std::size_t> lengths(kNumPhases, 1);
        for (std::size_t f = kNumPhases; f < o.frames; ++f) {
            ++lengths[rng.uniform_index(kNumPhases)];
        }
        for (std::size_t p = 0; p < kNumPhases; ++p) {
            for (std::size_t k = 0; k < lengths[p]; ++k) {
                std::vector<float> px(3 * plane);
                for (std::size_t c = 0; c < 3; ++c) {
                    std::fill_n(px.begin() + static_cast<long>(c * plane), plane, palette[p][c]);
                }
                const std::size_t patches = 1 + rng.uniform_index(3);
                for (std::size_t q = 0; q < patches; ++q) {
                    const std::size_t h = 4 + rng.uniform_index(n / 4), w = 4 + rng.uniform_index(n / 4);
                    const float shade = static_cast<float>(rng.uniform(0.0, 1.0));
                    fill_rect(px, n, rng.uniform_index(n - h), rng.uniform_index(n - w), h, w, {shade, shade, shade});
                }
                for (auto& x : px) {
                    x = std::clamp(x + static_cast<float>(rng.uniform(-o.noise, o.noise)), 0.0f, 1.0f);
                }
                video.frames.emplace_back(Shape{3, n, n}, std::move(px));
                video.labels.push_back(static_cast<int>(p));
            }
        }
        corpus.videos.push_back(std::move(video));
    }
    return corpus;
}

}  // namespace gsvit
