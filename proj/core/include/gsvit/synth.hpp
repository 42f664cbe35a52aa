#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>

#include "gsvit/corpus.hpp"

namespace gsvit {

// Bright square translating `speed` px per frame over a dark background,
// bouncing off the borders. Start position, direction and color come from seed.
struct MovingSquareOptions {
    std::size_t videos = 4;
    std::size_t frames = 40;
    double fps = 5.0;
    std::size_t image_size = 64;
    std::size_t square = 16;
    std::size_t speed = 2;
    std::string procedure = "synthetic";
};

FrameCorpus make_moving_square_corpus(const MovingSquareOptions& options, std::uint64_t seed);

// Phase p colors most of the frame with palette[p]; a few random patches and
// pixel noise make frames within a phase differ. Each video walks through the
// phases in order with random segment lengths.
struct PhaseCorpusOptions {
    std::size_t videos = 7;
    std::size_t frames = 140;
    double fps = 1.0;
    std::size_t image_size = 64;
    double noise = 0.05;
    std::string procedure = "cholecystectomy";
};

const std::array<std::array<float, 3>, kNumPhases>& phase_palette();

FrameCorpus make_phase_corpus(const PhaseCorpusOptions& options, std::uint64_t seed);

}  // namespace gsvit
