#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "gsvit/tensor.hpp"

namespace gsvit {

inline constexpr std::size_t kNumPhases = 7;

// Binary P6 with maxval 255. Pixels map to [0,1] floats in a [3 x H x W] tensor.
Tensor read_ppm(const std::filesystem::path& path);
// Values are clamped to [0,1] and rounded to 8 bits.
void write_ppm(const std::filesystem::path& path, const Tensor& image);

// "f000001.ppm" for index 1.
std::string frame_file_name(std::size_t index);

struct Video {
    std::string name;
    double fps = 0.0;
    std::string procedure;
    std::vector<Tensor> frames;  // frames[i] is file f(i+1)
    std::vector<int> labels;     // per frame, -1 when unlabeled; empty without phases.tsv
    std::filesystem::path dir;

    bool has_labels() const;
    int label(std::size_t frame) const { return labels.empty() ? -1 : labels[frame]; }
    std::filesystem::path frame_path(std::size_t frame) const { return dir / frame_file_name(frame + 1); }
};

struct FrameCorpus {
    std::filesystem::path root;
    std::vector<Video> videos;

    std::size_t frame_count() const;
    // Indices of videos whose procedure tag equals `procedure`.
    std::vector<std::size_t> with_procedure(const std::string& procedure) const;
    // Copy holding only the videos tagged `procedure`.
    FrameCorpus filtered(const std::string& procedure) const;
};

// Reads root/<video>/{meta, f000001.ppm..., phases.tsv}. Any deviation from
// the layout throws DataError naming the offending path.
FrameCorpus load_corpus(const std::filesystem::path& root);
// Writes one video directory under root (meta, frames and phases.tsv when labelled).
void write_video(const std::filesystem::path& root, const Video& video);
void write_corpus(const std::filesystem::path& root, const FrameCorpus& corpus);

// Input/target frame indices (0-based) one second apart.
struct FramePair {
    std::size_t video = 0;
    std::size_t input = 0;
    std::size_t target = 0;
};

// round(fps) with halves rounded up.
std::size_t frame_gap(double fps);
std::vector<FramePair> build_frame_pairs(const Video& video, std::size_t video_index = 0);
std::vector<FramePair> build_frame_pairs(const FrameCorpus& corpus);

}  // namespace gsvit
