#include "gsvit/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

#include "gsvit/error.hpp"
#include "gsvit/text.hpp"

namespace fs = std::filesystem;

namespace gsvit {

namespace {

[[noreturn]] void data_error(const fs::path& path, const std::string& message) {
    throw DataError(path.string() + ": " + message);
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        data_error(path, "cannot open");
    }
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// Next whitespace-delimited header token, skipping '#' comments.
std::string ppm_token(const std::string& bytes, std::size_t& pos) {
    while (pos < bytes.size()) {
        if (bytes[pos] == '#') {
            while (pos < bytes.size() && bytes[pos] != '\n') {
                ++pos;
            }
        } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
            ++pos;
        } else {
            break;
        }
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos])) && bytes[pos] != '#') {
        ++pos;
    }
    return bytes.substr(start, pos - start);
}

std::size_t header_number(const std::string& token, const fs::path& path, const char* what) {
    std::size_t value = 0;
    if (token.empty() || !std::all_of(token.begin(), token.end(), [](char c) { return c >= '0' && c <= '9'; }) ||
        token.size() > 9 || (value = std::stoul(token)) == 0) {
        data_error(path, std::string("malformed PPM ") + what + " '" + token + "'");
    }
    return value;
}

// Parses "f000123.ppm" into 123; returns 0 for other names.
std::size_t frame_index(const std::string& name) {
    if (name.size() != 11 || name[0] != 'f' || name.substr(7) != ".ppm") {
        return 0;
    }
    std::size_t value = 0;
    for (std::size_t i = 1; i < 7; ++i) {
        if (name[i] < '0' || name[i] > '9') {
            return 0;
        }
        value = value * 10 + static_cast<std::size_t>(name[i] - '0');
    }
    return value;
}

void read_meta(const fs::path& path, Video& video) {
    bool has_fps = false;
    bool has_procedure = false;
    std::vector<KeyValue> entries;
    try {
        entries = parse_key_values(read_file(path), path.string());
    } catch (const ConfigError& e) {
        throw DataError(std::string("malformed meta: ") + e.what());
    }
    for (const auto& kv : entries) {
        if (kv.key == "fps") {
            try {
                video.fps = parse_double(kv.value, "fps");
            } catch (const ConfigError& e) {
                data_error(path, std::string("malformed meta: ") + e.what());
            }
            if (!(video.fps > 0.0)) {
                data_error(path, "malformed meta: fps must be positive");
            }
            has_fps = true;
        } else if (kv.key == "procedure") {
            video.procedure = kv.value;
            if (video.procedure.empty()) {
                data_error(path, "malformed meta: empty procedure tag");
            }
            has_procedure = true;
        } else {
            data_error(path, "malformed meta: unknown key '" + kv.key + "'");
        }
    }
    if (!has_fps) {
        data_error(path, "malformed meta: missing fps");
    }
    if (!has_procedure) {
        data_error(path, "malformed meta: missing procedure");
    }
}

void read_phases(const fs::path& path, Video& video) {
    video.labels.assign(video.frames.size(), -1);
    std::istringstream in(read_file(path));
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (trim(line).empty()) {
            continue;
        }
        const auto tab = line.find('\t');
        const std::string where = path.string() + ":" + std::to_string(line_no);
        if (tab == std::string::npos) {
            throw DataError(where + ": expected 'frame_index<TAB>phase_id'");
        }
        std::uint64_t index = 0;
        std::uint64_t phase = 0;
        try {
            index = parse_u64(line.substr(0, tab), "frame_index");
            phase = parse_u64(line.substr(tab + 1), "phase_id");
        } catch (const ConfigError& e) {
            throw DataError(where + ": " + e.what());
        }
        if (index == 0 || index > video.frames.size()) {
            throw DataError(where + ": frame index " + std::to_string(index) + " outside 1.." +
                            std::to_string(video.frames.size()));
        }
        const fs::path frame = video.frame_path(index - 1);
        if (phase >= kNumPhases) {
            throw DataError(frame.string() + ": phase id " + std::to_string(phase) + " outside [0," +
                            std::to_string(kNumPhases) + ")");
        }
        if (video.labels[index - 1] >= 0) {
            throw DataError(where + ": duplicate label for " + frame.filename().string());
        }
        video.labels[index - 1] = static_cast<int>(phase);
    }
}

Video read_video(const fs::path& dir) {
    Video video;
    video.dir = dir;
    video.name = dir.filename().string();
    std::vector<std::size_t> indices;
    bool has_meta = false;
    bool has_phases = false;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name == "meta" && entry.is_regular_file()) {
            has_meta = true;
        } else if (name == "phases.tsv" && entry.is_regular_file()) {
            has_phases = true;
        } else if (const std::size_t index = frame_index(name); index > 0 && entry.is_regular_file()) {
            indices.push_back(index);
        } else {
            data_error(entry.path(), "unexpected entry in video directory");
        }
    }
    if (!has_meta) {
        data_error(dir / "meta", "missing meta");
    }
    read_meta(dir / "meta", video);
    std::sort(indices.begin(), indices.end());
    if (indices.empty()) {
        data_error(dir, "video has no frames");
    }
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] != i + 1) {
            data_error(dir, "missing " + frame_file_name(i + 1));
        }
    }
    for (std::size_t i = 0; i < indices.size(); ++i) {
        video.frames.push_back(read_ppm(video.frame_path(i)));
        if (video.frames.back().shape() != video.frames.front().shape()) {
            data_error(video.frame_path(i), "frame size " + shape_to_string(video.frames.back().shape()) +
                                                " differs from " + shape_to_string(video.frames.front().shape()));
        }
    }
    if (has_phases) {
        read_phases(dir / "phases.tsv", video);
    }
    return video;
}

}  // namespace

Tensor read_ppm(const fs::path& path) {
    const std::string bytes = read_file(path);
    std::size_t pos = 0;
    if (ppm_token(bytes, pos) != "P6") {
        data_error(path, "not a binary P6 PPM");
    }
    const std::size_t width = header_number(ppm_token(bytes, pos), path, "width");
    const std::size_t height = header_number(ppm_token(bytes, pos), path, "height");
    const std::string maxval = ppm_token(bytes, pos);
    if (maxval != "255") {
        data_error(path, "unsupported PPM maxval " + maxval + " (only 8-bit, maxval 255)");
    }
    if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        data_error(path, "truncated PPM header");
    }
    ++pos;
    const std::size_t expected = width * height * 3;
    if (bytes.size() - pos != expected) {
        data_error(path, "PPM payload has " + std::to_string(bytes.size() - pos) + " bytes, expected " +
                             std::to_string(expected));
    }
    std::vector<float> data(expected);
    for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t x = 0; x < width; ++x) {
            for (std::size_t c = 0; c < 3; ++c) {
                const auto byte = static_cast<unsigned char>(bytes[pos + (y * width + x) * 3 + c]);
                data[(c * height + y) * width + x] = static_cast<float>(byte) / 255.0f;
            }
        }
    }
    return Tensor({3, height, width}, std::move(data));
}

void write_ppm(const fs::path& path, const Tensor& image) {
    if (image.rank() != 3 || image.dim(0) != 3) {
        throw ShapeError("write_ppm: image " + shape_to_string(image.shape()) + " is not [3 x H x W]");
    }
    const std::size_t height = image.dim(1);
    const std::size_t width = image.dim(2);
    std::string out = "P6\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
    const std::size_t header = out.size();
    out.resize(header + width * height * 3);
    for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t x = 0; x < width; ++x) {
            for (std::size_t c = 0; c < 3; ++c) {
                const float v = std::clamp(image[(c * height + y) * width + x], 0.0f, 1.0f);
                out[header + (y * width + x) * 3 + c] = static_cast<char>(std::lround(v * 255.0f));
            }
        }
    }
    std::ofstream file(path, std::ios::binary);
    if (!file.write(out.data(), static_cast<std::streamsize>(out.size()))) {
        data_error(path, "cannot write");
    }
}

std::string frame_file_name(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "f%06zu.ppm", index);
    return buf;
}

bool Video::has_labels() const {
    return std::any_of(labels.begin(), labels.end(), [](int l) { return l >= 0; });
}

std::size_t FrameCorpus::frame_count() const {
    std::size_t n = 0;
    for (const auto& v : videos) {
        n += v.frames.size();
    }
    return n;
}

std::vector<std::size_t> FrameCorpus::with_procedure(const std::string& procedure) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < videos.size(); ++i) {
        if (videos[i].procedure == procedure) {
            out.push_back(i);
        }
    }
    return out;
}

FrameCorpus FrameCorpus::filtered(const std::string& procedure) const {
    FrameCorpus out;
    out.root = root;
    for (std::size_t i : with_procedure(procedure)) {
        out.videos.push_back(videos[i]);
    }
    return out;
}

FrameCorpus load_corpus(const fs::path& root) {
    if (!fs::is_directory(root)) {
        data_error(root, "corpus root is not a directory");
    }
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (!entry.is_directory()) {
            data_error(entry.path(), "unexpected entry in corpus root (expected video directories)");
        }
        dirs.push_back(entry.path());
    }
    std::sort(dirs.begin(), dirs.end());
    FrameCorpus corpus;
    corpus.root = root;
    for (const auto& dir : dirs) {
        corpus.videos.push_back(read_video(dir));
    }
    return corpus;
}

void write_video(const fs::path& root, const Video& video) {
    const fs::path dir = root / video.name;
    fs::create_directories(dir);
    {
        std::ofstream meta(dir / "meta");
        meta << "fps=" << format_double(video.fps) << "\nprocedure=" << video.procedure << "\n";
        if (!meta) {
            data_error(dir / "meta", "cannot write");
        }
    }
    for (std::size_t i = 0; i < video.frames.size(); ++i) {
        write_ppm(dir / frame_file_name(i + 1), video.frames[i]);
    }
    if (video.has_labels()) {
        std::ofstream phases(dir / "phases.tsv");
        for (std::size_t i = 0; i < video.labels.size(); ++i) {
            if (video.labels[i] >= 0) {
                phases << (i + 1) << '\t' << video.labels[i] << '\n';
            }
        }
    }
}

void write_corpus(const fs::path& root, const FrameCorpus& corpus) {
    fs::create_directories(root);
    for (const auto& video : corpus.videos) {
        write_video(root, video);
    }
}

std::size_t frame_gap(double fps) {
    if (!(fps > 0.0)) {
        throw DataError("frame pairing needs a positive fps, got " + format_double(fps));
    }
    const auto gap = static_cast<std::size_t>(std::floor(fps + 0.5));
    if (gap == 0) {
        throw DataError("fps " + format_double(fps) + " rounds to a zero-frame gap");
    }
    return gap;
}

std::vector<FramePair> build_frame_pairs(const Video& video, std::size_t video_index) {
    const std::size_t gap = frame_gap(video.fps);
    std::vector<FramePair> pairs;
    for (std::size_t i = 0; i + gap < video.frames.size(); ++i) {
        pairs.push_back({video_index, i, i + gap});
    }
    return pairs;
}

std::vector<FramePair> build_frame_pairs(const FrameCorpus& corpus) {
    std::vector<FramePair> pairs;
    for (std::size_t v = 0; v < corpus.videos.size(); ++v) {
        auto more = build_frame_pairs(corpus.videos[v], v);
        pairs.insert(pairs.end(), more.begin(), more.end());
    }
    return pairs;
}

}  // namespace gsvit
