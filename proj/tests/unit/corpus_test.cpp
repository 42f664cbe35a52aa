#include <gtest/gtest.h>

#include "gsvit/corpus.hpp"
#include "gsvit/error.hpp"
#include "gsvit/synth.hpp"
#include "tempdir.hpp"

namespace gsvit {
namespace {

using testing::TempDir;
using testing::write_text;

Tensor level_image(std::size_t size, int level) {
    std::vector<float> px(3 * size * size);
    for (std::size_t i = 0; i < px.size(); ++i) {
        px[i] = static_cast<float>((level + static_cast<int>(i)) % 256) / 255.0f;
    }
    return Tensor({3, size, size}, std::move(px));
}

Video small_video(const std::string& name, std::size_t frames, double fps, const std::string& procedure = "chole") {
    Video v;
    v.name = name;
    v.fps = fps;
    v.procedure = procedure;
    for (std::size_t i = 0; i < frames; ++i) {
        v.frames.push_back(level_image(4, static_cast<int>(i)));
    }
    return v;
}

template <typename Fn>
std::string data_error_text(Fn&& fn) {
    try {
        fn();
    } catch (const DataError& e) {
        return e.what();
    }
    return "<no DataError>";
}

TEST(Ppm, RoundTripIsExactOnEightBitLevels) {
    TempDir dir;
    const Tensor img = level_image(5, 17);
    write_ppm(dir / "a.ppm", img);
    const Tensor back = read_ppm(dir / "a.ppm");
    ASSERT_EQ(back.shape(), img.shape());
    for (std::size_t i = 0; i < img.numel(); ++i) {
        EXPECT_EQ(back[i], img[i]) << i;
    }
}

TEST(Ppm, HeaderCommentsAndChannelLayout) {
    TempDir dir;
    std::string bytes = "P6\n# made by hand\n2 1\n255\n";
    bytes += std::string{'\xff', '\x00', '\x80', '\x00', '\xff', '\x00'};
    write_text(dir / "c.ppm", bytes);
    const Tensor img = read_ppm(dir / "c.ppm");
    ASSERT_EQ(img.shape(), (Shape{3, 1, 2}));
    // channel-major: R plane, G plane, B plane
    EXPECT_FLOAT_EQ(img[0], 1.0f);
    EXPECT_FLOAT_EQ(img[1], 0.0f);
    EXPECT_FLOAT_EQ(img[2], 0.0f);
    EXPECT_FLOAT_EQ(img[3], 1.0f);
    EXPECT_FLOAT_EQ(img[4], 128.0f / 255.0f);
    EXPECT_FLOAT_EQ(img[5], 0.0f);
}

TEST(Ppm, RejectsSixteenBitMaxval) {
    TempDir dir;
    write_text(dir / "d.ppm", "P6\n1 1\n65535\n" + std::string(6, '\0'));
    const std::string msg = data_error_text([&] { read_ppm(dir / "d.ppm"); });
    EXPECT_NE(msg.find("maxval"), std::string::npos) << msg;
    EXPECT_NE(msg.find("d.ppm"), std::string::npos) << msg;
}

TEST(Ppm, RejectsAsciiAndTruncatedFiles) {
    TempDir dir;
    write_text(dir / "p3.ppm", "P3\n1 1\n255\n0 0 0\n");
    EXPECT_THROW(read_ppm(dir / "p3.ppm"), DataError);
    write_text(dir / "short.ppm", "P6\n2 2\n255\n" + std::string(5, '\0'));
    const std::string msg = data_error_text([&] { read_ppm(dir / "short.ppm"); });
    EXPECT_NE(msg.find("expected 12"), std::string::npos) << msg;
}

TEST(Corpus, TenFramesAtTwentyFiveFpsGiveNoPairs) {
    TempDir dir;
    write_video(dir.path(), small_video("v1", 10, 25.0));
    const FrameCorpus corpus = load_corpus(dir.path());
    ASSERT_EQ(corpus.videos.size(), 1u);
    EXPECT_EQ(corpus.videos[0].frames.size(), 10u);
    EXPECT_DOUBLE_EQ(corpus.videos[0].fps, 25.0);
    EXPECT_EQ(corpus.videos[0].procedure, "chole");
    EXPECT_FALSE(corpus.videos[0].has_labels());
    EXPECT_TRUE(build_frame_pairs(corpus).empty());
}

TEST(Corpus, GapInNumberingNamesFirstMissingFrame) {
    TempDir dir;
    write_video(dir.path(), small_video("v1", 4, 25.0));
    std::filesystem::remove(dir / "v1" / "f000003.ppm");
    const std::string msg = data_error_text([&] { load_corpus(dir.path()); });
    EXPECT_NE(msg.find("missing f000003.ppm"), std::string::npos) << msg;
}

TEST(Corpus, MalformedMetaIsDataError) {
    const std::vector<std::string> metas = {"procedure = chole\n", "fps = 25\n", "fps = 0\nprocedure = x\n",
                                            "fps = abc\nprocedure = x\n", "fps = 25\nprocedure = x\ncolor = red\n",
                                            "fps 25\n"};
    for (const auto& meta : metas) {
        TempDir dir;
        write_video(dir.path(), small_video("v1", 2, 25.0));
        write_text(dir / "v1" / "meta", meta);
        const std::string msg = data_error_text([&] { load_corpus(dir.path()); });
        EXPECT_NE(msg.find("meta"), std::string::npos) << meta << " -> " << msg;
    }
}

TEST(Corpus, RejectsStrayEntries) {
    TempDir dir;
    write_video(dir.path(), small_video("v1", 2, 25.0));
    write_text(dir / "v1" / "notes.txt", "hello");
    EXPECT_NE(data_error_text([&] { load_corpus(dir.path()); }).find("notes.txt"), std::string::npos);
    TempDir dir2;
    write_video(dir2.path(), small_video("v1", 2, 25.0));
    write_text(dir2 / "README", "x");
    EXPECT_NE(data_error_text([&] { load_corpus(dir2.path()); }).find("README"), std::string::npos);
    EXPECT_THROW(load_corpus(dir2 / "absent"), DataError);
}

TEST(Corpus, InconsistentFrameSizesAreRejected) {
    TempDir dir;
    write_video(dir.path(), small_video("v1", 3, 25.0));
    write_ppm(dir / "v1" / "f000002.ppm", level_image(5, 0));
    EXPECT_NE(data_error_text([&] { load_corpus(dir.path()); }).find("f000002.ppm"), std::string::npos);
}

TEST(Corpus, PhaseLabelsAreOneBasedFrameIndices) {
    TempDir dir;
    write_video(dir.path(), small_video("v1", 4, 25.0));
    write_text(dir / "v1" / "phases.tsv", "1\t0\n2\t3\n4\t6\n");
    const Video v = load_corpus(dir.path()).videos[0];
    ASSERT_TRUE(v.has_labels());
    EXPECT_EQ(v.labels, (std::vector<int>{0, 3, -1, 6}));
}

TEST(Corpus, OutOfRangePhaseNamesFramePath) {
    TempDir dir;
    write_video(dir.path(), small_video("v1", 3, 25.0));
    write_text(dir / "v1" / "phases.tsv", "1\t0\n2\t7\n");
    const std::string msg = data_error_text([&] { load_corpus(dir.path()); });
    EXPECT_NE(msg.find("f000002.ppm"), std::string::npos) << msg;
}

TEST(Corpus, MalformedPhaseLines) {
    for (const std::string& tsv : {"1 0\n", "9\t0\n", "0\t1\n", "1\t0\n1\t2\n", "1\tx\n"}) {
        TempDir dir;
        write_video(dir.path(), small_video("v1", 3, 25.0));
        write_text(dir / "v1" / "phases.tsv", tsv);
        const std::string msg = data_error_text([&] { load_corpus(dir.path()); });
        EXPECT_NE(msg.find("phases.tsv"), std::string::npos) << tsv << " -> " << msg;
    }
}

TEST(Corpus, WriteThenLoadRoundTrip) {
    TempDir dir;
    PhaseCorpusOptions o;
    o.videos = 2;
    o.frames = 9;
    o.image_size = 16;
    const FrameCorpus written = make_phase_corpus(o, 3);
    write_corpus(dir.path(), written);
    const FrameCorpus read = load_corpus(dir.path());
    ASSERT_EQ(read.videos.size(), 2u);
    for (std::size_t v = 0; v < 2; ++v) {
        EXPECT_EQ(read.videos[v].name, written.videos[v].name);
        EXPECT_EQ(read.videos[v].labels, written.videos[v].labels);
        ASSERT_EQ(read.videos[v].frames.size(), written.videos[v].frames.size());
        for (std::size_t f = 0; f < read.videos[v].frames.size(); ++f) {
            const auto a = read.videos[v].frames[f].data();
            const auto b = written.videos[v].frames[f].data();
            for (std::size_t i = 0; i < a.size(); ++i) {
                ASSERT_NEAR(a[i], b[i], 0.5 / 255.0 + 1e-6);
            }
        }
    }
}

TEST(Corpus, ProcedureFilter) {
    FrameCorpus c;
    c.videos = {small_video("a", 3, 1.0, "chole"), small_video("b", 3, 1.0, "appendix"),
                small_video("c", 3, 1.0, "chole")};
    EXPECT_EQ(c.with_procedure("chole"), (std::vector<std::size_t>{0, 2}));
    EXPECT_EQ(c.filtered("appendix").videos.size(), 1u);
    EXPECT_TRUE(c.filtered("hernia").videos.empty());
    EXPECT_EQ(c.frame_count(), 9u);
}

TEST(FramePairs, HundredFramesAtTwentyFiveFps) {
    const auto pairs = build_frame_pairs(small_video("v", 100, 25.0), 3);
    ASSERT_EQ(pairs.size(), 75u);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        EXPECT_EQ(pairs[i].video, 3u);
        EXPECT_EQ(pairs[i].input, i);
        EXPECT_EQ(pairs[i].target, i + 25);
    }
}

TEST(FramePairs, TooShortVideoGivesNoPairs) {
    EXPECT_TRUE(build_frame_pairs(small_video("v", 25, 25.0)).empty());
    EXPECT_EQ(build_frame_pairs(small_video("v", 26, 25.0)).size(), 1u);
    EXPECT_TRUE(build_frame_pairs(small_video("v", 0, 25.0)).empty());
}

TEST(FramePairs, GapRoundsHalfUp) {
    EXPECT_EQ(frame_gap(24.6), 25u);
    EXPECT_EQ(frame_gap(24.5), 25u);
    EXPECT_EQ(frame_gap(24.4), 24u);
    EXPECT_EQ(frame_gap(0.5), 1u);
    EXPECT_EQ(frame_gap(29.97), 30u);
    EXPECT_THROW(frame_gap(0.0), DataError);
    EXPECT_THROW(frame_gap(-1.0), DataError);
    EXPECT_THROW(frame_gap(0.4), DataError);
}

TEST(FramePairs, MissingFpsIsCorpusError) {
    EXPECT_THROW(build_frame_pairs(small_video("v", 10, 0.0)), DataError);
}

TEST(FramePairs, CorpusPairsCarryVideoIndex) {
    FrameCorpus c;
    c.videos = {small_video("a", 5, 2.0), small_video("b", 2, 2.0), small_video("c", 4, 2.0)};
    const auto pairs = build_frame_pairs(c);
    ASSERT_EQ(pairs.size(), 5u);
    EXPECT_EQ(pairs[0].video, 0u);
    EXPECT_EQ(pairs[2].target, 4u);
    EXPECT_EQ(pairs[3].video, 2u);
    EXPECT_EQ(pairs[4].input, 1u);
    EXPECT_EQ(pairs[4].target, 3u);
}

TEST(Synth, MovingSquareMovesTwoPixelsPerFrame) {
    MovingSquareOptions o;
    o.videos = 1;
    o.frames = 3;
    const Video v = make_moving_square_corpus(o, 9).videos[0];
    auto top_left = [&](const Tensor& f) {
        for (std::size_t y = 0; y < o.image_size; ++y) {
            for (std::size_t x = 0; x < o.image_size; ++x) {
                if (f[y * o.image_size + x] > 0.5f) {
                    return std::make_pair(y, x);
                }
            }
        }
        return std::make_pair(o.image_size, o.image_size);
    };
    const auto a = top_left(v.frames[0]), b = top_left(v.frames[1]);
    const long dy = static_cast<long>(b.first) - static_cast<long>(a.first);
    const long dx = static_cast<long>(b.second) - static_cast<long>(a.second);
    EXPECT_EQ(std::abs(dy), 2);
    EXPECT_EQ(std::abs(dx), 2);
}

TEST(Synth, PhaseCorpusCoversEveryPhaseInOrder) {
    const FrameCorpus c = make_phase_corpus({}, 5);
    ASSERT_EQ(c.videos.size(), 7u);
    for (const auto& v : c.videos) {
        ASSERT_EQ(v.labels.size(), 140u);
        EXPECT_EQ(v.labels.front(), 0);
        EXPECT_EQ(v.labels.back(), 6);
        EXPECT_TRUE(std::is_sorted(v.labels.begin(), v.labels.end()));
    }
}

}  // namespace
}  // namespace gsvit
