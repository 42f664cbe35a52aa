#include <gtest/gtest.h>

#include "gsvit/config.hpp"
#include "gsvit/error.hpp"
#include "gsvit/report.hpp"
#include "gsvit/text.hpp"
#include "oracles.hpp"

namespace gsvit {
namespace {

const std::filesystem::path kConfigDir = GSVIT_CONFIG_DIR;

template <typename Fn>
std::string config_error_text(Fn&& fn) {
    try {
        fn();
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "<no ConfigError>";
}

TEST(Config, FormatParseRoundTrip) {
    for (const Config& c : {Config{}, testing::tiny_config()}) {
        const std::string text = format_config(c);
        EXPECT_EQ(parse_config(text, "t"), c);
        EXPECT_EQ(format_config(parse_config(text, "t")), text);
    }
}

TEST(Config, ShippedFilesMatchBuiltIns) {
    EXPECT_EQ(load_config(kConfigDir / "default.conf"), Config{});
    EXPECT_EQ(load_config(kConfigDir / "tiny64.conf"), testing::tiny_config());
}

TEST(Config, DottedKeysCommentsAndPartialFiles) {
    const Config c = parse_config(
        "# comment\n"
        "encoder.patch_size = 16   # trailing\n"
        "decoder.se_scales = 56,112\n"
        "train.optimizer = adam\n"
        "train.lr = 3e-4\n"
        "train.gamma = 0.95\n",
        "t");
    EXPECT_EQ(c, Config{});
    const Config d = parse_config("train.lr = 1e-3\n", "t");
    EXPECT_DOUBLE_EQ(d.train.lr, 1e-3);
    EXPECT_EQ(d.encoder, ModelConfig{});
}

TEST(Config, UnknownKeyIsUsageErrorWithLine) {
    const std::string msg = config_error_text([] { parse_config("train.lr = 1e-4\nencoder.colour = red\n", "f.conf"); });
    EXPECT_NE(msg.find("f.conf:2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("encoder.colour"), std::string::npos) << msg;
}

TEST(Config, MalformedValuesAndCrossChecks) {
    EXPECT_THROW(parse_config("train.lr = fast\n", "t"), ConfigError);
    EXPECT_THROW(parse_config("encoder.widths = 64,,128\n", "t"), ConfigError);
    EXPECT_THROW(parse_config("encoder.readout = max\n", "t"), ConfigError);
    EXPECT_THROW(parse_config("decoder.output_size = 112\n", "t"), ConfigError);
    EXPECT_THROW(parse_config("encoder.heads = 3,4,4\n", "t"), ConfigError);
    EXPECT_THROW(parse_config("decoder.se_scales = 56\n", "t"), ConfigError);
    EXPECT_THROW(parse_config("train.batch = 0\n", "t"), ConfigError);
    EXPECT_THROW(parse_config("train.lr\n", "t"), ConfigError);
    EXPECT_THROW(load_config(kConfigDir / "missing.conf"), ConfigError);
}

TEST(Text, ShortestRoundTripDoubles) {
    for (double v : {0.1, 1.0 / 3.0, 3e-4, 2.85e-4, 1e-300, 12345.678}) {
        EXPECT_EQ(parse_double(format_double(v), "v"), v);
    }
    EXPECT_EQ(format_list(std::vector<std::size_t>{1, 2, 3}), "1,2,3");
    EXPECT_THROW(parse_u64("-1", "n"), ConfigError);
    EXPECT_THROW(parse_u64("12x", "n"), ConfigError);
    EXPECT_THROW(parse_bool("yes", "b"), ConfigError);
}

TEST(Report, RoundTripWithSeries) {
    Report r;
    r.set("kind", std::string("bench"));
    r.set("mean_ms", 1.0 / 3.0);
    r.set_count("batch", 4);
    r.add_series("latency_ms", {0.1, 0.2, 1e-9});
    r.add_series("empty", {});
    const Report back = parse_report(format_report(r));
    EXPECT_EQ(back.fields, r.fields);
    EXPECT_EQ(back.series, r.series);
    EXPECT_EQ(back.number("mean_ms"), 1.0 / 3.0);
    EXPECT_THROW(back.number("absent"), DataError);
    EXPECT_THROW(parse_report("series x 3\n1\n2\n"), DataError);
    EXPECT_THROW(parse_report("no equals sign\n"), DataError);
}

}  // namespace
}  // namespace gsvit
