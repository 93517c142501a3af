#include <gtest/gtest.h>

#include "astnet/errors.hpp"
#include "astnet/run_config.hpp"
#include "test_support.hpp"

using namespace astnet;
using namespace testing_support;

TEST(RunConfig, FlagsBeatFileBeatDefaults) {
    const RunConfig d = RunConfig::build({}, {});
    const RunConfig f = RunConfig::build({{"epochs1", "7"}, {"noise", "0.25"}}, {});
    const RunConfig both = RunConfig::build({{"epochs1", "7"}, {"noise", "0.25"}}, {{"epochs1", "2"}});
    EXPECT_EQ(d.train.epochs1, TrainConfig{}.epochs1);
    EXPECT_EQ(f.train.epochs1, 7u);
    EXPECT_EQ(both.train.epochs1, 2u);
    EXPECT_EQ(both.data.noise_level, 0.25);
    EXPECT_TRUE(both.is_explicit("noise"));
    EXPECT_FALSE(both.is_explicit("epochs2"));
}

TEST(RunConfig, SeedReachesTrainingAndData) {
    const RunConfig c = RunConfig::build({}, {{"seed", "17"}});
    EXPECT_EQ(c.seed, 17u);
    EXPECT_EQ(c.train.seed, 17u);
    EXPECT_EQ(c.data.seed, 17u);
}

TEST(RunConfig, ModeSelectsAProfile) {
    const RunConfig v = RunConfig::build({}, {});
    EXPECT_EQ(v.data.mode, SampleMode::vector);
    EXPECT_EQ(v.model.extractor.kind, ExtractorKind::file);
    EXPECT_EQ(v.model.feature_dim, v.data.feature_dim);
    const RunConfig i = RunConfig::build({{"mode", "image"}}, {});
    EXPECT_EQ(i.data.mode, SampleMode::image);
    EXPECT_EQ(i.model.extractor.kind, ExtractorKind::tiny_conv);
    EXPECT_EQ(i.model.num_frames, i.data.num_frames);
    // A flag overrides the mode named in a file.
    EXPECT_EQ(RunConfig::build({{"mode", "image"}}, {{"mode", "vector"}}).data.mode, SampleMode::vector);
}

TEST(RunConfig, SharedKeysStayInStep) {
    const RunConfig c = RunConfig::build({}, {{"frames", "9"}, {"feature_dim", "12"}});
    EXPECT_EQ(c.model.num_frames, 9u);
    EXPECT_EQ(c.data.num_frames, 9u);
    EXPECT_EQ(c.model.feature_dim, 12u);
    EXPECT_EQ(c.data.feature_dim, 12u);
}

TEST(RunConfig, AblationSwitches) {
    const RunConfig c = RunConfig::build({}, {{"attention", "false"}, {"reverse", "false"}, {"repr", "false"}});
    EXPECT_FALSE(c.model.attention_enabled);
    EXPECT_FALSE(c.model.reverse_enabled);
    EXPECT_FALSE(c.train.representation_enabled);
}

TEST(RunConfig, BadInputIsUsageError) {
    EXPECT_THROW(RunConfig::build({}, {{"colour", "red"}}), UsageError);
    EXPECT_THROW(RunConfig::build({}, {{"mode", "bogus"}}), UsageError);
    EXPECT_THROW(RunConfig::build({}, {{"epochs1", "-3"}}), UsageError);
    EXPECT_THROW(RunConfig::build({}, {{"noise", "lots"}}), UsageError);
    EXPECT_THROW(RunConfig::build({}, {{"split", "valid"}}), UsageError);
    EXPECT_THROW(RunConfig::build({}, {{"precision", "quad"}}), UsageError);
}

TEST(ConfigFile, CommentsAndBlankLinesAreSkipped) {
    TempDir dir;
    const std::string path = dir.file("run.cfg");
    const std::string text = "# settings\n\nepochs2 = 4\nlr=0.01\n  # indented comment\nmode=vector\n";
    write_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
    const ConfigEntries e = read_config_file(path);
    ASSERT_EQ(e.size(), 3u);
    EXPECT_EQ(e[0], (std::pair<std::string, std::string>{"epochs2", "4"}));
    EXPECT_EQ(e[1].first, "lr");
    const RunConfig c = RunConfig::build(e, {});
    EXPECT_EQ(c.train.epochs2, 4u);
    EXPECT_EQ(c.train.learning_rate, 0.01);
}

TEST(ConfigFile, MissingFileIsIoErrorAndJunkIsFormatError) {
    TempDir dir;
    EXPECT_THROW(read_config_file(dir.file("none.cfg")), IoError);
    const std::string path = dir.file("bad.cfg");
    const std::string text = "epochs1 7\n";
    write_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
    EXPECT_THROW(read_config_file(path), FormatError);
}

TEST(RunConfig, NumbersMustParseWhole) {
    EXPECT_THROW(RunConfig::build({}, {{"epochs2", "4x"}}), UsageError);
    EXPECT_THROW(RunConfig::build({}, {{"lr", "0.1.2"}}), UsageError);
    EXPECT_THROW(RunConfig::build({}, {{"depth", "-1"}}), UsageError);
    EXPECT_THROW(RunConfig::build({}, {{"extractor_stages", "8,-4"}}), UsageError);
}
