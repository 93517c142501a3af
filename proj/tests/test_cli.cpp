#include <gtest/gtest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "astnet/checkpoint.hpp"
#include "astnet/datasynth.hpp"
#include "astnet/viz.hpp"
#include "test_support.hpp"
#include "tiny_world.hpp"

using namespace testing_support;
namespace fs = std::filesystem;

namespace {

struct CliRun {
    int code = -1;
    std::string out;
};

// Runs the CLI with stderr folded into the captured output.
CliRun cli(const std::string& args) {
    const std::string cmd = std::string(ASTNET_CLI_PATH) + " " + args + " 2>&1";
    CliRun r;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return r;
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

const std::string kSmallModel =
    " --frames 6 --set feature_dim=8 --set signal_dims=6 --set encoder_hidden=8 --set attention_hidden=8"
    " --set decoder_hidden=8 --set depth=1";

std::string small_data(const std::string& out, const std::string& extra = "") {
    return "gen-data --out " + out + kSmallModel + " --train-per-class 1 --test-per-class 1" + extra;
}

std::string small_train(const std::string& out, const std::string& extra = "") {
    return "train --out " + out + kSmallModel + " --epochs1 2 --epochs2 2" + extra;
}

std::size_t count_parameters(const std::string& out, const std::string& prefix) {
    const astnet::LoadedCheckpoint ck = astnet::load_checkpoint(out + "/checkpoint.astc");
    std::size_t n = 0;
    for (const auto& p : ck.model->parameters()) n += p->name.rfind(prefix, 0) == 0;
    return n;
}


}  // namespace

TEST(Cli, HelpAndVersion) {
    EXPECT_EQ(cli("--help").code, 0);
    const CliRun v = cli("--version");
    EXPECT_EQ(v.code, 0);
    EXPECT_FALSE(v.out.empty());
    EXPECT_EQ(cli("").code, 2);
}

TEST(Cli, GenDataIsDeterministicAndSized) {
    TempDir a, b;
    ASSERT_EQ(cli("gen-data --out " + a.path().string()).code, 0);
    ASSERT_EQ(cli("gen-data --out " + b.path().string()).code, 0);
    EXPECT_EQ(read_bytes(a.file("data/manifest.txt")), read_bytes(b.file("data/manifest.txt")));
    const astnet::Dataset ds = astnet::load_dataset(a.file("data/manifest.txt"));
    EXPECT_EQ(ds.train.size() + ds.test.size(), 480u);
    EXPECT_EQ(ds.train.size(), 384u);
}

TEST(Cli, UsageErrorsExitWithTwo) {
    TempDir d;
    const CliRun bogus = cli("gen-data --mode bogus --out " + d.path().string());
    EXPECT_EQ(bogus.code, 2);
    EXPECT_NE(bogus.out.find("vector"), std::string::npos);
    EXPECT_EQ(cli("train --epochs1 -3 --out " + d.path().string()).code, 2);
    EXPECT_EQ(cli("train --set nonsense --out " + d.path().string()).code, 2);
    EXPECT_EQ(cli("train --set colour=red --out " + d.path().string()).code, 2);
    EXPECT_EQ(cli("frobnicate").code, 2);
}

TEST(Cli, MissingInputsAreRuntimeErrors) {
    TempDir d;
    const CliRun r = cli("train --out " + d.path().string());
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.out.find("manifest"), std::string::npos);
    EXPECT_EQ(cli("eval --out " + d.path().string()).code, 1);
}

TEST(Cli, ZeroEpochsSaveTheInitialModel) {
    TempDir d;
    ASSERT_EQ(cli(small_data(d.path().string())).code, 0);
    ASSERT_EQ(cli("train --out " + d.path().string() + kSmallModel + " --epochs1 0 --epochs2 0 --seed 4").code, 0);
    const astnet::LoadedCheckpoint ck = astnet::load_checkpoint(d.file("checkpoint.astc"));
    const astnet::Model fresh(ck.model->config(), 4);
    EXPECT_TRUE(same_parameters(*ck.model, fresh));
    EXPECT_EQ(read_text(d.file("metrics.txt")),
              "# epoch phase loss acc acc_takeoff acc_somersault acc_twist acc_flight\n");
}

TEST(Cli, TrainingIsReproducible) {
    TempDir a, b;
    for (const TempDir* d : {&a, &b}) {
        ASSERT_EQ(cli(small_data(d->path().string())).code, 0);
        ASSERT_EQ(cli(small_train(d->path().string())).code, 0);
    }
    EXPECT_EQ(read_bytes(a.file("metrics.txt")), read_bytes(b.file("metrics.txt")));
    EXPECT_EQ(read_bytes(a.file("checkpoint.astc")), read_bytes(b.file("checkpoint.astc")));
    const std::string metrics = read_text(a.file("metrics.txt"));
    EXPECT_NE(metrics.find("\n2 repr "), std::string::npos);
    EXPECT_NE(metrics.find("\n2 class "), std::string::npos);
}

TEST(Cli, ConfigFileIsOverriddenByFlags) {
    TempDir d;
    ASSERT_EQ(cli(small_data(d.path().string())).code, 0);
    const std::string cfg = "# small run\nepochs1=1\nepochs2=3\n";
    write_bytes(d.file("run.cfg"), std::vector<std::uint8_t>(cfg.begin(), cfg.end()));
    ASSERT_EQ(cli(small_train(d.path().string(), " --config " + d.file("run.cfg") + " --epochs2 1")).code, 0);
    const std::string metrics = read_text(d.file("metrics.txt"));
    EXPECT_NE(metrics.find("\n1 class "), std::string::npos);
    EXPECT_EQ(metrics.find("\n2 class "), std::string::npos);
    EXPECT_NE(metrics.find("\n2 repr "), std::string::npos);
}

TEST(Cli, AblationFlagsChangeTheArchitecture) {
    TempDir full, plain;
    ASSERT_EQ(cli(small_data(full.path().string())).code, 0);
    ASSERT_EQ(cli(small_data(plain.path().string())).code, 0);
    ASSERT_EQ(cli(small_train(full.path().string())).code, 0);
    ASSERT_EQ(cli(small_train(plain.path().string(), " --no-attention --no-repr")).code, 0);
    EXPECT_GT(count_parameters(full.path().string(), "attention."), 0u);
    EXPECT_EQ(count_parameters(plain.path().string(), "attention."), 0u);
    const std::string metrics = read_text(plain.file("metrics.txt"));
    EXPECT_EQ(metrics.find(" repr "), std::string::npos);
    EXPECT_NE(metrics.find("\n4 class "), std::string::npos);
}

TEST(Cli, EvalIsStableAndRejectsEmptySplits) {
    TempDir d;
    ASSERT_EQ(cli(small_data(d.path().string())).code, 0);
    ASSERT_EQ(cli(small_train(d.path().string())).code, 0);
    const CliRun a = cli("eval --out " + d.path().string());
    const CliRun b = cli("eval --out " + d.path().string());
    ASSERT_EQ(a.code, 0) << a.out;
    EXPECT_EQ(a.out, b.out);
    EXPECT_NE(a.out.find("accuracy"), std::string::npos);

    TempDir e;
    ASSERT_EQ(cli(small_data(e.path().string(), " --test-per-class 0")).code, 0);
    const CliRun empty = cli("eval --out " + d.path().string() + " --manifest " + e.file("data/manifest.txt"));
    EXPECT_EQ(empty.code, 2);
    EXPECT_NE(empty.out.find("empty"), std::string::npos);
}

TEST(Cli, GradcheckPassesAndDetectsACorruptedGradient) {
    const CliRun ok = cli("gradcheck");
    EXPECT_EQ(ok.code, 0) << ok.out;
    EXPECT_NE(ok.out.find("gradcheck passed"), std::string::npos);
    const CliRun bad = cli("gradcheck --inject-bug");
    EXPECT_EQ(bad.code, 1);
    EXPECT_NE(bad.out.find("FAIL encoder.l0.W_hf"), std::string::npos);
    EXPECT_EQ(cli("gradcheck --no-attention").code, 0);
}

TEST(Cli, VisualizeWritesOneMapPerFrame) {
    TempDir d;
    ASSERT_EQ(cli("gen-data --mode image --image-size 16 --frames 4 --set train_per_class=1 --set test_per_class=1"
                  " --out " + d.path().string()).code, 0);
    ASSERT_EQ(cli("train --frames 4 --epochs1 1 --epochs2 1 --out " + d.path().string()).code, 0);
    const CliRun r = cli("visualize --clips 2 --out " + d.path().string());
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("localization frames 8"), std::string::npos);

    const astnet::LoadedCheckpoint ck = astnet::load_checkpoint(d.file("checkpoint.astc"));
    const astnet::Dataset ds = astnet::load_dataset(d.file("data/manifest.txt"));
    for (std::size_t k = 0; k < 2; ++k) {
        const fs::path dir = fs::path(d.path().string()) / "maps" / ds.test[k].clip_id;
        std::vector<std::string> maps;
        for (const auto& e : fs::directory_iterator(dir))
            if (e.path().extension() == ".pgm") maps.push_back(e.path().filename().string());
        std::sort(maps.begin(), maps.end());
        ASSERT_EQ(maps, (std::vector<std::string>{"map_000.pgm", "map_001.pgm", "map_002.pgm", "map_003.pgm"}));
        const astnet::Inference inf = astnet::infer(*ck.model, ds.test[k], true);
        for (std::size_t t = 0; t < 4; ++t) {
            const astnet::Tensor grid = astnet::attention_map(inf.attention[t], inf.maps[t]);
            const auto bytes = read_bytes((dir / maps[t]).string());
            const auto gray = astnet::to_gray(grid);
            ASSERT_GE(bytes.size(), gray.size());
            EXPECT_TRUE(std::equal(gray.begin(), gray.end(), bytes.end() - static_cast<std::ptrdiff_t>(gray.size())))
                << maps[t];
        }
    }
}

TEST(Cli, VisualizeNeedsAnImageCheckpoint) {
    TempDir d;
    ASSERT_EQ(cli(small_data(d.path().string())).code, 0);
    ASSERT_EQ(cli(small_train(d.path().string(), " --epochs1 0 --epochs2 0")).code, 0);
    const CliRun r = cli("visualize --out " + d.path().string());
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.out.find("image mode"), std::string::npos);
}

TEST(Cli, OverfitModelIsPerfectOnItsTrainingSplit) {
    TempDir d;
    ASSERT_EQ(cli("gen-data --noise 0 --train-per-class 1 --test-per-class 1 --out " + d.path().string()).code, 0);
    ASSERT_EQ(cli("train --out " + d.path().string()).code, 0);
    const CliRun r = cli("eval --split train --out " + d.path().string());
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("accuracy 1.000000"), std::string::npos) << r.out;
}
