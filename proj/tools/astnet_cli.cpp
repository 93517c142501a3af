// astnet command-line front end. Talks to the library only through astnet.h.
#include <cstdio>
#include <deque>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "astnet/astnet.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct Flags {
    std::string config;
    std::vector<std::pair<std::string, std::string>> settings;
    std::vector<std::string> raw_sets;
    std::deque<std::string> storage;
    bool no_attention = false;
    bool no_reverse = false;
    bool no_repr = false;
    bool inject_bug = false;
};

void print_line(const char* line, void*) { std::printf("%s\n", line); }

int fail(astnet_status status) {
    std::fprintf(stderr, "error (%s): %s\n", astnet_status_name(status), astnet_last_error());
    return status == ASTNET_ERR_USAGE ? kExitUsage : kExitRuntime;
}

// Registers a flag whose value becomes the run setting `key`; values are
// validated by the library.
CLI::Option* setting(CLI::App* cmd, Flags& flags, const std::string& name, const std::string& key,
                     const std::string& help) {
    flags.storage.emplace_back();
    return cmd->add_option(name, flags.storage.back(), help)
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast)
        ->each([&flags, key](const std::string& v) {
        flags.settings.emplace_back(key, v);
    });
}

void add_common(CLI::App* cmd, Flags& f) {
    cmd->add_option("--config", f.config, "key=value config file (flags override it)");
    setting(cmd, f, "--seed", "seed", "Root seed for data, initialization and training");
    setting(cmd, f, "--mode", "mode", "Sample mode")->check(CLI::IsMember({"vector", "image"}));
    setting(cmd, f, "--precision", "precision", "Arithmetic precision")->check(CLI::IsMember({"standard", "high"}));
    setting(cmd, f, "--frames", "frames", "Frames per clip (N)");
    setting(cmd, f, "--out", "out", "Output directory");
    setting(cmd, f, "--manifest", "manifest", "Dataset manifest (default <out>/data/manifest.txt)");
    setting(cmd, f, "--checkpoint", "checkpoint", "Checkpoint file (default <out>/checkpoint.astc)");
    cmd->add_option("--set", f.raw_sets, "Any other setting as KEY=VALUE (repeatable)");
}

std::string exe_name(const char* argv0) {
    std::string s = argv0;
    const auto slash = s.find_last_of('/');
    return slash == std::string::npos ? s : s.substr(slash + 1);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Attention-guided LSTM sequence classifier: data generation, training, evaluation, "
                 "gradient checking and attention visualization.",
                 exe_name(argv[0])};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(astnet_version()));
    Flags flags;

    auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset and print its manifest path");
    add_common(gen, flags);
    setting(gen, flags, "--noise", "noise", "Noise level");
    setting(gen, flags, "--train-per-class", "train_per_class", "Training clips per class");
    setting(gen, flags, "--test-per-class", "test_per_class", "Test clips per class");
    setting(gen, flags, "--image-size", "image_size", "Frame side in image mode");

    auto* train = app.add_subcommand("train", "Train (representation phase, then class phase)");
    add_common(train, flags);
    train->add_flag("--no-attention", flags.no_attention, "Drop the attention network");
    train->add_flag("--no-reverse", flags.no_reverse, "Feed frames forward to attention and decoder");
    train->add_flag("--no-repr", flags.no_repr, "Skip the representation phase; train everything on the class loss");
    setting(train, flags, "--epochs1", "epochs1", "Representation-phase epochs");
    setting(train, flags, "--epochs2", "epochs2", "Class-phase epochs");
    setting(train, flags, "--batch", "batch", "Mini-batch size");
    setting(train, flags, "--lr", "learning_rate", "Learning rate (representation phase)");
    setting(train, flags, "--head-lr", "head_learning_rate", "Learning rate for the class head");

    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset split");
    add_common(eval, flags);
    setting(eval, flags, "--split", "split", "Split to evaluate")->check(CLI::IsMember({"train", "test"}));

    auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of every parameter on the tiny model");
    add_common(grad, flags);
    grad->add_flag("--no-attention", flags.no_attention, "Check the model without attention");
    grad->add_flag("--no-reverse", flags.no_reverse, "Check the unreversed model");
    grad->add_flag("--inject-bug", flags.inject_bug, "Corrupt one analytic gradient (negative control)")->group("");

    auto* viz = app.add_subcommand("visualize", "Write attention maps (PGM) and frame|map strips (PPM)");
    add_common(viz, flags);
    setting(viz, flags, "--split", "split", "Split to draw from")->check(CLI::IsMember({"train", "test"}));
    setting(viz, flags, "--clips", "clips", "Number of clips");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    for (const auto& kv : flags.raw_sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0) {
            std::fprintf(stderr, "error (usage): --set expects KEY=VALUE, got '%s'\n", kv.c_str());
            return kExitUsage;
        }
        flags.settings.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (flags.no_attention) flags.settings.emplace_back("attention", "0");
    if (flags.no_reverse) flags.settings.emplace_back("reverse", "0");
    if (flags.no_repr) flags.settings.emplace_back("repr", "0");
    if (flags.inject_bug) flags.settings.emplace_back("inject_bug", "1");

    astnet_options* options = nullptr;
    if (astnet_status s = astnet_options_create(&options); s != ASTNET_OK) return fail(s);
    struct Guard {
        astnet_options* o;
        ~Guard() { astnet_options_destroy(o); }
    } guard{options};

    if (!flags.config.empty())
        if (astnet_status s = astnet_options_load_file(options, flags.config.c_str()); s != ASTNET_OK) return fail(s);
    for (const auto& [k, v] : flags.settings)
        if (astnet_status s = astnet_options_set(options, k.c_str(), v.c_str()); s != ASTNET_OK) return fail(s);

    astnet_status status = ASTNET_OK;
    if (gen->parsed()) {
        status = astnet_gen_data(options, print_line, nullptr);
    } else if (train->parsed()) {
        status = astnet_train(options, print_line, nullptr);
    } else if (eval->parsed()) {
        status = astnet_eval(options, print_line, nullptr);
    } else if (grad->parsed()) {
        int passed = 0;
        status = astnet_gradcheck(options, print_line, nullptr, &passed);
        if (status == ASTNET_OK && !passed) return kExitRuntime;
    } else if (viz->parsed()) {
        status = astnet_visualize(options, print_line, nullptr);
    }
    return status == ASTNET_OK ? kExitOk : fail(status);
}
