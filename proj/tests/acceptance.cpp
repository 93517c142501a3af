// Acceptance run: prints one PASS/FAIL line per criterion and exits non-zero
// if any criterion fails.
#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

#include "astnet/adam.hpp"
#include "astnet/checkpoint.hpp"
#include "astnet/commands.hpp"
#include "astnet/datasynth.hpp"
#include "astnet/features.hpp"
#include "astnet/lstm.hpp"
#include "astnet/model.hpp"
#include "astnet/ops.hpp"
#include "astnet/run_config.hpp"
#include "astnet/training.hpp"
#include "astnet/viz.hpp"

using namespace astnet;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* pattern, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* pattern, ...) {
    char buf[512];
    va_list args;
    va_start(args, pattern);
    std::vsnprintf(buf, sizeof buf, pattern, args);
    va_end(args);
    return buf;
}

fs::path scratch_root() {
    static const fs::path root = [] {
        fs::path p = fs::temp_directory_path() / ("astnet-accept-" + std::to_string(::getpid()));
        fs::create_directories(p);
        return p;
    }();
    return root;
}

std::vector<std::uint8_t> file_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint64_t backbone_hash(const Model& model) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& p : model.parameters()) {
        if (p->name.rfind("head.fc.", 0) == 0 || p->name == "head.w_class") continue;
        for (double v : p->value.values()) {
            unsigned char b[sizeof v];
            std::memcpy(b, &v, sizeof v);
            for (unsigned char c : b) h = (h ^ c) * 0x100000001b3ULL;
        }
    }
    return h;
}

// ---------------------------------------------------------------------------

Outcome gradient_correctness() {
    const auto start = Clock::now();
    Model model(ModelConfig::tiny(), 0);
    const GradCheckReport r = check_model_gradients(model, 0);
    const double secs = seconds_since(start);
    std::size_t failing = 0;
    for (const auto& p : r.parameters) failing += !p.passed;
    return {r.passed() && r.max_relative_error() < 1e-4 && secs < 60.0,
            fmt("%zu parameters, %zu failing, max relative error %.3e, %.1f s", r.parameters.size(), failing,
                r.max_relative_error(), secs)};
}

double sigm(double z) { return 1.0 / (1.0 + std::exp(-z)); }

Outcome lstm_cell_oracle() {
    double worst = 0.0;
    Rng rng(2);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t d = 1 + rng.below(6), p = 1 + rng.below(6);
        ParameterStore store;
        LSTMCellParams cell = LSTMCellParams::create(store, "cell", d, p, {}, rng);
        for (Parameter* q : cell.all())
            for (double& v : q->value.values()) v = rng.uniform(-1.5, 1.5);
        std::vector<double> x(d), h0(p), c0(p);
        for (double& v : x) v = rng.uniform(-2, 2);
        for (double& v : h0) v = rng.uniform(-1, 1);
        for (double& v : c0) v = rng.uniform(-2, 2);

        auto pre = [&](const Parameter& wx, const Parameter& wh, const Parameter& b, std::size_t r) {
            double z = b.value[r];
            for (std::size_t k = 0; k < d; ++k) z += wx.value[r * d + k] * x[k];
            for (std::size_t k = 0; k < p; ++k) z += wh.value[r * p + k] * h0[k];
            return z;
        };
        Tape tape;
        const LayerState got = cell_step(cell, tape.constant(Tensor({d}, x)),
                                         {tape.constant(Tensor({p}, h0)), tape.constant(Tensor({p}, c0))});
        for (std::size_t r = 0; r < p; ++r) {
            const double i = sigm(pre(*cell.W_xi, *cell.W_hi, *cell.b_i, r));
            const double f = sigm(pre(*cell.W_xf, *cell.W_hf, *cell.b_f, r));
            const double o = sigm(pre(*cell.W_xo, *cell.W_ho, *cell.b_o, r));
            const double g = std::tanh(pre(*cell.W_xc, *cell.W_hc, *cell.b_c, r));
            const double c = f * c0[r] + i * g;
            const double h = o * std::tanh(c);
            worst = std::max({worst, std::abs(got.c.value()[r] - c), std::abs(got.h.value()[r] - h)});
        }
    }
    return {worst < 1e-12, fmt("100 random cells, max abs difference %.3e", worst)};
}

Outcome adam_oracle() {
    const double a = 2.5, b = 0.75, lr = 0.01, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    ParameterStore s;
    s.add("theta", Tensor::vector({-1.0}));
    Adam adam(s, {lr, b1, b2, eps});
    double theta = -1.0, m = 0.0, v = 0.0, worst = 0.0, first = 0.0;
    for (int t = 1; t <= 100; ++t) {
        const double g = a * (theta - b);
        s.at("theta").grad[0] = a * (s.at("theta").value[0] - b);
        const double before = s.at("theta").value[0];
        adam.step(s);
        if (t == 1) first = std::abs(s.at("theta").value[0] - before);
        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g * g;
        theta -= lr * (m / (1 - std::pow(b1, t))) / (std::sqrt(v / (1 - std::pow(b2, t))) + eps);
        worst = std::max(worst, std::abs(theta - s.at("theta").value[0]));
    }
    const double g0 = std::abs(a * (-1.0 - b));
    const double closed = lr * g0 / (g0 + eps);
    const bool first_ok = std::abs(first - closed) < 1e-12 * lr;
    return {worst < 1e-12 && first_ok,
            fmt("100 steps max difference %.3e; first step %.12g vs lr*|g|/(|g|+eps) %.12g", worst, first, closed)};
}

void force_attention(Model& model, double bias) {
    model.parameters().at("attention.fc.weight").value.fill(0.0);
    model.parameters().at("attention.fc.bias").value.fill(bias);
}

Outcome wiring_invariants() {
    const ModelConfig cfg = ModelConfig::tiny();
    const std::size_t n = cfg.num_frames;
    std::vector<std::string> failures;

    // (a) attention and decoder step t consume frame N+1-t.
    {
        Model model(cfg, 1);
        Tape tape;
        std::vector<Var> feats;
        for (std::size_t t = 0; t < n; ++t) feats.push_back(tape.constant(Tensor::filled({cfg.feature_dim}, 1.0 + t)));
        ForwardTrace trace;
        ForwardOptions opts;
        opts.trace = &trace;
        model.backbone(feats, opts);
        bool ok = trace.attention_frames.size() == n && trace.decoder_frames.size() == n;
        for (std::size_t t = 0; ok && t < n; ++t)
            ok = trace.encoder_frames[t] == t && trace.attention_frames[t] == n - 1 - t &&
                 trace.decoder_frames[t] == n - 1 - t;
        if (!ok) failures.push_back("reversed feeding");
    }
    // (b) a_t of ones equals the attention-free path bitwise.
    {
        ModelConfig without = cfg;
        without.attention_enabled = false;
        Model a(cfg, 2), b(without, 3);
        force_attention(a, 1000.0);
        for (auto& p : b.parameters()) p->value = a.parameters().at(p->name).value;
        Rng rng(4);
        Tape ta, tb;
        std::vector<Var> fa, fb;
        for (std::size_t t = 0; t < n; ++t) {
            Tensor f({cfg.feature_dim});
            for (double& v : f.values()) v = rng.uniform(-1, 1);
            fa.push_back(ta.constant(f));
            fb.push_back(tb.constant(f));
        }
        const Var la = a.classify(a.backbone(fa).representations);
        const Var lb = b.classify(b.backbone(fb).representations);
        if (!la.value().identical(lb.value())) failures.push_back("attention identity");
    }
    // (c) a one-hot w_class selects a single step's output exactly.
    {
        Model model(cfg, 5);
        Tensor& w = model.parameters().at("head.w_class").value;
        w.fill(0.0);
        w[3] = 1.0;
        Rng rng(6);
        Tape tape;
        std::vector<Var> feats;
        for (std::size_t t = 0; t < n; ++t) {
            Tensor f({cfg.feature_dim});
            for (double& v : f.values()) v = rng.uniform(-1, 1);
            feats.push_back(tape.constant(f));
        }
        const ForwardResult r = model.backbone(feats);
        const Tensor& W = model.parameters().at("head.fc.weight").value;
        const Tensor& bias = model.parameters().at("head.fc.bias").value;
        const Tensor logits = model.classify(r.representations).value();
        const Tensor& o = r.representations[3].value();
        bool ok = true;
        for (std::size_t k = 0; k < cfg.class_count; ++k) {
            double z = 0.0;
            for (std::size_t j = 0; j < o.size(); ++j) z += W[k * o.size() + j] * o[j];
            ok = ok && logits[k] == z + bias[k];
        }
        if (!ok) failures.push_back("one-hot class weighting");
    }
    // (d) the class phase leaves every non-head parameter byte unchanged.
    std::string freeze_detail;
    {
        SynthConfig data;
        data.feature_dim = cfg.feature_dim;
        data.signal_dims = 6;
        data.num_frames = n;
        data.train_per_class = 1;
        data.test_per_class = 1;
        ModelConfig mc = cfg;
        mc.class_count = 48;
        mc.attribute_arities = kDefaultArities;
        Model model(mc, 7);
        const Dataset ds = generate_dataset(data);
        TrainConfig tc;
        tc.epochs1 = 2;
        tc.epochs2 = 3;
        Trainer trainer(model, ds.train, tc);
        trainer.run(tc.epochs1);
        const auto before = backbone_hash(model);
        trainer.run();
        if (backbone_hash(model) != before) failures.push_back("class-phase freeze");
    }
    std::string detail = "reversed feeding, attention identity, one-hot class weighting, class-phase freeze";
    if (!failures.empty()) {
        detail = "failed:";
        for (const auto& f : failures) detail += " [" + f + "]";
    }
    return {failures.empty(), detail};
}

struct TrainedRun {
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
    double seconds = 0.0;
};

TrainedRun train_and_score(const RunConfig& config) {
    const auto start = Clock::now();
    const Dataset ds = generate_dataset(config.data);
    Model model(config.model, config.seed);
    Trainer trainer(model, ds.train, config.train);
    trainer.run();
    TrainedRun r;
    r.train_accuracy = evaluate(model, ds.train).accuracy;
    if (!ds.test.empty()) r.test_accuracy = evaluate(model, ds.test).accuracy;
    r.seconds = seconds_since(start);
    return r;
}

Outcome overfit() {
    const RunConfig c = RunConfig::build({}, {{"noise", "0"}, {"train_per_class", "1"}, {"test_per_class", "0"}});
    const TrainedRun r = train_and_score(c);
    return {r.train_accuracy == 1.0 && r.seconds < 300.0,
            fmt("48 clips, epochs %zu+%zu, train accuracy %.4f, %.1f s", c.train.epochs1, c.train.epochs2,
                r.train_accuracy, r.seconds)};
}

Outcome generalization() {
    struct Variant {
        const char* name;
        ConfigEntries flags;
    };
    const std::vector<Variant> variants{{"full", {}},
                                        {"no-attention", {{"attention", "0"}}},
                                        {"unreversed", {{"reverse", "0"}}},
                                        {"no-representation", {{"repr", "0"}}}};
    const std::vector<std::string> seeds{"0", "1", "2"};
    std::vector<double> means;
    std::printf("  %-18s", "variant");
    for (const auto& s : seeds) std::printf("  seed %-4s", s.c_str());
    std::printf("  %-8s  %s\n", "mean", "time");
    for (const auto& v : variants) {
        double sum = 0.0, secs = 0.0;
        std::printf("  %-18s", v.name);
        std::fflush(stdout);
        for (const auto& s : seeds) {
            ConfigEntries flags = v.flags;
            flags.emplace_back("seed", s);
            const TrainedRun r = train_and_score(RunConfig::build({}, flags));
            sum += r.test_accuracy;
            secs += r.seconds;
            std::printf("  %-9.4f", r.test_accuracy);
            std::fflush(stdout);
        }
        means.push_back(sum / static_cast<double>(seeds.size()));
        std::printf("  %-8.4f  %.0f s\n", means.back(), secs);
    }
    std::string detail = fmt("mean test accuracy full %.4f, no-attention %.4f (gate)", means[0], means[1]);
    for (std::size_t i = 2; i < variants.size(); ++i)
        detail += fmt("; %s %.4f (%s)", variants[i].name, means[i], means[0] >= means[i] ? "full ahead" : "full behind");
    return {means[0] >= means[1], detail};
}

LocalizationSummary localization(const Model& model, const std::vector<SyntheticSample>& samples) {
    LocalizationSummary summary;
    for (const auto& s : samples) {
        const Inference inf = infer(model, s, true);
        if (s.frames.frame_count() != inf.attention.size()) continue;
        for (std::size_t t = 0; t < inf.attention.size(); ++t)
            summary.add(localize(attention_map(inf.attention[t], inf.maps[t]), apply_crop(s.masks[t], *inf.crop)));
    }
    return summary;
}

Outcome attention_localization() {
    const auto start = Clock::now();
    const RunConfig c = RunConfig::build({}, {{"mode", "image"}});
    const Dataset ds = generate_dataset(c.data);
    Model model(c.model, c.seed);
    const LocalizationSummary untrained = localization(model, ds.test);
    Trainer trainer(model, ds.train, c.train);
    trainer.run();
    const LocalizationSummary trained = localization(model, ds.test);
    const double acc = evaluate(model, ds.test).accuracy;
    return {trained.frames > 0 && trained.hit_rate() >= 0.6,
            fmt("%zu test frames, inside>outside on %.4f (mean inside %.4f, outside %.4f), test accuracy %.4f; "
                "untrained baseline %.4f; %.0f s",
                trained.frames, trained.hit_rate(), trained.mean_inside, trained.mean_outside, acc,
                untrained.hit_rate(), seconds_since(start))};
}

Outcome serialization() {
    std::vector<std::string> failures;
    const fs::path dir = scratch_root() / "serialization";
    fs::create_directories(dir);

    SynthConfig data;
    data.feature_dim = 8;
    data.signal_dims = 6;
    data.num_frames = 6;
    data.train_per_class = 1;
    data.test_per_class = 1;
    const Dataset ds = generate_dataset(data);
    ModelConfig mc;
    mc.feature_dim = 8;
    mc.encoder_hidden = 8;
    mc.attention_hidden = 8;
    mc.decoder_hidden = 8;
    mc.depth = 1;
    mc.num_frames = 6;
    mc.precision = Precision::standard;
    mc.extractor.output_dim = 8;
    TrainConfig tc;
    tc.epochs1 = 3;
    tc.epochs2 = 3;

    // Checkpoint roundtrip after some training.
    {
        Model model(mc, 1);
        Trainer trainer(model, ds.train, tc);
        trainer.run(4);
        const std::string path = (dir / "a.astc").string();
        save_checkpoint(model, 1, tc, trainer.state(), path);
        const LoadedCheckpoint back = load_checkpoint(path);
        bool same = true;
        for (std::size_t i = 0; i < model.parameters().size(); ++i)
            same = same && model.parameters()[i].value.identical(back.model->parameters()[i].value);
        same = same && serialize_checkpoint(*back.model, 1, back.data.train_config, back.data.trainer) == file_bytes(path);
        if (!same) failures.push_back("checkpoint roundtrip");
    }
    // Feature files at both element widths.
    for (std::size_t width : {4u, 8u}) {
        FeatureSequence seq = ds.train[0].features;
        if (width == 4)
            for (auto& v : seq.vectors)
                for (double& x : v.values()) x = round_to(Precision::standard, x);
        const std::string path = (dir / ("f" + std::to_string(width) + ".feat")).string();
        save_features(seq, path, width);
        const FeatureSequence back = load_features(path);
        bool same = back.vectors.size() == seq.vectors.size();
        for (std::size_t t = 0; same && t < seq.vectors.size(); ++t) same = back.vectors[t].identical(seq.vectors[t]);
        if (!same) failures.push_back("feature file width " + std::to_string(width));
    }
    // Resume from a checkpoint equals the uninterrupted run, step by step.
    std::vector<double> whole_losses;
    Model whole(mc, 2);
    {
        Trainer t(whole, ds.train, tc);
        t.on_step([&](const StepInfo& s) { whole_losses.push_back(s.loss); });
        t.run();
    }
    for (std::size_t cut : {2u, 4u}) {
        std::vector<double> losses;
        const std::string path = (dir / ("cut" + std::to_string(cut) + ".astc")).string();
        {
            Model m(mc, 2);
            Trainer t(m, ds.train, tc);
            t.on_step([&](const StepInfo& s) { losses.push_back(s.loss); });
            t.run(cut);
            save_checkpoint(m, 2, tc, t.state(), path);
        }
        LoadedCheckpoint ck = load_checkpoint(path);
        Trainer t(*ck.model, ds.train, ck.data.train_config);
        t.restore(ck.data.trainer);
        t.on_step([&](const StepInfo& s) { losses.push_back(s.loss); });
        t.run();
        bool same = losses == whole_losses;
        for (std::size_t i = 0; same && i < whole.parameters().size(); ++i)
            same = whole.parameters()[i].value.identical(ck.model->parameters()[i].value);
        if (!same) failures.push_back("resume after epoch " + std::to_string(cut));
    }
    std::string detail = fmt("checkpoint bitwise, feature files (4 and 8 bytes), resume in both phases over %zu steps",
                             whole_losses.size());
    if (!failures.empty()) {
        detail = "failed:";
        for (const auto& f : failures) detail += " [" + f + "]";
    }
    return {failures.empty(), detail};
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(ASTNET_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome determinism() {
    const fs::path root = scratch_root() / "determinism";
    if (run_cli("gen-data --train-per-class 2 --test-per-class 1 --out " + root.string()) != 0)
        return {false, "gen-data failed"};
    const std::string manifest = (root / "data" / "manifest.txt").string();
    for (const char* run : {"run1", "run2"})
        if (run_cli("train --seed 7 --manifest " + manifest + " --out " + (root / run).string()) != 0)
            return {false, std::string("train failed for ") + run};
    const bool metrics = file_bytes(root / "run1" / "metrics.txt") == file_bytes(root / "run2" / "metrics.txt");
    const bool ckpt = file_bytes(root / "run1" / "checkpoint.astc") == file_bytes(root / "run2" / "checkpoint.astc");
    return {metrics && ckpt, fmt("metrics logs %s, checkpoints %s (%zu bytes)", metrics ? "identical" : "differ",
                                 ckpt ? "identical" : "differ",
                                 file_bytes(root / "run1" / "checkpoint.astc").size())};
}

}  // namespace

int main() {
    struct Criterion {
        int number;
        const char* name;
        std::function<Outcome()> check;
    };
    const std::vector<Criterion> criteria{
        {1, "gradient correctness", gradient_correctness},
        {2, "LSTM cell oracle", lstm_cell_oracle},
        {3, "Adam oracle", adam_oracle},
        {4, "wiring invariants", wiring_invariants},
        {5, "overfit capability", overfit},
        {6, "generalization ordering", generalization},
        {7, "attention localization", attention_localization},
        {8, "serialization", serialization},
        {9, "determinism", determinism},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        Outcome o;
        try {
            o = c.check();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("criterion %d %s: %s - %s\n", c.number, c.name, o.pass ? "PASS" : "FAIL", o.detail.c_str());
        std::fflush(stdout);
    }
    std::error_code ec;
    fs::remove_all(scratch_root(), ec);
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
