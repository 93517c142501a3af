#include "astnet/commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include "astnet/checkpoint.hpp"
#include "astnet/errors.hpp"
#include "astnet/ops.hpp"
#include "astnet/viz.hpp"

namespace astnet {

namespace fs = std::filesystem;

namespace {

std::string fmt(const char* pattern, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, pattern, v);
    return buf;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory '" + dir + "'");
}

std::string manifest_path(const RunConfig& c) {
    return c.manifest.empty() ? (fs::path(c.out_dir) / "data" / "manifest.txt").string() : c.manifest;
}

std::string checkpoint_path(const RunConfig& c) {
    return c.checkpoint.empty() ? (fs::path(c.out_dir) / "checkpoint.astc").string() : c.checkpoint;
}

// The model must consume what the dataset provides.
void check_compatible(const ModelConfig& m, const Dataset& ds, bool from_checkpoint) {
    auto fail = [&](const std::string& msg) {
        if (from_checkpoint) throw FormatError("checkpoint does not match dataset: " + msg, 0);
        throw UsageError(msg);
    };
    const bool image = ds.config.mode == SampleMode::image;
    if (image && m.extractor.kind != ExtractorKind::tiny_conv) fail("image dataset needs a model with an image extractor");
    if (!image && m.extractor.kind != ExtractorKind::file) fail("vector dataset needs a model for precomputed features");
    if (!image && ds.config.feature_dim != m.feature_dim)
        fail("dataset feature_dim " + std::to_string(ds.config.feature_dim) + " vs model " + std::to_string(m.feature_dim));
    if (ds.table.size() != m.class_count)
        fail("dataset has " + std::to_string(ds.table.size()) + " classes, model " + std::to_string(m.class_count));
    for (std::size_t i = 0; i < kAttributeCount; ++i)
        if (ds.table.arities()[i] != m.attribute_arities[i]) fail("attribute arities differ");
}

}  // namespace

void cmd_gen_data(const RunConfig& config, const LineSink& out) {
    const Dataset ds = generate_dataset(config.data);
    const std::string dir = config.manifest.empty() ? (fs::path(config.out_dir) / "data").string()
                                                    : fs::path(config.manifest).parent_path().string();
    ensure_dir(dir.empty() ? "." : dir);
    const std::string manifest = write_dataset(ds, dir.empty() ? "." : dir);
    out("mode " + std::string(to_string(config.data.mode)));
    out("train " + std::to_string(ds.train.size()) + " test " + std::to_string(ds.test.size()));
    out("manifest " + manifest);
}

void cmd_train(const ConfigEntries& file, const ConfigEntries& flags, const LineSink& out) {
    RunConfig config = RunConfig::build(file, flags);
    const Dataset ds = load_dataset(manifest_path(config));
    if (!config.is_explicit("mode") && ds.config.mode != config.data.mode)
        config = RunConfig::build(file, flags, to_string(ds.config.mode));
    if (ds.config.mode == SampleMode::vector && !config.is_explicit("feature_dim")) {
        config.model.feature_dim = ds.config.feature_dim;
        config.model.extractor.output_dim = ds.config.feature_dim;
    }
    check_compatible(config.model, ds, false);
    if (ds.train.empty()) throw UsageError("training split is empty");

    Model model(config.model, config.seed);
    Trainer trainer(model, ds.train, config.train);
    ensure_dir(config.out_dir);
    const std::string metrics = (fs::path(config.out_dir) / "metrics.txt").string();
    std::ofstream log(metrics, std::ios::trunc);
    if (!log) throw IoError("cannot write '" + metrics + "'");
    log << metrics_header() << "\n";
    out(metrics_header());
    trainer.on_epoch([&](const EpochRecord& r) {
        log << format_record(r) << "\n";
        log.flush();
        out(format_record(r));
    });
    trainer.run();
    if (!log) throw IoError("failed writing '" + metrics + "'");
    const std::string ckpt = checkpoint_path(config);
    save_checkpoint(model, config.seed, config.train, trainer.state(), ckpt);
    out("parameters " + std::to_string(model.parameters().size()) + " elements " +
        std::to_string(model.parameters().element_count()));
    out("checkpoint " + ckpt);
    out("metrics " + metrics);
}

void cmd_eval(const RunConfig& config, const LineSink& out) {
    const LoadedCheckpoint ck = load_checkpoint(checkpoint_path(config));
    const Dataset ds = load_dataset(manifest_path(config));
    check_compatible(ck.model->config(), ds, true);
    const auto& samples = ds.split(config.split);
    if (samples.empty()) throw UsageError("split '" + config.split + "' is empty");
    const EvalReport report = evaluate(*ck.model, samples);
    out("split " + config.split);
    std::string body = format_report(report, ck.data.train_config.representation_enabled);
    std::size_t start = 0;
    while (start < body.size()) {
        const auto end = body.find('\n', start);
        out(body.substr(start, end - start));
        start = end == std::string::npos ? body.size() : end + 1;
    }
}

GradCheckReport check_model_gradients(Model& model, std::uint64_t seed, const GradCheckOptions& options) {
    const ModelConfig& cfg = model.config();
    Rng rng = Rng::derive(seed, {hash_string("gradcheck-sample")});
    Labels labels;
    labels.class_index = rng.below(cfg.class_count);
    for (std::size_t i = 0; i < kAttributeCount; ++i) labels.attributes[i] = rng.below(cfg.attribute_arities[i]);
    FeatureSequence seq;
    for (std::size_t t = 0; t < cfg.num_frames; ++t) {
        Tensor v({cfg.feature_dim});
        for (double& x : v.values()) x = rng.uniform(-1.0, 1.0);
        seq.vectors.push_back(std::move(v));
    }
    const TrainingStage previous = model.stage();
    model.parameters().set_all_trainable(true);
    std::vector<Parameter*> params;
    for (auto& p : model.parameters()) params.push_back(p.get());
    const LossBuilder build = [&](Tape& tape) {
        const auto features = model.embed(tape, seq);
        const ForwardResult r = model.backbone(features);
        const Var attr = Model::loss_representation(model.attribute_heads(r.representations), labels.attributes);
        const Var cls = model.class_loss(model.classify(r.representations), labels.class_index);
        return add(attr, cls);
    };
    GradCheckReport report;
    try {
        report = finite_diff_check(build, params, options);
    } catch (...) {
        model.set_stage(previous);
        throw;
    }
    model.set_stage(previous);
    return report;
}

bool cmd_gradcheck(const RunConfig& config, const LineSink& out) {
    ModelConfig tiny = ModelConfig::tiny();
    for (const char* key : {"attention", "attention_enabled", "reverse", "reverse_enabled"})
        if (config.is_explicit(key)) {
            tiny.attention_enabled = config.model.attention_enabled;
            tiny.reverse_enabled = config.model.reverse_enabled;
        }
    Model model(tiny, config.seed);
    GradCheckOptions options;
    if (config.inject_bug)
        options.tamper = [](const Parameter& p, std::vector<double>& grad) {
            if (p.name.find(".W_hf") != std::string::npos)
                for (double& g : grad) g *= 1.1;
        };
    const GradCheckReport report = check_model_gradients(model, config.seed, options);
    std::map<std::string, std::pair<std::size_t, std::size_t>> groups;  // prefix -> (passed, total)
    for (const auto& p : report.parameters) {
        out(std::string(p.passed ? "PASS " : "FAIL ") + p.name + " checked=" + std::to_string(p.checked) +
            fmt(" max_rel=%.3e", p.max_relative_error));
        auto& g = groups[p.name.substr(0, p.name.find('.'))];
        g.first += p.passed;
        ++g.second;
    }
    for (const auto& [name, g] : groups)
        out("group " + name + " " + std::to_string(g.first) + "/" + std::to_string(g.second) +
            (g.first == g.second ? " pass" : " FAIL"));
    out(std::string(report.passed() ? "gradcheck passed" : "gradcheck FAILED") +
        fmt(" max_rel=%.3e", report.max_relative_error()) + fmt(" tolerance=%.0e", options.tolerance));
    return report.passed();
}

void cmd_visualize(const RunConfig& config, const LineSink& out) {
    const LoadedCheckpoint ck = load_checkpoint(checkpoint_path(config));
    const Model& model = *ck.model;
    if (model.config().extractor.kind != ExtractorKind::tiny_conv)
        throw UsageError("checkpoint was trained on precomputed feature vectors, so no spatial maps are available; "
                         "train in image mode to visualize attention");
    if (!model.config().attention_enabled)
        throw UsageError("checkpoint has no attention network, so there are no attention maps to draw");
    const Dataset ds = load_dataset(manifest_path(config));
    check_compatible(model.config(), ds, true);
    const auto& samples = ds.split(config.split);
    if (samples.empty()) throw UsageError("split '" + config.split + "' is empty");
    const std::size_t n = std::min(config.clips, samples.size());
    LocalizationSummary summary;
    for (std::size_t k = 0; k < n; ++k) {
        const SyntheticSample& s = samples[k];
        const Inference inf = infer(model, s, true);
        const fs::path dir = fs::path(config.out_dir) / "maps" / s.clip_id;
        ensure_dir(dir.string());
        const std::size_t frames = inf.attention.size();
        const int digits = std::max<int>(3, static_cast<int>(std::to_string(frames - 1).size()));
        // Same frame picks as the forward pass: every frame when the clip has exactly N.
        const bool aligned = s.frames.frame_count() == frames;
        for (std::size_t t = 0; t < frames; ++t) {
            const Tensor grid = attention_map(inf.attention[t], inf.maps[t]);
            std::string name = std::to_string(t);
            name.insert(0, static_cast<std::size_t>(digits) - std::min<std::size_t>(name.size(), digits), '0');
            export_pgm(grid, (dir / ("map_" + name + ".pgm")).string());
            if (aligned) {
                const Tensor view = apply_crop(s.frames.frames[t], *inf.crop);
                export_strip(view, grid, (dir / ("strip_" + name + ".ppm")).string());
                if (!s.masks.empty()) summary.add(localize(grid, apply_crop(s.masks[t], *inf.crop)));
            }
        }
        out("clip " + s.clip_id + " frames " + std::to_string(frames) + " dir " + dir.string());
    }
    if (summary.frames)
        out("localization frames " + std::to_string(summary.frames) + fmt(" inside_gt_outside %.4f", summary.hit_rate()) +
            fmt(" mean_inside %.4f", summary.mean_inside) + fmt(" mean_outside %.4f", summary.mean_outside));
}

}  // namespace astnet
