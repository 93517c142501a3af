#include "astnet/training.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "astnet/errors.hpp"
#include "text_util.hpp"

namespace astnet {

void TrainConfig::validate() const {
    if (batch_size == 0) throw ContractError("train config: batch_size must be positive");
    if (!(learning_rate > 0.0) || !(head_learning_rate > 0.0))
        throw ContractError("train config: learning rates must be positive");
    if (!(clip_norm >= 0.0)) throw ContractError("train config: clip_norm must be non-negative");
}

std::string TrainConfig::serialize() const {
    std::string s;
    auto kv = [&](const char* k, const std::string& v) { s += std::string(k) + "=" + v + "\n"; };
    kv("epochs1", std::to_string(epochs1));
    kv("epochs2", std::to_string(epochs2));
    kv("batch_size", std::to_string(batch_size));
    kv("seed", std::to_string(seed));
    kv("learning_rate", text::format_real(learning_rate));
    kv("head_learning_rate", text::format_real(head_learning_rate));
    kv("clip_norm", text::format_real(clip_norm));
    kv("representation_enabled", representation_enabled ? "1" : "0");
    return s;
}

bool TrainConfig::set(const std::string& key, const std::string& value) {
    try {
        if (key == "epochs1") epochs1 = text::to_size(value);
        else if (key == "epochs2") epochs2 = text::to_size(value);
        else if (key == "batch_size" || key == "batch") batch_size = text::to_size(value);
        else if (key == "seed") seed = text::to_size(value);
        else if (key == "learning_rate" || key == "lr") learning_rate = text::to_real(value);
        else if (key == "head_learning_rate" || key == "head_lr") head_learning_rate = text::to_real(value);
        else if (key == "clip_norm") clip_norm = text::to_real(value);
        else if (key == "representation_enabled" || key == "repr") representation_enabled = text::parse_bool(value);
        else return false;
    } catch (const std::invalid_argument&) {
        throw UsageError("invalid value '" + value + "' for '" + key + "'");
    } catch (const std::out_of_range&) {
        throw UsageError("value out of range for '" + key + "'");
    }
    return true;
}

TrainConfig TrainConfig::parse(const std::string& body) {
    TrainConfig cfg;
    text::for_each_entry(body, "train config", [&](const std::string& key, const std::string& value, std::size_t) {
        if (!cfg.set(key, value)) throw FormatError("unknown train config key '" + key + "'", 0);
    });
    cfg.validate();
    return cfg;
}

const char* to_string(TrainPhase p) {
    switch (p) {
        case TrainPhase::representation: return "repr";
        case TrainPhase::classification: return "class";
        case TrainPhase::done: return "done";
    }
    return "done";
}

TrainPhase parse_train_phase(const std::string& text) {
    for (auto p : {TrainPhase::representation, TrainPhase::classification, TrainPhase::done})
        if (text == to_string(p)) return p;
    throw FormatError("unknown training phase '" + text + "'", 0);
}

std::string metrics_header() {
    std::string s = "# epoch phase loss acc";
    for (const char* name : kAttributeNames) s += std::string(" acc_") + name;
    return s;
}

std::string format_record(const EpochRecord& r) {
    char buf[64];
    std::string s = std::to_string(r.epoch) + " " + to_string(r.phase);
    std::snprintf(buf, sizeof buf, " %.9g %.6f", r.loss, r.accuracy);
    s += buf;
    for (std::size_t i = 0; i < kAttributeCount; ++i) {
        if (r.attribute_accuracy) {
            std::snprintf(buf, sizeof buf, " %.6f", (*r.attribute_accuracy)[i]);
            s += buf;
        } else {
            s += " -";
        }
    }
    return s;
}

AugmentConfig scaled_augment(std::size_t size) {
    return {static_cast<std::size_t>(std::lround(static_cast<double>(size) * 245.0 / 224.0)), size};
}

namespace {

// Evenly spaced frame indices for evaluation.
std::vector<std::size_t> spaced_indices(std::size_t count, std::size_t n) {
    std::vector<std::size_t> idx(n);
    for (std::size_t k = 0; k < n; ++k) idx[k] = (2 * k + 1) * count / (2 * n);
    return idx;
}

std::vector<std::size_t> pick_frames(std::size_t count, std::size_t n, bool training, Rng& rng) {
    if (count == n) {
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        return idx;
    }
    return training ? sample_frame_indices(count, n, rng) : spaced_indices(count, n);
}

std::uint64_t phase_tag(TrainPhase p) { return static_cast<std::uint64_t>(p) + 1; }

}  // namespace

std::vector<Var> embed_sample(Tape& tape, const Model& model, const SyntheticSample& sample, bool training,
                              Rng& rng, std::vector<Var>* maps, CropWindow* crop) {
    const std::size_t n = model.config().num_frames;
    if (model.config().extractor.kind == ExtractorKind::file) {
        if (sample.features.length() == 0) throw UsageError("sample " + sample.clip_id + " carries no feature vectors");
        const auto idx = pick_frames(sample.features.length(), n, training, rng);
        FeatureSequence picked;
        for (std::size_t i : idx) picked.vectors.push_back(sample.features.vectors[i]);
        return model.embed(tape, picked);
    }
    if (sample.frames.frame_count() == 0) throw UsageError("sample " + sample.clip_id + " carries no image frames");
    const auto idx = pick_frames(sample.frames.frame_count(), n, training, rng);
    FrameVolume picked{sample.frames.height, sample.frames.width, {}};
    for (std::size_t i : idx) picked.frames.push_back(sample.frames.frames[i]);
    const std::size_t side = std::min(picked.height, picked.width);
    const FrameVolume view = augment(picked, training, rng, scaled_augment(side), crop);
    return model.embed(tape, view, maps);
}

Trainer::Trainer(Model& model, std::span<const SyntheticSample> train, const TrainConfig& config)
    : model_(model), train_(train), config_(config) {
    config_.validate();
    if (train_.empty()) throw UsageError("training split is empty");
    enter(config_.representation_enabled ? TrainPhase::representation : TrainPhase::classification);
}

std::size_t Trainer::phase_epochs(TrainPhase phase) const {
    switch (phase) {
        case TrainPhase::representation: return config_.representation_enabled ? config_.epochs1 : 0;
        case TrainPhase::classification:
            return config_.representation_enabled ? config_.epochs2 : config_.epochs1 + config_.epochs2;
        case TrainPhase::done: return 0;
    }
    return 0;
}

void Trainer::apply_stage() {
    switch (state_.phase) {
        case TrainPhase::representation: model_.set_stage(TrainingStage::representation); break;
        case TrainPhase::classification:
            model_.set_stage(config_.representation_enabled ? TrainingStage::classification_frozen
                                                            : TrainingStage::classification_full);
            break;
        case TrainPhase::done: model_.set_stage(TrainingStage::none); break;
    }
}

AdamConfig Trainer::adam_config(TrainPhase phase) const {
    const bool head_only = phase == TrainPhase::classification && config_.representation_enabled;
    return AdamConfig{head_only ? config_.head_learning_rate : config_.learning_rate};
}

void Trainer::enter(TrainPhase phase) {
    while (phase != TrainPhase::done && phase_epochs(phase) == 0)
        phase = phase == TrainPhase::representation ? TrainPhase::classification : TrainPhase::done;
    state_.phase = phase;
    state_.epoch = 0;
    state_.step = 0;
    state_.adam = Adam(model_.parameters(), adam_config(phase));
    cached_representations_.clear();
    apply_stage();
}

void Trainer::restore(TrainerState state) {
    if (state.phase != TrainPhase::done && state.epoch > phase_epochs(state.phase))
        throw FormatError("trainer state epoch exceeds the configured budget", 0);
    Adam adam(model_.parameters(), adam_config(state.phase));
    if (!state.adam.moments().empty()) {
        if (state.adam.moments().size() != adam.moments().size())
            throw FormatError("optimizer state does not match the model", 0);
        for (std::size_t i = 0; i < adam.moments().size(); ++i) {
            const auto& src = state.adam.moments()[i];
            if (src.name != adam.moments()[i].name || src.first.shape() != adam.moments()[i].first.shape())
                throw FormatError("optimizer state does not match parameter '" + adam.moments()[i].name + "'", 0);
            adam.moments()[i] = src;
        }
    }
    adam.set_steps(state.adam.steps());
    state.adam = std::move(adam);
    state_ = std::move(state);
    cached_representations_.clear();
    apply_stage();
}

void Trainer::run(std::optional<std::size_t> max_epochs) {
    std::size_t budget = max_epochs.value_or(std::numeric_limits<std::size_t>::max());
    while (!done() && budget > 0) {
        EpochRecord record = run_epoch();
        --budget;
        state_.history.push_back(record);
        ++state_.epoch;
        if (epoch_observer_) epoch_observer_(record);
        if (state_.epoch >= phase_epochs(state_.phase))
            enter(state_.phase == TrainPhase::representation ? TrainPhase::classification : TrainPhase::done);
    }
}

void Trainer::build_representation_cache() {
    cached_representations_.clear();
    cached_representations_.reserve(train_.size());
    for (const auto& sample : train_) {
        Tape tape(model_.config().precision);
        Rng unused(0);
        const auto features = embed_sample(tape, model_, sample, false, unused);
        const ForwardResult r = model_.backbone(features);
        std::vector<Tensor> reps;
        for (const Var& v : r.representations) reps.push_back(v.value());
        cached_representations_.push_back(std::move(reps));
    }
}

EpochRecord Trainer::run_epoch() {
    const TrainPhase phase = state_.phase;
    const std::uint64_t tag = phase_tag(phase);
    const std::uint64_t epoch = state_.epoch;
    // The frozen backbone is deterministic in evaluation mode, so its
    // representations are computed once per phase.
    const bool frozen = phase == TrainPhase::classification && config_.representation_enabled;
    if (frozen && cached_representations_.empty()) build_representation_cache();

    std::vector<std::size_t> order(train_.size());
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng = Rng::derive(config_.seed, {tag, epoch, 0});
    shuffle_rng.shuffle(std::span<std::size_t>(order));

    double loss_sum = 0.0;
    std::size_t correct = 0;
    std::array<std::size_t, kAttributeCount> attr_correct{};
    const std::size_t n = order.size();
    for (std::size_t start = 0; start < n; start += config_.batch_size) {
        const std::size_t end = std::min(n, start + config_.batch_size);
        const double scale = 1.0 / static_cast<double>(end - start);
        double batch_loss = 0.0;
        for (std::size_t b = start; b < end; ++b) {
            const std::size_t index = order[b];
            const SyntheticSample& sample = train_[index];
            Rng rng = Rng::derive(config_.seed, {tag, epoch, 1, index});
            ForwardOptions options{true, &rng, nullptr};
            Tape tape(model_.config().precision);
            Var loss;
            if (phase == TrainPhase::representation) {
                const auto features = embed_sample(tape, model_, sample, true, rng);
                const ForwardResult r = model_.forward_full(features, sample.labels, Phase::representation, options);
                loss = r.loss;
                bool all = true;
                for (std::size_t i = 0; i < kAttributeCount; ++i) {
                    const bool ok = argmax(r.attribute_logits[i].value().values()) == sample.labels.attributes[i];
                    attr_correct[i] += ok;
                    all = all && ok;
                }
                correct += all;
            } else {
                Var logits;
                if (frozen) {
                    std::vector<Var> reps;
                    for (const Tensor& t : cached_representations_[index]) reps.push_back(tape.constant(t));
                    logits = model_.classify(reps, options);
                    loss = model_.class_loss(logits, sample.labels.class_index);
                } else {
                    const auto features = embed_sample(tape, model_, sample, true, rng);
                    const ForwardResult r = model_.forward_full(features, sample.labels, Phase::classification, options);
                    logits = r.class_logits;
                    loss = r.loss;
                }
                correct += argmax(logits.value().values()) == sample.labels.class_index;
            }
            const double value = loss.value()[0];
            batch_loss += value;
            loss_sum += value;
            tape.backward(loss, scale);
        }
        clip_gradients(model_.parameters(), config_.clip_norm);
        state_.adam.step(model_.parameters());
        ++state_.step;
        if (step_observer_) step_observer_({phase, state_.epoch + 1, state_.step, batch_loss * scale});
    }

    EpochRecord record;
    record.phase = phase;
    record.epoch = state_.epoch + 1;
    record.loss = loss_sum / static_cast<double>(n);
    record.accuracy = static_cast<double>(correct) / static_cast<double>(n);
    if (phase == TrainPhase::representation) {
        std::array<double, kAttributeCount> acc{};
        for (std::size_t i = 0; i < kAttributeCount; ++i)
            acc[i] = static_cast<double>(attr_correct[i]) / static_cast<double>(n);
        record.attribute_accuracy = acc;
    }
    return record;
}

std::size_t argmax(std::span<const double> values) {
    if (values.empty()) throw ContractError("argmax of an empty vector");
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] > values[best]) best = i;
    return best;
}

Inference infer(const Model& model, const SyntheticSample& sample, bool keep_maps) {
    Tape tape(model.config().precision);
    Rng unused(0);
    std::vector<Var> maps;
    CropWindow crop;
    const bool image = model.config().extractor.kind == ExtractorKind::tiny_conv;
    const auto features = embed_sample(tape, model, sample, false, unused, keep_maps && image ? &maps : nullptr,
                                       image ? &crop : nullptr);
    const ForwardResult r = model.backbone(features);
    Inference out;
    out.class_logits = model.classify(r.representations).value();
    const auto attrs = model.attribute_heads(r.representations);
    for (std::size_t i = 0; i < kAttributeCount; ++i) out.attribute_logits[i] = attrs[i].value();
    if (r.attention) {
        out.attention.resize(features.size(), Tensor({1}));
        for (std::size_t t = 0; t < r.attention->frames.size(); ++t)
            out.attention[r.attention->frames[t]] = r.attention->attention[t].value();
    }
    for (const Var& m : maps) out.maps.push_back(m.value());
    if (image) out.crop = crop;
    return out;
}

EvalReport evaluate(const Model& model, std::span<const SyntheticSample> samples) {
    const std::size_t classes = model.config().class_count;
    EvalReport report;
    report.class_counts.assign(classes, 0);
    report.confusion.assign(classes, std::vector<std::size_t>(classes, 0));
    std::array<std::size_t, kAttributeCount> attr_correct{};
    for (const auto& sample : samples) {
        const std::size_t truth = sample.labels.class_index;
        if (truth >= classes) throw LabelError("class " + std::to_string(truth) + " out of range");
        const Inference inf = infer(model, sample);
        const std::size_t pred = argmax(inf.class_logits.values());
        report.predictions.push_back(pred);
        ++report.class_counts[truth];
        ++report.confusion[truth][pred];
        report.correct += pred == truth;
        for (std::size_t i = 0; i < kAttributeCount; ++i)
            attr_correct[i] += argmax(inf.attribute_logits[i].values()) == sample.labels.attributes[i];
    }
    report.samples = samples.size();
    const double total = static_cast<double>(report.samples);
    report.accuracy = report.samples ? static_cast<double>(report.correct) / total : 0.0;
    for (std::size_t k = 0; k < classes; ++k)
        report.per_class_accuracy.push_back(report.class_counts[k]
                                                ? static_cast<double>(report.confusion[k][k]) /
                                                      static_cast<double>(report.class_counts[k])
                                                : std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = 0; i < kAttributeCount; ++i)
        report.attribute_accuracy[i] = report.samples ? static_cast<double>(attr_correct[i]) / total : 0.0;
    return report;
}

std::string format_report(const EvalReport& report, bool with_attributes) {
    char buf[128];
    std::string s;
    std::snprintf(buf, sizeof buf, "samples %zu\ncorrect %zu\naccuracy %.6f\n", report.samples, report.correct,
                  report.accuracy);
    s += buf;
    if (with_attributes)
        for (std::size_t i = 0; i < kAttributeCount; ++i) {
            std::snprintf(buf, sizeof buf, "accuracy_%s %.6f\n", kAttributeNames[i], report.attribute_accuracy[i]);
            s += buf;
        }
    // Confusion summary: classes with samples, and the most frequent wrong guess.
    for (std::size_t k = 0; k < report.class_counts.size(); ++k) {
        if (report.class_counts[k] == 0) continue;
        std::size_t worst = k, worst_count = 0;
        for (std::size_t j = 0; j < report.confusion[k].size(); ++j)
            if (j != k && report.confusion[k][j] > worst_count) {
                worst = j;
                worst_count = report.confusion[k][j];
            }
        std::snprintf(buf, sizeof buf, "class %zu n=%zu correct=%zu", k, report.class_counts[k], report.confusion[k][k]);
        s += buf;
        if (worst_count) {
            std::snprintf(buf, sizeof buf, " confused_with=%zu x%zu", worst, worst_count);
            s += buf;
        }
        s += "\n";
    }
    return s;
}

}  // namespace astnet
