#include "astnet/model.hpp"

#include <cstdio>
#include <sstream>

#include "astnet/errors.hpp"
#include "astnet/ops.hpp"
#include "text_util.hpp"

namespace astnet {

const char* to_string(FinalActivation a) { return a == FinalActivation::softmax ? "softmax" : "sigmoid"; }
const char* to_string(AttentionActivation a) { return a == AttentionActivation::sigmoid ? "sigmoid" : "linear"; }
const char* to_string(Phase p) { return p == Phase::representation ? "repr" : "class"; }

const char* to_string(TrainingStage s) {
    switch (s) {
        case TrainingStage::representation: return "representation";
        case TrainingStage::classification_frozen: return "classification_frozen";
        case TrainingStage::classification_full: return "classification_full";
        case TrainingStage::none: return "none";
    }
    return "none";
}

TrainingStage parse_training_stage(const std::string& text) {
    for (auto s : {TrainingStage::representation, TrainingStage::classification_frozen,
                   TrainingStage::classification_full, TrainingStage::none})
        if (text == to_string(s)) return s;
    throw FormatError("unknown training stage '" + text + "'", 0);
}

std::string to_string(const AttributeTuple& t) {
    return std::to_string(t.takeoff) + " " + std::to_string(t.somersault) + " " +
           std::to_string(t.twist) + " " + std::to_string(t.flight);
}

using text::format_real;
using text::join;
using text::parse_bool;
using text::split_sizes;

void ModelConfig::validate() const {
    auto positive = [](std::size_t v, const char* name) {
        if (v == 0) throw ContractError(std::string("model config: ") + name + " must be positive");
    };
    positive(feature_dim, "feature_dim");
    positive(encoder_hidden, "encoder_hidden");
    positive(attention_hidden, "attention_hidden");
    positive(decoder_hidden, "decoder_hidden");
    positive(depth, "depth");
    positive(num_frames, "num_frames");
    positive(class_count, "class_count");
    for (auto a : attribute_arities) positive(a, "attribute arity");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
        throw ContractError("model config: dropout_rate must lie in [0, 1)");
    if (extractor.kind == ExtractorKind::tiny_conv && extractor.output_dim != feature_dim)
        throw ContractError("model config: extractor output_dim must equal feature_dim");
}

std::string ModelConfig::serialize() const {
    std::string s;
    auto kv = [&](const char* k, const std::string& v) { s += std::string(k) + "=" + v + "\n"; };
    kv("feature_dim", std::to_string(feature_dim));
    kv("encoder_hidden", std::to_string(encoder_hidden));
    kv("attention_hidden", std::to_string(attention_hidden));
    kv("decoder_hidden", std::to_string(decoder_hidden));
    kv("depth", std::to_string(depth));
    kv("num_frames", std::to_string(num_frames));
    kv("class_count", std::to_string(class_count));
    kv("attribute_arities", join({attribute_arities.begin(), attribute_arities.end()}));
    kv("dropout_rate", format_real(dropout_rate));
    kv("attention_enabled", attention_enabled ? "1" : "0");
    kv("reverse_enabled", reverse_enabled ? "1" : "0");
    kv("final_activation", to_string(final_activation));
    kv("attention_activation", to_string(attention_activation));
    kv("glorot_uniform", lstm_init.glorot_uniform ? "1" : "0");
    kv("forget_bias", format_real(lstm_init.forget_bias));
    kv("precision", to_string(precision));
    kv("extractor", extractor.kind == ExtractorKind::tiny_conv ? "tiny-conv" : "file");
    kv("extractor_stages", join(extractor.stage_widths));
    return s;
}

bool ModelConfig::set(const std::string& key, const std::string& value) {
    try {
        if (key == "feature_dim") feature_dim = text::to_size(value);
        else if (key == "encoder_hidden") encoder_hidden = text::to_size(value);
        else if (key == "attention_hidden") attention_hidden = text::to_size(value);
        else if (key == "decoder_hidden") decoder_hidden = text::to_size(value);
        else if (key == "depth") depth = text::to_size(value);
        else if (key == "num_frames" || key == "frames") num_frames = text::to_size(value);
        else if (key == "class_count") class_count = text::to_size(value);
        else if (key == "attribute_arities") {
            auto v = split_sizes(value);
            if (v.size() != kAttributeCount) throw UsageError("attribute_arities needs exactly 4 entries");
            for (std::size_t i = 0; i < kAttributeCount; ++i) attribute_arities[i] = v[i];
        } else if (key == "dropout_rate" || key == "dropout") dropout_rate = text::to_real(value);
        else if (key == "attention_enabled" || key == "attention") attention_enabled = parse_bool(value);
        else if (key == "reverse_enabled" || key == "reverse") reverse_enabled = parse_bool(value);
        else if (key == "final_activation") {
            if (value == "softmax") final_activation = FinalActivation::softmax;
            else if (value == "sigmoid") final_activation = FinalActivation::sigmoid;
            else throw UsageError("final_activation must be softmax or sigmoid");
        } else if (key == "attention_activation") {
            if (value == "sigmoid") attention_activation = AttentionActivation::sigmoid;
            else if (value == "linear") attention_activation = AttentionActivation::linear;
            else throw UsageError("attention_activation must be sigmoid or linear");
        } else if (key == "glorot_uniform") lstm_init.glorot_uniform = parse_bool(value);
        else if (key == "forget_bias") lstm_init.forget_bias = text::to_real(value);
        else if (key == "precision") precision = parse_precision(value);
        else if (key == "extractor") {
            if (value == "tiny-conv") extractor.kind = ExtractorKind::tiny_conv;
            else if (value == "file") extractor.kind = ExtractorKind::file;
            else throw UsageError("extractor must be tiny-conv or file");
        } else if (key == "extractor_stages") extractor.stage_widths = split_sizes(value);
        else return false;
    } catch (const std::invalid_argument&) {
        throw UsageError("invalid value '" + value + "' for '" + key + "'");
    } catch (const std::out_of_range&) {
        throw UsageError("value out of range for '" + key + "'");
    }
    extractor.output_dim = feature_dim;
    return true;
}

ModelConfig ModelConfig::parse(const std::string& body) {
    ModelConfig cfg;
    text::for_each_entry(body, "model config", [&](const std::string& key, const std::string& value, std::size_t) {
        if (!cfg.set(key, value)) throw FormatError("unknown model config key '" + key + "'", 0);
    });
    cfg.validate();
    return cfg;
}

ModelConfig ModelConfig::tiny() {
    ModelConfig c;
    c.feature_dim = 8;
    c.encoder_hidden = 8;
    c.attention_hidden = 8;
    c.decoder_hidden = 8;
    c.depth = 2;
    c.num_frames = 5;
    c.class_count = 4;
    c.attribute_arities = {2, 2, 2, 2};
    c.precision = Precision::high;
    c.extractor.output_dim = 8;
    return c;
}

const std::vector<std::string>& Model::class_head_prefixes() {
    static const std::vector<std::string> p{"head.fc.", "head.w_class"};
    return p;
}

const std::vector<std::string>& Model::attribute_head_prefixes() {
    static const std::vector<std::string> p{"head.fc1.", "head.fc2.", "head.fc3.", "head.fc4.", "head.w_attr"};
    return p;
}

Model::Linear Model::make_linear(const std::string& prefix, std::size_t out, std::size_t in, Rng& rng) {
    Linear l;
    l.weight = &params_.add(prefix + ".weight", glorot_matrix(out, in, rng));
    l.bias = &params_.add(prefix + ".bias", Tensor({out}));
    return l;
}

Model::Model(const ModelConfig& config, std::uint64_t seed) : config_(config) {
    config_.extractor.output_dim = config_.feature_dim;
    config_.validate();
    Rng rng(seed);
    const auto& c = config_;
    if (c.extractor.kind == ExtractorKind::tiny_conv) extractor_ = FeatureExtractor(params_, c.extractor, rng);
    encoder_ = StackedLSTM(params_, "encoder", c.feature_dim, c.encoder_hidden, c.depth, c.lstm_init, rng);
    if (c.attention_enabled) {
        attention_ = StackedLSTM(params_, "attention", c.feature_dim, c.attention_hidden, c.depth, c.lstm_init, rng);
        attention_init_ = StateProjection(params_, "attention.init", c.encoder_hidden, c.attention_hidden, c.depth, rng);
        attention_fc_ = make_linear("attention.fc", c.feature_dim, c.attention_hidden, rng);
    }
    decoder_ = StackedLSTM(params_, "decoder", c.feature_dim, c.decoder_hidden, c.depth, c.lstm_init, rng);
    decoder_init_ = StateProjection(params_, "decoder.init", c.encoder_hidden, c.decoder_hidden, c.depth, rng);

    const double uniform_weight = 1.0 / static_cast<double>(c.num_frames);
    for (std::size_t i = 0; i < kAttributeCount; ++i) {
        const std::string idx = std::to_string(i + 1);
        attr_fc_[i] = make_linear("head.fc" + idx, c.attribute_arities[i], c.decoder_hidden, rng);
        attr_weights_[i] = &params_.add("head.w_attr" + idx, Tensor::filled({c.num_frames}, uniform_weight));
    }
    class_fc_ = make_linear("head.fc", c.class_count, c.decoder_hidden, rng);
    class_weights_ = &params_.add("head.w_class", Tensor::filled({c.num_frames}, uniform_weight));

    for (auto& p : params_) p->value.set_precision(c.precision), p->grad.set_precision(c.precision);
    set_stage(TrainingStage::representation);
}

void Model::set_stage(TrainingStage stage) {
    stage_ = stage;
    switch (stage) {
        case TrainingStage::representation:
            params_.set_all_trainable(true);
            for (auto& p : params_)
                for (const auto& prefix : class_head_prefixes())
                    if (p->name.compare(0, prefix.size(), prefix) == 0) p->trainable = false;
            break;
        case TrainingStage::classification_frozen:
            params_.set_trainable_prefixes(class_head_prefixes());
            break;
        case TrainingStage::classification_full:
            params_.set_all_trainable(true);
            break;
        case TrainingStage::none:
            params_.set_all_trainable(false);
            break;
    }
}

std::vector<Var> Model::embed(Tape& tape, const FeatureSequence& features) const {
    features.validate();
    if (features.dim() != config_.feature_dim)
        throw DimensionError("feature vectors have extent " + std::to_string(features.dim()) +
                             ", model expects " + std::to_string(config_.feature_dim));
    std::vector<Var> out;
    out.reserve(features.length());
    for (const auto& v : features.vectors) out.push_back(tape.constant(v));
    return out;
}

std::vector<Var> Model::embed(Tape& tape, const FrameVolume& frames, std::vector<Var>* maps) const {
    if (!extractor_.enabled())
        throw UsageError("model was configured for precomputed features, not image clips");
    auto out = extractor_.extract(tape, frames, maps != nullptr);
    if (maps) *maps = std::move(out.maps);
    return std::move(out.features);
}

std::vector<std::size_t> Model::consumption_order(std::size_t n) const {
    std::vector<std::size_t> order(n);
    for (std::size_t k = 0; k < n; ++k) order[k] = config_.reverse_enabled ? n - 1 - k : k;
    return order;
}

namespace {

void check_features(std::span<const Var> features, std::size_t m) {
    if (features.empty()) throw ContractError("model: empty feature sequence");
    for (const Var& f : features)
        if (f.shape() != Shape{m})
            throw DimensionError("feature vector " + shape_string(f.shape()) + " but model expects [" +
                                 std::to_string(m) + "]");
}

}  // namespace

LSTMState Model::encode(std::span<const Var> features, const ForwardOptions& options) const {
    check_features(features, config_.feature_dim);
    Tape& tape = *features.front().tape;
    if (options.trace) {
        options.trace->encoder_frames.clear();
        for (std::size_t i = 0; i < features.size(); ++i) options.trace->encoder_frames.push_back(i);
    }
    return run_sequence(encoder_, features, encoder_.zero_state(tape), Order::forward).final_state;
}

Var Model::apply_linear(const Linear& fc, Var x) const {
    Tape& tape = *x.tape;
    return add(matmul(tape.parameter(*fc.weight), x), tape.parameter(*fc.bias));
}

AttentionOutput Model::attend(std::span<const Var> features, const LSTMState& context,
                              const ForwardOptions& options) const {
    if (!config_.attention_enabled) throw ContractError("attend: attention network is disabled");
    check_features(features, config_.feature_dim);
    Rng fallback(0);
    Rng& rng = options.rng ? *options.rng : fallback;
    if (options.training && config_.dropout_rate > 0.0 && !options.rng)
        throw ContractError("attend: training-mode dropout needs an rng");

    AttentionOutput out;
    out.frames = consumption_order(features.size());
    LSTMState state = attention_init_.apply(context);
    for (std::size_t frame : out.frames) {
        StepResult r = attention_.step(features[frame], state);
        state = std::move(r.state);
        Var pre = apply_linear(attention_fc_, dropout(r.output, config_.dropout_rate, options.training, rng));
        Var a = config_.attention_activation == AttentionActivation::sigmoid ? sigmoid(pre) : pre;
        out.attention.push_back(a);
        out.gated.push_back(hadamard(features[frame], a));
    }
    if (options.trace) options.trace->attention_frames = out.frames;
    return out;
}

std::vector<Var> Model::decode(std::span<const Var> inputs, const LSTMState& context) const {
    check_features(inputs, config_.feature_dim);
    return run_sequence(decoder_, inputs, decoder_init_.apply(context), Order::forward).outputs;
}

Var Model::aggregate(const Linear& fc, Parameter* weights, std::span<const Var> reps,
                     const ForwardOptions& options) const {
    if (reps.size() != config_.num_frames)
        throw DimensionError("model: " + std::to_string(reps.size()) + " representations, expected N=" +
                             std::to_string(config_.num_frames));
    if (options.training && config_.dropout_rate > 0.0 && !options.rng)
        throw ContractError("training-mode dropout needs an rng");
    Rng fallback(0);
    Rng& rng = options.rng ? *options.rng : fallback;
    Tape& tape = *reps.front().tape;
    std::vector<Var> per_step;
    per_step.reserve(reps.size());
    for (const Var& r : reps)
        per_step.push_back(apply_linear(fc, dropout(r, config_.dropout_rate, options.training, rng)));
    return weighted_sum(tape.parameter(*weights), per_step);
}

Var Model::classify(std::span<const Var> representations, const ForwardOptions& options) const {
    return aggregate(class_fc_, class_weights_, representations, options);
}

std::array<Var, kAttributeCount> Model::attribute_heads(std::span<const Var> representations,
                                                        const ForwardOptions& options) const {
    std::array<Var, kAttributeCount> out;
    for (std::size_t i = 0; i < kAttributeCount; ++i)
        out[i] = aggregate(attr_fc_[i], attr_weights_[i], representations, options);
    return out;
}

Var Model::loss_representation(const std::array<Var, kAttributeCount>& logits, const AttributeTuple& labels) {
    Var total = softmax_cross_entropy(logits[0], labels[0]);
    for (std::size_t i = 1; i < kAttributeCount; ++i)
        total = add(total, softmax_cross_entropy(logits[i], labels[i]));
    return total;
}

Var Model::class_loss(Var logits, std::size_t label) const {
    return config_.final_activation == FinalActivation::softmax ? softmax_cross_entropy(logits, label)
                                                                 : sigmoid_binary_cross_entropy(logits, label);
}

ForwardResult Model::forward_full(std::span<const Var> features, const Labels& labels, Phase phase,
                                  const ForwardOptions& options) const {
    ForwardResult result = backbone(features, options);
    if (phase == Phase::representation) {
        for (std::size_t i = 0; i < kAttributeCount; ++i)
            if (labels.attributes[i] >= config_.attribute_arities[i])
                throw LabelError(std::string(kAttributeNames[i]) + " label " +
                                 std::to_string(labels.attributes[i]) + " out of range");
        result.attribute_logits = attribute_heads(result.representations, options);
        result.loss = loss_representation(result.attribute_logits, labels.attributes);
    } else {
        result.class_logits = classify(result.representations, options);
        result.loss = class_loss(result.class_logits, labels.class_index);
    }
    return result;
}

ForwardResult Model::backbone(std::span<const Var> features, const ForwardOptions& options) const {
    if (features.size() != config_.num_frames)
        throw DimensionError("model: got " + std::to_string(features.size()) + " frames, expected N=" +
                             std::to_string(config_.num_frames));
    ForwardResult result;
    const LSTMState context = encode(features, options);
    std::vector<Var> decoder_inputs;
    std::vector<std::size_t> frames;
    if (config_.attention_enabled) {
        result.attention = attend(features, context, options);
        decoder_inputs = result.attention->gated;
        frames = result.attention->frames;
    } else {
        frames = consumption_order(features.size());
        for (std::size_t f : frames) decoder_inputs.push_back(features[f]);
    }
    if (options.trace) options.trace->decoder_frames = frames;
    result.representations = decode(decoder_inputs, context);
    return result;
}

}  // namespace astnet
