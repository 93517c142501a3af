#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "astnet/features.hpp"
#include "astnet/labels.hpp"
#include "astnet/lstm.hpp"
#include "astnet/parameter.hpp"
#include "astnet/rng.hpp"
#include "astnet/tape.hpp"

namespace astnet {

enum class FinalActivation { softmax, sigmoid };
enum class AttentionActivation { sigmoid, linear };
enum class Phase { representation, classification };

const char* to_string(FinalActivation a);
const char* to_string(AttentionActivation a);
const char* to_string(Phase p);

struct ModelConfig {
    std::size_t feature_dim = 1024;
    std::size_t encoder_hidden = 512;
    std::size_t attention_hidden = 512;
    std::size_t decoder_hidden = 256;
    std::size_t depth = 2;
    std::size_t num_frames = 64;
    std::size_t class_count = 48;
    std::array<std::size_t, kAttributeCount> attribute_arities{4, 8, 8, 4};
    double dropout_rate = 0.2;
    bool attention_enabled = true;
    bool reverse_enabled = true;
    FinalActivation final_activation = FinalActivation::softmax;
    AttentionActivation attention_activation = AttentionActivation::sigmoid;
    LstmInit lstm_init;
    Precision precision = Precision::standard;
    // kind == file: the model consumes precomputed feature vectors.
    ExtractorConfig extractor{ExtractorKind::file, 1024, {16, 32, 64}};

    void validate() const;

    // Flat "key=value" lines; parse() accepts exactly what serialize() emits
    // and ignores blank lines and '#' comments.
    std::string serialize() const;
    static ModelConfig parse(const std::string& text);
    // Applies one key=value override; returns false for unknown keys.
    bool set(const std::string& key, const std::string& value);

    // m=8, hidden 8/8/8, depth 2, N=5, c=4, arities [2,2,2,2], high precision.
    static ModelConfig tiny();
};

// Attention outputs in decoder-consumption order.
struct AttentionOutput {
    std::vector<Var> attention;        // a_t in R^m
    std::vector<Var> gated;            // f_{frame(t)} * a_t
    std::vector<std::size_t> frames;   // frame index (0-based) consumed at step t
};

// Records which input frame each network step consumed.
struct ForwardTrace {
    std::vector<std::size_t> encoder_frames;
    std::vector<std::size_t> attention_frames;
    std::vector<std::size_t> decoder_frames;
};

struct ForwardOptions {
    bool training = false;
    Rng* rng = nullptr;  // required when training with dropout
    ForwardTrace* trace = nullptr;
};

struct ForwardResult {
    Var loss;
    Var class_logits;                                    // valid in the classification phase
    std::array<Var, kAttributeCount> attribute_logits;   // valid in the representation phase
    std::optional<AttentionOutput> attention;
    std::vector<Var> representations;
};

// Which parameters are updated.
enum class TrainingStage {
    representation,         // everything except the class head
    classification_frozen,  // class head only (after the representation phase)
    classification_full,    // everything (no representation phase)
    none,
};

const char* to_string(TrainingStage s);
TrainingStage parse_training_stage(const std::string& text);

// Encoder / attention network / decoder with attribute and class heads.
class Model {
public:
    Model(const ModelConfig& config, std::uint64_t seed);

    const ModelConfig& config() const noexcept { return config_; }
    ParameterStore& parameters() noexcept { return params_; }
    const ParameterStore& parameters() const noexcept { return params_; }
    const FeatureExtractor& extractor() const noexcept { return extractor_; }

    void set_stage(TrainingStage stage);
    TrainingStage stage() const noexcept { return stage_; }

    // Frame features as tape values: constants for precomputed vectors, or the
    // differentiable extractor output for image clips.
    std::vector<Var> embed(Tape& tape, const FeatureSequence& features) const;
    std::vector<Var> embed(Tape& tape, const FrameVolume& frames, std::vector<Var>* maps = nullptr) const;

    // Encoder over f_1..f_N from a zero state; returns the state after f_N.
    LSTMState encode(std::span<const Var> features, const ForwardOptions& options = {}) const;
    AttentionOutput attend(std::span<const Var> features, const LSTMState& context,
                           const ForwardOptions& options = {}) const;
    // Runs the decoder over `inputs` (already in consumption order).
    std::vector<Var> decode(std::span<const Var> inputs, const LSTMState& context) const;
    // o = sum_n w_class[n] * fc(dropout(f^r_n))
    Var classify(std::span<const Var> representations, const ForwardOptions& options = {}) const;
    std::array<Var, kAttributeCount> attribute_heads(std::span<const Var> representations,
                                                     const ForwardOptions& options = {}) const;

    static Var loss_representation(const std::array<Var, kAttributeCount>& logits,
                                   const AttributeTuple& labels);
    Var class_loss(Var logits, std::size_t label) const;

    // Encoder, attention and decoder only: fills `attention` and `representations`.
    ForwardResult backbone(std::span<const Var> features, const ForwardOptions& options = {}) const;
    ForwardResult forward_full(std::span<const Var> features, const Labels& labels, Phase phase,
                               const ForwardOptions& options = {}) const;

    // Frame order seen by the attention network and decoder.
    std::vector<std::size_t> consumption_order(std::size_t n) const;

    static const std::vector<std::string>& class_head_prefixes();
    static const std::vector<std::string>& attribute_head_prefixes();

private:
    struct Linear {
        Parameter* weight = nullptr;
        Parameter* bias = nullptr;
    };
    Linear make_linear(const std::string& prefix, std::size_t out, std::size_t in, Rng& rng);
    Var apply_linear(const Linear& fc, Var x) const;
    Var aggregate(const Linear& fc, Parameter* weights, std::span<const Var> reps,
                  const ForwardOptions& options) const;

    ModelConfig config_;
    ParameterStore params_;
    FeatureExtractor extractor_;
    StackedLSTM encoder_;
    StackedLSTM attention_;
    Linear attention_fc_;
    StateProjection attention_init_;
    StackedLSTM decoder_;
    StateProjection decoder_init_;
    Linear class_fc_;
    Parameter* class_weights_ = nullptr;
    std::array<Linear, kAttributeCount> attr_fc_;
    std::array<Parameter*, kAttributeCount> attr_weights_{};
    TrainingStage stage_ = TrainingStage::representation;
};

}  // namespace astnet
