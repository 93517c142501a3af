#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "astnet/adam.hpp"
#include "astnet/datasynth.hpp"
#include "astnet/model.hpp"

namespace astnet {

struct TrainConfig {
    std::size_t epochs1 = 30;  // representation phase
    std::size_t epochs2 = 15;  // classification phase
    std::size_t batch_size = 8;
    std::uint64_t seed = 0;
    double learning_rate = 3e-3;       // representation phase, and the no-representation path
    double head_learning_rate = 3e-2;  // class head on a frozen backbone
    double clip_norm = 0.0;  // 0 disables clipping
    bool representation_enabled = true;

    void validate() const;
    std::string serialize() const;
    static TrainConfig parse(const std::string& text);
    bool set(const std::string& key, const std::string& value);
};

enum class TrainPhase { representation, classification, done };

const char* to_string(TrainPhase p);
TrainPhase parse_train_phase(const std::string& text);

struct EpochRecord {
    TrainPhase phase = TrainPhase::representation;
    std::size_t epoch = 0;  // 1-based within the phase
    double loss = 0.0;
    double accuracy = 0.0;  // class accuracy, or all-four-attributes accuracy in phase 1
    std::optional<std::array<double, kAttributeCount>> attribute_accuracy;

    bool operator==(const EpochRecord&) const = default;
};

// "# epoch phase loss acc acc_takeoff acc_somersault acc_twist acc_flight"
std::string metrics_header();
// Space-separated, attribute columns "-" when absent.
std::string format_record(const EpochRecord& record);

struct TrainerState {
    TrainPhase phase = TrainPhase::representation;
    std::size_t epoch = 0;  // completed epochs in `phase`
    std::uint64_t step = 0; // optimizer steps in `phase`
    Adam adam;
    std::vector<EpochRecord> history;
};

struct StepInfo {
    TrainPhase phase;
    std::size_t epoch;
    std::uint64_t step;
    double loss;  // batch mean
};

// Frames of a sample as tape values. Image clips are resized and cropped
// (random offset when training, centred otherwise); clips longer or shorter
// than N are resampled.
std::vector<Var> embed_sample(Tape& tape, const Model& model, const SyntheticSample& sample, bool training,
                              Rng& rng, std::vector<Var>* maps = nullptr, CropWindow* crop = nullptr);

// Desk-scale analogue of resize-245 / crop-224 for frames of side `size`.
AugmentConfig scaled_augment(std::size_t size);

// Two-phase training: attribute heads first, then the class head on a frozen
// backbone. Without the representation phase, the class loss trains every
// parameter for epochs1 + epochs2 epochs.
class Trainer {
public:
    Trainer(Model& model, std::span<const SyntheticSample> train, const TrainConfig& config);

    // Continues from a saved state (phase, epoch, optimizer, history).
    void restore(TrainerState state);

    // Runs up to `max_epochs` more epochs, or to completion.
    void run(std::optional<std::size_t> max_epochs = std::nullopt);
    bool done() const noexcept { return state_.phase == TrainPhase::done; }

    const TrainerState& state() const noexcept { return state_; }
    const TrainConfig& config() const noexcept { return config_; }
    std::size_t phase_epochs(TrainPhase phase) const;

    void on_step(std::function<void(const StepInfo&)> fn) { step_observer_ = std::move(fn); }
    void on_epoch(std::function<void(const EpochRecord&)> fn) { epoch_observer_ = std::move(fn); }

private:
    AdamConfig adam_config(TrainPhase phase) const;
    void enter(TrainPhase phase);
    void apply_stage();
    EpochRecord run_epoch();
    void build_representation_cache();

    Model& model_;
    std::span<const SyntheticSample> train_;
    TrainConfig config_;
    TrainerState state_;
    std::vector<std::vector<Tensor>> cached_representations_;
    std::function<void(const StepInfo&)> step_observer_;
    std::function<void(const EpochRecord&)> epoch_observer_;
};

// Forward pass in evaluation mode with everything a caller may inspect.
struct Inference {
    Tensor class_logits;
    std::array<Tensor, kAttributeCount> attribute_logits;
    std::vector<Tensor> attention;    // a_t indexed by frame; empty without attention
    std::vector<Tensor> maps;         // [m x h' x w'] per frame when requested
    std::optional<CropWindow> crop;   // image clips
};

Inference infer(const Model& model, const SyntheticSample& sample, bool keep_maps = false);

// Index of the largest value; ties go to the lowest index.
std::size_t argmax(std::span<const double> values);

struct EvalReport {
    std::size_t samples = 0;
    std::size_t correct = 0;
    double accuracy = 0.0;
    std::vector<std::size_t> class_counts;
    std::vector<double> per_class_accuracy;        // NaN for classes without samples
    std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
    std::array<double, kAttributeCount> attribute_accuracy{};
    std::vector<std::size_t> predictions;
};

EvalReport evaluate(const Model& model, std::span<const SyntheticSample> samples);
std::string format_report(const EvalReport& report, bool with_attributes);

}  // namespace astnet
