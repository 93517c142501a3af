#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "astnet/model.hpp"
#include "astnet/training.hpp"

namespace astnet {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Checkpoint file, little-endian:
//   "ASTC", u32 version,
//   config block: u32 length + text ("model.<key>=", "train.<key>=", "model_seed=", "stage=" lines),
//   u32 parameter count, then per parameter: name (u32 length + UTF-8), u32 rank,
//     u32 extents, u32 element width (4 or 8), data,
//   optimizer block: u64 step count, u32 moment count, per parameter both moments
//     at the parameter's width,
//   rng-state block: u64 seed, u32 phase, u64 epoch, u64 step,
//   history block: u32 record count, per record u32 phase, u64 epoch, f64 loss,
//     f64 accuracy, u8 has_attributes, 4 x f64.
struct CheckpointData {
    ModelConfig model_config;
    std::uint64_t model_seed = 0;
    TrainConfig train_config;
    TrainingStage stage = TrainingStage::representation;
    TrainerState trainer;
};

void save_checkpoint(const Model& model, std::uint64_t model_seed, const TrainConfig& train_config,
                     const TrainerState& trainer, const std::string& path);

struct LoadedCheckpoint {
    std::unique_ptr<Model> model;
    CheckpointData data;
};

LoadedCheckpoint load_checkpoint(const std::string& path);
// Parses checkpoint bytes (used for validation of in-memory buffers).
LoadedCheckpoint parse_checkpoint(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> serialize_checkpoint(const Model& model, std::uint64_t model_seed,
                                               const TrainConfig& train_config, const TrainerState& trainer);

}  // namespace astnet
