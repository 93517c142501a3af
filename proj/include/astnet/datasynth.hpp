#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "astnet/features.hpp"
#include "astnet/labels.hpp"
#include "astnet/rng.hpp"

namespace astnet {

inline constexpr std::uint64_t kDefaultClassTableSeed = 48;
inline constexpr std::array<std::size_t, kAttributeCount> kDefaultArities{4, 8, 8, 4};

// Bijection between class indices and distinct attribute tuples.
class ClassTable {
public:
    // Seeded choice of `count` distinct tuples from the product of `arities`,
    // listed in lexicographic order.
    static ClassTable build(std::uint64_t seed = kDefaultClassTableSeed,
                            std::array<std::size_t, kAttributeCount> arities = kDefaultArities,
                            std::size_t count = 48);

    std::size_t size() const noexcept { return entries_.size(); }
    const AttributeTuple& operator[](std::size_t k) const { return entries_.at(k); }
    const std::vector<AttributeTuple>& entries() const noexcept { return entries_; }
    const std::array<std::size_t, kAttributeCount>& arities() const noexcept { return arities_; }
    std::optional<std::size_t> lookup(const AttributeTuple& t) const;

    // One "class takeoff somersault twist flight" line per entry.
    std::string serialize() const;

private:
    std::array<std::size_t, kAttributeCount> arities_{};
    std::vector<AttributeTuple> entries_;
};

enum class SampleMode { vector, image };

const char* to_string(SampleMode m);
SampleMode parse_sample_mode(const std::string& text);

struct SynthConfig {
    SampleMode mode = SampleMode::vector;
    std::size_t num_frames = 16;
    // Vector mode: the first `signal_dims` dimensions carry attribute patterns,
    // the rest are distractors.
    std::size_t feature_dim = 32;
    std::size_t signal_dims = 12;
    double signal_amplitude = 1.0;
    double distractor_scale = 2.0;
    double noise_level = 1.0;
    // Image mode.
    std::size_t image_size = 64;
    std::size_t clutter_shapes = 6;
    std::size_t train_per_class = 8;
    std::size_t test_per_class = 2;
    std::size_t clips_per_episode = 4;
    std::uint64_t seed = 0;
    std::uint64_t class_table_seed = kDefaultClassTableSeed;
};

struct SyntheticSample {
    std::string clip_id;
    std::string split;
    std::size_t episode = 0;
    Labels labels;
    FeatureSequence features;    // vector mode
    FrameVolume frames;          // image mode
    std::vector<Tensor> masks;   // image mode: [H x W], 1 inside the moving blob
};

// Temporal window [begin, end) that carries attribute `attribute`.
std::pair<std::size_t, std::size_t> attribute_segment(std::size_t attribute, std::size_t num_frames);

SyntheticSample generate_sample(std::size_t class_index, const ClassTable& table,
                                const SynthConfig& config, Rng& rng);

struct Dataset {
    SynthConfig config;
    ClassTable table;
    std::vector<SyntheticSample> train;
    std::vector<SyntheticSample> test;

    const std::vector<SyntheticSample>& split(const std::string& name) const;
};

// Deterministic in (config); every class appears train_per_class / test_per_class
// times, and train and test episode ids are disjoint.
Dataset generate_dataset(const SynthConfig& config);

// Writes clips under <dir>/clips and returns the path of <dir>/manifest.txt.
// Manifest records: clip_id split class takeoff somersault twist flight path.
std::string write_dataset(const Dataset& dataset, const std::string& dir);
Dataset load_dataset(const std::string& manifest_path);

// Binary image clip: "ASTI", u32 version = 1, u32 N, u32 H, u32 W, u32 has_mask,
// N*H*W*3 u8 pixels, then N*H*W u8 mask values when has_mask = 1.
void save_clip(const FrameVolume& frames, const std::vector<Tensor>& masks, const std::string& path);
void load_clip(const std::string& path, FrameVolume& frames, std::vector<Tensor>& masks);

}  // namespace astnet
