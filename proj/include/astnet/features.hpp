#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "astnet/parameter.hpp"
#include "astnet/rng.hpp"
#include "astnet/tape.hpp"
#include "astnet/tensor.hpp"

namespace astnet {

// Ordered frames of one clip. Each frame is an [H x W x 3] tensor with channel
// values in [0, 1]; all frames share H and W.
struct FrameVolume {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<Tensor> frames;

    std::size_t frame_count() const noexcept { return frames.size(); }
    void validate() const;
};

// Per-frame feature vectors f_1..f_N in R^m, optionally with the spatial maps
// they were pooled from (each [m x h' x w']).
struct FeatureSequence {
    std::vector<Tensor> vectors;
    std::vector<Tensor> spatial_maps;

    std::size_t length() const noexcept { return vectors.size(); }
    std::size_t dim() const { return vectors.empty() ? 0 : vectors.front().size(); }
    bool has_maps() const noexcept { return !spatial_maps.empty(); }
    void validate() const;
};

// Indices of `n` frames out of `frame_count`, drawn uniformly (without
// replacement when possible) and sorted ascending.
std::vector<std::size_t> sample_frame_indices(std::size_t frame_count, std::size_t n, Rng& rng);
FrameVolume sample_frames(const FrameVolume& volume, std::size_t n, Rng& rng);

struct AugmentConfig {
    std::size_t resize_short = 245;
    std::size_t crop = 224;
};

// Resize-then-crop geometry shared by every frame of a clip.
struct CropWindow {
    std::size_t resized_height = 0;
    std::size_t resized_width = 0;
    std::size_t top = 0;
    std::size_t left = 0;
    std::size_t size = 0;
};

CropWindow plan_crop(std::size_t height, std::size_t width, const AugmentConfig& config, bool train,
                     Rng& rng);

// Bilinear resize (half-pixel centres) of an [H x W x C] or [H x W] tensor.
Tensor resize_bilinear(const Tensor& image, std::size_t height, std::size_t width);

// Resizes and crops one [H x W x C] or [H x W] tensor according to `window`.
Tensor apply_crop(const Tensor& image, const CropWindow& window);

// Shorter edge to config.resize_short (aspect preserved), then a crop x crop
// window: random in training (one offset per clip), centred otherwise.
FrameVolume augment(const FrameVolume& volume, bool train, Rng& rng,
                    const AugmentConfig& config = {}, CropWindow* applied = nullptr);

enum class ExtractorKind { tiny_conv, file };

struct ExtractorConfig {
    ExtractorKind kind = ExtractorKind::tiny_conv;
    std::size_t output_dim = 1024;
    // One 3x3 stride-2 conv + ReLU per entry, then a 1x1 conv + ReLU to output_dim.
    std::vector<std::size_t> stage_widths{16, 32, 64};
};

// Small convolutional frame encoder: conv stages, a 1x1 conv to m channels
// (the maps F_i) and global average pooling (the vector f_t).
class FeatureExtractor {
public:
    FeatureExtractor() = default;
    FeatureExtractor(ParameterStore& store, const ExtractorConfig& config, Rng& rng);

    struct Output {
        std::vector<Var> features;
        std::vector<Var> maps;  // empty unless requested
    };

    const ExtractorConfig& config() const noexcept { return config_; }
    bool enabled() const noexcept { return !stages_.empty(); }

    Output extract(Tape& tape, const FrameVolume& volume, bool keep_maps) const;
    // Forward-only convenience returning plain tensors.
    FeatureSequence extract(const FrameVolume& volume, bool keep_maps,
                            Precision precision = Precision::high) const;

private:
    struct Stage {
        Parameter* weight = nullptr;
        Parameter* bias = nullptr;
    };
    ExtractorConfig config_;
    std::vector<Stage> stages_;
    Stage projection_;
};

// Converts an [H x W x 3] frame into the [3 x H x W] layout used by conv2d.
Tensor to_channels_first(const Tensor& hwc);

// Binary feature file: "ASTF", u32 version = 1, u32 N, u32 m, u32 element
// width (4 or 8), 12 reserved zero bytes, N*m elements; then optionally
// u8 flag = 1, u32 h', u32 w', N*m*h'*w' elements. Little-endian throughout.
void save_features(const FeatureSequence& sequence, const std::string& path,
                   std::size_t element_width = 4);
FeatureSequence load_features(const std::string& path);

inline constexpr std::size_t kFeatureHeaderBytes = 32;

}  // namespace astnet
