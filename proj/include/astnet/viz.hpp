#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "astnet/tensor.hpp"

namespace astnet {

// A_t = sum_i a_t[i] * F_i for maps given as one [m x h x w] tensor.
Tensor attention_map(const Tensor& attention, const Tensor& maps);
// Same, with the m grids passed separately (each [h x w]).
Tensor attention_map(const Tensor& attention, std::span<const Tensor> grids);

// Corner-aligned bilinear resize of an [h x w] grid to [height x width].
Tensor upsample(const Tensor& grid, std::size_t height, std::size_t width);

// Min-max scaling to [0, 1]; a constant grid maps to 0.5 everywhere.
Tensor normalize_minmax(const Tensor& grid);

// 8-bit grey levels after min-max scaling (constant grid -> 128).
std::vector<std::uint8_t> to_gray(const Tensor& grid);

// Binary greymap "P5\n<w> <h>\n255\n" followed by the pixels.
void export_pgm(const Tensor& grid, const std::string& path);

// Binary pixmap: the [H x W x 3] frame on the left and the grid, upsampled to
// H x W and rendered in grey, on the right.
void export_strip(const Tensor& frame, const Tensor& grid, const std::string& path);

struct FrameLocalization {
    double inside = 0.0;   // mean normalized attention over mask pixels
    double outside = 0.0;  // mean over the rest
    bool valid = false;    // mask has pixels on both sides
};

// Compares an attention grid (upsampled to the mask size, min-max scaled)
// against a binary [H x W] mask.
FrameLocalization localize(const Tensor& grid, const Tensor& mask);

struct LocalizationSummary {
    std::size_t frames = 0;  // frames with a valid mask
    std::size_t hits = 0;    // frames where inside > outside
    double mean_inside = 0.0;
    double mean_outside = 0.0;

    double hit_rate() const { return frames ? static_cast<double>(hits) / static_cast<double>(frames) : 0.0; }
    void add(const FrameLocalization& f);
};

}  // namespace astnet
