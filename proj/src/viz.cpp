#include "astnet/viz.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "astnet/errors.hpp"

namespace astnet {

namespace {

void check_grid(const Tensor& grid, const char* what) {
    if (grid.rank() != 2) throw DimensionError(std::string(what) + ": expected an [h x w] grid, got " + shape_string(grid.shape()));
}

void write_bytes(const std::string& path, const std::string& header, const std::vector<std::uint8_t>& pixels) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
    if (!out) throw IoError("failed writing '" + path + "'");
}

}  // namespace

Tensor attention_map(const Tensor& attention, const Tensor& maps) {
    if (attention.rank() != 1) throw DimensionError("attention_map: attention must be a vector");
    if (maps.rank() != 3) throw DimensionError("attention_map: maps must be [m x h x w], got " + shape_string(maps.shape()));
    const std::size_t m = maps.dim(0), h = maps.dim(1), w = maps.dim(2);
    if (attention.size() != m)
        throw DimensionError("attention_map: " + std::to_string(attention.size()) + " weights for " +
                             std::to_string(m) + " maps");
    Tensor out({h, w});
    for (std::size_t i = 0; i < m; ++i) {
        const double a = attention[i];
        const double* f = maps.data() + i * h * w;
        for (std::size_t k = 0; k < h * w; ++k) out[k] += a * f[k];
    }
    return out;
}

Tensor attention_map(const Tensor& attention, std::span<const Tensor> grids) {
    if (attention.rank() != 1) throw DimensionError("attention_map: attention must be a vector");
    if (attention.size() != grids.size())
        throw DimensionError("attention_map: " + std::to_string(attention.size()) + " weights for " +
                             std::to_string(grids.size()) + " maps");
    if (grids.empty()) throw DimensionError("attention_map: no maps");
    check_grid(grids[0], "attention_map");
    Tensor out(grids[0].shape());
    for (std::size_t i = 0; i < grids.size(); ++i) {
        if (grids[i].shape() != out.shape()) throw DimensionError("attention_map: maps differ in extent");
        for (std::size_t k = 0; k < out.size(); ++k) out[k] += attention[i] * grids[i][k];
    }
    return out;
}

Tensor upsample(const Tensor& grid, std::size_t height, std::size_t width) {
    check_grid(grid, "upsample");
    const std::size_t h = grid.dim(0), w = grid.dim(1);
    if (height < h || width < w) throw DimensionError("upsample: target smaller than source");
    Tensor out({height, width});
    auto coord = [](std::size_t i, std::size_t src, std::size_t dst) {
        return dst > 1 ? static_cast<double>(i) * static_cast<double>(src - 1) / static_cast<double>(dst - 1) : 0.0;
    };
    for (std::size_t y = 0; y < height; ++y) {
        const double sy = coord(y, h, height);
        const std::size_t y0 = std::min(static_cast<std::size_t>(sy), h - 1), y1 = std::min(y0 + 1, h - 1);
        const double fy = sy - static_cast<double>(y0);
        for (std::size_t x = 0; x < width; ++x) {
            const double sx = coord(x, w, width);
            const std::size_t x0 = std::min(static_cast<std::size_t>(sx), w - 1), x1 = std::min(x0 + 1, w - 1);
            const double fx = sx - static_cast<double>(x0);
            const double top = grid[y0 * w + x0] * (1.0 - fx) + grid[y0 * w + x1] * fx;
            const double bottom = grid[y1 * w + x0] * (1.0 - fx) + grid[y1 * w + x1] * fx;
            out[y * width + x] = top * (1.0 - fy) + bottom * fy;
        }
    }
    return out;
}

Tensor normalize_minmax(const Tensor& grid) {
    if (!grid.all_finite()) throw NumericError("cannot normalize a grid with non-finite values");
    const auto [lo, hi] = std::minmax_element(grid.values().begin(), grid.values().end());
    Tensor out(grid.shape());
    const double range = *hi - *lo;
    for (std::size_t k = 0; k < grid.size(); ++k) out[k] = range > 0.0 ? (grid[k] - *lo) / range : 0.5;
    return out;
}

std::vector<std::uint8_t> to_gray(const Tensor& grid) {
    const Tensor n = normalize_minmax(grid);
    std::vector<std::uint8_t> px(n.size());
    for (std::size_t k = 0; k < n.size(); ++k)
        px[k] = static_cast<std::uint8_t>(std::lround(std::clamp(n[k], 0.0, 1.0) * 255.0));
    // lround(127.5) is 128, which is the mid-grey for constant grids.
    return px;
}

void export_pgm(const Tensor& grid, const std::string& path) {
    check_grid(grid, "export_pgm");
    write_bytes(path, "P5\n" + std::to_string(grid.dim(1)) + " " + std::to_string(grid.dim(0)) + "\n255\n", to_gray(grid));
}

void export_strip(const Tensor& frame, const Tensor& grid, const std::string& path) {
    if (frame.rank() != 3 || frame.dim(2) != 3) throw DimensionError("export_strip: frame must be [H x W x 3]");
    check_grid(grid, "export_strip");
    const std::size_t H = frame.dim(0), W = frame.dim(1);
    const auto heat = to_gray(upsample(grid, H, W));
    std::vector<std::uint8_t> px(H * 2 * W * 3);
    for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x)
            for (std::size_t c = 0; c < 3; ++c) {
                px[(y * 2 * W + x) * 3 + c] =
                    static_cast<std::uint8_t>(std::lround(std::clamp(frame[(y * W + x) * 3 + c], 0.0, 1.0) * 255.0));
                px[(y * 2 * W + W + x) * 3 + c] = heat[y * W + x];
            }
    write_bytes(path, "P6\n" + std::to_string(2 * W) + " " + std::to_string(H) + "\n255\n", px);
}

FrameLocalization localize(const Tensor& grid, const Tensor& mask) {
    check_grid(grid, "localize");
    check_grid(mask, "localize");
    const Tensor heat = normalize_minmax(upsample(grid, mask.dim(0), mask.dim(1)));
    double in = 0.0, out = 0.0;
    std::size_t n_in = 0, n_out = 0;
    for (std::size_t k = 0; k < mask.size(); ++k) {
        if (mask[k] > 0.5) {
            in += heat[k];
            ++n_in;
        } else {
            out += heat[k];
            ++n_out;
        }
    }
    FrameLocalization r;
    r.valid = n_in > 0 && n_out > 0;
    if (n_in) r.inside = in / static_cast<double>(n_in);
    if (n_out) r.outside = out / static_cast<double>(n_out);
    return r;
}

void LocalizationSummary::add(const FrameLocalization& f) {
    if (!f.valid) return;
    const double n = static_cast<double>(frames);
    mean_inside = (mean_inside * n + f.inside) / (n + 1.0);
    mean_outside = (mean_outside * n + f.outside) / (n + 1.0);
    ++frames;
    hits += f.inside > f.outside;
}

}  // namespace astnet
