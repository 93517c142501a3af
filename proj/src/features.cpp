#include "astnet/features.hpp"

#include <algorithm>
#include <cmath>

#include "astnet/errors.hpp"
#include "astnet/lstm.hpp"
#include "astnet/ops.hpp"
#include "binary_io.hpp"

namespace astnet {

void FrameVolume::validate() const {
    if (frames.empty()) throw ContractError("frame volume is empty");
    for (const auto& f : frames)
        if (f.shape() != Shape{height, width, 3})
            throw DimensionError("frame of shape " + shape_string(f.shape()) + " in a " +
                                 std::to_string(height) + "x" + std::to_string(width) + " volume");
}

void FeatureSequence::validate() const {
    if (vectors.empty()) throw ContractError("feature sequence is empty");
    const std::size_t m = dim();
    for (const auto& v : vectors)
        if (v.shape() != Shape{m}) throw DimensionError("ragged feature sequence");
    if (has_maps()) {
        if (spatial_maps.size() != vectors.size())
            throw DimensionError("feature sequence has " + std::to_string(vectors.size()) +
                                 " vectors but " + std::to_string(spatial_maps.size()) + " map stacks");
        const Shape& s = spatial_maps.front().shape();
        for (const auto& mp : spatial_maps)
            if (mp.rank() != 3 || mp.dim(0) != m || mp.shape() != s)
                throw DimensionError("inconsistent spatial map stack " + shape_string(mp.shape()));
    }
}

std::vector<std::size_t> sample_frame_indices(std::size_t frame_count, std::size_t n, Rng& rng) {
    if (n == 0) throw ContractError("sample_frames: N must be positive");
    if (frame_count == 0) throw ContractError("sample_frames: clip has no frames");
    std::vector<std::size_t> picked;
    picked.reserve(n);
    if (frame_count >= n) {
        std::vector<std::size_t> pool(frame_count);
        for (std::size_t i = 0; i < frame_count; ++i) pool[i] = i;
        for (std::size_t i = 0; i < n; ++i) {
            std::swap(pool[i], pool[i + rng.below(frame_count - i)]);
            picked.push_back(pool[i]);
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) picked.push_back(rng.below(frame_count));
    }
    std::sort(picked.begin(), picked.end());
    return picked;
}

FrameVolume sample_frames(const FrameVolume& volume, std::size_t n, Rng& rng) {
    FrameVolume out{volume.height, volume.width, {}};
    for (std::size_t idx : sample_frame_indices(volume.frame_count(), n, rng))
        out.frames.push_back(volume.frames[idx]);
    return out;
}

CropWindow plan_crop(std::size_t height, std::size_t width, const AugmentConfig& config, bool train,
                     Rng& rng) {
    if (height == 0 || width == 0) throw DimensionError("augment: empty frame");
    if (config.crop == 0 || config.resize_short < config.crop)
        throw ContractError("augment: resize_short must be at least the crop size");
    CropWindow w;
    w.size = config.crop;
    const double scale = static_cast<double>(config.resize_short) / static_cast<double>(std::min(height, width));
    if (height <= width) {
        w.resized_height = config.resize_short;
        w.resized_width = std::max<std::size_t>(config.resize_short,
                                                static_cast<std::size_t>(std::lround(width * scale)));
    } else {
        w.resized_width = config.resize_short;
        w.resized_height = std::max<std::size_t>(config.resize_short,
                                                 static_cast<std::size_t>(std::lround(height * scale)));
    }
    if (train) {
        w.top = rng.below(w.resized_height - w.size + 1);
        w.left = rng.below(w.resized_width - w.size + 1);
    } else {
        w.top = (w.resized_height - w.size) / 2;
        w.left = (w.resized_width - w.size) / 2;
    }
    return w;
}

Tensor resize_bilinear(const Tensor& image, std::size_t height, std::size_t width) {
    if (image.rank() != 2 && image.rank() != 3) throw DimensionError("resize expects [H x W (x C)]");
    const std::size_t H = image.dim(0), W = image.dim(1);
    const std::size_t C = image.rank() == 3 ? image.dim(2) : 1;
    Shape shape = image.rank() == 3 ? Shape{height, width, C} : Shape{height, width};
    if (H == height && W == width) return image;
    Tensor out(shape, image.precision());
    auto source = [](std::size_t i, std::size_t n_out, std::size_t n_in, std::size_t& lo, std::size_t& hi, double& frac) {
        double s = (static_cast<double>(i) + 0.5) * static_cast<double>(n_in) / static_cast<double>(n_out) - 0.5;
        s = std::clamp(s, 0.0, static_cast<double>(n_in - 1));
        lo = static_cast<std::size_t>(std::floor(s));
        hi = std::min(lo + 1, n_in - 1);
        frac = s - static_cast<double>(lo);
    };
    for (std::size_t y = 0; y < height; ++y) {
        std::size_t y0, y1;
        double fy;
        source(y, height, H, y0, y1, fy);
        for (std::size_t x = 0; x < width; ++x) {
            std::size_t x0, x1;
            double fx;
            source(x, width, W, x0, x1, fx);
            for (std::size_t c = 0; c < C; ++c) {
                auto px = [&](std::size_t yy, std::size_t xx) { return image[(yy * W + xx) * C + c]; };
                const double top = px(y0, x0) * (1.0 - fx) + px(y0, x1) * fx;
                const double bottom = px(y1, x0) * (1.0 - fx) + px(y1, x1) * fx;
                out[(y * width + x) * C + c] = top * (1.0 - fy) + bottom * fy;
            }
        }
    }
    out.set_precision(image.precision());
    return out;
}

Tensor apply_crop(const Tensor& image, const CropWindow& window) {
    const Tensor resized = resize_bilinear(image, window.resized_height, window.resized_width);
    const std::size_t C = image.rank() == 3 ? image.dim(2) : 1;
    const std::size_t W = window.resized_width;
    Shape shape = image.rank() == 3 ? Shape{window.size, window.size, C} : Shape{window.size, window.size};
    Tensor out(shape, image.precision());
    for (std::size_t y = 0; y < window.size; ++y)
        for (std::size_t x = 0; x < window.size; ++x)
            for (std::size_t c = 0; c < C; ++c)
                out[(y * window.size + x) * C + c] =
                    resized[((y + window.top) * W + (x + window.left)) * C + c];
    return out;
}

FrameVolume augment(const FrameVolume& volume, bool train, Rng& rng, const AugmentConfig& config,
                    CropWindow* applied) {
    volume.validate();
    const CropWindow window = plan_crop(volume.height, volume.width, config, train, rng);
    FrameVolume out{window.size, window.size, {}};
    out.frames.reserve(volume.frame_count());
    for (const auto& f : volume.frames) out.frames.push_back(apply_crop(f, window));
    if (applied) *applied = window;
    return out;
}

Tensor to_channels_first(const Tensor& hwc) {
    if (hwc.rank() != 3) throw DimensionError("expected an [H x W x C] frame, got " + shape_string(hwc.shape()));
    const std::size_t H = hwc.dim(0), W = hwc.dim(1), C = hwc.dim(2);
    Tensor chw({C, H, W}, hwc.precision());
    for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x)
            for (std::size_t c = 0; c < C; ++c) chw[(c * H + y) * W + x] = hwc[(y * W + x) * C + c];
    return chw;
}

FeatureExtractor::FeatureExtractor(ParameterStore& store, const ExtractorConfig& config, Rng& rng)
    : config_(config) {
    if (config.kind != ExtractorKind::tiny_conv) return;
    if (config.stage_widths.empty()) throw ContractError("extractor needs at least one conv stage");
    auto conv_params = [&](const std::string& prefix, std::size_t out_ch, std::size_t in_ch, std::size_t k) {
        const double fan_in = static_cast<double>(in_ch * k * k);
        // He-uniform for the ReLU stages.
        const double s = std::sqrt(6.0 / fan_in);
        Tensor w({out_ch, in_ch, k, k});
        for (auto& v : w.values()) v = rng.uniform(-s, s);
        Stage st;
        st.weight = &store.add(prefix + ".weight", std::move(w));
        st.bias = &store.add(prefix + ".bias", Tensor({out_ch}));
        return st;
    };
    std::size_t in_ch = 3;
    for (std::size_t i = 0; i < config.stage_widths.size(); ++i) {
        stages_.push_back(conv_params("extractor.stage" + std::to_string(i), config.stage_widths[i], in_ch, 3));
        in_ch = config.stage_widths[i];
    }
    projection_ = conv_params("extractor.proj", config.output_dim, in_ch, 1);
}

FeatureExtractor::Output FeatureExtractor::extract(Tape& tape, const FrameVolume& volume,
                                                   bool keep_maps) const {
    if (!enabled()) throw ContractError("extract: extractor kind is not tiny-conv");
    volume.validate();
    Output out;
    for (const auto& frame : volume.frames) {
        Var x = tape.constant(to_channels_first(frame));
        for (const auto& st : stages_)
            x = relu(conv2d(x, tape.parameter(*st.weight), tape.parameter(*st.bias), 2, 1));
        Var maps = relu(conv2d(x, tape.parameter(*projection_.weight), tape.parameter(*projection_.bias), 1, 0));
        out.features.push_back(global_avg_pool(maps));
        if (keep_maps) out.maps.push_back(maps);
    }
    return out;
}

FeatureSequence FeatureExtractor::extract(const FrameVolume& volume, bool keep_maps,
                                          Precision precision) const {
    Tape tape(precision);
    Output o = extract(tape, volume, keep_maps);
    FeatureSequence seq;
    for (Var v : o.features) seq.vectors.push_back(v.value());
    for (Var v : o.maps) seq.spatial_maps.push_back(v.value());
    return seq;
}

void save_features(const FeatureSequence& sequence, const std::string& path, std::size_t element_width) {
    if (element_width != 4 && element_width != 8)
        throw ContractError("feature element width must be 4 or 8");
    sequence.validate();
    io::ByteWriter w;
    w.magic("ASTF");
    w.u32(1);
    w.u32(static_cast<std::uint32_t>(sequence.length()));
    w.u32(static_cast<std::uint32_t>(sequence.dim()));
    w.u32(static_cast<std::uint32_t>(element_width));
    for (int i = 0; i < 12; ++i) w.u8(0);
    for (const auto& v : sequence.vectors)
        for (double x : v.values()) w.real(x, element_width);
    if (sequence.has_maps()) {
        const auto& s = sequence.spatial_maps.front().shape();
        w.u8(1);
        w.u32(static_cast<std::uint32_t>(s[1]));
        w.u32(static_cast<std::uint32_t>(s[2]));
        for (const auto& mp : sequence.spatial_maps)
            for (double x : mp.values()) w.real(x, element_width);
    }
    io::write_file(path, w.buffer());
}

FeatureSequence load_features(const std::string& path) {
    io::ByteReader r(io::read_file(path));
    r.expect_magic("ASTF");
    std::size_t at = r.offset();
    if (r.u32("version") != 1) throw FormatError("unsupported feature file version", at);
    at = r.offset();
    const std::size_t n = r.u32("frame count");
    const std::size_t m = r.u32("feature dim");
    if (n == 0 || m == 0) throw FormatError("feature file declares an empty sequence", at);
    at = r.offset();
    const std::size_t width = r.u32("element width");
    if (width != 4 && width != 8) throw FormatError("element width must be 4 or 8", at);
    for (int i = 0; i < 12; ++i) {
        at = r.offset();
        if (r.u8("reserved") != 0) throw FormatError("reserved header bytes must be zero", at);
    }
    const Precision precision = width == 4 ? Precision::standard : Precision::high;
    r.need(n * m * width, "feature vectors");
    FeatureSequence seq;
    seq.vectors.reserve(n);
    for (std::size_t t = 0; t < n; ++t) {
        Tensor v({m}, precision);
        for (std::size_t i = 0; i < m; ++i) v[i] = r.real(width, "feature vectors");
        seq.vectors.push_back(std::move(v));
    }
    if (!r.at_end()) {
        at = r.offset();
        if (r.u8("maps flag") != 1) throw FormatError("unknown trailing block", at);
        at = r.offset();
        const std::size_t h = r.u32("map height");
        const std::size_t wd = r.u32("map width");
        if (h == 0 || wd == 0) throw FormatError("empty spatial maps", at);
        r.need(n * m * h * wd * width, "spatial maps");
        for (std::size_t t = 0; t < n; ++t) {
            Tensor mp({m, h, wd}, precision);
            for (auto& x : mp.values()) x = r.real(width, "spatial maps");
            seq.spatial_maps.push_back(std::move(mp));
        }
        if (!r.at_end()) throw FormatError("trailing bytes after spatial maps", r.offset());
    }
    return seq;
}

}  // namespace astnet
