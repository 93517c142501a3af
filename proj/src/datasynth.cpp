#include "astnet/datasynth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "astnet/errors.hpp"
#include "binary_io.hpp"
#include "text_util.hpp"

namespace astnet {

namespace fs = std::filesystem;

const char* to_string(SampleMode m) { return m == SampleMode::vector ? "vector" : "image"; }

SampleMode parse_sample_mode(const std::string& text) {
    if (text == "vector") return SampleMode::vector;
    if (text == "image") return SampleMode::image;
    throw UsageError("unknown mode '" + text + "' (expected vector or image)");
}

ClassTable ClassTable::build(std::uint64_t seed, std::array<std::size_t, kAttributeCount> arities,
                             std::size_t count) {
    std::size_t space = 1;
    for (auto a : arities) {
        if (a == 0) throw ContractError("class table: arities must be positive");
        space *= a;
    }
    if (count == 0 || count > space)
        throw ContractError("class table: cannot pick " + std::to_string(count) + " of " +
                            std::to_string(space) + " tuples");
    std::vector<std::size_t> codes(space);
    for (std::size_t i = 0; i < space; ++i) codes[i] = i;
    Rng rng = Rng::derive(seed, {hash_string("class-table")});
    for (std::size_t i = 0; i < count; ++i) std::swap(codes[i], codes[i + rng.below(space - i)]);
    codes.resize(count);
    std::sort(codes.begin(), codes.end());

    ClassTable table;
    table.arities_ = arities;
    for (std::size_t code : codes) {
        AttributeTuple t;
        for (std::size_t i = kAttributeCount; i-- > 0;) {
            t[i] = code % arities[i];
            code /= arities[i];
        }
        table.entries_.push_back(t);
    }
    return table;
}

std::optional<std::size_t> ClassTable::lookup(const AttributeTuple& t) const {
    const auto it = std::lower_bound(entries_.begin(), entries_.end(), t);
    if (it == entries_.end() || *it != t) return std::nullopt;
    return static_cast<std::size_t>(it - entries_.begin());
}

std::string ClassTable::serialize() const {
    std::string out;
    for (std::size_t k = 0; k < entries_.size(); ++k)
        out += std::to_string(k) + " " + to_string(entries_[k]) + "\n";
    return out;
}

std::pair<std::size_t, std::size_t> attribute_segment(std::size_t attribute, std::size_t num_frames) {
    return {attribute * num_frames / kAttributeCount, (attribute + 1) * num_frames / kAttributeCount};
}

namespace {

// Fixed +-1 pattern for (attribute, value) over the signal dimensions.
double pattern(std::uint64_t seed, std::size_t attribute, std::size_t value, std::size_t dim) {
    const std::uint64_t h = splitmix64(splitmix64(seed ^ 0x5bd1e995ULL) + attribute * 1000003ULL +
                                       value * 7919ULL + dim * 104729ULL);
    return (h >> 63) ? 1.0 : -1.0;
}

double quantize(double v) {
    const double c = std::clamp(v, 0.0, 1.0);
    return std::round(c * 255.0) / 255.0;
}

std::array<double, 3> hue_color(std::size_t value) {
    // Eight saturated hues at full brightness.
    static constexpr std::array<std::array<double, 3>, 8> palette{{
        {1.0, 0.1, 0.1}, {1.0, 0.6, 0.0}, {1.0, 1.0, 0.1}, {0.2, 1.0, 0.2},
        {0.1, 1.0, 1.0}, {0.2, 0.4, 1.0}, {0.8, 0.2, 1.0}, {1.0, 0.3, 0.8},
    }};
    return palette[value % palette.size()];
}

void generate_vector(SyntheticSample& s, const AttributeTuple& t, const SynthConfig& c, Rng& rng) {
    if (c.signal_dims > c.feature_dim) throw ContractError("signal_dims exceeds feature_dim");
    for (std::size_t f = 0; f < c.num_frames; ++f) {
        std::size_t attr = 0;
        while (attr + 1 < kAttributeCount && f >= attribute_segment(attr + 1, c.num_frames).first) ++attr;
        Tensor v({c.feature_dim});
        for (std::size_t d = 0; d < c.feature_dim; ++d) {
            if (d < c.signal_dims) {
                v[d] = c.signal_amplitude * pattern(c.seed, attr, t[attr], d);
                if (c.noise_level > 0.0) v[d] += 0.5 * c.noise_level * rng.normal();
            } else if (c.noise_level > 0.0) {
                v[d] = c.distractor_scale * c.noise_level * rng.normal();
            }
        }
        v.set_precision(Precision::standard);
        s.features.vectors.push_back(std::move(v));
    }
}

void generate_image(SyntheticSample& s, const AttributeTuple& t, const SynthConfig& c, Rng& rng) {
    const std::size_t S = c.image_size;
    if (S < 8) throw ContractError("image_size must be at least 8");
    const double radius = std::max(1.5, static_cast<double>(S) / 8.0);

    // Static scene: tinted background plus dim grey clutter rectangles.
    Tensor background({S, S, 3});
    const double base = 0.12 + 0.06 * rng.uniform();
    for (std::size_t i = 0; i < S * S; ++i)
        for (std::size_t ch = 0; ch < 3; ++ch) background[i * 3 + ch] = base;
    for (std::size_t k = 0; k < c.clutter_shapes; ++k) {
        const std::size_t w = 2 + rng.below(S / 4), h = 2 + rng.below(S / 4);
        const std::size_t x0 = rng.below(S - w), y0 = rng.below(S - h);
        const double grey = 0.3 + 0.25 * rng.uniform();
        const double tint = 0.05 * rng.uniform();
        for (std::size_t y = y0; y < y0 + h; ++y)
            for (std::size_t x = x0; x < x0 + w; ++x) {
                background[(y * S + x) * 3 + 0] = grey;
                background[(y * S + x) * 3 + 1] = grey + tint;
                background[(y * S + x) * 3 + 2] = grey + 2 * tint;
            }
    }

    // Blob trajectory: a ballistic arc from a random launch point.
    const double lo = radius, hi = static_cast<double>(S) - 1.0 - radius;
    double px = rng.uniform(lo, hi), py = rng.uniform(lo, lo + (hi - lo) * 0.3);
    double vx = rng.uniform(-1.0, 1.0) * static_cast<double>(S) / static_cast<double>(c.num_frames);
    double vy = -0.5 * static_cast<double>(S) / static_cast<double>(c.num_frames);
    const double gravity = 2.5 * static_cast<double>(S) / static_cast<double>(c.num_frames * c.num_frames);

    s.frames.height = S;
    s.frames.width = S;
    for (std::size_t f = 0; f < c.num_frames; ++f) {
        std::size_t attr = 0;
        while (attr + 1 < kAttributeCount && f >= attribute_segment(attr + 1, c.num_frames).first) ++attr;
        const auto color = hue_color(t[attr]);
        Tensor frame = background;
        Tensor mask({S, S});
        for (std::size_t y = 0; y < S; ++y)
            for (std::size_t x = 0; x < S; ++x) {
                const double dx = static_cast<double>(x) - px, dy = static_cast<double>(y) - py;
                if (dx * dx + dy * dy <= radius * radius) {
                    mask[y * S + x] = 1.0;
                    for (std::size_t ch = 0; ch < 3; ++ch) frame[(y * S + x) * 3 + ch] = color[ch];
                }
            }
        for (auto& v : frame.values()) {
            if (c.noise_level > 0.0) v += 0.05 * c.noise_level * rng.normal();
            v = quantize(v);
        }
        s.frames.frames.push_back(std::move(frame));
        s.masks.push_back(std::move(mask));

        px += vx;
        py += vy;
        vy += gravity;
        if (px < lo || px > hi) {
            vx = -vx;
            px = std::clamp(px, lo, hi);
        }
        if (py < lo || py > hi) {
            vy = -0.6 * vy;
            py = std::clamp(py, lo, hi);
        }
    }
}

}  // namespace

SyntheticSample generate_sample(std::size_t class_index, const ClassTable& table,
                                const SynthConfig& config, Rng& rng) {
    if (class_index >= table.size())
        throw LabelError("class " + std::to_string(class_index) + " out of range for " +
                         std::to_string(table.size()) + " classes");
    if (config.num_frames < kAttributeCount)
        throw ContractError("num_frames must be at least 4 so every attribute has a segment");
    SyntheticSample s;
    s.labels.class_index = class_index;
    s.labels.attributes = table[class_index];
    if (config.mode == SampleMode::vector) generate_vector(s, s.labels.attributes, config, rng);
    else generate_image(s, s.labels.attributes, config, rng);
    return s;
}

const std::vector<SyntheticSample>& Dataset::split(const std::string& name) const {
    if (name == "train") return train;
    if (name == "test") return test;
    throw UsageError("unknown split '" + name + "' (expected train or test)");
}

Dataset generate_dataset(const SynthConfig& config) {
    if (config.train_per_class == 0 && config.test_per_class == 0)
        throw ContractError("generate_dataset: both splits are empty");
    if (config.clips_per_episode == 0) throw ContractError("clips_per_episode must be positive");
    Dataset ds{config, ClassTable::build(config.class_table_seed), {}, {}};
    const std::size_t classes = ds.table.size();

    std::size_t train_episodes = 0;
    auto fill = [&](const std::string& split, std::size_t per_class, std::size_t episode_base,
                    std::vector<SyntheticSample>& out) {
        const std::uint64_t tag = hash_string(split);
        std::size_t index = 0;
        for (std::size_t k = 0; k < classes; ++k)
            for (std::size_t j = 0; j < per_class; ++j, ++index) {
                Rng rng = Rng::derive(config.seed, {tag, index});
                SyntheticSample s = generate_sample(k, ds.table, config, rng);
                char id[32];
                std::snprintf(id, sizeof id, "%s-%05zu", split.c_str(), index);
                s.clip_id = id;
                s.split = split;
                s.episode = episode_base + index / config.clips_per_episode;
                out.push_back(std::move(s));
            }
        return (index + config.clips_per_episode - 1) / config.clips_per_episode;
    };
    train_episodes = fill("train", config.train_per_class, 0, ds.train);
    fill("test", config.test_per_class, train_episodes, ds.test);
    return ds;
}

void save_clip(const FrameVolume& frames, const std::vector<Tensor>& masks, const std::string& path) {
    frames.validate();
    const bool has_mask = !masks.empty();
    if (has_mask && masks.size() != frames.frame_count()) throw DimensionError("one mask per frame required");
    io::ByteWriter w;
    w.magic("ASTI");
    w.u32(1);
    w.u32(static_cast<std::uint32_t>(frames.frame_count()));
    w.u32(static_cast<std::uint32_t>(frames.height));
    w.u32(static_cast<std::uint32_t>(frames.width));
    w.u32(has_mask ? 1 : 0);
    for (const auto& f : frames.frames)
        for (double v : f.values()) w.u8(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
    if (has_mask)
        for (const auto& m : masks)
            for (double v : m.values()) w.u8(v > 0.5 ? 1 : 0);
    io::write_file(path, w.buffer());
}

void load_clip(const std::string& path, FrameVolume& frames, std::vector<Tensor>& masks) {
    io::ByteReader r(io::read_file(path));
    r.expect_magic("ASTI");
    std::size_t at = r.offset();
    if (r.u32("version") != 1) throw FormatError("unsupported clip version", at);
    at = r.offset();
    const std::size_t n = r.u32("frame count"), h = r.u32("height"), w = r.u32("width");
    if (n == 0 || h == 0 || w == 0) throw FormatError("empty clip", at);
    at = r.offset();
    const std::uint32_t has_mask = r.u32("mask flag");
    if (has_mask > 1) throw FormatError("bad mask flag", at);
    r.need(n * h * w * 3 + (has_mask ? n * h * w : 0), "pixels");
    frames = FrameVolume{h, w, {}};
    masks.clear();
    for (std::size_t f = 0; f < n; ++f) {
        Tensor t({h, w, 3});
        for (auto& v : t.values()) v = static_cast<double>(r.u8("pixels")) / 255.0;
        frames.frames.push_back(std::move(t));
    }
    if (has_mask)
        for (std::size_t f = 0; f < n; ++f) {
            Tensor m({h, w});
            for (auto& v : m.values()) v = r.u8("mask");
            masks.push_back(std::move(m));
        }
    if (!r.at_end()) throw FormatError("trailing bytes in clip", r.offset());
}

namespace {

using text::format_real;

std::vector<std::pair<std::string, std::string>> config_entries(const SynthConfig& c) {
    return {
        {"mode", to_string(c.mode)},
        {"frames", std::to_string(c.num_frames)},
        {"feature_dim", std::to_string(c.feature_dim)},
        {"signal_dims", std::to_string(c.signal_dims)},
        {"signal_amplitude", format_real(c.signal_amplitude)},
        {"distractor_scale", format_real(c.distractor_scale)},
        {"noise", format_real(c.noise_level)},
        {"image_size", std::to_string(c.image_size)},
        {"clutter_shapes", std::to_string(c.clutter_shapes)},
        {"train_per_class", std::to_string(c.train_per_class)},
        {"test_per_class", std::to_string(c.test_per_class)},
        {"clips_per_episode", std::to_string(c.clips_per_episode)},
        {"seed", std::to_string(c.seed)},
        {"class_table_seed", std::to_string(c.class_table_seed)},
    };
}

void apply_entry(SynthConfig& c, const std::string& key, const std::string& value) {
    if (key == "mode") c.mode = parse_sample_mode(value);
    else if (key == "frames") c.num_frames = text::to_size(value);
    else if (key == "feature_dim") c.feature_dim = text::to_size(value);
    else if (key == "signal_dims") c.signal_dims = text::to_size(value);
    else if (key == "signal_amplitude") c.signal_amplitude = text::to_real(value);
    else if (key == "distractor_scale") c.distractor_scale = text::to_real(value);
    else if (key == "noise") c.noise_level = text::to_real(value);
    else if (key == "image_size") c.image_size = text::to_size(value);
    else if (key == "clutter_shapes") c.clutter_shapes = text::to_size(value);
    else if (key == "train_per_class") c.train_per_class = text::to_size(value);
    else if (key == "test_per_class") c.test_per_class = text::to_size(value);
    else if (key == "clips_per_episode") c.clips_per_episode = text::to_size(value);
    else if (key == "seed") c.seed = text::to_size(value);
    else if (key == "class_table_seed") c.class_table_seed = text::to_size(value);
}

}  // namespace

std::string write_dataset(const Dataset& dataset, const std::string& dir) {
    std::error_code ec;
    fs::create_directories(fs::path(dir) / "clips", ec);
    if (ec) throw IoError("cannot create '" + dir + "/clips': " + ec.message());
    const fs::path manifest = fs::path(dir) / "manifest.txt";
    std::ofstream out(manifest, std::ios::trunc);
    if (!out) throw IoError("cannot write '" + manifest.string() + "'");
    out << "# astnet dataset manifest v1\n";
    for (const auto& [k, v] : config_entries(dataset.config)) out << "# " << k << "=" << v << "\n";
    out << "# clip_id split class takeoff somersault twist flight path\n";
    const bool vector = dataset.config.mode == SampleMode::vector;
    for (const auto* split : {&dataset.train, &dataset.test})
        for (const auto& s : *split) {
            const std::string rel = "clips/" + s.clip_id + (vector ? ".astf" : ".asti");
            if (vector) save_features(s.features, (fs::path(dir) / rel).string(), 4);
            else save_clip(s.frames, s.masks, (fs::path(dir) / rel).string());
            out << s.clip_id << " " << s.split << " " << s.labels.class_index << " "
                << to_string(s.labels.attributes) << " " << rel << "\n";
        }
    if (!out) throw IoError("failed writing '" + manifest.string() + "'");
    return manifest.string();
}

Dataset load_dataset(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw IoError("cannot open manifest '" + manifest_path + "'");
    const fs::path base = fs::path(manifest_path).parent_path();
    SynthConfig cfg;
    struct Record {
        std::string clip_id, split, path;
        std::size_t cls;
        AttributeTuple t;
    };
    std::vector<Record> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto eq = line.find('=');
            if (line.size() > 2 && eq != std::string::npos) {
                try {
                    apply_entry(cfg, line.substr(2, eq - 2), line.substr(eq + 1));
                } catch (const std::logic_error&) {
                    throw FormatError("bad manifest header on line " + std::to_string(line_no), 0);
                }
            }
            continue;
        }
        std::istringstream ss(line);
        Record r;
        if (!(ss >> r.clip_id >> r.split >> r.cls >> r.t.takeoff >> r.t.somersault >> r.t.twist >> r.t.flight >> r.path))
            throw FormatError("malformed manifest record on line " + std::to_string(line_no), 0);
        if (r.split != "train" && r.split != "test")
            throw FormatError("unknown split '" + r.split + "' on line " + std::to_string(line_no), 0);
        records.push_back(std::move(r));
    }
    Dataset ds{cfg, ClassTable::build(cfg.class_table_seed), {}, {}};
    for (const auto& r : records) {
        const auto expected = ds.table.lookup(r.t);
        if (!expected || *expected != r.cls)
            throw LabelError("clip " + r.clip_id + ": class " + std::to_string(r.cls) +
                             " does not match attributes " + to_string(r.t));
        SyntheticSample s;
        s.clip_id = r.clip_id;
        s.split = r.split;
        s.labels = {r.t, r.cls};
        const std::string path = (base / r.path).string();
        if (cfg.mode == SampleMode::vector) s.features = load_features(path);
        else load_clip(path, s.frames, s.masks);
        (r.split == "train" ? ds.train : ds.test).push_back(std::move(s));
    }
    return ds;
}

}  // namespace astnet
