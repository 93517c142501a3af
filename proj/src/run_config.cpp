#include "astnet/run_config.hpp"

#include <fstream>
#include <sstream>

#include "astnet/errors.hpp"
#include "text_util.hpp"

namespace astnet {

ConfigEntries read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    ConfigEntries out;
    text::for_each_entry(ss.str(), path.c_str(),
                         [&](const std::string& k, const std::string& v, std::size_t) { out.emplace_back(k, v); });
    return out;
}

RunConfig RunConfig::defaults(SampleMode mode) {
    RunConfig c;
    c.data.mode = mode;
    ModelConfig& m = c.model;
    m.encoder_hidden = 32;
    m.attention_hidden = 32;
    m.decoder_hidden = 16;
    m.depth = 2;
    if (mode == SampleMode::vector) {
        m.feature_dim = c.data.feature_dim;
        m.num_frames = c.data.num_frames;
        m.extractor = {ExtractorKind::file, m.feature_dim, {8, 16}};
    } else {
        c.data.image_size = 32;
        c.data.num_frames = 8;
        c.data.train_per_class = 4;
        c.data.test_per_class = 1;
        m.feature_dim = 16;
        m.num_frames = 8;
        m.extractor = {ExtractorKind::tiny_conv, m.feature_dim, {8, 16}};
    }
    return c;
}

namespace {

std::size_t to_size(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const unsigned long long n = std::stoull(v, &used);
        if (used != v.size() || v.front() == '-') throw std::invalid_argument(v);
        return static_cast<std::size_t>(n);
    } catch (const std::logic_error&) {
        throw UsageError("'" + key + "' expects a non-negative integer, got '" + v + "'");
    }
}

double to_real(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::logic_error&) {
        throw UsageError("'" + key + "' expects a number, got '" + v + "'");
    }
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
    explicit_keys.insert(key);
    if (key == "seed") {
        seed = to_size(key, value);
        train.seed = seed;
        data.seed = seed;
    } else if (key == "mode") {
        data.mode = parse_sample_mode(value);
    } else if (key == "out") {
        out_dir = value;
    } else if (key == "manifest") {
        manifest = value;
    } else if (key == "checkpoint") {
        checkpoint = value;
    } else if (key == "split") {
        if (value != "train" && value != "test") throw UsageError("split must be train or test");
        split = value;
    } else if (key == "clips") {
        clips = to_size(key, value);
    } else if (key == "inject_bug") {
        inject_bug = text::parse_bool(value);
    } else if (key == "frames" || key == "num_frames") {
        model.num_frames = data.num_frames = to_size(key, value);
    } else if (key == "feature_dim") {
        model.feature_dim = data.feature_dim = to_size(key, value);
        model.extractor.output_dim = model.feature_dim;
    } else if (key == "noise" || key == "noise_level") {
        data.noise_level = to_real(key, value);
    } else if (key == "train_per_class") {
        data.train_per_class = to_size(key, value);
    } else if (key == "test_per_class") {
        data.test_per_class = to_size(key, value);
    } else if (key == "image_size") {
        data.image_size = to_size(key, value);
    } else if (key == "signal_dims") {
        data.signal_dims = to_size(key, value);
    } else if (key == "signal_amplitude") {
        data.signal_amplitude = to_real(key, value);
    } else if (key == "distractor_scale") {
        data.distractor_scale = to_real(key, value);
    } else if (key == "clutter_shapes") {
        data.clutter_shapes = to_size(key, value);
    } else if (key == "clips_per_episode") {
        data.clips_per_episode = to_size(key, value);
    } else if (key == "class_table_seed") {
        data.class_table_seed = to_size(key, value);
    } else if (model.set(key, value)) {
        model.extractor.output_dim = model.feature_dim;
    } else if (!train.set(key, value)) {
        throw UsageError("unknown setting '" + key + "'");
    }
}

RunConfig RunConfig::build(const ConfigEntries& file, const ConfigEntries& flags, const std::string& fallback_mode) {
    std::string mode = fallback_mode;
    bool mode_given = false;
    for (const auto* entries : {&file, &flags})
        for (const auto& [k, v] : *entries)
            if (k == "mode") {
                mode = v;
                mode_given = true;
            }
    RunConfig c = defaults(parse_sample_mode(mode));
    for (const auto* entries : {&file, &flags})
        for (const auto& [k, v] : *entries) c.set(k, v);
    if (!mode_given) c.explicit_keys.erase("mode");
    c.model.validate();
    c.train.validate();
    return c;
}

}  // namespace astnet
