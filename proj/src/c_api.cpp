#include "astnet/astnet.h"

#include <string>

#include "astnet/checkpoint.hpp"
#include "astnet/commands.hpp"
#include "astnet/errors.hpp"

struct astnet_options {
    astnet::ConfigEntries file;
    astnet::ConfigEntries flags;
};

struct astnet_model {
    std::unique_ptr<astnet::Model> model;
    std::vector<std::string> names;
};

struct astnet_dataset {
    astnet::Dataset dataset;
};

namespace {

thread_local std::string last_error;

astnet_status status_for(astnet::ErrorKind kind) {
    switch (kind) {
        case astnet::ErrorKind::usage: return ASTNET_ERR_USAGE;
        case astnet::ErrorKind::dimension: return ASTNET_ERR_DIMENSION;
        case astnet::ErrorKind::label: return ASTNET_ERR_LABEL;
        case astnet::ErrorKind::contract: return ASTNET_ERR_CONTRACT;
        case astnet::ErrorKind::numeric: return ASTNET_ERR_NUMERIC;
        case astnet::ErrorKind::format: return ASTNET_ERR_FORMAT;
        case astnet::ErrorKind::determinism: return ASTNET_ERR_DETERMINISM;
        case astnet::ErrorKind::io: return ASTNET_ERR_IO;
    }
    return ASTNET_ERR_INTERNAL;
}

template <typename Fn>
astnet_status guarded(Fn&& fn) {
    try {
        last_error.clear();
        fn();
        return ASTNET_OK;
    } catch (const astnet::Error& e) {
        last_error = e.what();
        return status_for(e.kind());
    } catch (const std::bad_alloc&) {
        last_error = "out of memory";
    } catch (const std::exception& e) {
        last_error = e.what();
    } catch (...) {
        last_error = "unknown failure";
    }
    return ASTNET_ERR_INTERNAL;
}

astnet_status null_argument(const char* what) {
    last_error = std::string("null argument: ") + what;
    return ASTNET_ERR_USAGE;
}

astnet::LineSink make_sink(astnet_line_fn fn, void* user) {
    return [fn, user](const std::string& line) {
        if (fn) fn(line.c_str(), user);
    };
}

astnet::RunConfig resolve(const astnet_options* o) { return astnet::RunConfig::build(o->file, o->flags); }

}  // namespace

extern "C" {

const char* astnet_version(void) { return "1.0.0"; }

const char* astnet_status_name(astnet_status status) {
    switch (status) {
        case ASTNET_OK: return "ok";
        case ASTNET_ERR_USAGE: return "usage";
        case ASTNET_ERR_DIMENSION: return "dimension";
        case ASTNET_ERR_LABEL: return "label";
        case ASTNET_ERR_CONTRACT: return "contract";
        case ASTNET_ERR_NUMERIC: return "numeric";
        case ASTNET_ERR_FORMAT: return "format";
        case ASTNET_ERR_DETERMINISM: return "determinism";
        case ASTNET_ERR_IO: return "io";
        case ASTNET_ERR_INTERNAL: return "internal";
    }
    return "unknown";
}

const char* astnet_last_error(void) { return last_error.c_str(); }

astnet_status astnet_options_create(astnet_options** out) {
    if (!out) return null_argument("out");
    return guarded([&] { *out = new astnet_options(); });
}

void astnet_options_destroy(astnet_options* options) { delete options; }

astnet_status astnet_options_load_file(astnet_options* options, const char* path) {
    if (!options || !path) return null_argument("options/path");
    return guarded([&] {
        auto entries = astnet::read_config_file(path);
        auto candidate = options->file;
        candidate.insert(candidate.end(), entries.begin(), entries.end());
        astnet::RunConfig::build(candidate, options->flags);
        options->file = std::move(candidate);
    });
}

astnet_status astnet_options_set(astnet_options* options, const char* key, const char* value) {
    if (!options || !key || !value) return null_argument("options/key/value");
    return guarded([&] {
        auto candidate = options->flags;
        candidate.emplace_back(key, value);
        astnet::RunConfig::build(options->file, candidate);
        options->flags = std::move(candidate);
    });
}

astnet_status astnet_gen_data(const astnet_options* options, astnet_line_fn sink, void* user) {
    if (!options) return null_argument("options");
    return guarded([&] { astnet::cmd_gen_data(resolve(options), make_sink(sink, user)); });
}

astnet_status astnet_train(const astnet_options* options, astnet_line_fn sink, void* user) {
    if (!options) return null_argument("options");
    return guarded([&] { astnet::cmd_train(options->file, options->flags, make_sink(sink, user)); });
}

astnet_status astnet_eval(const astnet_options* options, astnet_line_fn sink, void* user) {
    if (!options) return null_argument("options");
    return guarded([&] { astnet::cmd_eval(resolve(options), make_sink(sink, user)); });
}

astnet_status astnet_gradcheck(const astnet_options* options, astnet_line_fn sink, void* user, int* passed) {
    if (!options || !passed) return null_argument("options/passed");
    return guarded([&] { *passed = astnet::cmd_gradcheck(resolve(options), make_sink(sink, user)) ? 1 : 0; });
}

astnet_status astnet_visualize(const astnet_options* options, astnet_line_fn sink, void* user) {
    if (!options) return null_argument("options");
    return guarded([&] { astnet::cmd_visualize(resolve(options), make_sink(sink, user)); });
}

astnet_status astnet_model_load(const char* checkpoint_path, astnet_model** out) {
    if (!checkpoint_path || !out) return null_argument("checkpoint_path/out");
    return guarded([&] {
        auto loaded = astnet::load_checkpoint(checkpoint_path);
        auto handle = std::make_unique<astnet_model>();
        handle->names = loaded.model->parameters().names();
        handle->model = std::move(loaded.model);
        *out = handle.release();
    });
}

void astnet_model_destroy(astnet_model* model) { delete model; }

astnet_status astnet_model_get_info(const astnet_model* model, astnet_model_info* out) {
    if (!model || !out) return null_argument("model/out");
    return guarded([&] {
        const auto& c = model->model->config();
        out->feature_dim = c.feature_dim;
        out->num_frames = c.num_frames;
        out->class_count = c.class_count;
        out->parameter_count = model->model->parameters().size();
        out->element_count = model->model->parameters().element_count();
        out->attention_enabled = c.attention_enabled ? 1 : 0;
        out->reverse_enabled = c.reverse_enabled ? 1 : 0;
        out->image_input = c.extractor.kind == astnet::ExtractorKind::tiny_conv ? 1 : 0;
    });
}

astnet_status astnet_model_parameter_name(const astnet_model* model, size_t index, const char** name) {
    if (!model || !name) return null_argument("model/name");
    if (index >= model->names.size()) {
        last_error = "parameter index " + std::to_string(index) + " out of range";
        return ASTNET_ERR_USAGE;
    }
    *name = model->names[index].c_str();
    last_error.clear();
    return ASTNET_OK;
}

astnet_status astnet_model_predict(const astnet_model* model, const double* features, size_t frames, size_t dim,
                                   double* logits, size_t logits_len, size_t* predicted) {
    if (!model || !features || !logits) return null_argument("model/features/logits");
    return guarded([&] {
        const auto& c = model->model->config();
        if (c.extractor.kind != astnet::ExtractorKind::file)
            throw astnet::UsageError("model expects image clips, not feature vectors");
        if (dim != c.feature_dim) throw astnet::DimensionError("feature dim " + std::to_string(dim) + ", model expects " + std::to_string(c.feature_dim));
        if (logits_len < c.class_count) throw astnet::DimensionError("logits buffer holds fewer than class_count values");
        astnet::SyntheticSample sample;
        for (size_t t = 0; t < frames; ++t)
            sample.features.vectors.emplace_back(astnet::Shape{dim}, std::vector<double>(features + t * dim, features + (t + 1) * dim));
        const auto inf = astnet::infer(*model->model, sample);
        for (size_t k = 0; k < c.class_count; ++k) logits[k] = inf.class_logits[k];
        if (predicted) *predicted = astnet::argmax(inf.class_logits.values());
    });
}

astnet_status astnet_dataset_load(const char* manifest_path, astnet_dataset** out) {
    if (!manifest_path || !out) return null_argument("manifest_path/out");
    return guarded([&] { *out = new astnet_dataset{astnet::load_dataset(manifest_path)}; });
}

void astnet_dataset_destroy(astnet_dataset* dataset) { delete dataset; }

astnet_status astnet_dataset_size(const astnet_dataset* dataset, const char* split, size_t* out) {
    if (!dataset || !split || !out) return null_argument("dataset/split/out");
    return guarded([&] { *out = dataset->dataset.split(split).size(); });
}

astnet_status astnet_evaluate(const astnet_model* model, const astnet_dataset* dataset, const char* split,
                              double* accuracy) {
    if (!model || !dataset || !split || !accuracy) return null_argument("model/dataset/split/accuracy");
    return guarded([&] {
        const auto& samples = dataset->dataset.split(split);
        if (samples.empty()) throw astnet::UsageError(std::string("split '") + split + "' is empty");
        *accuracy = astnet::evaluate(*model->model, samples).accuracy;
    });
}

}  // extern "C"
