#include "astnet/checkpoint.hpp"

#include "astnet/errors.hpp"
#include "binary_io.hpp"
#include "text_util.hpp"

namespace astnet {

namespace {

std::size_t width_for(Precision p) { return p == Precision::standard ? 4 : 8; }

void write_tensor_data(io::ByteWriter& w, const Tensor& t, std::size_t width) {
    for (double v : t.values()) w.real(v, width);
}

void read_tensor_data(io::ByteReader& r, Tensor& t, std::size_t width, const char* what) {
    r.need(t.size() * width, what);
    for (double& v : t.values()) v = r.real(width, what);
}

std::string config_block(const Model& model, std::uint64_t model_seed, const TrainConfig& train) {
    std::string s;
    text::for_each_entry(model.config().serialize(), "model config",
                         [&](const std::string& k, const std::string& v, std::size_t) { s += "model." + k + "=" + v + "\n"; });
    text::for_each_entry(train.serialize(), "train config",
                         [&](const std::string& k, const std::string& v, std::size_t) { s += "train." + k + "=" + v + "\n"; });
    s += "model_seed=" + std::to_string(model_seed) + "\n";
    s += std::string("stage=") + to_string(model.stage()) + "\n";
    return s;
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Model& model, std::uint64_t model_seed,
                                               const TrainConfig& train_config, const TrainerState& trainer) {
    const ParameterStore& params = model.parameters();
    io::ByteWriter w;
    w.magic("ASTC");
    w.u32(kCheckpointVersion);
    w.string(config_block(model, model_seed, train_config));

    w.u32(static_cast<std::uint32_t>(params.size()));
    for (const auto& p : params) {
        const std::size_t width = width_for(p->value.precision());
        w.string(p->name);
        w.u32(static_cast<std::uint32_t>(p->value.rank()));
        for (std::size_t d : p->value.shape()) w.u32(static_cast<std::uint32_t>(d));
        w.u32(static_cast<std::uint32_t>(width));
        write_tensor_data(w, p->value, width);
    }

    const auto& moments = trainer.adam.moments();
    w.u64(trainer.adam.steps());
    w.u32(static_cast<std::uint32_t>(moments.size()));
    if (!moments.empty() && moments.size() != params.size())
        throw ContractError("checkpoint: optimizer state does not match the model");
    for (std::size_t i = 0; i < moments.size(); ++i) {
        const std::size_t width = width_for(params[i].value.precision());
        write_tensor_data(w, moments[i].first, width);
        write_tensor_data(w, moments[i].second, width);
    }

    w.u64(train_config.seed);
    w.u32(static_cast<std::uint32_t>(trainer.phase));
    w.u64(trainer.epoch);
    w.u64(trainer.step);

    w.u32(static_cast<std::uint32_t>(trainer.history.size()));
    for (const auto& rec : trainer.history) {
        w.u32(static_cast<std::uint32_t>(rec.phase));
        w.u64(rec.epoch);
        w.f64(rec.loss);
        w.f64(rec.accuracy);
        w.u8(rec.attribute_accuracy ? 1 : 0);
        for (std::size_t i = 0; i < kAttributeCount; ++i) w.f64(rec.attribute_accuracy ? (*rec.attribute_accuracy)[i] : 0.0);
    }
    return w.buffer();
}

void save_checkpoint(const Model& model, std::uint64_t model_seed, const TrainConfig& train_config,
                     const TrainerState& trainer, const std::string& path) {
    io::write_file(path, serialize_checkpoint(model, model_seed, train_config, trainer));
}

LoadedCheckpoint parse_checkpoint(const std::vector<std::uint8_t>& bytes) {
    io::ByteReader r(bytes);
    r.expect_magic("ASTC");
    std::size_t at = r.offset();
    const std::uint32_t version = r.u32("version");
    if (version != kCheckpointVersion)
        throw FormatError("unsupported checkpoint version " + std::to_string(version), at);

    at = r.offset();
    const std::string block = r.string("config block");
    std::string model_text, train_text;
    LoadedCheckpoint out;
    bool have_seed = false, have_stage = false;
    try {
        text::for_each_entry(block, "checkpoint config", [&](const std::string& k, const std::string& v, std::size_t) {
            if (k.rfind("model.", 0) == 0) model_text += k.substr(6) + "=" + v + "\n";
            else if (k.rfind("train.", 0) == 0) train_text += k.substr(6) + "=" + v + "\n";
            else if (k == "model_seed") {
                out.data.model_seed = std::stoull(v);
                have_seed = true;
            } else if (k == "stage") {
                out.data.stage = parse_training_stage(v);
                have_stage = true;
            } else {
                throw FormatError("unknown checkpoint config key '" + k + "'", 0);
            }
        });
        out.data.model_config = ModelConfig::parse(model_text);
        out.data.train_config = TrainConfig::parse(train_text);
    } catch (const FormatError& e) {
        throw FormatError(std::string("config block: ") + e.what(), at);
    } catch (const Error& e) {
        throw FormatError(std::string("config block: ") + e.what(), at);
    } catch (const std::logic_error&) {
        throw FormatError("config block: malformed value", at);
    }
    if (!have_seed || !have_stage) throw FormatError("config block lacks model_seed or stage", at);

    out.model = std::make_unique<Model>(out.data.model_config, out.data.model_seed);
    ParameterStore& params = out.model->parameters();
    at = r.offset();
    const std::uint32_t count = r.u32("parameter count");
    if (count != params.size())
        throw FormatError("checkpoint holds " + std::to_string(count) + " parameters, config implies " +
                          std::to_string(params.size()), at);
    std::vector<bool> seen(params.size(), false);
    std::vector<std::size_t> widths(params.size(), 0);
    for (std::uint32_t k = 0; k < count; ++k) {
        at = r.offset();
        const std::string name = r.string("parameter name");
        std::size_t index = params.size();
        for (std::size_t i = 0; i < params.size(); ++i)
            if (params[i].name == name) index = i;
        if (index == params.size()) throw FormatError("unknown parameter '" + name + "'", at);
        if (seen[index]) throw FormatError("duplicate parameter '" + name + "'", at);
        if (index != k) throw FormatError("parameter '" + name + "' out of order", at);
        seen[index] = true;
        Parameter& p = params[index];
        at = r.offset();
        const std::uint32_t rank = r.u32("rank");
        if (rank != p.value.rank()) throw FormatError("rank mismatch for '" + name + "'", at);
        for (std::size_t d = 0; d < rank; ++d) {
            at = r.offset();
            if (r.u32("extent") != p.value.dim(d)) throw FormatError("extent mismatch for '" + name + "'", at);
        }
        at = r.offset();
        const std::uint32_t width = r.u32("element width");
        if (width != width_for(p.value.precision()))
            throw FormatError("element width " + std::to_string(width) + " does not match precision for '" + name + "'", at);
        widths[index] = width;
        read_tensor_data(r, p.value, width, "parameter data");
        if (!p.value.all_finite()) throw FormatError("non-finite value in '" + name + "'", at);
    }

    TrainerState& st = out.data.trainer;
    const std::uint64_t steps = r.u64("optimizer steps");
    at = r.offset();
    const std::uint32_t moment_count = r.u32("moment count");
    if (moment_count != 0 && moment_count != params.size())
        throw FormatError("optimizer block does not match the parameter count", at);
    st.adam = Adam(params, AdamConfig{out.data.train_config.learning_rate});
    st.adam.set_steps(steps);
    for (std::uint32_t i = 0; i < moment_count; ++i) {
        read_tensor_data(r, st.adam.moments()[i].first, widths[i], "first moment");
        read_tensor_data(r, st.adam.moments()[i].second, widths[i], "second moment");
    }

    at = r.offset();
    if (r.u64("rng seed") != out.data.train_config.seed) throw FormatError("rng seed disagrees with the config block", at);
    at = r.offset();
    const std::uint32_t phase = r.u32("phase");
    if (phase > static_cast<std::uint32_t>(TrainPhase::done)) throw FormatError("unknown phase marker", at);
    st.phase = static_cast<TrainPhase>(phase);
    st.epoch = r.u64("epoch");
    st.step = r.u64("step");

    at = r.offset();
    const std::uint32_t records = r.u32("history count");
    r.need(static_cast<std::size_t>(records) * 53, "history");
    for (std::uint32_t k = 0; k < records; ++k) {
        EpochRecord rec;
        at = r.offset();
        const std::uint32_t rp = r.u32("record phase");
        if (rp > static_cast<std::uint32_t>(TrainPhase::done)) throw FormatError("unknown phase in history", at);
        rec.phase = static_cast<TrainPhase>(rp);
        rec.epoch = r.u64("record epoch");
        rec.loss = r.real(8, "record loss");
        rec.accuracy = r.real(8, "record accuracy");
        at = r.offset();
        const std::uint8_t has = r.u8("record flag");
        if (has > 1) throw FormatError("bad attribute flag in history", at);
        std::array<double, kAttributeCount> acc{};
        for (auto& a : acc) a = r.real(8, "record attribute accuracy");
        if (has) rec.attribute_accuracy = acc;
        st.history.push_back(rec);
    }
    if (!r.at_end()) throw FormatError("trailing bytes after checkpoint", r.offset());
    out.model->set_stage(out.data.stage);
    return out;
}

LoadedCheckpoint load_checkpoint(const std::string& path) { return parse_checkpoint(io::read_file(path)); }

}  // namespace astnet
