#pragma once

#include <functional>
#include <string>

#include "astnet/gradcheck.hpp"
#include "astnet/model.hpp"
#include "astnet/run_config.hpp"

namespace astnet {

using LineSink = std::function<void(const std::string&)>;

// Each command writes its report through `out`; failures throw astnet::Error.
void cmd_gen_data(const RunConfig& config, const LineSink& out);
void cmd_train(const ConfigEntries& file, const ConfigEntries& flags, const LineSink& out);
void cmd_eval(const RunConfig& config, const LineSink& out);
// Returns true when every parameter passes.
bool cmd_gradcheck(const RunConfig& config, const LineSink& out);
void cmd_visualize(const RunConfig& config, const LineSink& out);

// Gradient check of the full model on one deterministic sample: the loss is
// the attribute loss plus the class loss, so every parameter receives a gradient.
GradCheckReport check_model_gradients(Model& model, std::uint64_t seed, const GradCheckOptions& options = {});

}  // namespace astnet
