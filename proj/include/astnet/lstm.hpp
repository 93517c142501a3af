#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "astnet/parameter.hpp"
#include "astnet/rng.hpp"
#include "astnet/tape.hpp"

namespace astnet {

struct LstmInit {
    // Weights ~ U(-s, s) with s = sqrt(6 / (fan_in + fan_out)).
    bool glorot_uniform = true;
    double forget_bias = 1.0;
};

// The twelve learnable tensors of one LSTM layer:
//   i = sigmoid(W_xi x + W_hi h + b_i)     f = sigmoid(W_xf x + W_hf h + b_f)
//   o = sigmoid(W_xo x + W_ho h + b_o)     g = tanh(W_xc x + W_hc h + b_c)
//   c' = f * c + i * g                     h' = o * tanh(c')
struct LSTMCellParams {
    Parameter* W_xi = nullptr;
    Parameter* W_hi = nullptr;
    Parameter* W_xf = nullptr;
    Parameter* W_hf = nullptr;
    Parameter* W_xo = nullptr;
    Parameter* W_ho = nullptr;
    Parameter* W_xc = nullptr;
    Parameter* W_hc = nullptr;
    Parameter* b_i = nullptr;
    Parameter* b_f = nullptr;
    Parameter* b_o = nullptr;
    Parameter* b_c = nullptr;
    std::size_t input_size = 0;
    std::size_t hidden_size = 0;

    // Registers "<prefix>.W_xi" ... "<prefix>.b_c" in `store`.
    static LSTMCellParams create(ParameterStore& store, const std::string& prefix,
                                 std::size_t input_size, std::size_t hidden_size,
                                 const LstmInit& init, Rng& rng);

    std::vector<Parameter*> all() const;
};

struct LayerState {
    Var h;
    Var c;
};

struct LSTMState {
    std::vector<LayerState> layers;

    std::size_t depth() const noexcept { return layers.size(); }
};

// One time step of a single layer.
LayerState cell_step(const LSTMCellParams& params, Var x, const LayerState& prev);

struct StepResult {
    Var output;  // top-layer hidden state
    LSTMState state;
};

// Layers stacked so that layer l > 0 consumes the hidden state of layer l-1.
class StackedLSTM {
public:
    StackedLSTM() = default;
    StackedLSTM(ParameterStore& store, const std::string& prefix, std::size_t input_size,
                std::size_t hidden_size, std::size_t depth, const LstmInit& init, Rng& rng);

    std::size_t input_size() const noexcept { return input_size_; }
    std::size_t hidden_size() const noexcept { return hidden_size_; }
    std::size_t depth() const noexcept { return layers_.size(); }
    const std::vector<LSTMCellParams>& layers() const noexcept { return layers_; }

    LSTMState zero_state(Tape& tape) const;
    StepResult step(Var x, const LSTMState& prev) const;

private:
    std::size_t input_size_ = 0;
    std::size_t hidden_size_ = 0;
    std::vector<LSTMCellParams> layers_;
};

enum class Order { forward, reversed };

using StepFn = std::function<StepResult(Var x, const LSTMState& prev)>;

struct SequenceResult {
    std::vector<Var> outputs;  // outputs[k] belongs to the k-th consumed input
    LSTMState final_state;
};

SequenceResult run_sequence(const StepFn& step, std::span<const Var> inputs, const LSTMState& init,
                            Order order);
SequenceResult run_sequence(const StackedLSTM& stack, std::span<const Var> inputs,
                            const LSTMState& init, Order order);

// Maps an LSTMState of width `from` to width `to` with learned per-layer
// matrices: h' = P_h h, c' = P_c c. Identity without parameters when from == to.
class StateProjection {
public:
    StateProjection() = default;
    StateProjection(ParameterStore& store, const std::string& prefix, std::size_t from,
                    std::size_t to, std::size_t depth, Rng& rng);

    bool identity() const noexcept { return proj_h_.empty(); }
    std::size_t from() const noexcept { return from_; }
    std::size_t to() const noexcept { return to_; }

    LSTMState apply(const LSTMState& state) const;

private:
    std::size_t from_ = 0;
    std::size_t to_ = 0;
    std::size_t depth_ = 0;
    std::vector<Parameter*> proj_h_;
    std::vector<Parameter*> proj_c_;
};

// Uniform Glorot initialisation of a [rows x cols] matrix.
Tensor glorot_matrix(std::size_t rows, std::size_t cols, Rng& rng);

}  // namespace astnet
