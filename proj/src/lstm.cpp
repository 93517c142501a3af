#include "astnet/lstm.hpp"

#include <cmath>

#include "astnet/errors.hpp"
#include "astnet/ops.hpp"

namespace astnet {

Tensor glorot_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
    Tensor w({rows, cols});
    const double s = std::sqrt(6.0 / static_cast<double>(rows + cols));
    for (auto& v : w.values()) v = rng.uniform(-s, s);
    return w;
}

LSTMCellParams LSTMCellParams::create(ParameterStore& store, const std::string& prefix,
                                      std::size_t input_size, std::size_t hidden_size,
                                      const LstmInit& init, Rng& rng) {
    if (input_size == 0 || hidden_size == 0)
        throw DimensionError("LSTM layer '" + prefix + "' needs positive sizes");
    auto weight = [&](const char* name, std::size_t cols) {
        Tensor w = init.glorot_uniform ? glorot_matrix(hidden_size, cols, rng)
                                       : Tensor({hidden_size, cols});
        return &store.add(prefix + "." + name, std::move(w));
    };
    auto bias = [&](const char* name, double value) {
        return &store.add(prefix + "." + name, Tensor::filled({hidden_size}, value));
    };
    LSTMCellParams p;
    p.input_size = input_size;
    p.hidden_size = hidden_size;
    p.W_xi = weight("W_xi", input_size);
    p.W_hi = weight("W_hi", hidden_size);
    p.W_xf = weight("W_xf", input_size);
    p.W_hf = weight("W_hf", hidden_size);
    p.W_xo = weight("W_xo", input_size);
    p.W_ho = weight("W_ho", hidden_size);
    p.W_xc = weight("W_xc", input_size);
    p.W_hc = weight("W_hc", hidden_size);
    p.b_i = bias("b_i", 0.0);
    p.b_f = bias("b_f", init.forget_bias);
    p.b_o = bias("b_o", 0.0);
    p.b_c = bias("b_c", 0.0);
    return p;
}

std::vector<Parameter*> LSTMCellParams::all() const {
    return {W_xi, W_hi, W_xf, W_hf, W_xo, W_ho, W_xc, W_hc, b_i, b_f, b_o, b_c};
}

namespace {

Var gate_preactivation(Tape& tape, Parameter* wx, Parameter* wh, Parameter* b, Var x, Var h) {
    return add(add(matmul(tape.parameter(*wx), x), matmul(tape.parameter(*wh), h)), tape.parameter(*b));
}

}  // namespace

LayerState cell_step(const LSTMCellParams& p, Var x, const LayerState& prev) {
    if (!x.valid()) throw ContractError("cell_step: unbound input");
    Tape& tape = *x.tape;
    if (x.shape() != Shape{p.input_size})
        throw DimensionError("cell_step: input " + shape_string(x.shape()) + " but layer expects [" +
                             std::to_string(p.input_size) + "]");
    if (prev.h.shape() != Shape{p.hidden_size} || prev.c.shape() != Shape{p.hidden_size})
        throw DimensionError("cell_step: state " + shape_string(prev.h.shape()) + "/" +
                             shape_string(prev.c.shape()) + " but layer hidden size is " +
                             std::to_string(p.hidden_size));

    Var i = sigmoid(gate_preactivation(tape, p.W_xi, p.W_hi, p.b_i, x, prev.h));
    Var f = sigmoid(gate_preactivation(tape, p.W_xf, p.W_hf, p.b_f, x, prev.h));
    Var o = sigmoid(gate_preactivation(tape, p.W_xo, p.W_ho, p.b_o, x, prev.h));
    Var g = tanh_op(gate_preactivation(tape, p.W_xc, p.W_hc, p.b_c, x, prev.h));
    Var c = add(hadamard(f, prev.c), hadamard(i, g));
    Var h = hadamard(o, tanh_op(c));
    return {h, c};
}

StackedLSTM::StackedLSTM(ParameterStore& store, const std::string& prefix, std::size_t input_size,
                         std::size_t hidden_size, std::size_t depth, const LstmInit& init, Rng& rng)
    : input_size_(input_size), hidden_size_(hidden_size) {
    if (depth == 0) throw ContractError("StackedLSTM '" + prefix + "' needs at least one layer");
    for (std::size_t l = 0; l < depth; ++l) {
        const std::size_t in = l == 0 ? input_size : hidden_size;
        layers_.push_back(LSTMCellParams::create(store, prefix + ".l" + std::to_string(l), in,
                                                 hidden_size, init, rng));
    }
}

LSTMState StackedLSTM::zero_state(Tape& tape) const {
    LSTMState s;
    for (std::size_t l = 0; l < layers_.size(); ++l)
        s.layers.push_back({tape.constant(Tensor({hidden_size_})), tape.constant(Tensor({hidden_size_}))});
    return s;
}

StepResult StackedLSTM::step(Var x, const LSTMState& prev) const {
    if (prev.depth() != layers_.size())
        throw ContractError("stacked_step: state has " + std::to_string(prev.depth()) +
                            " layers, stack has " + std::to_string(layers_.size()));
    StepResult r;
    r.state.layers.reserve(layers_.size());
    Var input = x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        LayerState next = cell_step(layers_[l], input, prev.layers[l]);
        r.state.layers.push_back(next);
        input = next.h;
    }
    r.output = input;
    return r;
}

SequenceResult run_sequence(const StepFn& step, std::span<const Var> inputs, const LSTMState& init,
                            Order order) {
    if (inputs.empty()) throw ContractError("run_sequence: empty input sequence");
    SequenceResult result;
    result.outputs.reserve(inputs.size());
    LSTMState state = init;
    const std::size_t n = inputs.size();
    for (std::size_t k = 0; k < n; ++k) {
        const Var x = order == Order::forward ? inputs[k] : inputs[n - 1 - k];
        StepResult r = step(x, state);
        result.outputs.push_back(r.output);
        state = std::move(r.state);
    }
    result.final_state = std::move(state);
    return result;
}

SequenceResult run_sequence(const StackedLSTM& stack, std::span<const Var> inputs,
                            const LSTMState& init, Order order) {
    return run_sequence([&stack](Var x, const LSTMState& s) { return stack.step(x, s); }, inputs,
                        init, order);
}

StateProjection::StateProjection(ParameterStore& store, const std::string& prefix, std::size_t from,
                                 std::size_t to, std::size_t depth, Rng& rng)
    : from_(from), to_(to), depth_(depth) {
    if (from == to) return;
    for (std::size_t l = 0; l < depth; ++l) {
        const std::string base = prefix + ".l" + std::to_string(l);
        proj_h_.push_back(&store.add(base + ".P_h", glorot_matrix(to, from, rng)));
        proj_c_.push_back(&store.add(base + ".P_c", glorot_matrix(to, from, rng)));
    }
}

LSTMState StateProjection::apply(const LSTMState& state) const {
    if (identity()) return state;
    if (state.depth() != depth_)
        throw ContractError("project_state: state has " + std::to_string(state.depth()) +
                            " layers, projection has " + std::to_string(depth_));
    LSTMState out;
    for (std::size_t l = 0; l < depth_; ++l) {
        const LayerState& s = state.layers[l];
        Tape& tape = *s.h.tape;
        out.layers.push_back({matmul(tape.parameter(*proj_h_[l]), s.h),
                              matmul(tape.parameter(*proj_c_[l]), s.c)});
    }
    return out;
}

}  // namespace astnet
