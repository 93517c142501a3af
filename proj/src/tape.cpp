#include "astnet/tape.hpp"

#include <string>

#include "astnet/errors.hpp"

namespace astnet {

const Tensor& Var::value() const {
    if (!tape) throw ContractError("use of an unbound Var");
    return tape->value(*this);
}

Var Tape::constant(Tensor value) {
    value.set_precision(precision_);
    if (!value.all_finite()) throw NumericError("non-finite value in constant input");
    nodes_.push_back(Node{"constant", std::move(value), {}, false, false, nullptr, {}});
    return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::parameter(Parameter& param) {
    if (auto it = param_leaves_.find(&param); it != param_leaves_.end()) return Var{this, it->second};
    if (!param.value.all_finite())
        throw NumericError("parameter '" + param.name + "' holds non-finite values");
    Tensor value = param.value;
    value.set_precision(precision_);
    nodes_.push_back(Node{"parameter", std::move(value), {}, param.trainable, false, &param, {}});
    const auto id = static_cast<std::uint32_t>(nodes_.size() - 1);
    param_leaves_.emplace(&param, id);
    return Var{this, id};
}

Var Tape::record(const char* op, Tensor value, std::span<const Var> inputs, BackwardFn backward) {
    bool needs_grad = false;
    for (const Var& in : inputs) {
        if (in.tape != this) throw ContractError(std::string(op) + ": input recorded on another tape");
        needs_grad = needs_grad || nodes_.at(in.id).requires_grad;
    }
    value.set_precision(precision_);
    if (!value.all_finite())
        throw NumericError(std::string("non-finite value produced by ") + op);
    nodes_.push_back(Node{op, std::move(value), {}, needs_grad, false, nullptr,
                          needs_grad ? std::move(backward) : BackwardFn{}});
    return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Tensor& Tape::grad(std::uint32_t id) {
    Node& n = nodes_.at(id);
    if (!n.has_grad) {
        n.grad = Tensor(n.value.shape(), Precision::high);
        n.has_grad = true;
    }
    return n.grad;
}

void Tape::backward(Var loss, double seed) {
    if (loss.tape != this) throw ContractError("backward: loss recorded on another tape");
    if (value(loss).size() != 1)
        throw ContractError("backward: loss must be a scalar, got shape " +
                            shape_string(value(loss).shape()));
    for (auto& n : nodes_) n.has_grad = false;
    if (!nodes_[loss.id].requires_grad) return;
    grad(loss.id)[0] = seed;

    for (std::uint32_t id = loss.id + 1; id-- > 0;) {
        Node& n = nodes_[id];
        if (!n.requires_grad || !n.has_grad) continue;
        if (observer_) observer_(id);
        if (n.backward) n.backward(*this, id);
        if (n.param && n.param->trainable) {
            auto dst = n.param->grad.values();
            auto src = n.grad.values();
            const Precision p = n.param->grad.precision();
            for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = round_to(p, dst[i] + src[i]);
        }
    }
}

}  // namespace astnet
