#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <unordered_map>

#include "astnet/parameter.hpp"
#include "astnet/tensor.hpp"

namespace astnet {

class Tape;

// Handle to a value recorded on a Tape.
struct Var {
    Tape* tape = nullptr;
    std::uint32_t id = 0;

    bool valid() const noexcept { return tape != nullptr; }
    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
    std::size_t size() const { return value().size(); }
};

// Linear record of executed differentiable operations. Values recorded on the
// tape are immutable; `backward` replays the record in exact reverse order.
//
// A tape is single-threaded: it may be handed to another thread, but only one
// thread may use it at a time.
class Tape {
public:
    // Propagates the gradient of node `self` into the gradients of its inputs.
    using BackwardFn = std::function<void(Tape&, std::uint32_t self)>;

    explicit Tape(Precision precision = Precision::high) : precision_(precision) {}
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Precision precision() const noexcept { return precision_; }
    std::size_t size() const noexcept { return nodes_.size(); }

    Var constant(Tensor value);
    // Leaf bound to `param`; one leaf per parameter per tape.
    Var parameter(Parameter& param);

    // Records an op output. Rounds to the tape precision and rejects non-finite values.
    Var record(const char* op, Tensor value, std::span<const Var> inputs, BackwardFn backward);
    Var record(const char* op, Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
        return record(op, std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                      std::move(backward));
    }

    const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
    const Tensor& value(std::uint32_t id) const { return nodes_.at(id).value; }
    const char* op_name(std::uint32_t id) const { return nodes_.at(id).op; }
    bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
    bool requires_grad(std::uint32_t id) const { return nodes_.at(id).requires_grad; }

    // Gradient of the loss w.r.t. node `id`; zero-filled on first access.
    Tensor& grad(std::uint32_t id);
    bool has_grad(std::uint32_t id) const { return nodes_.at(id).has_grad; }

    // Reverse-mode sweep from a scalar loss. Parameter gradients accumulate
    // (+=) into Parameter::grad, scaled by `seed`.
    void backward(Var loss, double seed = 1.0);

    // Called with each node id as backward visits it (test instrumentation).
    void set_backward_observer(std::function<void(std::uint32_t)> observer) {
        observer_ = std::move(observer);
    }

private:
    struct Node {
        const char* op;
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        bool has_grad = false;
        Parameter* param = nullptr;
        BackwardFn backward;
    };

    Precision precision_;
    std::deque<Node> nodes_;
    std::unordered_map<const Parameter*, std::uint32_t> param_leaves_;
    std::function<void(std::uint32_t)> observer_;
};

}  // namespace astnet
