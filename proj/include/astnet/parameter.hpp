#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "astnet/tensor.hpp"

namespace astnet {

// Learnable tensor with its accumulated gradient. Non-trainable parameters still
// take part in forward passes but never receive gradient.
struct Parameter {
    Parameter(std::string name, Tensor value);

    std::string name;
    Tensor value;
    Tensor grad;
    bool trainable = true;

    void zero_grad() { grad.fill(0.0); }
};

// Insertion-ordered collection of uniquely named parameters with stable addresses.
class ParameterStore {
public:
    Parameter& add(std::string name, Tensor value);

    Parameter* find(std::string_view name);
    const Parameter* find(std::string_view name) const;
    Parameter& at(std::string_view name);
    const Parameter& at(std::string_view name) const;
    bool contains(std::string_view name) const { return find(name) != nullptr; }

    std::size_t size() const noexcept { return params_.size(); }
    std::size_t element_count() const;

    Parameter& operator[](std::size_t i) { return *params_[i]; }
    const Parameter& operator[](std::size_t i) const { return *params_[i]; }

    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.cbegin(); }
    auto end() const { return params_.cend(); }

    void zero_grad();
    void set_all_trainable(bool trainable);
    // Marks trainable exactly the parameters whose name starts with one of `prefixes`.
    void set_trainable_prefixes(const std::vector<std::string>& prefixes);
    std::vector<std::string> names() const;

private:
    std::vector<std::unique_ptr<Parameter>> params_;
};

}  // namespace astnet
