#include "astnet/parameter.hpp"

#include <algorithm>

#include "astnet/errors.hpp"

namespace astnet {

Parameter::Parameter(std::string name_, Tensor value_)
    : name(std::move(name_)), value(std::move(value_)), grad(value.shape(), value.precision()) {}

Parameter& ParameterStore::add(std::string name, Tensor value) {
    if (name.empty()) throw ContractError("parameter name must not be empty");
    if (contains(name)) throw ContractError("duplicate parameter name '" + name + "'");
    params_.push_back(std::make_unique<Parameter>(std::move(name), std::move(value)));
    return *params_.back();
}

Parameter* ParameterStore::find(std::string_view name) {
    for (auto& p : params_)
        if (p->name == name) return p.get();
    return nullptr;
}

const Parameter* ParameterStore::find(std::string_view name) const {
    for (const auto& p : params_)
        if (p->name == name) return p.get();
    return nullptr;
}

Parameter& ParameterStore::at(std::string_view name) {
    if (auto* p = find(name)) return *p;
    throw ContractError("unknown parameter '" + std::string(name) + "'");
}

const Parameter& ParameterStore::at(std::string_view name) const {
    if (const auto* p = find(name)) return *p;
    throw ContractError("unknown parameter '" + std::string(name) + "'");
}

std::size_t ParameterStore::element_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p->value.size();
    return n;
}

void ParameterStore::zero_grad() {
    for (auto& p : params_) p->zero_grad();
}

void ParameterStore::set_all_trainable(bool trainable) {
    for (auto& p : params_) p->trainable = trainable;
}

void ParameterStore::set_trainable_prefixes(const std::vector<std::string>& prefixes) {
    for (auto& p : params_) {
        p->trainable = std::any_of(prefixes.begin(), prefixes.end(), [&](const std::string& prefix) {
            return p->name.compare(0, prefix.size(), prefix) == 0;
        });
    }
}

std::vector<std::string> ParameterStore::names() const {
    std::vector<std::string> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.push_back(p->name);
    return out;
}

}  // namespace astnet
