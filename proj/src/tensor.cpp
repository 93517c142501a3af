#include "astnet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <numeric>

#include "astnet/errors.hpp"

namespace astnet {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::dimension: return "dimension error";
        case ErrorKind::label: return "label error";
        case ErrorKind::contract: return "contract error";
        case ErrorKind::numeric: return "numeric error";
        case ErrorKind::format: return "format error";
        case ErrorKind::determinism: return "determinism error";
        case ErrorKind::io: return "I/O error";
        case ErrorKind::usage: return "usage error";
    }
    return "error";
}

const char* to_string(Precision p) {
    return p == Precision::standard ? "standard" : "high";
}

Precision parse_precision(const std::string& text) {
    if (text == "standard") return Precision::standard;
    if (text == "high") return Precision::high;
    throw UsageError("unknown precision '" + text + "' (expected standard or high)");
}

std::string shape_string(const Shape& shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(shape[i]);
    }
    return out + "]";
}

std::size_t element_count(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

namespace {

void check_extents(const Shape& shape) {
    for (auto e : shape)
        if (e == 0) throw DimensionError("tensor extents must be positive, got " + shape_string(shape));
}

}  // namespace

Tensor::Tensor(Shape shape, Precision precision)
    : shape_(std::move(shape)), values_(element_count(shape_), 0.0), precision_(precision) {
    check_extents(shape_);
}

Tensor::Tensor(Shape shape, std::vector<double> values, Precision precision)
    : shape_(std::move(shape)), values_(std::move(values)), precision_(precision) {
    check_extents(shape_);
    if (values_.size() != element_count(shape_))
        throw DimensionError("tensor of shape " + shape_string(shape_) + " needs " +
                             std::to_string(element_count(shape_)) + " elements, got " +
                             std::to_string(values_.size()));
    if (precision_ == Precision::standard)
        for (auto& v : values_) v = round_to(precision_, v);
}

Tensor Tensor::vector(std::initializer_list<double> values, Precision precision) {
    return Tensor({values.size()}, std::vector<double>(values), precision);
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows,
                      Precision precision) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<double> flat;
    flat.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw DimensionError("ragged matrix literal");
        flat.insert(flat.end(), row.begin(), row.end());
    }
    return Tensor({r, c}, std::move(flat), precision);
}

Tensor Tensor::filled(Shape shape, double value, Precision precision) {
    Tensor t(std::move(shape), precision);
    t.fill(value);
    return t;
}

void Tensor::set_precision(Precision precision) {
    precision_ = precision;
    if (precision_ == Precision::standard)
        for (auto& v : values_) v = round_to(precision_, v);
}

void Tensor::fill(double value) {
    std::fill(values_.begin(), values_.end(), round_to(precision_, value));
}

bool Tensor::all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

bool Tensor::identical(const Tensor& other) const {
    return shape_ == other.shape_ &&
           (values_.empty() ||
            std::memcmp(values_.data(), other.values_.data(), values_.size() * sizeof(double)) == 0);
}

}  // namespace astnet
