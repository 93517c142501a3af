#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace astnet {

// standard: values are kept representable as 32-bit floats (every op output is
// rounded through float). high: full 64-bit doubles.
enum class Precision { standard, high };

const char* to_string(Precision p);
Precision parse_precision(const std::string& text);

// Rounds `x` to the nearest value representable at precision `p`.
inline double round_to(Precision p, double x) {
    return p == Precision::standard ? static_cast<double>(static_cast<float>(x)) : x;
}

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);
std::size_t element_count(const Shape& shape);

// Dense row-major array of reals.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, Precision precision = Precision::high);
    Tensor(Shape shape, std::vector<double> values, Precision precision = Precision::high);

    static Tensor vector(std::initializer_list<double> values,
                         Precision precision = Precision::high);
    static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows,
                         Precision precision = Precision::high);
    static Tensor filled(Shape shape, double value, Precision precision = Precision::high);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }
    Precision precision() const noexcept { return precision_; }

    std::span<const double> values() const noexcept { return values_; }
    std::span<double> values() noexcept { return values_; }
    const double* data() const noexcept { return values_.data(); }
    double* data() noexcept { return values_.data(); }

    double operator[](std::size_t i) const { return values_[i]; }
    double& operator[](std::size_t i) { return values_[i]; }
    double at(std::size_t row, std::size_t col) const { return values_[row * shape_.at(1) + col]; }
    double& at(std::size_t row, std::size_t col) { return values_[row * shape_.at(1) + col]; }

    // Rounds every element to the tensor's precision and tags it accordingly.
    void set_precision(Precision precision);
    void fill(double value);
    bool all_finite() const;

    // Same shape and bitwise-identical elements.
    bool identical(const Tensor& other) const;

private:
    Shape shape_;
    std::vector<double> values_;
    Precision precision_ = Precision::high;
};

}  // namespace astnet
