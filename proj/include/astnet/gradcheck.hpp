#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "astnet/parameter.hpp"
#include "astnet/tape.hpp"

namespace astnet {

// Builds a scalar loss on the supplied tape from the current parameter values.
// Must be deterministic: any randomness has to be reseeded on every call.
using LossBuilder = std::function<Var(Tape&)>;

struct GradCheckOptions {
    double step = 1e-5;
    double tolerance = 1e-4;
    // Denominator floor for the relative error |a - n| / max(|a|, |n|, floor);
    // keeps near-zero gradients from turning round-off (about 1e-10 absolute at
    // step 1e-5 for losses of order 1) into large ratios.
    double relative_floor = 1e-5;
    // 0 checks every element; otherwise a seeded random subset of this size per parameter.
    std::size_t max_elements_per_parameter = 0;
    std::uint64_t sample_seed = 0;
    // Test hook: lets a caller tamper with the analytic gradient before comparison.
    std::function<void(const Parameter&, std::vector<double>&)> tamper;
};

struct ParameterCheck {
    std::string name;
    std::size_t checked = 0;
    double max_relative_error = 0.0;
    bool passed = true;
};

struct GradCheckReport {
    std::vector<ParameterCheck> parameters;

    bool passed() const;
    double max_relative_error() const;
};

// Compares the tape gradient of every trainable parameter in `params` against
// central differences (L(theta + h) - L(theta - h)) / 2h, in high precision.
// Throws DeterminismError if two forward passes at the same point disagree.
GradCheckReport finite_diff_check(const LossBuilder& build, const std::vector<Parameter*>& params,
                                  const GradCheckOptions& options = {});

double relative_error(double analytic, double numeric, double floor);

}  // namespace astnet
