#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "astnet/parameter.hpp"

namespace astnet {

struct AdamConfig {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Adam with bias correction. Moments are kept per parameter, in store order.
class Adam {
public:
    struct Moments {
        std::string name;
        Tensor first;
        Tensor second;
    };

    Adam() = default;
    Adam(const ParameterStore& params, AdamConfig config = {});

    // Updates every trainable parameter from its gradient, then zeroes all
    // gradients. A non-finite gradient throws NumericError before anything changes.
    void step(ParameterStore& params);
    void reset();

    const AdamConfig& config() const noexcept { return config_; }
    std::uint64_t steps() const noexcept { return steps_; }
    void set_steps(std::uint64_t t) { steps_ = t; }
    std::vector<Moments>& moments() noexcept { return moments_; }
    const std::vector<Moments>& moments() const noexcept { return moments_; }

private:
    AdamConfig config_;
    std::uint64_t steps_ = 0;
    std::vector<Moments> moments_;
};

// Global L2 norm over the gradients of trainable parameters.
double gradient_norm(const ParameterStore& params);
// Scales trainable gradients so their global norm is at most `max_norm`.
void clip_gradients(ParameterStore& params, double max_norm);

}  // namespace astnet
