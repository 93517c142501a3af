#include "astnet/adam.hpp"

#include <cmath>

#include "astnet/errors.hpp"

namespace astnet {

Adam::Adam(const ParameterStore& params, AdamConfig config) : config_(config) {
    if (!(config.learning_rate > 0.0) || config.beta1 < 0.0 || config.beta1 >= 1.0 || config.beta2 < 0.0 ||
        config.beta2 >= 1.0 || !(config.epsilon > 0.0))
        throw ContractError("adam: invalid hyperparameters");
    for (const auto& p : params) {
        Tensor zero(p->value.shape(), p->value.precision());
        moments_.push_back({p->name, zero, zero});
    }
}

void Adam::reset() {
    steps_ = 0;
    for (auto& m : moments_) {
        m.first.fill(0.0);
        m.second.fill(0.0);
    }
}

void Adam::step(ParameterStore& params) {
    if (params.size() != moments_.size()) throw ContractError("adam: parameter store does not match optimizer state");
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Parameter& p = params[i];
        if (p.name != moments_[i].name) throw ContractError("adam: parameter order changed at '" + p.name + "'");
        if (p.trainable && !p.grad.all_finite()) throw NumericError("adam: non-finite gradient for '" + p.name + "'");
    }
    ++steps_;
    const double t = static_cast<double>(steps_);
    const double c1 = 1.0 - std::pow(config_.beta1, t);
    const double c2 = 1.0 - std::pow(config_.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        Parameter& p = params[i];
        if (p.trainable) {
            const Precision prec = p.value.precision();
            double* theta = p.value.data();
            double* m = moments_[i].first.data();
            double* v = moments_[i].second.data();
            const double* g = p.grad.data();
            for (std::size_t k = 0; k < p.value.size(); ++k) {
                m[k] = round_to(prec, config_.beta1 * m[k] + (1.0 - config_.beta1) * g[k]);
                v[k] = round_to(prec, config_.beta2 * v[k] + (1.0 - config_.beta2) * g[k] * g[k]);
                const double m_hat = m[k] / c1;
                const double v_hat = v[k] / c2;
                theta[k] = round_to(prec, theta[k] - config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon));
            }
        }
        p.zero_grad();
    }
}

double gradient_norm(const ParameterStore& params) {
    double sq = 0.0;
    for (const auto& p : params)
        if (p->trainable)
            for (double g : p->grad.values()) sq += g * g;
    return std::sqrt(sq);
}

void clip_gradients(ParameterStore& params, double max_norm) {
    if (!(max_norm > 0.0)) return;
    const double norm = gradient_norm(params);
    if (norm <= max_norm) return;
    const double scale = max_norm / norm;
    for (auto& p : params)
        if (p->trainable)
            for (double& g : p->grad.values()) g = round_to(p->grad.precision(), g * scale);
}

}  // namespace astnet
