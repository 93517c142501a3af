#include "astnet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "astnet/errors.hpp"
#include "astnet/rng.hpp"

namespace astnet {

bool GradCheckReport::passed() const {
    return std::all_of(parameters.begin(), parameters.end(), [](const auto& p) { return p.passed; });
}

double GradCheckReport::max_relative_error() const {
    double worst = 0.0;
    for (const auto& p : parameters) worst = std::max(worst, p.max_relative_error);
    return worst;
}

double relative_error(double analytic, double numeric, double floor) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
    return std::abs(analytic - numeric) / denom;
}

namespace {

double forward_loss(const LossBuilder& build) {
    Tape tape(Precision::high);
    Var loss = build(tape);
    if (loss.size() != 1) throw ContractError("gradient check: loss must be a scalar");
    return loss.value()[0];
}

}  // namespace

GradCheckReport finite_diff_check(const LossBuilder& build, const std::vector<Parameter*>& params,
                                  const GradCheckOptions& options) {
    for (Parameter* p : params) p->zero_grad();
    double base = 0.0;
    {
        Tape tape(Precision::high);
        Var loss = build(tape);
        base = loss.value()[0];
        tape.backward(loss);
    }
    const double again = forward_loss(build);
    if (std::memcmp(&base, &again, sizeof(double)) != 0)
        throw DeterminismError("gradient check: two forward passes at the same point disagree (" +
                               std::to_string(base) + " vs " + std::to_string(again) + ")");

    GradCheckReport report;
    for (Parameter* p : params) {
        if (!p->trainable) continue;
        std::vector<double> analytic(p->grad.values().begin(), p->grad.values().end());
        if (options.tamper) options.tamper(*p, analytic);

        std::vector<std::size_t> indices(p->value.size());
        std::iota(indices.begin(), indices.end(), std::size_t{0});
        if (options.max_elements_per_parameter > 0 && indices.size() > options.max_elements_per_parameter) {
            Rng rng = Rng::derive(options.sample_seed, {hash_string(p->name)});
            rng.shuffle(std::span<std::size_t>(indices));
            indices.resize(options.max_elements_per_parameter);
            std::sort(indices.begin(), indices.end());
        }

        ParameterCheck check{p->name, indices.size(), 0.0, true};
        for (std::size_t i : indices) {
            double& slot = p->value[i];
            const double saved = slot;
            slot = saved + options.step;
            const double plus = forward_loss(build);
            slot = saved - options.step;
            const double minus = forward_loss(build);
            slot = saved;
            const double numeric = (plus - minus) / (2.0 * options.step);
            const double err = relative_error(analytic[i], numeric, options.relative_floor);
            check.max_relative_error = std::max(check.max_relative_error, err);
        }
        check.passed = check.max_relative_error < options.tolerance;
        report.parameters.push_back(std::move(check));
    }
    return report;
}

}  // namespace astnet
