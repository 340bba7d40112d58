#include "liftgan/nn/optim.hpp"

#include <cmath>

namespace liftgan::nn {

void adam_step(ParamSet& params, const AdamConfig& config) {
    for (auto& p : params) {
        const bool has_grad = !p.grad.empty();
        if (has_grad && p.grad.shape() != p.value.shape()) {
            throw ShapeError("adam_step: gradient " + shape_str(p.grad.shape()) + " for parameter '" + p.name +
                             "' of shape " + shape_str(p.value.shape()));
        }
        for (Tensor* moment : {&p.adam_m, &p.adam_v}) {
            if (moment->empty()) {
                *moment = Tensor(p.value.shape());
            } else if (moment->shape() != p.value.shape()) {
                throw ShapeError("adam_step: optimizer state " + shape_str(moment->shape()) + " for parameter '" +
                                 p.name + "' of shape " + shape_str(p.value.shape()));
            }
        }
    }
    const std::int64_t step = params.adam_steps() + 1;
    params.set_adam_steps(step);
    const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
    for (auto& p : params) {
        const bool has_grad = !p.grad.empty();
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double g = has_grad ? p.grad[i] : 0.0;
            double& m = p.adam_m[i];
            double& v = p.adam_v[i];
            m = config.beta1 * m + (1.0 - config.beta1) * g;
            v = config.beta2 * v + (1.0 - config.beta2) * g * g;
            p.value[i] -= config.lr * (m / c1) / (std::sqrt(v / c2) + config.eps);
        }
    }
}

double clip_grad_norm(ParamSet& params, double max_norm) {
    double sq = 0.0;
    for (const auto& p : params) {
        for (double g : p.grad.values()) sq += g * g;
    }
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        const double f = max_norm / norm;
        for (auto& p : params) {
            for (double& g : p.grad.values()) g *= f;
        }
    }
    return norm;
}

}  // namespace liftgan::nn
