#include "liftgan/nn/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "liftgan/rng.hpp"

namespace liftgan::nn {

namespace {

struct Probe {
    double value;
    std::uint64_t signature;
};

Probe evaluate(const LossFn& loss) {
    Tape tape(false);
    const Var out = loss(tape);
    if (out.value().size() != 1) throw ShapeError("grad_check: loss must be a scalar, got " + shape_str(out.shape()));
    const double v = out.value()[0];
    if (!std::isfinite(v)) throw std::domain_error("grad_check: loss is not finite");
    return {v, tape.branch_signature()};
}

}  // namespace

GradCheckResult grad_check(ParamSet& params, const LossFn& loss, const GradCheckOptions& options) {
    if (!(options.step > 0.0)) throw std::invalid_argument("grad_check: step must be positive");

    std::vector<Tensor> saved_grads;
    for (auto& p : params) saved_grads.push_back(p.grad);

    params.zero_grad();
    std::uint64_t base_signature = 0;
    {
        Tape tape;
        const Var out = loss(tape);
        if (!std::isfinite(out.value().item())) throw std::domain_error("grad_check: loss is not finite");
        base_signature = tape.branch_signature();
        tape.backward(out);
    }

    GradCheckResult result;
    Rng rng(options.seed);
    for (auto& p : params) {
        const Tensor analytic = p.grad;
        std::vector<std::size_t> coords(p.value.size());
        std::iota(coords.begin(), coords.end(), std::size_t{0});
        if (options.max_coords_per_param != 0 && coords.size() > options.max_coords_per_param) {
            for (std::size_t i = 0; i < options.max_coords_per_param; ++i) {
                const auto j = static_cast<std::size_t>(
                    rng.uniform_int(static_cast<std::int64_t>(i), static_cast<std::int64_t>(coords.size()) - 1));
                std::swap(coords[i], coords[j]);
            }
            coords.resize(options.max_coords_per_param);
        }
        for (const std::size_t i : coords) {
            const double orig = p.value[i];
            p.value[i] = orig + options.step;
            const Probe plus = evaluate(loss);
            p.value[i] = orig - options.step;
            const Probe minus = evaluate(loss);
            p.value[i] = orig;

            if (plus.signature != base_signature || minus.signature != base_signature) {
                ++result.excluded;
                continue;
            }
            const double a = analytic[i];
            if (!std::isfinite(a)) throw std::domain_error("grad_check: analytic gradient is not finite");
            const double numeric = (plus.value - minus.value) / (2.0 * options.step);
            const double err = std::abs(a - numeric) / std::max(1.0, std::abs(numeric));
            ++result.checked;
            if (err > result.max_rel_error || result.worst.empty()) {
                result.max_rel_error = err;
                result.worst = p.name + "[" + std::to_string(i) + "]";
            }
        }
    }

    std::size_t k = 0;
    for (auto& p : params) p.grad = std::move(saved_grads[k++]);
    return result;
}

}  // namespace liftgan::nn
