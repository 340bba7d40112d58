#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "liftgan/nn/tape.hpp"

namespace liftgan::nn {

// Builds a scalar loss on the given tape from parameters of the checked set.
using LossFn = std::function<Var(Tape&)>;

struct GradCheckOptions {
    double step = 1e-3;
    // 0 checks every coordinate; otherwise a seeded random subset per parameter.
    std::size_t max_coords_per_param = 0;
    std::uint64_t seed = 1;
};

struct GradCheckResult {
    // max |analytic - numeric| / max(1, |numeric|) over checked coordinates
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    // Coordinates skipped because a +-step perturbation switches a relu/max
    // branch, i.e. the loss is not smooth there.
    std::size_t excluded = 0;
    std::string worst;  // "name[index]" of the largest error
};

// Compares backward() against central differences. Parameter values are
// restored before returning. Throws std::domain_error on non-finite values.
GradCheckResult grad_check(ParamSet& params, const LossFn& loss, const GradCheckOptions& options = {});

}  // namespace liftgan::nn
