#pragma once

#include "liftgan/nn/param_set.hpp"

namespace liftgan::nn {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// One Adam update with bias correction using the gradients stored in each
// parameter. A parameter whose gradient was never populated counts as zero.
// Throws ShapeError if a gradient or moment shape disagrees with its value.
void adam_step(ParamSet& params, const AdamConfig& config);

// Rescales all gradients so that their joint L2 norm is at most max_norm.
// Returns the norm before clipping.
double clip_grad_norm(ParamSet& params, double max_norm);

}  // namespace liftgan::nn
