#pragma once

#include <cstdint>
#include <deque>
#include <string>
#include <string_view>

#include "liftgan/nn/tensor.hpp"

namespace liftgan::nn {

struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;  // same shape as value; empty until first backward pass
    // Adam first/second moments; empty until the first optimizer step.
    Tensor adam_m;
    Tensor adam_v;
};

// Named trainable tensors plus optimizer state. Element addresses are stable,
// so tapes may hold pointers to parameters while new ones are added.
class ParamSet {
public:
    Parameter& add(std::string name, Tensor init);

    Parameter& operator[](std::string_view name);
    const Parameter& operator[](std::string_view name) const;
    const Parameter* find(std::string_view name) const;

    std::size_t size() const { return params_.size(); }
    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

    void zero_grad();

    // Number of Adam updates applied so far (drives bias correction).
    std::int64_t adam_steps() const { return adam_steps_; }
    void set_adam_steps(std::int64_t n) { adam_steps_ = n; }
    // Drops gradients and optimizer moments.
    void reset_optimizer();

    // Compares names, shapes and values only.
    bool same_values(const ParamSet& other) const;

private:
    std::deque<Parameter> params_;
    std::int64_t adam_steps_ = 0;
};

}  // namespace liftgan::nn
