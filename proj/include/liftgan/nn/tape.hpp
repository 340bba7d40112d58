#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>

#include "liftgan/nn/param_set.hpp"
#include "liftgan/nn/tensor.hpp"

namespace liftgan::nn {

class Tape;

// Handle to a node recorded on a Tape. Valid as long as the tape lives.
class Var {
public:
    Var() = default;

    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
    Tape& tape() const { return *tape_; }
    std::size_t id() const { return id_; }

private:
    friend class Tape;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

// Reverse-mode autodiff tape. Nodes are appended in evaluation order, so the
// recording order is a topological order and backward() is a single reverse
// sweep.
//
// A tape built with record_backward = false evaluates the same ops without
// keeping backward closures; it is used for inference and rollouts.
class Tape {
public:
    // Receives the tape and the id of the node whose gradient is ready.
    using Backward = std::function<void(Tape&, std::size_t)>;

    explicit Tape(bool record_backward = true) : recording_(record_backward) {}
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Tensor value);
    // Leaf bound to a parameter; backward() adds its gradient into p.grad.
    // The parameter's value is referenced, not copied.
    Var parameter(Parameter& p);

    // Appends an op result. The closure is kept only if recording and at least
    // one input needs a gradient.
    Var record(Tensor value, std::initializer_list<Var> inputs, Backward backward);
    Var record(Tensor value, const std::vector<Var>& inputs, Backward backward);

    bool recording() const { return recording_; }
    bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
    const Tensor& value(std::size_t id) const;
    // Gradient slot, zero-initialised on first access.
    Tensor& grad(std::size_t id);
    std::size_t size() const { return nodes_.size(); }

    // Seeds d(loss)/d(loss) = 1 and sweeps backwards. Throws ShapeError if
    // the loss is not a single value.
    void backward(Var loss);

    // Non-differentiable points. Ops with kinks (relu, max) fold their branch
    // decisions into a signature and flag inputs sitting exactly on a kink.
    void note_branch(std::uint64_t code);
    void note_kink() { hit_kink_ = true; }
    std::uint64_t branch_signature() const { return signature_; }
    bool hit_kink() const { return hit_kink_; }

private:
    struct Node {
        Tensor owned;
        const Tensor* external = nullptr;
        Tensor grad;
        Backward backward;
        Parameter* param = nullptr;
        bool needs_grad = false;
    };

    Var push(Node node);

    std::deque<Node> nodes_;
    bool recording_;
    std::uint64_t signature_ = 0xcbf29ce484222325ULL;
    bool hit_kink_ = false;
};

}  // namespace liftgan::nn
