#include "liftgan/nn/tensor.hpp"

#include <algorithm>

#include "liftgan/nn/param_set.hpp"
#include "liftgan/nn/tape.hpp"

namespace liftgan::nn {

std::string shape_str(const Shape& shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(shape[i]);
    }
    return out + "]";
}

std::size_t element_count(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), values_(element_count(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), values_(values.begin(), values.end()) {
    if (values_.size() != element_count(shape_)) {
        throw ShapeError("tensor: " + std::to_string(values_.size()) + " values do not fill shape " +
                         shape_str(shape_));
    }
}

double Tensor::item() const {
    if (values_.size() != 1) throw ShapeError("item: tensor of shape " + shape_str(shape_) + " is not a scalar");
    return values_[0];
}

// --- ParamSet --------------------------------------------------------------

Parameter& ParamSet::add(std::string name, Tensor init) {
    if (find(name)) throw std::invalid_argument("duplicate parameter name '" + name + "'");
    params_.push_back(Parameter{std::move(name), std::move(init), {}, {}, {}});
    return params_.back();
}

const Parameter* ParamSet::find(std::string_view name) const {
    for (const auto& p : params_) {
        if (p.name == name) return &p;
    }
    return nullptr;
}

Parameter& ParamSet::operator[](std::string_view name) {
    return const_cast<Parameter&>(static_cast<const ParamSet&>(*this)[name]);
}

const Parameter& ParamSet::operator[](std::string_view name) const {
    const auto* p = find(name);
    if (!p) throw std::out_of_range("no parameter named '" + std::string(name) + "'");
    return *p;
}

void ParamSet::zero_grad() {
    for (auto& p : params_) {
        if (p.grad.shape() != p.value.shape()) {
            p.grad = Tensor(p.value.shape());
        } else {
            std::fill(p.grad.values().begin(), p.grad.values().end(), 0.0);
        }
    }
}

void ParamSet::reset_optimizer() {
    for (auto& p : params_) {
        p.grad = Tensor();
        p.adam_m = Tensor();
        p.adam_v = Tensor();
    }
    adam_steps_ = 0;
}

bool ParamSet::same_values(const ParamSet& other) const {
    if (params_.size() != other.params_.size()) return false;
    for (std::size_t i = 0; i < params_.size(); ++i) {
        if (params_[i].name != other.params_[i].name || !(params_[i].value == other.params_[i].value)) return false;
    }
    return true;
}

// --- Tape ------------------------------------------------------------------

const Tensor& Var::value() const { return tape_->value(id_); }

Var Tape::push(Node node) {
    nodes_.push_back(std::move(node));
    return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
    Node n;
    n.owned = std::move(value);
    return push(std::move(n));
}

Var Tape::parameter(Parameter& p) {
    Node n;
    n.external = &p.value;
    n.param = &p;
    n.needs_grad = recording_;
    return push(std::move(n));
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, Backward backward) {
    Node n;
    n.owned = std::move(value);
    if (recording_) {
        for (const Var& v : inputs) n.needs_grad = n.needs_grad || nodes_[v.id()].needs_grad;
        if (n.needs_grad) n.backward = std::move(backward);
    }
    return push(std::move(n));
}

Var Tape::record(Tensor value, const std::vector<Var>& inputs, Backward backward) {
    Node n;
    n.owned = std::move(value);
    if (recording_) {
        for (const Var& v : inputs) n.needs_grad = n.needs_grad || nodes_[v.id()].needs_grad;
        if (n.needs_grad) n.backward = std::move(backward);
    }
    return push(std::move(n));
}

const Tensor& Tape::value(std::size_t id) const {
    const Node& n = nodes_[id];
    return n.external ? *n.external : n.owned;
}

Tensor& Tape::grad(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) n.grad = Tensor(value(id).shape());
    return n.grad;
}

void Tape::backward(Var loss) {
    if (loss.value().size() != 1) {
        throw ShapeError("backward: loss must be a scalar, got shape " + shape_str(loss.shape()));
    }
    if (!recording_) throw std::logic_error("backward: tape was built without recording");
    grad(loss.id())[0] = 1.0;
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (n.grad.empty()) continue;
        if (n.backward) n.backward(*this, i);
        if (n.param) {
            Parameter& p = *n.param;
            if (p.grad.shape() != p.value.shape()) p.grad = Tensor(p.value.shape());
            for (std::size_t k = 0; k < n.grad.size(); ++k) p.grad[k] += n.grad[k];
        }
    }
}

void Tape::note_branch(std::uint64_t code) {
    signature_ ^= code + 0x9e3779b97f4a7c15ULL + (signature_ << 6) + (signature_ >> 2);
}

}  // namespace liftgan::nn
