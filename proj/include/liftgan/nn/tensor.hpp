#pragma once

#include <cstddef>
#include <new>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace liftgan::nn {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);
std::size_t element_count(const Shape& shape);

// Storage is 64-byte aligned so that vectorised reductions always split
// their work the same way; with malloc's alignment the summation order (and
// so the last bits of a result) could differ between otherwise identical runs.
template <typename T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::align_val_t kAlign{64};

    AlignedAllocator() = default;
    template <typename U>
    AlignedAllocator(const AlignedAllocator<U>&) {}

    T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
    void deallocate(T* p, std::size_t) { ::operator delete(p, kAlign); }

    template <typename U>
    bool operator==(const AlignedAllocator<U>&) const { return true; }
};

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Dense row-major block of doubles. A rank-0 shape is a scalar.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> values);

    static Tensor scalar(double value) { return Tensor(Shape{}, std::vector<double>{value}); }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const { return values_.size(); }
    bool empty() const { return values_.empty(); }

    double* data() { return values_.data(); }
    const double* data() const { return values_.data(); }
    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }

    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }

    // The single value of a one-element tensor.
    double item() const;

    bool operator==(const Tensor&) const = default;

private:
    Shape shape_;
    std::vector<double, AlignedAllocator<double>> values_;
};

}  // namespace liftgan::nn
