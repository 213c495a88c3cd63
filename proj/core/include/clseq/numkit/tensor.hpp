#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

namespace clseq::numkit {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& s);
std::string shape_str(const Shape& s);

/// Dense row-major tensor of doubles with an optional gradient slot.
/// The gradient slot, once allocated, always matches the value shape.
struct Tensor {
    Shape shape;
    std::vector<double> v;  // values, row-major
    std::vector<double> g;  // gradient slot; empty until ensure_grad()
    bool requires_grad = false;

    Tensor() = default;
    Tensor(Shape s, double fill, bool req_grad);

    std::size_t size() const { return v.size(); }
    std::size_t rows() const;
    std::size_t cols() const;
    bool is_scalar() const { return v.size() == 1; }
    double scalar_value() const;

    double& at(std::size_t r, std::size_t c) { return v[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return v[r * cols() + c]; }

    void ensure_grad();
    void zero_grad();
};

using TensorPtr = std::shared_ptr<Tensor>;

TensorPtr tensor(Shape shape, double fill = 0.0, bool requires_grad = false);
TensorPtr tensor_of(Shape shape, std::vector<double> values, bool requires_grad = false);
TensorPtr scalar(double value, bool requires_grad = false);

/// Deep copy; the copy shares no storage with the source.
TensorPtr clone(const TensorPtr& t);

}  // namespace clseq::numkit
