#include "clseq/numkit/tensor.hpp"

#include "clseq/error.hpp"

namespace clseq::numkit {

std::size_t shape_size(const Shape& s) {
    std::size_t n = 1;
    for (auto d : s) n *= d;
    return n;
}

std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

Tensor::Tensor(Shape s, double fill, bool req_grad)
    : shape(std::move(s)), v(shape_size(shape), fill), requires_grad(req_grad) {
    for (auto d : shape) check(d > 0, "tensor: zero extent in shape " + shape_str(shape));
}

std::size_t Tensor::rows() const {
    check(shape.size() == 2, "tensor: expected 2-d shape, got " + shape_str(shape));
    return shape[0];
}

std::size_t Tensor::cols() const {
    check(shape.size() == 2, "tensor: expected 2-d shape, got " + shape_str(shape));
    return shape[1];
}

double Tensor::scalar_value() const {
    check(is_scalar(), "tensor: expected scalar, got shape " + shape_str(shape));
    return v[0];
}

void Tensor::ensure_grad() {
    if (g.empty()) g.assign(v.size(), 0.0);
}

void Tensor::zero_grad() {
    if (!g.empty()) g.assign(v.size(), 0.0);
}

TensorPtr tensor(Shape shape, double fill, bool requires_grad) {
    return std::make_shared<Tensor>(std::move(shape), fill, requires_grad);
}

TensorPtr tensor_of(Shape shape, std::vector<double> values, bool requires_grad) {
    check(shape_size(shape) == values.size(),
          cat("tensor: ", values.size(), " values do not fill shape ", shape_str(shape)));
    auto t = std::make_shared<Tensor>();
    t->shape = std::move(shape);
    t->v = std::move(values);
    t->requires_grad = requires_grad;
    return t;
}

TensorPtr scalar(double value, bool requires_grad) {
    return tensor_of({1, 1}, {value}, requires_grad);
}

TensorPtr clone(const TensorPtr& t) {
    auto out = std::make_shared<Tensor>(*t);
    return out;
}

}  // namespace clseq::numkit
