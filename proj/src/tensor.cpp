#include "kbie/tensor.hpp"

#include <cmath>
#include <sstream>

#include "kbie/errors.hpp"

namespace kbie {

int64_t shape_numel(const Shape& shape) {
    int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << ")";
    return os.str();
}

bool same_shape(const Shape& a, const Shape& b) { return a == b; }

Tensor::Tensor(Shape s, std::vector<double> v) : shape(std::move(s)), values(std::move(v)) {
    for (int d : shape) {
        if (d <= 0) throw ShapeError("tensor extent must be positive, got " + shape_str(shape));
    }
    if (shape_numel(shape) != static_cast<int64_t>(values.size())) {
        throw ShapeError("tensor value count " + std::to_string(values.size()) +
                         " does not match shape " + shape_str(shape));
    }
    if (!all_finite()) throw NumericsError("non-finite value at tensor creation, shape " + shape_str(shape));
}

Tensor Tensor::zeros(Shape s) {
    size_t n = static_cast<size_t>(shape_numel(s));
    return Tensor(std::move(s), std::vector<double>(n, 0.0));
}

Tensor Tensor::full(Shape s, double x) {
    size_t n = static_cast<size_t>(shape_numel(s));
    return Tensor(std::move(s), std::vector<double>(n, x));
}

Tensor Tensor::scalar(double x) { return Tensor({1, 1}, {x}); }

Tensor Tensor::row(std::vector<double> v) {
    Shape s{1, static_cast<int>(v.size())};
    return Tensor(std::move(s), std::move(v));
}

Tensor Tensor::matrix(int rows, int cols, std::vector<double> v) {
    return Tensor({rows, cols}, std::move(v));
}

Tensor Tensor::uniform(Shape s, double lo, double hi, Rng& rng) {
    size_t n = static_cast<size_t>(shape_numel(s));
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(lo, hi);
    return Tensor(std::move(s), std::move(v));
}

int Tensor::rows() const {
    if (rank() != 2) throw ShapeError("rows() on tensor of shape " + shape_str(shape));
    return shape[0];
}

int Tensor::cols() const {
    if (rank() != 2) throw ShapeError("cols() on tensor of shape " + shape_str(shape));
    return shape[1];
}

double& Tensor::at(int r, int c) { return values[static_cast<size_t>(r) * shape[1] + c]; }
double Tensor::at(int r, int c) const { return values[static_cast<size_t>(r) * shape[1] + c]; }

bool Tensor::all_finite() const {
    for (double x : values) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

Parameter::Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)) {
    grad = Tensor::zeros(value.shape);
}

void Parameter::zero_grad() {
    std::fill(grad.values.begin(), grad.values.end(), 0.0);
}

}  // namespace kbie
