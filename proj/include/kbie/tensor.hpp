#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kbie/rng.hpp"

namespace kbie {

using Shape = std::vector<int>;

int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);
bool same_shape(const Shape& a, const Shape& b);

// Dense row-major tensor of 64-bit floats. Values are validated to be finite
// at creation; op outputs are re-checked when debug numerics mode is on.
struct Tensor {
    Shape shape;
    std::vector<double> values;

    Tensor() = default;
    Tensor(Shape s, std::vector<double> v);

    static Tensor zeros(Shape s);
    static Tensor full(Shape s, double x);
    static Tensor scalar(double x);
    static Tensor row(std::vector<double> v);                 // (1, n)
    static Tensor matrix(int rows, int cols, std::vector<double> v);
    static Tensor uniform(Shape s, double lo, double hi, Rng& rng);

    int rank() const { return static_cast<int>(shape.size()); }
    int dim(int axis) const { return shape[static_cast<size_t>(axis)]; }
    int64_t size() const { return static_cast<int64_t>(values.size()); }
    bool is_scalar() const { return size() == 1; }

    int rows() const;  // rank-2 accessors
    int cols() const;
    double& at(int r, int c);
    double at(int r, int c) const;

    bool all_finite() const;
};

// Named trainable tensor with a persistent gradient buffer. backward()
// accumulates into grad; Adam zeroes it after each step.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;

    Parameter() = default;
    Parameter(std::string n, Tensor v);
    void zero_grad();
};

}  // namespace kbie
