#pragma once

#include <string>
#include <vector>

#include "kbie/rng.hpp"
#include "kbie/tape.hpp"
#include "kbie/tensor.hpp"

namespace kbie {

// One-hidden-layer feed-forward network with relu: X (N,in) -> (N,out).
struct Ffnn {
    Parameter w1, b1, w2, b2;

    Ffnn() = default;
    Ffnn(const std::string& name, int in_dim, int hidden, int out_dim, Rng& rng);

    Tape::NodeId forward(Tape& tape, Tape::NodeId x);
    void collect(std::vector<Parameter*>& out);

    int in_dim() const { return w1.value.rows(); }
    int out_dim() const { return w2.value.cols(); }
};

// Xavier-style uniform init bound.
double init_bound(int in_dim, int out_dim);

}  // namespace kbie
