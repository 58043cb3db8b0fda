#include "kbie/nn.hpp"

#include <cmath>

namespace kbie {

double init_bound(int in_dim, int out_dim) {
    return std::sqrt(6.0 / static_cast<double>(in_dim + out_dim));
}

Ffnn::Ffnn(const std::string& name, int in_dim, int hidden, int out_dim, Rng& rng) {
    double b1v = init_bound(in_dim, hidden);
    double b2v = init_bound(hidden, out_dim);
    w1 = Parameter(name + "/w1", Tensor::uniform({in_dim, hidden}, -b1v, b1v, rng));
    b1 = Parameter(name + "/b1", Tensor::zeros({1, hidden}));
    w2 = Parameter(name + "/w2", Tensor::uniform({hidden, out_dim}, -b2v, b2v, rng));
    b2 = Parameter(name + "/b2", Tensor::zeros({1, out_dim}));
}

Tape::NodeId Ffnn::forward(Tape& tape, Tape::NodeId x) {
    auto h = tape.relu(tape.add(tape.matmul(x, tape.leaf(w1)), tape.leaf(b1)));
    return tape.add(tape.matmul(h, tape.leaf(w2)), tape.leaf(b2));
}

void Ffnn::collect(std::vector<Parameter*>& out) {
    out.push_back(&w1);
    out.push_back(&b1);
    out.push_back(&w2);
    out.push_back(&b2);
}

}  // namespace kbie
