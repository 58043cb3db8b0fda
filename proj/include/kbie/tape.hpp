#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "kbie/rng.hpp"
#include "kbie/tensor.hpp"

namespace kbie {

enum class OpKind {
    Constant,
    Leaf,
    MatMul,
    Add,
    Mul,
    Concat,
    Slice,
    Sigmoid,
    Tanh,
    Relu,
    Softmax,
    Sum,
    Mean,
    EmbeddingLookup,
    ScalarScale,
    BceWithLogits,
    MaxPool,
    Dropout,
    Log,
};

const char* op_kind_name(OpKind k);

// Per-op finite checks. Off by default; enabled by KBIE_DEBUG_NUMERICS=1 or
// set_debug_numerics(true).
bool debug_numerics();
void set_debug_numerics(bool on);

// Append-only reverse-mode tape. Nodes are recorded in insertion order, which
// is also the topological order; backward walks the record in reverse.
//
// A tape is single-threaded. Distinct tapes share no mutable state, so
// separate documents may be evaluated on separate threads as long as the
// parameters they read are not being trained concurrently.
class Tape {
public:
    using NodeId = int32_t;

    explicit Tape(uint64_t dropout_seed = 0) : rng_(dropout_seed) {}

    NodeId constant(Tensor t);
    // Registers a trainable leaf. The parameter value is copied at
    // registration; backward() accumulates into p.grad.
    NodeId leaf(Parameter& p);

    NodeId matmul(NodeId a, NodeId b);
    NodeId add(NodeId a, NodeId b);          // elementwise with (1-extent) broadcasting
    NodeId mul(NodeId a, NodeId b);
    NodeId concat(std::span<const NodeId> parts, int axis);
    NodeId concat(std::initializer_list<NodeId> parts, int axis);
    NodeId slice(NodeId a, int axis, int begin, int end);  // [begin, end)
    NodeId sigmoid(NodeId a);
    NodeId tanh(NodeId a);
    NodeId relu(NodeId a);
    NodeId softmax(NodeId a, int axis);
    NodeId sum(NodeId a, int axis);          // axis = -1 reduces all axes; extents kept as 1
    NodeId mean(NodeId a, int axis);
    NodeId embedding_lookup(NodeId table, std::vector<int> rows);  // gathers rows of a rank-2 node
    NodeId scalar_scale(NodeId a, double s);
    NodeId bce_with_logits(NodeId logits, NodeId labels);  // elementwise, stable
    NodeId max_pool(NodeId a, int axis);
    NodeId dropout(NodeId a, double rate, bool train);     // inverted scaling
    NodeId log(NodeId a);

    const Tensor& value(NodeId id) const;
    const Tensor& grad(NodeId id) const;  // valid after backward()

    // Seeds d(loss)/d(loss) = 1 and accumulates gradients into every leaf
    // parameter registered on this tape. Unreachable leaves receive nothing,
    // so a freshly zeroed parameter ends with a zero gradient.
    void backward(NodeId loss);

    size_t size() const { return nodes_.size(); }

private:
    struct Node {
        OpKind kind;
        std::vector<NodeId> inputs;
        Tensor value;
        Tensor grad;
        int axis = 0;
        int begin = 0;
        int end = 0;
        double scalar = 0.0;
        std::vector<int> indices;   // embedding rows / max-pool argmax lanes
        std::vector<double> mask;   // dropout keep mask, already scaled
        Parameter* param = nullptr;
    };

    NodeId push(Node n);
    const Node& node(NodeId id) const;
    void check_id(NodeId id) const;

    std::vector<Node> nodes_;
    Rng rng_;
};

}  // namespace kbie
