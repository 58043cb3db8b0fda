#include "kbie/tape.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>

#include "kbie/errors.hpp"

namespace kbie {

const char* op_kind_name(OpKind k) {
    switch (k) {
        case OpKind::Constant: return "constant";
        case OpKind::Leaf: return "leaf";
        case OpKind::MatMul: return "matmul";
        case OpKind::Add: return "add";
        case OpKind::Mul: return "mul";
        case OpKind::Concat: return "concat";
        case OpKind::Slice: return "slice";
        case OpKind::Sigmoid: return "sigmoid";
        case OpKind::Tanh: return "tanh";
        case OpKind::Relu: return "relu";
        case OpKind::Softmax: return "softmax";
        case OpKind::Sum: return "sum";
        case OpKind::Mean: return "mean";
        case OpKind::EmbeddingLookup: return "embedding-lookup";
        case OpKind::ScalarScale: return "scalar-scale";
        case OpKind::BceWithLogits: return "bce-with-logits";
        case OpKind::MaxPool: return "max-pool";
        case OpKind::Dropout: return "dropout";
        case OpKind::Log: return "log";
    }
    return "?";
}

namespace {

bool g_debug_numerics = [] {
    const char* env = std::getenv("KBIE_DEBUG_NUMERICS");
    return env != nullptr && env[0] == '1';
}();

// outer * extent * inner decomposition of a shape around one axis.
struct AxisView {
    int64_t outer = 1;
    int64_t extent = 1;
    int64_t inner = 1;
};

AxisView axis_view(const Shape& s, int axis) {
    AxisView v;
    for (int i = 0; i < static_cast<int>(s.size()); ++i) {
        if (i < axis) v.outer *= s[i];
        else if (i == axis) v.extent = s[i];
        else v.inner *= s[i];
    }
    return v;
}

void check_axis(const Shape& s, int axis, const char* op) {
    if (axis < 0 || axis >= static_cast<int>(s.size())) {
        throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) +
                         " out of range for shape " + shape_str(s));
    }
}

// Logical rank-2 view used for broadcasting in add/mul. Rank-1 tensors are
// treated as single rows; higher ranks must match exactly.
struct View2 {
    int rows = 1;
    int cols = 1;
};

View2 view2(const Shape& s, const char* op) {
    if (s.size() == 1) return {1, s[0]};
    if (s.size() == 2) return {s[0], s[1]};
    throw ShapeError(std::string(op) + ": rank > 2 requires identical shapes, got " + shape_str(s));
}

int broadcast_extent(int a, int b, const Shape& sa, const Shape& sb, const char* op) {
    if (a == b) return a;
    if (a == 1) return b;
    if (b == 1) return a;
    throw ShapeError(std::string(op) + ": cannot broadcast " + shape_str(sa) + " with " + shape_str(sb));
}

}  // namespace

bool debug_numerics() { return g_debug_numerics; }
void set_debug_numerics(bool on) { g_debug_numerics = on; }

Tape::NodeId Tape::push(Node n) {
    if (g_debug_numerics && !n.value.all_finite()) {
        throw NumericsError(std::string("non-finite output of ") + op_kind_name(n.kind));
    }
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
}

void Tape::check_id(NodeId id) const {
    if (id < 0 || id >= static_cast<NodeId>(nodes_.size())) {
        throw ContractError("invalid node id " + std::to_string(id));
    }
}

const Tape::Node& Tape::node(NodeId id) const {
    check_id(id);
    return nodes_[static_cast<size_t>(id)];
}

const Tensor& Tape::value(NodeId id) const { return node(id).value; }

const Tensor& Tape::grad(NodeId id) const {
    const Node& n = node(id);
    if (n.grad.values.empty()) throw ContractError("grad read before backward()");
    return n.grad;
}

Tape::NodeId Tape::constant(Tensor t) {
    Node n;
    n.kind = OpKind::Constant;
    n.value = std::move(t);
    return push(std::move(n));
}

Tape::NodeId Tape::leaf(Parameter& p) {
    Node n;
    n.kind = OpKind::Leaf;
    n.value = p.value;
    n.param = &p;
    return push(std::move(n));
}

Tape::NodeId Tape::matmul(NodeId a, NodeId b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (A.rank() != 2 || B.rank() != 2 || A.cols() != B.rows()) {
        throw ShapeError("matmul: " + shape_str(A.shape) + " x " + shape_str(B.shape));
    }
    const int m = A.rows(), k = A.cols(), n2 = B.cols();
    Tensor C = Tensor::zeros({m, n2});
    for (int i = 0; i < m; ++i) {
        const double* arow = &A.values[static_cast<size_t>(i) * k];
        double* crow = &C.values[static_cast<size_t>(i) * n2];
        for (int p = 0; p < k; ++p) {
            const double aip = arow[p];
            if (aip == 0.0) continue;
            const double* brow = &B.values[static_cast<size_t>(p) * n2];
            for (int j = 0; j < n2; ++j) crow[j] += aip * brow[j];
        }
    }
    Node n;
    n.kind = OpKind::MatMul;
    n.inputs = {a, b};
    n.value = std::move(C);
    return push(std::move(n));
}

Tape::NodeId Tape::add(NodeId a, NodeId b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    Node n;
    n.kind = OpKind::Add;
    n.inputs = {a, b};
    if (same_shape(A.shape, B.shape)) {
        Tensor C = A;
        for (size_t i = 0; i < C.values.size(); ++i) C.values[i] += B.values[i];
        n.value = std::move(C);
        return push(std::move(n));
    }
    View2 va = view2(A.shape, "add"), vb = view2(B.shape, "add");
    int rows = broadcast_extent(va.rows, vb.rows, A.shape, B.shape, "add");
    int cols = broadcast_extent(va.cols, vb.cols, A.shape, B.shape, "add");
    Shape out = (A.rank() == 1 && B.rank() == 1) ? Shape{cols} : Shape{rows, cols};
    Tensor C = Tensor::zeros(out);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            C.values[static_cast<size_t>(r) * cols + c] =
                A.values[static_cast<size_t>(r % va.rows) * va.cols + (c % va.cols)] +
                B.values[static_cast<size_t>(r % vb.rows) * vb.cols + (c % vb.cols)];
        }
    }
    n.value = std::move(C);
    return push(std::move(n));
}

Tape::NodeId Tape::mul(NodeId a, NodeId b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    Node n;
    n.kind = OpKind::Mul;
    n.inputs = {a, b};
    if (same_shape(A.shape, B.shape)) {
        Tensor C = A;
        for (size_t i = 0; i < C.values.size(); ++i) C.values[i] *= B.values[i];
        n.value = std::move(C);
        return push(std::move(n));
    }
    View2 va = view2(A.shape, "mul"), vb = view2(B.shape, "mul");
    int rows = broadcast_extent(va.rows, vb.rows, A.shape, B.shape, "mul");
    int cols = broadcast_extent(va.cols, vb.cols, A.shape, B.shape, "mul");
    Shape out = (A.rank() == 1 && B.rank() == 1) ? Shape{cols} : Shape{rows, cols};
    Tensor C = Tensor::zeros(out);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            C.values[static_cast<size_t>(r) * cols + c] =
                A.values[static_cast<size_t>(r % va.rows) * va.cols + (c % va.cols)] *
                B.values[static_cast<size_t>(r % vb.rows) * vb.cols + (c % vb.cols)];
        }
    }
    n.value = std::move(C);
    return push(std::move(n));
}

Tape::NodeId Tape::concat(std::initializer_list<NodeId> parts, int axis) {
    std::vector<NodeId> v(parts);
    return concat(std::span<const NodeId>(v), axis);
}

Tape::NodeId Tape::concat(std::span<const NodeId> parts, int axis) {
    if (parts.empty()) throw ContractError("concat: no inputs");
    const Tensor& first = value(parts[0]);
    check_axis(first.shape, axis, "concat");
    Shape out = first.shape;
    for (size_t i = 1; i < parts.size(); ++i) {
        const Tensor& t = value(parts[i]);
        if (t.rank() != first.rank()) {
            throw ShapeError("concat: rank mismatch " + shape_str(first.shape) + " vs " + shape_str(t.shape));
        }
        for (int d = 0; d < first.rank(); ++d) {
            if (d == axis) continue;
            if (t.shape[d] != first.shape[d]) {
                throw ShapeError("concat: " + shape_str(first.shape) + " vs " + shape_str(t.shape) +
                                 " along axis " + std::to_string(axis));
            }
        }
        out[axis] += t.shape[axis];
    }
    Tensor C = Tensor::zeros(out);
    AxisView vo = axis_view(out, axis);
    int64_t offset = 0;
    for (NodeId p : parts) {
        const Tensor& t = value(p);
        AxisView vt = axis_view(t.shape, axis);
        for (int64_t o = 0; o < vt.outer; ++o) {
            for (int64_t k = 0; k < vt.extent; ++k) {
                const double* src = &t.values[(o * vt.extent + k) * vt.inner];
                double* dst = &C.values[(o * vo.extent + offset + k) * vo.inner];
                std::copy(src, src + vt.inner, dst);
            }
        }
        offset += vt.extent;
    }
    Node n;
    n.kind = OpKind::Concat;
    n.inputs.assign(parts.begin(), parts.end());
    n.axis = axis;
    n.value = std::move(C);
    return push(std::move(n));
}

Tape::NodeId Tape::slice(NodeId a, int axis, int begin, int end) {
    const Tensor& A = value(a);
    check_axis(A.shape, axis, "slice");
    if (begin < 0 || end > A.shape[axis] || begin >= end) {
        throw ShapeError("slice: range [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") out of bounds for shape " + shape_str(A.shape) + " axis " + std::to_string(axis));
    }
    Shape out = A.shape;
    out[axis] = end - begin;
    Tensor C = Tensor::zeros(out);
    AxisView va = axis_view(A.shape, axis);
    AxisView vc = axis_view(out, axis);
    for (int64_t o = 0; o < va.outer; ++o) {
        for (int64_t k = begin; k < end; ++k) {
            const double* src = &A.values[(o * va.extent + k) * va.inner];
            double* dst = &C.values[(o * vc.extent + (k - begin)) * vc.inner];
            std::copy(src, src + va.inner, dst);
        }
    }
    Node n;
    n.kind = OpKind::Slice;
    n.inputs = {a};
    n.axis = axis;
    n.begin = begin;
    n.end = end;
    n.value = std::move(C);
    return push(std::move(n));
}

Tape::NodeId Tape::sigmoid(NodeId a) {
    Tensor C = value(a);
    for (auto& x : C.values) x = x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    Node n;
    n.kind = OpKind::Sigmoid;
    n.inputs = {a};
    n.value = std::move(C);
    return push(std::move(n));
}

Tape::NodeId Tape::tanh(NodeId a) {
    Tensor C = value(a);
    for (auto& x : C.values) x = std::tanh(x);
    Node n;
    n.kind = OpKind::Tanh;
    n.inputs = {a};
    n.value = std::move(C);
    return push(std::move(n));
}

Tape::NodeId Tape::relu(NodeId a) {
    Tensor C = value(a);
    for (auto& x : C.values) x = x > 0 ? x : 0.0;
    Node n;
    n.kind = OpKind::Relu;
    n.inputs = {a};
    n.value = std::move(C);
    return push(std::move(n));
}

Tape::NodeId Tape::softmax(NodeId a, int axis) {
    const Tensor& A = value(a);
    check_axis(A.shape, axis, "softmax");
    Tensor C = A;
    AxisView v = axis_view(A.shape, axis);
    for (int64_t o = 0; o < v.outer; ++o) {
        for (int64_t i = 0; i < v.inner; ++i) {
            double mx = -1e300;
            for (int64_t k = 0; k < v.extent; ++k) mx = std::max(mx, A.values[(o * v.extent + k) * v.inner + i]);
            double z = 0.0;
            for (int64_t k = 0; k < v.extent; ++k) {
                double e = std::exp(A.values[(o * v.extent + k) * v.inner + i] - mx);
                C.values[(o * v.extent + k) * v.inner + i] = e;
                z += e;
            }
            for (int64_t k = 0; k < v.extent; ++k) C.values[(o * v.extent + k) * v.inner + i] /= z;
        }
    }
    Node n;
    n.kind = OpKind::Softmax;
    n.inputs = {a};
    n.axis = axis;
    n.value = std::move(C);
    return push(std::move(n));
}

Tape::NodeId Tape::sum(NodeId a, int axis) {
    const Tensor& A = value(a);
    Node n;
    n.kind = OpKind::Sum;
    n.inputs = {a};
    n.axis = axis;
    if (axis == -1) {
        double s = 0.0;
        for (double x : A.values) s += x;
        n.value = Tensor::full(Shape(A.shape.size(), 1), s);
        return push(std::move(n));
    }
    check_axis(A.shape, axis, "sum");
    Shape out = A.shape;
    out[axis] = 1;
    Tensor C = Tensor::zeros(out);
    AxisView v = axis_view(A.shape, axis);
    for (int64_t o = 0; o < v.outer; ++o) {
        for (int64_t k = 0; k < v.extent; ++k) {
            const double* src = &A.values[(o * v.extent + k) * v.inner];
            double* dst = &C.values[o * v.inner];
            for (int64_t i = 0; i < v.inner; ++i) dst[i] += src[i];
        }
    }
    n.value = std::move(C);
    return push(std::move(n));
}

Tape::NodeId Tape::mean(NodeId a, int axis) {
    const Tensor& A = value(a);
    int64_t count = axis == -1 ? A.size() : [&] {
        check_axis(A.shape, axis, "mean");
        return static_cast<int64_t>(A.shape[axis]);
    }();
    NodeId s = sum(a, axis);
    // rewrite in place as a Mean node so backward divides by the lane count
    Node& n = nodes_.back();
    n.kind = OpKind::Mean;
    n.scalar = static_cast<double>(count);
    for (auto& x : n.value.values) x /= static_cast<double>(count);
    return s;
}

Tape::NodeId Tape::embedding_lookup(NodeId table, std::vector<int> rows) {
    const Tensor& T = value(table);
    if (T.rank() != 2) throw ShapeError("embedding-lookup: table must be rank 2, got " + shape_str(T.shape));
    const int V = T.rows(), d = T.cols();
    for (int r : rows) {
        if (r < 0 || r >= V) {
            throw ShapeError("embedding-lookup: row " + std::to_string(r) + " out of table " + shape_str(T.shape));
        }
    }
    Tensor C = Tensor::zeros({static_cast<int>(rows.size()), d});
    for (size_t i = 0; i < rows.size(); ++i) {
        const double* src = &T.values[static_cast<size_t>(rows[i]) * d];
        std::copy(src, src + d, &C.values[i * d]);
    }
    Node n;
    n.kind = OpKind::EmbeddingLookup;
    n.inputs = {table};
    n.indices = std::move(rows);
    n.value = std::move(C);
    return push(std::move(n));
}

Tape::NodeId Tape::scalar_scale(NodeId a, double s) {
    Tensor C = value(a);
    for (auto& x : C.values) x *= s;
    Node n;
    n.kind = OpKind::ScalarScale;
    n.inputs = {a};
    n.scalar = s;
    n.value = std::move(C);
    return push(std::move(n));
}

Tape::NodeId Tape::bce_with_logits(NodeId logits, NodeId labels) {
    const Tensor& X = value(logits);
    const Tensor& Z = value(labels);
    if (!same_shape(X.shape, Z.shape)) {
        throw ShapeError("bce-with-logits: " + shape_str(X.shape) + " vs " + shape_str(Z.shape));
    }
    Tensor C = X;
    for (size_t i = 0; i < C.values.size(); ++i) {
        double x = X.values[i], z = Z.values[i];
        C.values[i] = std::max(x, 0.0) - x * z + std::log1p(std::exp(-std::fabs(x)));
    }
    Node n;
    n.kind = OpKind::BceWithLogits;
    n.inputs = {logits, labels};
    n.value = std::move(C);
    return push(std::move(n));
}

Tape::NodeId Tape::max_pool(NodeId a, int axis) {
    const Tensor& A = value(a);
    check_axis(A.shape, axis, "max-pool");
    Shape out = A.shape;
    out[axis] = 1;
    Tensor C = Tensor::zeros(out);
    AxisView v = axis_view(A.shape, axis);
    std::vector<int> argmax(static_cast<size_t>(v.outer * v.inner), 0);
    for (int64_t o = 0; o < v.outer; ++o) {
        for (int64_t i = 0; i < v.inner; ++i) {
            double best = A.values[(o * v.extent) * v.inner + i];
            int bk = 0;
            for (int64_t k = 1; k < v.extent; ++k) {
                double x = A.values[(o * v.extent + k) * v.inner + i];
                if (x > best) {
                    best = x;
                    bk = static_cast<int>(k);
                }
            }
            C.values[o * v.inner + i] = best;
            argmax[static_cast<size_t>(o * v.inner + i)] = bk;
        }
    }
    Node n;
    n.kind = OpKind::MaxPool;
    n.inputs = {a};
    n.axis = axis;
    n.indices = std::move(argmax);
    n.value = std::move(C);
    return push(std::move(n));
}

Tape::NodeId Tape::dropout(NodeId a, double rate, bool train) {
    if (rate < 0.0 || rate >= 1.0) throw ContractError("dropout: rate must be in [0,1), got " + std::to_string(rate));
    Node n;
    n.kind = OpKind::Dropout;
    n.inputs = {a};
    n.scalar = rate;
    if (!train || rate == 0.0) {
        n.value = value(a);  // identity
        return push(std::move(n));
    }
    const Tensor& A = value(a);
    Tensor C = A;
    double keep = 1.0 - rate;
    n.mask.resize(A.values.size());
    for (size_t i = 0; i < A.values.size(); ++i) {
        double m = rng_.next_double() < rate ? 0.0 : 1.0 / keep;
        n.mask[i] = m;
        C.values[i] *= m;
    }
    n.value = std::move(C);
    return push(std::move(n));
}

Tape::NodeId Tape::log(NodeId a) {
    Tensor C = value(a);
    for (auto& x : C.values) x = std::log(x);
    Node n;
    n.kind = OpKind::Log;
    n.inputs = {a};
    n.value = std::move(C);
    return push(std::move(n));
}

void Tape::backward(NodeId loss) {
    const Node& top = node(loss);
    if (top.value.size() != 1) {
        throw ContractError("backward: loss must be scalar, got shape " + shape_str(top.value.shape));
    }
    for (auto& n : nodes_) n.grad = Tensor::zeros(n.value.shape);
    nodes_[static_cast<size_t>(loss)].grad.values[0] = 1.0;

    for (int32_t id = static_cast<int32_t>(nodes_.size()) - 1; id >= 0; --id) {
        Node& n = nodes_[static_cast<size_t>(id)];
        const Tensor& g = n.grad;
        switch (n.kind) {
            case OpKind::Constant:
                break;
            case OpKind::Leaf: {
                Tensor& pg = n.param->grad;
                for (size_t i = 0; i < pg.values.size(); ++i) pg.values[i] += g.values[i];
                break;
            }
            case OpKind::MatMul: {
                const Tensor& A = nodes_[n.inputs[0]].value;
                const Tensor& B = nodes_[n.inputs[1]].value;
                Tensor& dA = nodes_[n.inputs[0]].grad;
                Tensor& dB = nodes_[n.inputs[1]].grad;
                const int m = A.rows(), k = A.cols(), n2 = B.cols();
                for (int i = 0; i < m; ++i) {
                    const double* grow = &g.values[static_cast<size_t>(i) * n2];
                    for (int p = 0; p < k; ++p) {
                        const double* brow = &B.values[static_cast<size_t>(p) * n2];
                        double acc = 0.0;
                        for (int j = 0; j < n2; ++j) acc += grow[j] * brow[j];
                        dA.values[static_cast<size_t>(i) * k + p] += acc;
                    }
                }
                for (int i = 0; i < m; ++i) {
                    const double* grow = &g.values[static_cast<size_t>(i) * n2];
                    const double* arow = &A.values[static_cast<size_t>(i) * k];
                    for (int p = 0; p < k; ++p) {
                        const double aip = arow[p];
                        if (aip == 0.0) continue;
                        double* dbrow = &dB.values[static_cast<size_t>(p) * n2];
                        for (int j = 0; j < n2; ++j) dbrow[j] += aip * grow[j];
                    }
                }
                break;
            }
            case OpKind::Add:
            case OpKind::Mul: {
                const Tensor& A = nodes_[n.inputs[0]].value;
                const Tensor& B = nodes_[n.inputs[1]].value;
                Tensor& dA = nodes_[n.inputs[0]].grad;
                Tensor& dB = nodes_[n.inputs[1]].grad;
                if (same_shape(A.shape, B.shape)) {
                    if (n.kind == OpKind::Add) {
                        for (size_t i = 0; i < g.values.size(); ++i) {
                            dA.values[i] += g.values[i];
                            dB.values[i] += g.values[i];
                        }
                    } else {
                        for (size_t i = 0; i < g.values.size(); ++i) {
                            dA.values[i] += g.values[i] * B.values[i];
                            dB.values[i] += g.values[i] * A.values[i];
                        }
                    }
                    break;
                }
                View2 va = view2(A.shape, "add"), vb = view2(B.shape, "add");
                View2 vo = view2(n.value.shape, "add");
                for (int r = 0; r < vo.rows; ++r) {
                    for (int c = 0; c < vo.cols; ++c) {
                        double gv = g.values[static_cast<size_t>(r) * vo.cols + c];
                        size_t ia = static_cast<size_t>(r % va.rows) * va.cols + (c % va.cols);
                        size_t ib = static_cast<size_t>(r % vb.rows) * vb.cols + (c % vb.cols);
                        if (n.kind == OpKind::Add) {
                            dA.values[ia] += gv;
                            dB.values[ib] += gv;
                        } else {
                            dA.values[ia] += gv * B.values[ib];
                            dB.values[ib] += gv * A.values[ia];
                        }
                    }
                }
                break;
            }
            case OpKind::Concat: {
                AxisView vo = axis_view(n.value.shape, n.axis);
                int64_t offset = 0;
                for (NodeId p : n.inputs) {
                    Node& in = nodes_[static_cast<size_t>(p)];
                    AxisView vt = axis_view(in.value.shape, n.axis);
                    for (int64_t o = 0; o < vt.outer; ++o) {
                        for (int64_t k = 0; k < vt.extent; ++k) {
                            const double* src = &g.values[(o * vo.extent + offset + k) * vo.inner];
                            double* dst = &in.grad.values[(o * vt.extent + k) * vt.inner];
                            for (int64_t i = 0; i < vt.inner; ++i) dst[i] += src[i];
                        }
                    }
                    offset += vt.extent;
                }
                break;
            }
            case OpKind::Slice: {
                Node& in = nodes_[n.inputs[0]];
                AxisView va = axis_view(in.value.shape, n.axis);
                AxisView vc = axis_view(n.value.shape, n.axis);
                for (int64_t o = 0; o < va.outer; ++o) {
                    for (int64_t k = n.begin; k < n.end; ++k) {
                        const double* src = &g.values[(o * vc.extent + (k - n.begin)) * vc.inner];
                        double* dst = &in.grad.values[(o * va.extent + k) * va.inner];
                        for (int64_t i = 0; i < va.inner; ++i) dst[i] += src[i];
                    }
                }
                break;
            }
            case OpKind::Sigmoid: {
                Tensor& dA = nodes_[n.inputs[0]].grad;
                for (size_t i = 0; i < g.values.size(); ++i) {
                    double y = n.value.values[i];
                    dA.values[i] += g.values[i] * y * (1.0 - y);
                }
                break;
            }
            case OpKind::Tanh: {
                Tensor& dA = nodes_[n.inputs[0]].grad;
                for (size_t i = 0; i < g.values.size(); ++i) {
                    double y = n.value.values[i];
                    dA.values[i] += g.values[i] * (1.0 - y * y);
                }
                break;
            }
            case OpKind::Relu: {
                const Tensor& A = nodes_[n.inputs[0]].value;
                Tensor& dA = nodes_[n.inputs[0]].grad;
                for (size_t i = 0; i < g.values.size(); ++i) {
                    if (A.values[i] > 0) dA.values[i] += g.values[i];
                }
                break;
            }
            case OpKind::Softmax: {
                Tensor& dA = nodes_[n.inputs[0]].grad;
                AxisView v = axis_view(n.value.shape, n.axis);
                for (int64_t o = 0; o < v.outer; ++o) {
                    for (int64_t i = 0; i < v.inner; ++i) {
                        double dot = 0.0;
                        for (int64_t k = 0; k < v.extent; ++k) {
                            size_t idx = static_cast<size_t>((o * v.extent + k) * v.inner + i);
                            dot += g.values[idx] * n.value.values[idx];
                        }
                        for (int64_t k = 0; k < v.extent; ++k) {
                            size_t idx = static_cast<size_t>((o * v.extent + k) * v.inner + i);
                            dA.values[idx] += n.value.values[idx] * (g.values[idx] - dot);
                        }
                    }
                }
                break;
            }
            case OpKind::Sum:
            case OpKind::Mean: {
                Node& in = nodes_[n.inputs[0]];
                double scale = n.kind == OpKind::Mean ? 1.0 / n.scalar : 1.0;
                if (n.axis == -1) {
                    double gv = g.values[0] * scale;
                    for (auto& x : in.grad.values) x += gv;
                } else {
                    AxisView v = axis_view(in.value.shape, n.axis);
                    for (int64_t o = 0; o < v.outer; ++o) {
                        for (int64_t k = 0; k < v.extent; ++k) {
                            double* dst = &in.grad.values[(o * v.extent + k) * v.inner];
                            const double* src = &g.values[o * v.inner];
                            for (int64_t i = 0; i < v.inner; ++i) dst[i] += src[i] * scale;
                        }
                    }
                }
                break;
            }
            case OpKind::EmbeddingLookup: {
                Node& in = nodes_[n.inputs[0]];
                const int d = in.value.cols();
                for (size_t i = 0; i < n.indices.size(); ++i) {
                    const double* src = &g.values[i * d];
                    double* dst = &in.grad.values[static_cast<size_t>(n.indices[i]) * d];
                    for (int j = 0; j < d; ++j) dst[j] += src[j];
                }
                break;
            }
            case OpKind::ScalarScale: {
                Tensor& dA = nodes_[n.inputs[0]].grad;
                for (size_t i = 0; i < g.values.size(); ++i) dA.values[i] += g.values[i] * n.scalar;
                break;
            }
            case OpKind::BceWithLogits: {
                const Tensor& X = nodes_[n.inputs[0]].value;
                const Tensor& Z = nodes_[n.inputs[1]].value;
                Tensor& dX = nodes_[n.inputs[0]].grad;
                Tensor& dZ = nodes_[n.inputs[1]].grad;
                for (size_t i = 0; i < g.values.size(); ++i) {
                    double x = X.values[i];
                    double s = x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
                    dX.values[i] += g.values[i] * (s - Z.values[i]);
                    dZ.values[i] += g.values[i] * (-x);
                }
                break;
            }
            case OpKind::MaxPool: {
                Node& in = nodes_[n.inputs[0]];
                AxisView v = axis_view(in.value.shape, n.axis);
                for (int64_t o = 0; o < v.outer; ++o) {
                    for (int64_t i = 0; i < v.inner; ++i) {
                        int k = n.indices[static_cast<size_t>(o * v.inner + i)];
                        in.grad.values[(o * v.extent + k) * v.inner + i] += g.values[o * v.inner + i];
                    }
                }
                break;
            }
            case OpKind::Dropout: {
                Tensor& dA = nodes_[n.inputs[0]].grad;
                if (n.mask.empty()) {
                    for (size_t i = 0; i < g.values.size(); ++i) dA.values[i] += g.values[i];
                } else {
                    for (size_t i = 0; i < g.values.size(); ++i) dA.values[i] += g.values[i] * n.mask[i];
                }
                break;
            }
            case OpKind::Log: {
                const Tensor& A = nodes_[n.inputs[0]].value;
                Tensor& dA = nodes_[n.inputs[0]].grad;
                for (size_t i = 0; i < g.values.size(); ++i) dA.values[i] += g.values[i] / A.values[i];
                break;
            }
        }
    }
}

}  // namespace kbie
