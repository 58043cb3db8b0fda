#include "kbie/spans.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "kbie/errors.hpp"

namespace kbie {

std::vector<Span> enumerate_spans(int n_tokens, int max_width) {
    if (max_width < 1) throw ContractError("enumerate_spans: max_width must be >= 1");
    std::vector<Span> spans;
    for (int start = 0; start < n_tokens; ++start) {
        for (int end = start; end < std::min(n_tokens, start + max_width); ++end) {
            spans.push_back({start, end});
        }
    }
    return spans;
}

WidthEmbedding::WidthEmbedding(int max_width, int dim, Rng& rng) {
    double b = init_bound(1, dim);
    table = Parameter("spans/width", Tensor::uniform({max_width, dim}, -b, b, rng));
}

Tape::NodeId span_reprs(Tape& tape, Tape::NodeId hidden, const std::vector<Span>& spans,
                        WidthEmbedding& widths) {
    const Tensor& h = tape.value(hidden);
    const int n = h.rows();
    std::vector<int> starts, ends, buckets;
    starts.reserve(spans.size());
    for (const auto& s : spans) {
        if (s.start < 0 || s.end >= n || s.start > s.end) {
            throw ShapeError("span_reprs: span [" + std::to_string(s.start) + "," + std::to_string(s.end) +
                             "] outside hidden matrix " + shape_str(h.shape));
        }
        if (widths.bucket(s) >= widths.table.value.rows()) {
            throw ShapeError("span_reprs: width " + std::to_string(s.width()) + " exceeds bucket count " +
                             std::to_string(widths.table.value.rows()));
        }
        starts.push_back(s.start);
        ends.push_back(s.end);
        buckets.push_back(widths.bucket(s));
    }
    auto h_start = tape.embedding_lookup(hidden, starts);
    auto h_end = tape.embedding_lookup(hidden, ends);
    auto psi = tape.embedding_lookup(tape.leaf(widths.table), buckets);
    return tape.concat({h_start, h_end, psi}, 1);
}

PruneResult prune_spans(const std::vector<Span>& spans, const std::vector<double>& scores,
                        int n_tokens, double keep_ratio, const std::vector<Span>& gold) {
    if (!(keep_ratio > 0.0 && keep_ratio <= 1.0)) {
        throw ContractError("prune_spans: keep_ratio must be in (0,1], got " + std::to_string(keep_ratio));
    }
    if (scores.size() != spans.size()) {
        throw ContractError("prune_spans: " + std::to_string(scores.size()) + " scores for " +
                            std::to_string(spans.size()) + " spans");
    }
    size_t budget = static_cast<size_t>(std::ceil(keep_ratio * n_tokens));
    budget = std::min(budget, spans.size());

    std::vector<int> order(spans.size());
    for (size_t i = 0; i < order.size(); ++i) order[static_cast<size_t>(i)] = static_cast<int>(i);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if (scores[static_cast<size_t>(a)] != scores[static_cast<size_t>(b)]) {
            return scores[static_cast<size_t>(a)] > scores[static_cast<size_t>(b)];
        }
        return spans[static_cast<size_t>(a)] < spans[static_cast<size_t>(b)];
    });
    order.resize(budget);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return spans[static_cast<size_t>(a)] < spans[static_cast<size_t>(b)]; });

    PruneResult result;
    result.kept = std::move(order);
    if (!gold.empty()) {
        std::set<Span> kept_set;
        for (int i : result.kept) kept_set.insert(spans[static_cast<size_t>(i)]);
        for (size_t g = 0; g < gold.size(); ++g) {
            if (!kept_set.count(gold[g])) result.dropped_gold.push_back(static_cast<int>(g));
        }
    }
    return result;
}

}  // namespace kbie
