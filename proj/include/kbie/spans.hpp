#pragma once

#include <string>
#include <vector>

#include "kbie/nn.hpp"
#include "kbie/rng.hpp"
#include "kbie/tape.hpp"

namespace kbie {

struct Span {
    int start = 0;
    int end = 0;  // inclusive

    int width() const { return end - start + 1; }
    bool operator==(const Span&) const = default;
    auto operator<=>(const Span&) const = default;
};

// All spans of width 1..max_width, ordered by (start, end).
std::vector<Span> enumerate_spans(int n_tokens, int max_width);

// Learned width embeddings, one bucket per width (identity bucketing).
struct WidthEmbedding {
    Parameter table;  // (max_width, dim)

    WidthEmbedding() = default;
    WidthEmbedding(int max_width, int dim, Rng& rng);

    int bucket(const Span& s) const { return s.width() - 1; }
};

// g_i = [H_start; H_end; width_embedding] for each span; rows follow the
// span list order.
Tape::NodeId span_reprs(Tape& tape, Tape::NodeId hidden, const std::vector<Span>& spans,
                        WidthEmbedding& widths);

struct PruneResult {
    std::vector<int> kept;         // indices into the input span list, document order
    std::vector<int> dropped_gold; // gold span list positions that were pruned away
};

// Keeps the ceil(keep_ratio * n_tokens) highest-scoring spans; ties resolve
// toward earlier document order and the output is re-sorted by (start, end).
// gold spans, when given, feed the recall diagnostic only.
PruneResult prune_spans(const std::vector<Span>& spans, const std::vector<double>& scores,
                        int n_tokens, double keep_ratio, const std::vector<Span>& gold = {});

}  // namespace kbie
