#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "kbie/corpus.hpp"
#include "kbie/spans.hpp"

namespace kbie {

struct PredCluster {
    std::vector<int> members;    // span indices, document order
    std::set<int> types;         // entity-type label indices
};

struct PredRelation {
    int head = 0;  // cluster index
    int tail = 0;
    std::set<int> types;
};

struct PredictionSet {
    std::vector<PredCluster> clusters;
    std::vector<PredRelation> relations;
    int dropped_spans = 0;  // spans in chains rooted at a non-entity SELF span
};

// Union-find over antecedent links. antecedents[j] is SELF (-1) or an index
// < j. A chain is kept only when its SELF root is NER-positive; dropped
// chains take their spans (and any RE decisions on them) with them.
constexpr int kSelf = -1;

std::vector<std::vector<int>> build_clusters(const std::vector<int>& antecedents,
                                             const std::vector<std::set<int>>& ner_labels,
                                             int* dropped_spans = nullptr);

// Cluster types become the union of member NER label sets; the relation set
// of an ordered cluster pair is the union of RE label sets over its ordered
// cross-cluster mention pairs.
PredictionSet unify(const std::vector<std::vector<int>>& clusters,
                    const std::vector<std::set<int>>& ner_labels,
                    const std::map<std::pair<int, int>, std::set<int>>& re_labels);

// Entity-centric predictions in the gold corpus schema, cluster ids p0, p1...
Document prediction_to_document(const std::string& doc_id, const std::vector<std::string>& tokens,
                                const std::vector<Span>& spans, const PredictionSet& preds,
                                const LabelVocab& vocab);

}  // namespace kbie
