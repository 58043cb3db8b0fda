#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "kbie/corpus.hpp"

namespace kbie {

struct ScoreTriple {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

ScoreTriple make_score(double num_p, double den_p, double num_r, double den_r);  // 0/0 -> 0

// Entity-centric view of one document used by every scorer.
struct EvalCluster {
    std::set<std::pair<int, int>> mentions;  // (start, end)
    std::set<std::string> types;
};

struct EvalDoc {
    std::vector<EvalCluster> clusters;
    // ordered (head cluster index, tail cluster index) -> relation types
    std::map<std::pair<int, int>, std::set<std::string>> relations;
};

EvalDoc eval_view(const Document& doc);

// Coreference metrics. Corpus-level scores sum per-document numerators and
// denominators, as the reference scorer does. For MUC and B3 a mention
// present on only one side counts as a singleton on the other; CEAFe aligns
// the cluster sets as they stand, so an empty prediction scores zero.
ScoreTriple muc(const std::vector<EvalDoc>& gold, const std::vector<EvalDoc>& pred);
ScoreTriple b3(const std::vector<EvalDoc>& gold, const std::vector<EvalDoc>& pred);
ScoreTriple ceafe(const std::vector<EvalDoc>& gold, const std::vector<EvalDoc>& pred);
double coref_avg(const std::vector<EvalDoc>& gold, const std::vector<EvalDoc>& pred);

ScoreTriple muc(const EvalDoc& gold, const EvalDoc& pred);
ScoreTriple b3(const EvalDoc& gold, const EvalDoc& pred);
ScoreTriple ceafe(const EvalDoc& gold, const EvalDoc& pred);

// phi4 similarity and the optimal one-to-one cluster alignment.
double phi4(const EvalCluster& a, const EvalCluster& b);
double max_assignment(const std::vector<std::vector<double>>& weights);        // Kuhn-Munkres
double brute_force_assignment(const std::vector<std::vector<double>>& weights);  // test oracle, small inputs

// Hard entity-centric metrics: the scoring unit is a (cluster, type) pair
// resp. (head cluster, tail cluster, type) triple, and a predicted cluster
// matches only on exact mention-set identity.
ScoreTriple hard_ner_f1(const std::vector<EvalDoc>& gold, const std::vector<EvalDoc>& pred);
ScoreTriple hard_re_f1(const std::vector<EvalDoc>& gold, const std::vector<EvalDoc>& pred);
ScoreTriple hard_ner_f1(const EvalDoc& gold, const EvalDoc& pred);
ScoreTriple hard_re_f1(const EvalDoc& gold, const EvalDoc& pred);

// One gold-linked mention under some weighting scheme: candidates in list
// order with their weights. Top-1 is correct when the argmax candidate is the
// gold entity; empty lists and gold entities outside the list are incorrect.
struct ElRecord {
    std::string gold_entity;
    std::vector<std::string> candidates;
    std::vector<double> alphas;
};

double el_top1_accuracy(const std::vector<ElRecord>& records);

struct FreqBucket {
    int lo = 0;
    int hi = 0;  // inclusive
};

// Hard NER restricted to (cluster, type) pairs whose type occurs in the
// training set with a frequency inside each bucket.
std::vector<ScoreTriple> frequency_sliced_ner(const std::vector<EvalDoc>& gold,
                                              const std::vector<EvalDoc>& pred,
                                              const std::map<std::string, int>& train_type_counts,
                                              const std::vector<FreqBucket>& buckets);

// (cluster, type) occurrence counts of a training corpus, for slicing.
std::map<std::string, int> type_frequencies(const std::vector<Document>& docs);

}  // namespace kbie
