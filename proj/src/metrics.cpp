#include "kbie/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "kbie/errors.hpp"

namespace kbie {

namespace {

double ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

struct PrAccum {
    double num_p = 0, den_p = 0, num_r = 0, den_r = 0;
};

ScoreTriple finish(const PrAccum& a) {
    return make_score(a.num_p, a.den_p, a.num_r, a.den_r);
}

// index of the cluster containing a mention, -1 if absent
std::map<std::pair<int, int>, int> membership(const EvalDoc& doc) {
    std::map<std::pair<int, int>, int> m;
    for (size_t c = 0; c < doc.clusters.size(); ++c) {
        for (const auto& span : doc.clusters[c].mentions) m[span] = static_cast<int>(c);
    }
    return m;
}

// clusters of `docs` plus singleton clusters for mentions seen only on the
// other side
std::vector<EvalCluster> with_missing_singletons(const EvalDoc& self, const EvalDoc& other) {
    std::vector<EvalCluster> out = self.clusters;
    auto mine = membership(self);
    for (const auto& c : other.clusters) {
        for (const auto& span : c.mentions) {
            if (!mine.count(span)) out.push_back({{span}, {}});
        }
    }
    return out;
}

// MUC recall numerator/denominator of `gold` against `pred`
void muc_side(const EvalDoc& gold, const EvalDoc& pred, double& num, double& den) {
    auto pred_of = membership(pred);
    for (const auto& g : gold.clusters) {
        std::set<int> parts;
        int missing = 0;
        for (const auto& span : g.mentions) {
            auto it = pred_of.find(span);
            if (it == pred_of.end()) ++missing;  // each missing mention is its own part
            else parts.insert(it->second);
        }
        int partition_size = static_cast<int>(parts.size()) + missing;
        num += static_cast<double>(static_cast<int>(g.mentions.size()) - partition_size);
        den += static_cast<double>(g.mentions.size() - 1);
    }
}

void b3_side(const EvalDoc& gold, const EvalDoc& pred, double& num, double& den) {
    auto pred_clusters = with_missing_singletons(pred, gold);
    std::map<std::pair<int, int>, int> pred_of;
    for (size_t c = 0; c < pred_clusters.size(); ++c) {
        for (const auto& span : pred_clusters[c].mentions) pred_of[span] = static_cast<int>(c);
    }
    for (const auto& g : gold.clusters) {
        for (const auto& span : g.mentions) {
            const auto& p = pred_clusters[static_cast<size_t>(pred_of.at(span))];
            int overlap = 0;
            for (const auto& m : g.mentions) {
                if (p.mentions.count(m)) ++overlap;
            }
            num += static_cast<double>(overlap) / static_cast<double>(g.mentions.size());
            den += 1.0;
        }
    }
}

double ceafe_best_alignment(const std::vector<EvalCluster>& gold, const std::vector<EvalCluster>& pred) {
    if (gold.empty() || pred.empty()) return 0.0;
    std::vector<std::vector<double>> w(gold.size(), std::vector<double>(pred.size(), 0.0));
    for (size_t i = 0; i < gold.size(); ++i) {
        for (size_t j = 0; j < pred.size(); ++j) w[i][j] = phi4(gold[i], pred[j]);
    }
    return max_assignment(w);
}

}  // namespace

ScoreTriple make_score(double num_p, double den_p, double num_r, double den_r) {
    ScoreTriple s;
    s.precision = ratio(num_p, den_p);
    s.recall = ratio(num_r, den_r);
    s.f1 = (s.precision + s.recall) == 0.0 ? 0.0 : 2.0 * s.precision * s.recall / (s.precision + s.recall);
    return s;
}

EvalDoc eval_view(const Document& doc) {
    EvalDoc out;
    std::map<std::string, int> index;
    for (const auto& c : doc.clusters) {
        index[c.id] = static_cast<int>(out.clusters.size());
        EvalCluster ec;
        ec.types.insert(c.types.begin(), c.types.end());
        for (int m : c.mentions) {
            ec.mentions.insert({doc.mentions[static_cast<size_t>(m)].start, doc.mentions[static_cast<size_t>(m)].end});
        }
        out.clusters.push_back(std::move(ec));
    }
    for (const auto& r : doc.relations) {
        auto& types = out.relations[{index.at(r.head_cluster), index.at(r.tail_cluster)}];
        types.insert(r.types.begin(), r.types.end());
    }
    return out;
}

ScoreTriple muc(const std::vector<EvalDoc>& gold, const std::vector<EvalDoc>& pred) {
    if (gold.size() != pred.size()) throw ContractError("muc: document count mismatch");
    PrAccum a;
    for (size_t d = 0; d < gold.size(); ++d) {
        muc_side(gold[d], pred[d], a.num_r, a.den_r);
        muc_side(pred[d], gold[d], a.num_p, a.den_p);
    }
    return finish(a);
}

ScoreTriple b3(const std::vector<EvalDoc>& gold, const std::vector<EvalDoc>& pred) {
    if (gold.size() != pred.size()) throw ContractError("b3: document count mismatch");
    PrAccum a;
    for (size_t d = 0; d < gold.size(); ++d) {
        b3_side(gold[d], pred[d], a.num_r, a.den_r);
        b3_side(pred[d], gold[d], a.num_p, a.den_p);
    }
    return finish(a);
}

double phi4(const EvalCluster& a, const EvalCluster& b) {
    int overlap = 0;
    for (const auto& m : a.mentions) {
        if (b.mentions.count(m)) ++overlap;
    }
    return 2.0 * static_cast<double>(overlap) /
           static_cast<double>(a.mentions.size() + b.mentions.size());
}

ScoreTriple ceafe(const std::vector<EvalDoc>& gold, const std::vector<EvalDoc>& pred) {
    if (gold.size() != pred.size()) throw ContractError("ceafe: document count mismatch");
    // clusters align as they stand: mentions absent from the other side simply
    // contribute no overlap, and an empty prediction scores zero
    PrAccum a;
    for (size_t d = 0; d < gold.size(); ++d) {
        double best = ceafe_best_alignment(gold[d].clusters, pred[d].clusters);
        a.num_p += best;
        a.num_r += best;
        a.den_p += static_cast<double>(pred[d].clusters.size());
        a.den_r += static_cast<double>(gold[d].clusters.size());
    }
    return finish(a);
}

double coref_avg(const std::vector<EvalDoc>& gold, const std::vector<EvalDoc>& pred) {
    return (muc(gold, pred).f1 + b3(gold, pred).f1 + ceafe(gold, pred).f1) / 3.0;
}

ScoreTriple muc(const EvalDoc& gold, const EvalDoc& pred) { return muc(std::vector{gold}, std::vector{pred}); }
ScoreTriple b3(const EvalDoc& gold, const EvalDoc& pred) { return b3(std::vector{gold}, std::vector{pred}); }
ScoreTriple ceafe(const EvalDoc& gold, const EvalDoc& pred) { return ceafe(std::vector{gold}, std::vector{pred}); }

double max_assignment(const std::vector<std::vector<double>>& weights) {
    if (weights.empty()) return 0.0;
    const int rows = static_cast<int>(weights.size());
    const int cols = static_cast<int>(weights[0].size());
    const int n = std::max(rows, cols);
    // Kuhn-Munkres with potentials on a zero-padded square matrix, minimizing
    // negated weights
    std::vector<std::vector<double>> a(static_cast<size_t>(n), std::vector<double>(static_cast<size_t>(n), 0.0));
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) a[static_cast<size_t>(i)][static_cast<size_t>(j)] = -weights[static_cast<size_t>(i)][static_cast<size_t>(j)];
    }
    const double kInf = 1e300;
    std::vector<double> u(static_cast<size_t>(n + 1), 0.0), v(static_cast<size_t>(n + 1), 0.0);
    std::vector<int> p(static_cast<size_t>(n + 1), 0), way(static_cast<size_t>(n + 1), 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(static_cast<size_t>(n + 1), kInf);
        std::vector<bool> used(static_cast<size_t>(n + 1), false);
        do {
            used[static_cast<size_t>(j0)] = true;
            int i0 = p[static_cast<size_t>(j0)], j1 = -1;
            double delta = kInf;
            for (int j = 1; j <= n; ++j) {
                if (used[static_cast<size_t>(j)]) continue;
                double cur = a[static_cast<size_t>(i0 - 1)][static_cast<size_t>(j - 1)] - u[static_cast<size_t>(i0)] - v[static_cast<size_t>(j)];
                if (cur < minv[static_cast<size_t>(j)]) {
                    minv[static_cast<size_t>(j)] = cur;
                    way[static_cast<size_t>(j)] = j0;
                }
                if (minv[static_cast<size_t>(j)] < delta) {
                    delta = minv[static_cast<size_t>(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[static_cast<size_t>(j)]) {
                    u[static_cast<size_t>(p[static_cast<size_t>(j)])] += delta;
                    v[static_cast<size_t>(j)] -= delta;
                } else {
                    minv[static_cast<size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (p[static_cast<size_t>(j0)] != 0);
        do {
            int j1 = way[static_cast<size_t>(j0)];
            p[static_cast<size_t>(j0)] = p[static_cast<size_t>(j1)];
            j0 = j1;
        } while (j0);
    }
    double total = 0.0;
    for (int j = 1; j <= n; ++j) {
        int i = p[static_cast<size_t>(j)];
        if (i >= 1 && i <= rows && j <= cols) total += weights[static_cast<size_t>(i - 1)][static_cast<size_t>(j - 1)];
    }
    return total;
}

double brute_force_assignment(const std::vector<std::vector<double>>& weights) {
    if (weights.empty()) return 0.0;
    const int rows = static_cast<int>(weights.size());
    const int cols = static_cast<int>(weights[0].size());
    std::vector<int> perm(static_cast<size_t>(cols));
    std::iota(perm.begin(), perm.end(), 0);
    double best = 0.0;
    do {
        double total = 0.0;
        for (int i = 0; i < std::min(rows, cols); ++i) total += weights[static_cast<size_t>(i)][static_cast<size_t>(perm[static_cast<size_t>(i)])];
        best = std::max(best, total);
    } while (std::next_permutation(perm.begin(), perm.end()));
    if (rows > cols) {
        // choose which rows participate by permuting the transpose instead
        std::vector<std::vector<double>> t(static_cast<size_t>(cols), std::vector<double>(static_cast<size_t>(rows)));
        for (int i = 0; i < rows; ++i) {
            for (int j = 0; j < cols; ++j) t[static_cast<size_t>(j)][static_cast<size_t>(i)] = weights[static_cast<size_t>(i)][static_cast<size_t>(j)];
        }
        return brute_force_assignment(t);
    }
    return best;
}

namespace {

// (mention set -> types) map of one side
std::map<std::set<std::pair<int, int>>, std::set<std::string>> cluster_map(const EvalDoc& doc) {
    std::map<std::set<std::pair<int, int>>, std::set<std::string>> m;
    for (const auto& c : doc.clusters) {
        auto& types = m[c.mentions];
        types.insert(c.types.begin(), c.types.end());
    }
    return m;
}

void hard_ner_counts(const EvalDoc& gold, const EvalDoc& pred, double& tp, double& pred_pairs,
                     double& gold_pairs, const std::set<std::string>* type_filter) {
    auto gold_map = cluster_map(gold);
    auto count_types = [&](const std::set<std::string>& types) {
        if (!type_filter) return static_cast<double>(types.size());
        double n = 0;
        for (const auto& t : types) {
            if (type_filter->count(t)) n += 1.0;
        }
        return n;
    };
    for (const auto& c : gold.clusters) gold_pairs += count_types(c.types);
    for (const auto& c : pred.clusters) {
        pred_pairs += count_types(c.types);
        auto it = gold_map.find(c.mentions);
        if (it == gold_map.end()) continue;
        for (const auto& t : c.types) {
            if (type_filter && !type_filter->count(t)) continue;
            if (it->second.count(t)) tp += 1.0;
        }
    }
}

}  // namespace

ScoreTriple hard_ner_f1(const std::vector<EvalDoc>& gold, const std::vector<EvalDoc>& pred) {
    if (gold.size() != pred.size()) throw ContractError("hard_ner_f1: document count mismatch");
    double tp = 0, pred_pairs = 0, gold_pairs = 0;
    for (size_t d = 0; d < gold.size(); ++d) {
        hard_ner_counts(gold[d], pred[d], tp, pred_pairs, gold_pairs, nullptr);
    }
    return make_score(tp, pred_pairs, tp, gold_pairs);
}

ScoreTriple hard_ner_f1(const EvalDoc& gold, const EvalDoc& pred) {
    return hard_ner_f1(std::vector{gold}, std::vector{pred});
}

ScoreTriple hard_re_f1(const std::vector<EvalDoc>& gold, const std::vector<EvalDoc>& pred) {
    if (gold.size() != pred.size()) throw ContractError("hard_re_f1: document count mismatch");
    double tp = 0, pred_triples = 0, gold_triples = 0;
    for (size_t d = 0; d < gold.size(); ++d) {
        const EvalDoc& g = gold[d];
        const EvalDoc& p = pred[d];
        for (const auto& [pair, types] : g.relations) gold_triples += static_cast<double>(types.size());
        // map each predicted cluster to the identical gold cluster, if any
        std::map<std::set<std::pair<int, int>>, int> gold_index;
        for (size_t c = 0; c < g.clusters.size(); ++c) gold_index[g.clusters[c].mentions] = static_cast<int>(c);
        for (const auto& [pair, types] : p.relations) {
            pred_triples += static_cast<double>(types.size());
            auto head_it = gold_index.find(p.clusters[static_cast<size_t>(pair.first)].mentions);
            auto tail_it = gold_index.find(p.clusters[static_cast<size_t>(pair.second)].mentions);
            if (head_it == gold_index.end() || tail_it == gold_index.end()) continue;
            auto rel_it = g.relations.find({head_it->second, tail_it->second});
            if (rel_it == g.relations.end()) continue;
            for (const auto& t : types) {
                if (rel_it->second.count(t)) tp += 1.0;
            }
        }
    }
    return make_score(tp, pred_triples, tp, gold_triples);
}

ScoreTriple hard_re_f1(const EvalDoc& gold, const EvalDoc& pred) {
    return hard_re_f1(std::vector{gold}, std::vector{pred});
}

double el_top1_accuracy(const std::vector<ElRecord>& records) {
    if (records.empty()) return 0.0;
    int correct = 0;
    for (const auto& r : records) {
        if (r.candidates.empty() || r.candidates.size() != r.alphas.size()) continue;
        size_t best = 0;
        for (size_t j = 1; j < r.alphas.size(); ++j) {
            if (r.alphas[j] > r.alphas[best]) best = j;
        }
        if (r.candidates[best] == r.gold_entity) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(records.size());
}

std::vector<ScoreTriple> frequency_sliced_ner(const std::vector<EvalDoc>& gold,
                                              const std::vector<EvalDoc>& pred,
                                              const std::map<std::string, int>& train_type_counts,
                                              const std::vector<FreqBucket>& buckets) {
    if (gold.size() != pred.size()) throw ContractError("frequency_sliced_ner: document count mismatch");
    // collect every type seen on either side, with zero counts for unseen
    std::set<std::string> all_types;
    for (const auto& docs : {gold, pred}) {
        for (const auto& d : docs) {
            for (const auto& c : d.clusters) all_types.insert(c.types.begin(), c.types.end());
        }
    }
    std::vector<ScoreTriple> out;
    for (const auto& bucket : buckets) {
        std::set<std::string> in_bucket;
        for (const auto& t : all_types) {
            auto it = train_type_counts.find(t);
            int freq = it == train_type_counts.end() ? 0 : it->second;
            if (freq >= bucket.lo && freq <= bucket.hi) in_bucket.insert(t);
        }
        double tp = 0, pred_pairs = 0, gold_pairs = 0;
        for (size_t d = 0; d < gold.size(); ++d) {
            hard_ner_counts(gold[d], pred[d], tp, pred_pairs, gold_pairs, &in_bucket);
        }
        out.push_back(make_score(tp, pred_pairs, tp, gold_pairs));
    }
    return out;
}

std::map<std::string, int> type_frequencies(const std::vector<Document>& docs) {
    std::map<std::string, int> counts;
    for (const auto& doc : docs) {
        for (const auto& c : doc.clusters) {
            for (const auto& t : c.types) ++counts[t];
        }
    }
    return counts;
}

}  // namespace kbie
