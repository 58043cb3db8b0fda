#include "kbie/postproc.hpp"

#include <algorithm>

#include "kbie/errors.hpp"

namespace kbie {

std::vector<std::vector<int>> build_clusters(const std::vector<int>& antecedents,
                                             const std::vector<std::set<int>>& ner_labels,
                                             int* dropped_spans) {
    const int n = static_cast<int>(antecedents.size());
    if (static_cast<int>(ner_labels.size()) != n) {
        throw ContractError("build_clusters: " + std::to_string(ner_labels.size()) + " label sets for " +
                            std::to_string(n) + " spans");
    }
    std::vector<int> root(static_cast<size_t>(n));
    for (int j = 0; j < n; ++j) {
        int a = antecedents[static_cast<size_t>(j)];
        if (a == kSelf) {
            root[static_cast<size_t>(j)] = j;
        } else {
            if (a < 0 || a >= j) {
                throw ContractError("build_clusters: span " + std::to_string(j) + " has invalid antecedent " +
                                    std::to_string(a));
            }
            root[static_cast<size_t>(j)] = root[static_cast<size_t>(a)];
        }
    }
    std::vector<std::vector<int>> by_root(static_cast<size_t>(n));
    for (int j = 0; j < n; ++j) by_root[static_cast<size_t>(root[static_cast<size_t>(j)])].push_back(j);

    std::vector<std::vector<int>> clusters;
    int dropped = 0;
    for (int r = 0; r < n; ++r) {
        auto& members = by_root[static_cast<size_t>(r)];
        if (members.empty()) continue;
        if (ner_labels[static_cast<size_t>(r)].empty()) {
            dropped += static_cast<int>(members.size());  // whole chain dropped with its root
            continue;
        }
        clusters.push_back(std::move(members));
    }
    if (dropped_spans) *dropped_spans = dropped;
    return clusters;
}

PredictionSet unify(const std::vector<std::vector<int>>& clusters,
                    const std::vector<std::set<int>>& ner_labels,
                    const std::map<std::pair<int, int>, std::set<int>>& re_labels) {
    PredictionSet out;
    for (const auto& members : clusters) {
        PredCluster c;
        c.members = members;
        for (int m : members) {
            c.types.insert(ner_labels[static_cast<size_t>(m)].begin(), ner_labels[static_cast<size_t>(m)].end());
        }
        out.clusters.push_back(std::move(c));
    }
    for (size_t a = 0; a < clusters.size(); ++a) {
        for (size_t b = 0; b < clusters.size(); ++b) {
            if (a == b) continue;
            std::set<int> types;
            for (int i : clusters[a]) {
                for (int j : clusters[b]) {
                    auto it = re_labels.find({i, j});
                    if (it != re_labels.end()) types.insert(it->second.begin(), it->second.end());
                }
            }
            if (!types.empty()) {
                out.relations.push_back({static_cast<int>(a), static_cast<int>(b), std::move(types)});
            }
        }
    }
    return out;
}

Document prediction_to_document(const std::string& doc_id, const std::vector<std::string>& tokens,
                                const std::vector<Span>& spans, const PredictionSet& preds,
                                const LabelVocab& vocab) {
    Document doc;
    doc.id = doc_id;
    doc.tokens = tokens;
    for (size_t c = 0; c < preds.clusters.size(); ++c) {
        const auto& cluster = preds.clusters[c];
        std::string cid = "p" + std::to_string(c);
        GoldCluster gc;
        gc.id = cid;
        for (int t : cluster.types) gc.types.push_back(vocab.entity_types[static_cast<size_t>(t)]);
        doc.clusters.push_back(std::move(gc));
        for (int m : cluster.members) {
            const Span& s = spans[static_cast<size_t>(m)];
            doc.mentions.push_back({s.start, s.end, cid, ""});
        }
    }
    for (const auto& r : preds.relations) {
        GoldRelation gr;
        gr.head_cluster = "p" + std::to_string(r.head);
        gr.tail_cluster = "p" + std::to_string(r.tail);
        for (int t : r.types) gr.types.push_back(vocab.relation_types[static_cast<size_t>(t)]);
        doc.relations.push_back(std::move(gr));
    }
    validate_document(doc);
    return doc;
}

}  // namespace kbie
