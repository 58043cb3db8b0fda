#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "kbie/kbstore.hpp"
#include "kbie/tape.hpp"

namespace kbie {

struct Triple {
    std::string subj;
    std::string rel;
    std::string obj;

    bool operator==(const Triple&) const = default;
    auto operator<=>(const Triple&) const = default;
};

// Duplicate-free triple collection with sorted entity/relation vocabularies.
class TripleSet {
public:
    static TripleSet from_triples(std::vector<Triple> triples);  // ValidationError on duplicates

    static TripleSet load_tsv(const std::string& path);  // "subj<TAB>rel<TAB>obj" lines
    void save_tsv(const std::string& path) const;

    const std::vector<Triple>& triples() const { return triples_; }
    const std::vector<std::string>& entities() const { return entities_; }
    const std::vector<std::string>& relations() const { return relations_; }

private:
    std::vector<Triple> triples_;
    std::vector<std::string> entities_;
    std::vector<std::string> relations_;
};

struct HyperAnchor {
    int start = 0;
    int end = 0;  // inclusive token index
    std::string entity;
};

struct HyperPage {
    std::string page_entity;
    std::vector<std::string> tokens;
    std::vector<HyperAnchor> anchors;
};

// Hyperlinked page collection: the toy stand-in for an entity-linked
// encyclopedia. Doubles as the anchor stream for dictionary building.
struct HyperCorpus {
    std::vector<HyperPage> pages;

    // (anchor surface, target entity) occurrences, page order
    std::vector<std::pair<std::string, std::string>> anchor_stream() const;

    static HyperCorpus load(const std::string& path);  // JSON-lines
    void save(const std::string& path) const;
};

struct KbTextConfig {
    int dim = 16;
    int window = 3;
    int negatives = 4;
    int epochs = 5;
    double lr = 0.05;
    // weight on the (page entity -> anchored entity) link task relative to
    // the (anchor entity -> context word) task; the mixture is unweighted at
    // the default
    double link_task_weight = 1.0;
};

struct KbTextResult {
    EntityEmbeddingStore store;
    std::map<std::string, std::vector<double>> word_vectors;
    std::vector<double> epoch_loss;  // evaluated after each epoch, index 0 = initialization
};

// Negative-sampling skip-gram with two positive-pair sources: (anchor entity,
// nearby word) and (page entity, anchored entity). Deterministic for a fixed
// seed; negatives drawn uniformly.
KbTextResult train_kb_text(const HyperCorpus& corpus, const KbTextConfig& cfg, uint64_t seed);

struct KbGraphConfig {
    int dim = 16;
    int epochs = 50;
    double lr = 0.1;
};

struct KbGraphResult {
    EntityEmbeddingStore store;
    std::map<std::string, std::vector<double>> relation_vectors;
    std::vector<double> epoch_loss;  // index 0 = initialization

    // argmax_o (v_subj + v_rel) . w_o over the entity vocabulary
    std::string predict_object(const std::string& subj, const std::string& rel) const;

    std::vector<std::string> entity_vocab;
    std::vector<double> output_weights;  // dim x |E| row-major
};

// Linear classifier scoring obj from (subj, rel) with full-softmax
// cross-entropy; feasible and exactly checkable at desk scale.
KbGraphResult train_kb_graph(const TripleSet& triples, const KbGraphConfig& cfg, uint64_t seed);

// Mean cross-entropy of the triple classifier over the whole set, built on a
// tape. Used by the trainer's epoch-loss evaluation and by gradient checks.
Tape::NodeId kb_graph_loss(Tape& tape, const TripleSet& triples, Parameter& ent, Parameter& rel,
                           Parameter& out);

double cosine(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace kbie
