#pragma once

#include <string>
#include <vector>

namespace kbie {

// Token-index spans are inclusive on both ends: width = end - start + 1.

struct GoldMention {
    int start = 0;
    int end = 0;
    std::string cluster_id;
    std::string link;  // gold KB entity, optional (empty = absent)

    bool operator==(const GoldMention&) const = default;
};

struct GoldCluster {
    std::string id;
    std::vector<std::string> types;
    std::vector<int> mentions;  // indices into Document::mentions, derived at load

    bool operator==(const GoldCluster&) const = default;
};

struct GoldRelation {
    std::string head_cluster;
    std::string tail_cluster;
    std::vector<std::string> types;

    bool operator==(const GoldRelation&) const = default;
};

struct Document {
    std::string id;
    std::vector<std::string> tokens;
    std::vector<GoldMention> mentions;
    std::vector<GoldCluster> clusters;
    std::vector<GoldRelation> relations;

    bool operator==(const Document&) const = default;
};

// Ordered label inventories; the index of a label is its logit position.
struct LabelVocab {
    std::vector<std::string> entity_types;
    std::vector<std::string> relation_types;

    int entity_index(const std::string& label) const;    // -1 when absent
    int relation_index(const std::string& label) const;

    bool operator==(const LabelVocab&) const = default;
};

struct Corpus {
    std::vector<Document> docs;
    LabelVocab vocab;
};

// Fills cluster mention lists from mention cluster ids and checks every
// Document invariant. Throws ValidationError naming the document.
void validate_document(Document& doc, const LabelVocab* vocab = nullptr);

// JSON-lines corpus file. When vocab is null the returned vocab is the sorted
// union of observed labels.
Corpus load_corpus(const std::string& path, const LabelVocab* vocab = nullptr);
void save_corpus(const std::string& path, const Corpus& corpus);

LabelVocab load_vocab(const std::string& path);
void save_vocab(const std::string& path, const LabelVocab& vocab);

std::string doc_to_json_line(const Document& doc);
Document doc_from_json_line(const std::string& line);

}  // namespace kbie
