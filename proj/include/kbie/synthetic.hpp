#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kbie/corpus.hpp"
#include "kbie/kbembed.hpp"
#include "kbie/kbstore.hpp"

namespace kbie {

// Entity splits: "train" and "both" entities may appear in train/dev
// documents, "eval" and "both" in test documents, "kb" entities exist only in
// the KB resources (candidate decoys).
struct GenEntity {
    std::string id;
    std::string type;
    std::string surface;  // single token
    std::string split = "both";
};

struct GenRelationRule {
    std::string head;
    std::string tail;
    std::string type;
};

// A surface shared between a gold entity (the one IE documents mean) and a
// decoy whose hypercorpus pages anchor the surface more often, giving the
// decoy the higher dictionary prior.
struct GenAmbiguousSurface {
    std::string surface;
    std::string gold;
    std::string decoy;
    int decoy_anchor_boost = 4;
};

struct GeneratorConfig {
    std::vector<std::string> entity_types;
    std::vector<std::string> relation_types;
    std::vector<GenEntity> entities;
    std::vector<GenRelationRule> relations;
    std::vector<GenAmbiguousSurface> ambiguous;

    int train_docs = 0;
    int dev_docs = 0;
    int test_docs = 0;
    int sentences_per_doc = 3;

    // When set, documents are generated in groups of one per entity type with
    // identical sentence templates and mention slots, so the marginal
    // token-context distribution is the same for every type and type identity
    // is recoverable only through the KB candidates.
    bool kb_separable = false;

    int anchor_repeats = 3;
    int type_cue_repeats = 2;

    static GeneratorConfig from_json_file(const std::string& path);
};

struct SyntheticData {
    Corpus train;
    Corpus dev;
    Corpus test;
    HyperCorpus hypercorpus;
    TripleSet triples;
    CandidateDictionary dictionary;
};

// Pure function of (config, seed).
SyntheticData generate_synthetic(const GeneratorConfig& cfg, uint64_t seed);

// Canned experiment configs.
GeneratorConfig memorizable_config(int train_docs = 20);
GeneratorConfig kb_separable_config();
GeneratorConfig el_misleading_config();

}  // namespace kbie
