#pragma once

#include <memory>
#include <string>

#include "json.hpp"
#include "kbie/corpus.hpp"
#include "kbie/heads.hpp"

namespace kbie {

// One JSON config per run; CLI flags override individual keys. The seed is
// mandatory and feeds every random decision through named substreams.
struct RunConfig {
    std::string train_path;
    std::string dev_path;
    std::string test_path;
    std::string vocab_path;  // optional explicit label vocabulary

    std::string kb_source = "none";  // none | kb-text | kb-graph | both
    std::string scheme;              // required unless kb_source == none
    std::string dictionary_path;
    std::string store_text_path;
    std::string store_graph_path;
    std::string pretrained_words_path;

    ModelConfig model;
    AdamConfig adam;
    int epochs = 100;
    int eval_every = 0;
    uint64_t seed = 0;
    std::string out_dir;

    static RunConfig from_json(const nlohmann::ordered_json& j);
    static RunConfig from_json_file(const std::string& path);
    nlohmann::ordered_json to_json() const;

    void validate() const;  // ConfigError on contradictions
    bool is_baseline() const { return kb_source == "none"; }
};

// Everything a trained model needs at inference time. The dictionary and
// store own the memory the model points into.
struct ModelBundle {
    RunConfig cfg;
    LabelVocab vocab;
    WordVocab words;
    CharVocab chars;
    std::unique_ptr<CandidateDictionary> dict;
    std::unique_ptr<EntityEmbeddingStore> store;
    std::unique_ptr<JointModel> model;
};

// Fresh model over a training corpus, with KB resources loaded per config.
ModelBundle build_model(const RunConfig& cfg, const Corpus& train);

// Directory layout: model.json (config + vocabularies) and model.ckpt.
void save_model(const std::string& dir, const ModelBundle& bundle);
ModelBundle load_model(const std::string& dir);

nlohmann::ordered_json metrics_to_json(const MetricsSummary& s);
std::string metrics_table(const MetricsSummary& s);

}  // namespace kbie
