#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "kbie/corpus.hpp"
#include "kbie/encoder.hpp"
#include "kbie/kbmodule.hpp"
#include "kbie/kbstore.hpp"
#include "kbie/metrics.hpp"
#include "kbie/optim.hpp"
#include "kbie/postproc.hpp"
#include "kbie/spans.hpp"

namespace kbie {

struct SpanConfig {
    int max_width = 8;
    double keep_ratio = 0.4;
    int width_dim = 8;
};

struct HeadConfig {
    int hidden = 24;
    double w_ner = 1.0;
    double w_coref = 1.0;
    double w_re = 1.0;
};

struct ModelConfig {
    EncoderConfig encoder;
    SpanConfig spans;
    HeadConfig heads;
    KbModuleConfig kb;
};

// Pure decode functions: predictions are a function of logits alone.
std::vector<std::set<int>> decode_ner(const Tensor& logits);

// pair_scores holds score(i,j) for i<j packed as j(j-1)/2 + i; SELF scores 0.
// Ties resolve to SELF first, then the smallest i.
std::vector<int> decode_antecedents(const Tensor& pair_scores, int span_count);

std::map<std::pair<int, int>, std::set<int>> decode_re(const Tensor& logits,
                                                       const std::vector<std::pair<int, int>>& pairs);

struct LossParts {
    double ner = 0.0;
    double coref = 0.0;
    double re = 0.0;
    double total = 0.0;
    int unaligned_gold = 0;  // gold mentions with no kept span at exact bounds
};

struct DocPrediction {
    Document doc;  // entity-centric predictions, gold schema
    PredictionSet raw;
    std::vector<Span> kept_spans;
    std::vector<ElRecord> el_records;   // one per gold-linked mention
    std::string weight_report;          // blocks for uniform, prior and the model's scheme
    int unaligned_gold = 0;
    int dropped_gold_spans = 0;
    int store_misses = 0;
};

struct MetricsSummary {
    ScoreTriple muc_score, b3_score, ceafe_score;
    double coref_avg = 0.0;
    ScoreTriple ner, re;
    std::optional<double> el_top1;
};

// Full pipeline: encoder -> spans -> KB module -> NER/coref/RE heads.
// A null store yields the Baseline: heads consume g alone and no candidate
// machinery runs.
class JointModel {
public:
    JointModel(const ModelConfig& cfg, const LabelVocab& vocab, WordVocab words, CharVocab chars,
               const CandidateDictionary* dict, const EntityEmbeddingStore* store, uint64_t seed);

    struct Forward {
        std::vector<Span> spans;  // kept, document order
        Tape::NodeId enriched = -1;
        Tape::NodeId ner_logits = -1;
        Tape::NodeId coref_scores = -1;  // (P,1), packed i<j, -1 when S < 2
        Tape::NodeId re_logits = -1;     // -1 when no pairs or no relation types
        std::vector<std::pair<int, int>> re_pairs;
        std::vector<CandidateSet> candidates;   // per kept span (empty sets for Baseline)
        std::vector<Tape::NodeId> alpha_nodes;  // -1 where no candidates
        PruneResult prune;
    };

    Forward forward(Tape& tape, const Document& doc, bool train);
    Tape::NodeId loss(Tape& tape, const Forward& fwd, const Document& doc, LossParts* parts = nullptr);

    DocPrediction predict(const Document& doc);

    std::vector<Parameter*> parameters();      // trainable
    std::vector<Parameter*> all_parameters();  // including frozen tables

    void save_checkpoint(const std::string& path);
    void load_checkpoint(const std::string& path);
    void load_pretrained_words(const std::string& path) { encoder_.load_pretrained_words(path); }

    const ModelConfig& config() const { return cfg_; }
    const LabelVocab& label_vocab() const { return vocab_; }
    bool has_kb() const { return store_ != nullptr; }
    int enriched_dim() const;

private:
    Tape::NodeId pair_features(Tape& tape, Tape::NodeId reprs, const std::vector<int>& lhs,
                               const std::vector<int>& rhs);

    ModelConfig cfg_;
    LabelVocab vocab_;
    const CandidateDictionary* dict_ = nullptr;
    const EntityEmbeddingStore* store_ = nullptr;

    Encoder encoder_;
    WidthEmbedding widths_;
    Ffnn pruner_;
    KbModule kb_;
    Ffnn ner_;
    Ffnn coref_;
    Ffnn re_;
    bool has_re_ = false;
};

struct TrainConfig {
    int epochs = 100;
    AdamConfig adam;
    int eval_every = 0;  // 0 disables per-epoch dev evaluation
    uint64_t seed = 1;
};

struct EpochLog {
    int epoch = 0;
    LossParts losses;
    std::optional<MetricsSummary> dev;
    int dropped_gold_spans = 0;
    int unaligned_gold = 0;
};

struct TrainResult {
    std::vector<EpochLog> log;
};

// Single-threaded end-to-end optimization with one Adam step per document.
// On divergence the last end-of-epoch parameters are restored before a
// NumericsError is thrown.
TrainResult train_model(JointModel& model, const Corpus& train, const Corpus* dev, const TrainConfig& cfg);

MetricsSummary evaluate_model(JointModel& model, const Corpus& gold);
MetricsSummary evaluate_predictions(const Corpus& gold, const std::vector<Document>& preds);

}  // namespace kbie
