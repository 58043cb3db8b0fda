#pragma once

#include <string>
#include <vector>

#include "kbie/corpus.hpp"
#include "kbie/kbstore.hpp"
#include "kbie/nn.hpp"
#include "kbie/spans.hpp"
#include "kbie/tape.hpp"

namespace kbie {

enum class WeightScheme { Uniform, Prior, Attention, AttPrior };

std::string scheme_name(WeightScheme s);
WeightScheme scheme_from_name(const std::string& name);  // ConfigError on unknown

struct KbModuleConfig {
    WeightScheme scheme = WeightScheme::Uniform;
    int attention_hidden = 16;
    // Renormalize (possibly truncated) priors so the Prior weights sum to 1.
    // The unnormalized corpus-frequency variant stays available for fidelity
    // experiments.
    bool renormalize_priors = true;
};

// Candidates of one span resolved against a store, held in canonical order
// (prior descending, entity id ascending) so that weighted sums accumulate in
// a fixed order regardless of input permutation.
struct CandidateSet {
    std::vector<CandidateEntity> candidates;  // canonical order
    std::vector<int> input_pos;               // canonical index -> caller's index
    Tensor vectors;                           // (k, store_dim), zero rows for store misses
    int store_misses = 0;

    int count() const { return static_cast<int>(candidates.size()); }
    bool empty() const { return candidates.empty(); }
};

// Combines candidate-entity representations into span vectors under one of
// the four weighting schemes. Entity vectors and priors enter the tape as
// constants: gradients reach the attention network only.
class KbModule {
public:
    KbModule() = default;
    KbModule(const KbModuleConfig& cfg, int span_dim, int store_dim, Rng& rng);

    CandidateSet resolve(const std::vector<CandidateEntity>& candidates,
                         const EntityEmbeddingStore& store) const;

    // Unnormalized attention scores, one per candidate, shape (k,1).
    // Precondition: scheme is Attention or AttPrior and the set is non-empty.
    Tape::NodeId attention_scores(Tape& tape, Tape::NodeId g_row, const CandidateSet& set);

    // alpha, shape (k,1); uniform -> 1/k, prior -> normalized priors,
    // attention kinds -> softmax of the scores. Precondition: non-empty set.
    Tape::NodeId candidate_weights(Tape& tape, Tape::NodeId g_row, const CandidateSet& set);

    // e = sum_j alpha_j xi(c_j), shape (1, store_dim); empty set -> zeros.
    Tape::NodeId kb_repr(Tape& tape, Tape::NodeId g_row, const CandidateSet& set);

    // [g; e]
    Tape::NodeId enrich(Tape& tape, Tape::NodeId g_row, Tape::NodeId e_row);

    int store_dim() const { return store_dim_; }
    int enriched_dim() const { return span_dim_ + store_dim_; }
    WeightScheme scheme() const { return cfg_.scheme; }
    const KbModuleConfig& config() const { return cfg_; }

    std::vector<Parameter*> parameters();

private:
    KbModuleConfig cfg_;
    int span_dim_ = 0;
    int store_dim_ = 0;
    Ffnn attention_;  // scalar-output; present for attention kinds only
    bool has_attention_ = false;
};

std::string span_surface(const Document& doc, const Span& span);

// One text block per (span, scheme) with candidate rows sorted by alpha
// descending: "surface<TAB>entity<TAB>prior<TAB>alpha". Spans without
// candidates are omitted.
std::string format_weight_block(const std::string& doc_id, const Span& span, const std::string& surface,
                                WeightScheme scheme, const CandidateSet& set,
                                const std::vector<double>& alphas);

}  // namespace kbie
