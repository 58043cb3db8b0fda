#include "kbie/kbmodule.hpp"

#include <algorithm>
#include <sstream>

#include "kbie/errors.hpp"

namespace kbie {

std::string scheme_name(WeightScheme s) {
    switch (s) {
        case WeightScheme::Uniform: return "uniform";
        case WeightScheme::Prior: return "prior";
        case WeightScheme::Attention: return "attention";
        case WeightScheme::AttPrior: return "attprior";
    }
    return "?";
}

WeightScheme scheme_from_name(const std::string& name) {
    if (name == "uniform") return WeightScheme::Uniform;
    if (name == "prior") return WeightScheme::Prior;
    if (name == "attention") return WeightScheme::Attention;
    if (name == "attprior") return WeightScheme::AttPrior;
    throw ConfigError("unknown weighting scheme '" + name + "' (expected uniform, prior, attention or attprior)");
}

KbModule::KbModule(const KbModuleConfig& cfg, int span_dim, int store_dim, Rng& rng)
    : cfg_(cfg), span_dim_(span_dim), store_dim_(store_dim) {
    if (span_dim <= 0 || store_dim <= 0) throw ConfigError("kbmodule: span_dim and store_dim must be positive");
    if (cfg.scheme == WeightScheme::Attention || cfg.scheme == WeightScheme::AttPrior) {
        int in = span_dim + store_dim + (cfg.scheme == WeightScheme::AttPrior ? 1 : 0);
        attention_ = Ffnn("kb/attention", in, cfg.attention_hidden, 1, rng);
        has_attention_ = true;
    }
}

CandidateSet KbModule::resolve(const std::vector<CandidateEntity>& candidates,
                               const EntityEmbeddingStore& store) const {
    CandidateSet set;
    std::vector<int> order(candidates.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const auto& ca = candidates[static_cast<size_t>(a)];
        const auto& cb = candidates[static_cast<size_t>(b)];
        if (ca.prior != cb.prior) return ca.prior > cb.prior;
        return ca.entity_id < cb.entity_id;
    });
    set.input_pos = order;
    set.candidates.reserve(candidates.size());
    for (int i : order) set.candidates.push_back(candidates[static_cast<size_t>(i)]);

    if (!set.candidates.empty()) {
        set.vectors = Tensor::zeros({set.count(), store.dim()});
        for (int j = 0; j < set.count(); ++j) {
            const std::vector<double>* vec = store.find(set.candidates[static_cast<size_t>(j)].entity_id);
            if (!vec) {
                ++set.store_misses;  // zero row stands in
                continue;
            }
            std::copy(vec->begin(), vec->end(), set.vectors.values.begin() + static_cast<long>(j) * store.dim());
        }
    }
    return set;
}

Tape::NodeId KbModule::attention_scores(Tape& tape, Tape::NodeId g_row, const CandidateSet& set) {
    if (!has_attention_) throw ContractError("attention_scores: scheme has no attention network");
    if (set.empty()) throw ContractError("attention_scores: empty candidate set");
    const int k = set.count();
    std::vector<int> repeat(static_cast<size_t>(k), 0);
    auto g_rep = tape.embedding_lookup(g_row, repeat);  // (k, span_dim)
    auto xi = tape.constant(set.vectors);
    Tape::NodeId features;
    if (cfg_.scheme == WeightScheme::AttPrior) {
        Tensor priors = Tensor::zeros({k, 1});
        for (int j = 0; j < k; ++j) priors.values[static_cast<size_t>(j)] = set.candidates[static_cast<size_t>(j)].prior;
        features = tape.concat({g_rep, xi, tape.constant(priors)}, 1);
    } else {
        features = tape.concat({g_rep, xi}, 1);
    }
    return attention_.forward(tape, features);  // (k, 1)
}

Tape::NodeId KbModule::candidate_weights(Tape& tape, Tape::NodeId g_row, const CandidateSet& set) {
    if (set.empty()) throw ContractError("candidate_weights: empty candidate set");
    const int k = set.count();
    switch (cfg_.scheme) {
        case WeightScheme::Uniform:
            return tape.constant(Tensor::full({k, 1}, 1.0 / static_cast<double>(k)));
        case WeightScheme::Prior: {
            Tensor alpha = Tensor::zeros({k, 1});
            double total = 0.0;
            for (const auto& c : set.candidates) total += c.prior;
            for (int j = 0; j < k; ++j) {
                double p = set.candidates[static_cast<size_t>(j)].prior;
                alpha.values[static_cast<size_t>(j)] = cfg_.renormalize_priors ? p / total : p;
            }
            return tape.constant(alpha);
        }
        case WeightScheme::Attention:
        case WeightScheme::AttPrior:
            return tape.softmax(attention_scores(tape, g_row, set), 0);
    }
    throw ContractError("candidate_weights: unreachable");
}

Tape::NodeId KbModule::kb_repr(Tape& tape, Tape::NodeId g_row, const CandidateSet& set) {
    if (set.empty()) return tape.constant(Tensor::zeros({1, store_dim_}));
    auto alpha = candidate_weights(tape, g_row, set);       // (k, 1)
    auto weighted = tape.mul(alpha, tape.constant(set.vectors));  // (k, d) column broadcast
    return tape.sum(weighted, 0);                           // (1, d)
}

Tape::NodeId KbModule::enrich(Tape& tape, Tape::NodeId g_row, Tape::NodeId e_row) {
    return tape.concat({g_row, e_row}, 1);
}

std::vector<Parameter*> KbModule::parameters() {
    std::vector<Parameter*> out;
    if (has_attention_) attention_.collect(out);
    return out;
}

std::string span_surface(const Document& doc, const Span& span) {
    std::string surface;
    for (int i = span.start; i <= span.end; ++i) {
        if (i > span.start) surface += " ";
        surface += doc.tokens[static_cast<size_t>(i)];
    }
    return CandidateDictionary::normalize(surface);
}

std::string format_weight_block(const std::string& doc_id, const Span& span, const std::string& surface,
                                WeightScheme scheme, const CandidateSet& set,
                                const std::vector<double>& alphas) {
    std::vector<int> order(alphas.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return alphas[static_cast<size_t>(a)] > alphas[static_cast<size_t>(b)]; });
    std::ostringstream os;
    os << "# doc=" << doc_id << " span=" << span.start << "-" << span.end
       << " scheme=" << scheme_name(scheme) << "\n";
    for (int j : order) {
        const auto& c = set.candidates[static_cast<size_t>(j)];
        os << surface << "\t" << c.entity_id << "\t" << c.prior << "\t" << alphas[static_cast<size_t>(j)] << "\n";
    }
    return os.str();
}

}  // namespace kbie
