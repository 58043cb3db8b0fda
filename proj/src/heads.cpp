#include "kbie/heads.hpp"

#include <algorithm>
#include <cmath>

#include "kbie/checkpoint.hpp"
#include "kbie/errors.hpp"

namespace kbie {

std::vector<std::set<int>> decode_ner(const Tensor& logits) {
    std::vector<std::set<int>> out(static_cast<size_t>(logits.rows()));
    for (int i = 0; i < logits.rows(); ++i) {
        for (int l = 0; l < logits.cols(); ++l) {
            if (logits.at(i, l) > 0.0) out[static_cast<size_t>(i)].insert(l);
        }
    }
    return out;
}

std::vector<int> decode_antecedents(const Tensor& pair_scores, int span_count) {
    std::vector<int> out(static_cast<size_t>(span_count), kSelf);
    for (int j = 0; j < span_count; ++j) {
        const int offset = j * (j - 1) / 2;
        double best = 0.0;  // SELF
        int chosen = kSelf;
        for (int i = 0; i < j; ++i) {
            double s = pair_scores.values[static_cast<size_t>(offset + i)];
            if (s > best) {
                best = s;
                chosen = i;
            }
        }
        out[static_cast<size_t>(j)] = chosen;
    }
    return out;
}

std::map<std::pair<int, int>, std::set<int>> decode_re(const Tensor& logits,
                                                       const std::vector<std::pair<int, int>>& pairs) {
    std::map<std::pair<int, int>, std::set<int>> out;
    for (size_t p = 0; p < pairs.size(); ++p) {
        std::set<int> labels;
        for (int l = 0; l < logits.cols(); ++l) {
            if (logits.at(static_cast<int>(p), l) > 0.0) labels.insert(l);
        }
        if (!labels.empty()) out[pairs[p]] = std::move(labels);
    }
    return out;
}

JointModel::JointModel(const ModelConfig& cfg, const LabelVocab& vocab, WordVocab words, CharVocab chars,
                       const CandidateDictionary* dict, const EntityEmbeddingStore* store, uint64_t seed)
    : cfg_(cfg), vocab_(vocab), dict_(dict), store_(store) {
    if (store_ && !dict_) throw ConfigError("model: a KB store requires a candidate dictionary");
    if (vocab_.entity_types.empty()) throw ConfigError("model: empty entity type vocabulary");
    if (cfg_.heads.w_ner < 0 || cfg_.heads.w_coref < 0 || cfg_.heads.w_re < 0) {
        throw ConfigError("model: loss weights must be non-negative");
    }
    Rng master(seed);
    Rng enc_rng = master.substream("init/encoder");
    encoder_ = Encoder(cfg_.encoder, std::move(words), std::move(chars), enc_rng);
    Rng span_rng = master.substream("init/spans");
    widths_ = WidthEmbedding(cfg_.spans.max_width, cfg_.spans.width_dim, span_rng);

    const int g_dim = 2 * encoder_.output_dim() + cfg_.spans.width_dim;
    Rng pruner_rng = master.substream("init/pruner");
    pruner_ = Ffnn("pruner", g_dim, cfg_.heads.hidden, 1, pruner_rng);

    int d_prime = g_dim;
    if (store_) {
        Rng kb_rng = master.substream("init/kb");
        kb_ = KbModule(cfg_.kb, g_dim, store_->dim(), kb_rng);
        d_prime = kb_.enriched_dim();
    }

    Rng ner_rng = master.substream("init/ner");
    ner_ = Ffnn("heads/ner", d_prime, cfg_.heads.hidden, static_cast<int>(vocab_.entity_types.size()), ner_rng);
    Rng coref_rng = master.substream("init/coref");
    coref_ = Ffnn("heads/coref", 3 * d_prime, cfg_.heads.hidden, 1, coref_rng);
    if (!vocab_.relation_types.empty()) {
        Rng re_rng = master.substream("init/re");
        re_ = Ffnn("heads/re", 3 * d_prime, cfg_.heads.hidden, static_cast<int>(vocab_.relation_types.size()), re_rng);
        has_re_ = true;
    }
}

int JointModel::enriched_dim() const {
    int g_dim = 2 * encoder_.output_dim() + cfg_.spans.width_dim;
    return store_ ? g_dim + store_->dim() : g_dim;
}

Tape::NodeId JointModel::pair_features(Tape& tape, Tape::NodeId reprs, const std::vector<int>& lhs,
                                       const std::vector<int>& rhs) {
    auto a = tape.embedding_lookup(reprs, lhs);
    auto b = tape.embedding_lookup(reprs, rhs);
    return tape.concat({a, b, tape.mul(a, b)}, 1);
}

JointModel::Forward JointModel::forward(Tape& tape, const Document& doc, bool train) {
    Forward fwd;
    auto hidden = encoder_.run(tape, doc.tokens, train);
    const int n = static_cast<int>(doc.tokens.size());

    auto all_spans = enumerate_spans(n, cfg_.spans.max_width);
    auto g_all = span_reprs(tape, hidden, all_spans, widths_);
    auto scores_node = pruner_.forward(tape, g_all);
    const Tensor& score_tensor = tape.value(scores_node);

    std::vector<Span> gold_spans;
    if (train) {
        for (const auto& m : doc.mentions) gold_spans.push_back({m.start, m.end});
    }
    fwd.prune = prune_spans(all_spans, score_tensor.values, n, cfg_.spans.keep_ratio, gold_spans);
    for (int idx : fwd.prune.kept) fwd.spans.push_back(all_spans[static_cast<size_t>(idx)]);
    auto g_kept = tape.embedding_lookup(g_all, fwd.prune.kept);
    const int s_count = static_cast<int>(fwd.spans.size());

    if (store_) {
        std::vector<Tape::NodeId> rows;
        rows.reserve(fwd.spans.size());
        for (int i = 0; i < s_count; ++i) {
            auto set = kb_.resolve(dict_->lookup(span_surface(doc, fwd.spans[static_cast<size_t>(i)])), *store_);
            auto g_row = tape.slice(g_kept, 0, i, i + 1);
            Tape::NodeId alpha = -1;
            Tape::NodeId e_row;
            if (set.empty()) {
                e_row = tape.constant(Tensor::zeros({1, store_->dim()}));
            } else {
                alpha = kb_.candidate_weights(tape, g_row, set);
                e_row = tape.sum(tape.mul(alpha, tape.constant(set.vectors)), 0);
            }
            fwd.candidates.push_back(std::move(set));
            fwd.alpha_nodes.push_back(alpha);
            rows.push_back(e_row);
        }
        auto e_all = rows.size() == 1 ? rows[0] : tape.concat(rows, 0);
        fwd.enriched = tape.concat({g_kept, e_all}, 1);
    } else {
        fwd.candidates.resize(static_cast<size_t>(s_count));
        fwd.alpha_nodes.assign(static_cast<size_t>(s_count), -1);
        fwd.enriched = g_kept;
    }

    fwd.ner_logits = ner_.forward(tape, fwd.enriched);

    if (s_count >= 2) {
        std::vector<int> lhs, rhs;
        for (int j = 0; j < s_count; ++j) {
            for (int i = 0; i < j; ++i) {
                lhs.push_back(i);
                rhs.push_back(j);
            }
        }
        fwd.coref_scores = coref_.forward(tape, pair_features(tape, fwd.enriched, lhs, rhs));

        if (has_re_) {
            std::vector<int> re_lhs, re_rhs;
            for (int i = 0; i < s_count; ++i) {
                for (int j = 0; j < s_count; ++j) {
                    if (i == j) continue;
                    re_lhs.push_back(i);
                    re_rhs.push_back(j);
                    fwd.re_pairs.emplace_back(i, j);
                }
            }
            fwd.re_logits = re_.forward(tape, pair_features(tape, fwd.enriched, re_lhs, re_rhs));
        }
    }
    return fwd;
}

namespace {

// gold cluster index per kept span (-1 when the span is not a gold mention),
// by exact boundary match
std::vector<int> align_gold(const std::vector<Span>& spans, const Document& doc, int* unaligned) {
    std::map<std::pair<int, int>, int> cluster_of;
    for (const auto& m : doc.mentions) {
        int idx = 0;
        for (const auto& c : doc.clusters) {
            if (c.id == m.cluster_id) break;
            ++idx;
        }
        cluster_of[{m.start, m.end}] = idx;
    }
    std::vector<int> out(spans.size(), -1);
    std::set<std::pair<int, int>> matched;
    for (size_t i = 0; i < spans.size(); ++i) {
        auto key = std::make_pair(spans[i].start, spans[i].end);
        auto it = cluster_of.find(key);
        if (it != cluster_of.end()) {
            out[i] = it->second;
            matched.insert(key);
        }
    }
    if (unaligned) {
        int miss = 0;
        for (const auto& [key, idx] : cluster_of) {
            if (!matched.count(key)) ++miss;
        }
        *unaligned = miss;
    }
    return out;
}

}  // namespace

Tape::NodeId JointModel::loss(Tape& tape, const Forward& fwd, const Document& doc, LossParts* parts) {
    const int s_count = static_cast<int>(fwd.spans.size());
    const int n_types = static_cast<int>(vocab_.entity_types.size());
    int unaligned = 0;
    std::vector<int> gold_cluster = align_gold(fwd.spans, doc, &unaligned);

    // cluster-level gold broadcast to aligned mentions
    Tensor ner_labels = Tensor::zeros({s_count, n_types});
    for (int i = 0; i < s_count; ++i) {
        int c = gold_cluster[static_cast<size_t>(i)];
        if (c < 0) continue;
        for (const auto& t : doc.clusters[static_cast<size_t>(c)].types) {
            int l = vocab_.entity_index(t);
            if (l >= 0) ner_labels.at(i, l) = 1.0;
        }
    }
    auto l_ner = tape.mean(tape.bce_with_logits(fwd.ner_logits, tape.constant(ner_labels)), -1);

    // antecedent loss: -log of the softmax mass on gold antecedents, SELF for
    // first kept mentions and non-mentions
    Tape::NodeId coref_sum = tape.constant(Tensor::scalar(0.0));
    for (int j = 0; j < s_count; ++j) {
        Tape::NodeId row;
        auto zero = tape.constant(Tensor::zeros({1, 1}));
        if (j == 0) {
            row = zero;
        } else {
            int offset = j * (j - 1) / 2;
            auto scores = tape.slice(fwd.coref_scores, 0, offset, offset + j);
            row = tape.concat({zero, scores}, 0);  // index 0 = SELF, index i+1 = span i
        }
        Tensor mask = Tensor::zeros({j + 1, 1});
        bool any = false;
        int cj = gold_cluster[static_cast<size_t>(j)];
        if (cj >= 0) {
            for (int i = 0; i < j; ++i) {
                if (gold_cluster[static_cast<size_t>(i)] == cj) {
                    mask.values[static_cast<size_t>(i + 1)] = 1.0;
                    any = true;
                }
            }
        }
        if (!any) mask.values[0] = 1.0;  // SELF is gold
        auto mass = tape.sum(tape.mul(tape.softmax(row, 0), tape.constant(mask)), -1);
        coref_sum = tape.add(coref_sum, tape.scalar_scale(tape.log(mass), -1.0));
    }
    auto l_coref = tape.scalar_scale(coref_sum, 1.0 / static_cast<double>(std::max(1, s_count)));

    // RE labels: cluster-pair gold broadcast to aligned mention pairs
    Tape::NodeId l_re;
    if (fwd.re_logits >= 0 && !fwd.re_pairs.empty()) {
        const int n_rel = static_cast<int>(vocab_.relation_types.size());
        std::map<std::pair<int, int>, std::set<int>> gold_rel;
        std::map<std::string, int> cluster_index;
        for (size_t c = 0; c < doc.clusters.size(); ++c) cluster_index[doc.clusters[c].id] = static_cast<int>(c);
        for (const auto& r : doc.relations) {
            std::set<int> labels;
            for (const auto& t : r.types) {
                int l = vocab_.relation_index(t);
                if (l >= 0) labels.insert(l);
            }
            gold_rel[{cluster_index.at(r.head_cluster), cluster_index.at(r.tail_cluster)}] = std::move(labels);
        }
        Tensor re_labels = Tensor::zeros({static_cast<int>(fwd.re_pairs.size()), n_rel});
        for (size_t p = 0; p < fwd.re_pairs.size(); ++p) {
            int ci = gold_cluster[static_cast<size_t>(fwd.re_pairs[p].first)];
            int cj = gold_cluster[static_cast<size_t>(fwd.re_pairs[p].second)];
            if (ci < 0 || cj < 0) continue;
            auto it = gold_rel.find({ci, cj});
            if (it == gold_rel.end()) continue;
            for (int l : it->second) re_labels.at(static_cast<int>(p), l) = 1.0;
        }
        l_re = tape.mean(tape.bce_with_logits(fwd.re_logits, tape.constant(re_labels)), -1);
    } else {
        l_re = tape.constant(Tensor::scalar(0.0));
    }

    if (parts) {
        parts->ner = tape.value(l_ner).values[0];
        parts->coref = tape.value(l_coref).values[0];
        parts->re = tape.value(l_re).values[0];
        parts->unaligned_gold = unaligned;
    }
    auto total = tape.add(tape.add(tape.scalar_scale(l_ner, cfg_.heads.w_ner),
                                   tape.scalar_scale(l_coref, cfg_.heads.w_coref)),
                          tape.scalar_scale(l_re, cfg_.heads.w_re));
    if (parts) parts->total = tape.value(total).values[0];
    return total;
}

DocPrediction JointModel::predict(const Document& doc) {
    Tape tape;
    Forward fwd = forward(tape, doc, false);
    const int s_count = static_cast<int>(fwd.spans.size());

    auto ner_sets = decode_ner(tape.value(fwd.ner_logits));
    std::vector<int> antecedents;
    if (s_count >= 2) {
        antecedents = decode_antecedents(tape.value(fwd.coref_scores), s_count);
    } else {
        antecedents.assign(static_cast<size_t>(s_count), kSelf);
    }
    std::map<std::pair<int, int>, std::set<int>> re_sets;
    if (fwd.re_logits >= 0) re_sets = decode_re(tape.value(fwd.re_logits), fwd.re_pairs);

    DocPrediction pred;
    pred.kept_spans = fwd.spans;
    auto clusters = build_clusters(antecedents, ner_sets, &pred.raw.dropped_spans);
    pred.raw = unify(clusters, ner_sets, re_sets);
    pred.doc = prediction_to_document(doc.id, doc.tokens, fwd.spans, pred.raw, vocab_);
    pred.dropped_gold_spans = static_cast<int>(fwd.prune.dropped_gold.size());

    for (const auto& set : fwd.candidates) pred.store_misses += set.store_misses;

    // gold entity links, for the EL top-1 analysis (weighting schemes only)
    if (store_) {
        std::map<std::pair<int, int>, int> span_index;
        for (int i = 0; i < s_count; ++i) {
            span_index[{fwd.spans[static_cast<size_t>(i)].start, fwd.spans[static_cast<size_t>(i)].end}] = i;
        }
        for (const auto& m : doc.mentions) {
            if (m.link.empty()) continue;
            ElRecord record;
            record.gold_entity = m.link;
            auto it = span_index.find({m.start, m.end});
            if (it != span_index.end() && !fwd.candidates[static_cast<size_t>(it->second)].empty()) {
                const auto& set = fwd.candidates[static_cast<size_t>(it->second)];
                const Tensor& alpha = tape.value(fwd.alpha_nodes[static_cast<size_t>(it->second)]);
                for (int j = 0; j < set.count(); ++j) {
                    record.candidates.push_back(set.candidates[static_cast<size_t>(j)].entity_id);
                    record.alphas.push_back(alpha.values[static_cast<size_t>(j)]);
                }
            }
            pred.el_records.push_back(std::move(record));
        }
    }

    // weight report blocks: uniform and prior always, plus the trained scheme
    if (store_) {
        std::string report;
        for (int i = 0; i < s_count; ++i) {
            const auto& set = fwd.candidates[static_cast<size_t>(i)];
            if (set.empty()) continue;
            const Span& span = fwd.spans[static_cast<size_t>(i)];
            std::string surface = span_surface(doc, span);
            const int k = set.count();
            std::vector<double> uniform(static_cast<size_t>(k), 1.0 / k);
            double total = 0;
            for (const auto& c : set.candidates) total += c.prior;
            std::vector<double> prior;
            for (const auto& c : set.candidates) {
                prior.push_back(cfg_.kb.renormalize_priors ? c.prior / total : c.prior);
            }
            report += format_weight_block(doc.id, span, surface, WeightScheme::Uniform, set, uniform);
            report += format_weight_block(doc.id, span, surface, WeightScheme::Prior, set, prior);
            if (kb_.scheme() == WeightScheme::Attention || kb_.scheme() == WeightScheme::AttPrior) {
                const Tensor& alpha = tape.value(fwd.alpha_nodes[static_cast<size_t>(i)]);
                report += format_weight_block(doc.id, span, surface, kb_.scheme(), set, alpha.values);
            }
            report += "\n";
        }
        pred.weight_report = std::move(report);
    }
    return pred;
}

std::vector<Parameter*> JointModel::parameters() {
    std::vector<Parameter*> out = encoder_.parameters();
    out.push_back(&widths_.table);
    pruner_.collect(out);
    if (store_) {
        for (Parameter* p : kb_.parameters()) out.push_back(p);
    }
    ner_.collect(out);
    coref_.collect(out);
    if (has_re_) re_.collect(out);
    return out;
}

std::vector<Parameter*> JointModel::all_parameters() {
    std::vector<Parameter*> out = encoder_.all_parameters();
    out.push_back(&widths_.table);
    pruner_.collect(out);
    if (store_) {
        for (Parameter* p : kb_.parameters()) out.push_back(p);
    }
    ner_.collect(out);
    coref_.collect(out);
    if (has_re_) re_.collect(out);
    return out;
}

void JointModel::save_checkpoint(const std::string& path) { write_checkpoint_file(path, all_parameters()); }

void JointModel::load_checkpoint(const std::string& path) {
    load_into_params(read_checkpoint_file(path), all_parameters());
}

TrainResult train_model(JointModel& model, const Corpus& train, const Corpus* dev, const TrainConfig& cfg) {
    if (train.docs.empty()) throw ConfigError("train: empty corpus");
    Adam adam(cfg.adam);
    auto params = model.parameters();
    auto all_params = model.all_parameters();
    Rng master(cfg.seed);
    Rng dropout_rng = master.substream("train/dropout");

    TrainResult result;
    std::vector<Tensor> last_good;
    for (Parameter* p : all_params) last_good.push_back(p->value);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        EpochLog log;
        log.epoch = epoch;
        for (const auto& doc : train.docs) {
            for (Parameter* p : all_params) p->zero_grad();
            Tape tape(dropout_rng.next_u64());
            auto fwd = model.forward(tape, doc, true);
            log.dropped_gold_spans += static_cast<int>(fwd.prune.dropped_gold.size());
            LossParts parts;
            auto loss_node = model.loss(tape, fwd, doc, &parts);
            if (!std::isfinite(parts.total)) {
                for (size_t i = 0; i < all_params.size(); ++i) all_params[i]->value = last_good[i];
                throw NumericsError("training diverged on document '" + doc.id + "' in epoch " +
                                    std::to_string(epoch) + "; last good parameters restored");
            }
            tape.backward(loss_node);
            adam.step(params);
            log.losses.ner += parts.ner;
            log.losses.coref += parts.coref;
            log.losses.re += parts.re;
            log.losses.total += parts.total;
            log.unaligned_gold += parts.unaligned_gold;
        }
        double inv = 1.0 / static_cast<double>(train.docs.size());
        log.losses.ner *= inv;
        log.losses.coref *= inv;
        log.losses.re *= inv;
        log.losses.total *= inv;
        if (dev && cfg.eval_every > 0 && (epoch + 1) % cfg.eval_every == 0) {
            log.dev = evaluate_model(model, *dev);
        }
        for (size_t i = 0; i < all_params.size(); ++i) last_good[i] = all_params[i]->value;
        result.log.push_back(std::move(log));
    }
    return result;
}

MetricsSummary evaluate_model(JointModel& model, const Corpus& gold) {
    std::vector<Document> preds;
    std::vector<ElRecord> el_records;
    for (const auto& doc : gold.docs) {
        auto p = model.predict(doc);
        preds.push_back(std::move(p.doc));
        el_records.insert(el_records.end(), p.el_records.begin(), p.el_records.end());
    }
    MetricsSummary summary = evaluate_predictions(gold, preds);
    if (!el_records.empty()) summary.el_top1 = el_top1_accuracy(el_records);
    return summary;
}

MetricsSummary evaluate_predictions(const Corpus& gold, const std::vector<Document>& preds) {
    if (gold.docs.size() != preds.size()) throw ContractError("evaluate: document count mismatch");
    std::vector<EvalDoc> g, p;
    for (const auto& d : gold.docs) g.push_back(eval_view(d));
    for (const auto& d : preds) p.push_back(eval_view(d));
    MetricsSummary s;
    s.muc_score = muc(g, p);
    s.b3_score = b3(g, p);
    s.ceafe_score = ceafe(g, p);
    s.coref_avg = (s.muc_score.f1 + s.b3_score.f1 + s.ceafe_score.f1) / 3.0;
    s.ner = hard_ner_f1(g, p);
    s.re = hard_re_f1(g, p);
    return s;
}

}  // namespace kbie
