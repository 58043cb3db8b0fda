#include "kbie/kbembed.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "kbie/errors.hpp"
#include "kbie/rng.hpp"
#include "kbie/tape.hpp"

namespace kbie {

using ojson = nlohmann::ordered_json;

TripleSet TripleSet::from_triples(std::vector<Triple> triples) {
    TripleSet ts;
    std::set<Triple> seen;
    std::set<std::string> entities, relations;
    for (const auto& t : triples) {
        if (!seen.insert(t).second) {
            throw ValidationError("duplicate triple (" + t.subj + ", " + t.rel + ", " + t.obj + ")");
        }
        entities.insert(t.subj);
        entities.insert(t.obj);
        relations.insert(t.rel);
    }
    ts.triples_ = std::move(triples);
    ts.entities_.assign(entities.begin(), entities.end());
    ts.relations_.assign(relations.begin(), relations.end());
    return ts;
}

TripleSet TripleSet::load_tsv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open triples file " + path);
    std::vector<Triple> triples;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        size_t t1 = line.find('\t');
        size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
        if (t1 == std::string::npos || t2 == std::string::npos || line.find('\t', t2 + 1) != std::string::npos) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": expected subj<TAB>rel<TAB>obj");
        }
        triples.push_back({line.substr(0, t1), line.substr(t1 + 1, t2 - t1 - 1), line.substr(t2 + 1)});
    }
    return from_triples(std::move(triples));
}

void TripleSet::save_tsv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    for (const auto& t : triples_) out << t.subj << "\t" << t.rel << "\t" << t.obj << "\n";
}

std::vector<std::pair<std::string, std::string>> HyperCorpus::anchor_stream() const {
    std::vector<std::pair<std::string, std::string>> stream;
    for (const auto& page : pages) {
        for (const auto& a : page.anchors) {
            std::string surface;
            for (int i = a.start; i <= a.end; ++i) {
                if (i > a.start) surface += " ";
                surface += page.tokens[static_cast<size_t>(i)];
            }
            stream.emplace_back(std::move(surface), a.entity);
        }
    }
    return stream;
}

HyperCorpus HyperCorpus::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open hypercorpus file " + path);
    HyperCorpus corpus;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            ojson j = ojson::parse(line);
            HyperPage page;
            page.page_entity = j.at("page_entity").get<std::string>();
            page.tokens = j.at("tokens").get<std::vector<std::string>>();
            for (const auto& ja : j.value("anchors", ojson::array())) {
                HyperAnchor a;
                a.start = ja.at("start").get<int>();
                a.end = ja.at("end").get<int>();
                a.entity = ja.at("entity").get<std::string>();
                if (a.start < 0 || a.start > a.end || a.end >= static_cast<int>(page.tokens.size())) {
                    throw ValidationError("hypercorpus page '" + page.page_entity + "': anchor out of range");
                }
                page.anchors.push_back(std::move(a));
            }
            corpus.pages.push_back(std::move(page));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return corpus;
}

void HyperCorpus::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    for (const auto& page : pages) {
        ojson j;
        j["page_entity"] = page.page_entity;
        j["tokens"] = page.tokens;
        j["anchors"] = ojson::array();
        for (const auto& a : page.anchors) {
            ojson ja;
            ja["start"] = a.start;
            ja["end"] = a.end;
            ja["entity"] = a.entity;
            j["anchors"].push_back(std::move(ja));
        }
        out << j.dump() << "\n";
    }
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0, na = 0, nb = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0 || nb == 0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

namespace {

double stable_sigmoid(double x) {
    return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// One skip-gram training pair: input row `center` of `in`, target row of `out`.
struct SgnsPair {
    int center = 0;
    int target = 0;
    bool link_task = false;  // page-entity -> anchored-entity
};

struct Table {
    int rows = 0;
    int dim = 0;
    std::vector<double> data;

    double* row(int r) { return &data[static_cast<size_t>(r) * dim]; }
    const double* row(int r) const { return &data[static_cast<size_t>(r) * dim]; }
};

Table make_table(int rows, int dim, Rng& rng) {
    Table t{rows, dim, std::vector<double>(static_cast<size_t>(rows) * dim)};
    double bound = 0.5 / dim;
    for (auto& x : t.data) x = rng.uniform(-bound, bound);
    return t;
}

double sgns_pair_loss(const Table& in, const Table& out, const SgnsPair& p, int negatives, Rng& neg_rng) {
    const double* v = in.row(p.center);
    auto dot = [&](const double* o) {
        double s = 0;
        for (int i = 0; i < in.dim; ++i) s += v[i] * o[i];
        return s;
    };
    double loss = -std::log(std::max(stable_sigmoid(dot(out.row(p.target))), 1e-12));
    for (int k = 0; k < negatives; ++k) {
        int neg = neg_rng.next_int(out.rows);
        loss += -std::log(std::max(stable_sigmoid(-dot(out.row(neg))), 1e-12));
    }
    return loss;
}

void sgns_update(Table& in, Table& out, const SgnsPair& p, int negatives, double lr, Rng& neg_rng) {
    const int d = in.dim;
    double* v = in.row(p.center);
    std::vector<double> v_delta(static_cast<size_t>(d), 0.0);
    auto push = [&](int target_row, double label) {
        double* o = out.row(target_row);
        double s = 0;
        for (int i = 0; i < d; ++i) s += v[i] * o[i];
        double g = stable_sigmoid(s) - label;
        for (int i = 0; i < d; ++i) {
            v_delta[static_cast<size_t>(i)] += g * o[i];
            o[i] -= lr * g * v[i];
        }
    };
    push(p.target, 1.0);
    for (int k = 0; k < negatives; ++k) push(neg_rng.next_int(out.rows), 0.0);
    for (int i = 0; i < d; ++i) v[i] -= lr * v_delta[static_cast<size_t>(i)];
}

}  // namespace

KbTextResult train_kb_text(const HyperCorpus& corpus, const KbTextConfig& cfg, uint64_t seed) {
    if (cfg.dim <= 0 || cfg.window <= 0 || cfg.negatives <= 0 || cfg.epochs < 0 || cfg.lr <= 0) {
        throw ConfigError("train_kb_text: dim, window, negatives and lr must be positive");
    }

    std::set<std::string> word_set, entity_set;
    for (const auto& page : corpus.pages) {
        entity_set.insert(page.page_entity);
        for (const auto& tok : page.tokens) word_set.insert(tok);
        for (const auto& a : page.anchors) entity_set.insert(a.entity);
    }
    if (corpus.pages.empty() || entity_set.empty()) throw ConfigError("train_kb_text: empty hypercorpus");

    std::vector<std::string> words(word_set.begin(), word_set.end());
    std::vector<std::string> entities(entity_set.begin(), entity_set.end());
    std::map<std::string, int> word_index, entity_index;
    for (size_t i = 0; i < words.size(); ++i) word_index[words[i]] = static_cast<int>(i);
    for (size_t i = 0; i < entities.size(); ++i) entity_index[entities[i]] = static_cast<int>(i);

    // pairs with word targets and pairs with entity targets train against
    // separate output tables
    std::vector<SgnsPair> word_pairs, link_pairs;
    for (const auto& page : corpus.pages) {
        const int n = static_cast<int>(page.tokens.size());
        for (const auto& a : page.anchors) {
            link_pairs.push_back({entity_index[page.page_entity], entity_index[a.entity], true});
            int lo = std::max(0, a.start - cfg.window);
            int hi = std::min(n - 1, a.end + cfg.window);
            for (int pos = lo; pos <= hi; ++pos) {
                if (pos >= a.start && pos <= a.end) continue;  // anchor's own tokens
                word_pairs.push_back({entity_index[a.entity], word_index[page.tokens[static_cast<size_t>(pos)]], false});
            }
        }
    }
    if (word_pairs.empty() && link_pairs.empty()) throw ConfigError("train_kb_text: hypercorpus has no anchors");

    Rng master(seed);
    Rng init_rng = master.substream("kbtext/init");
    Table ent_in = make_table(static_cast<int>(entities.size()), cfg.dim, init_rng);
    Table word_out = make_table(std::max<int>(1, static_cast<int>(words.size())), cfg.dim, init_rng);
    Table ent_out = make_table(static_cast<int>(entities.size()), cfg.dim, init_rng);

    auto eval_loss = [&]() {
        Rng eval_rng = master.substream("kbtext/eval-negatives");
        double total = 0;
        for (const auto& p : word_pairs) total += sgns_pair_loss(ent_in, word_out, p, cfg.negatives, eval_rng);
        for (const auto& p : link_pairs) total += sgns_pair_loss(ent_in, ent_out, p, cfg.negatives, eval_rng);
        return total / static_cast<double>(word_pairs.size() + link_pairs.size());
    };

    KbTextResult result;
    result.epoch_loss.push_back(eval_loss());
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng neg_rng = master.substream("kbtext/negatives", static_cast<uint64_t>(epoch));
        size_t wi = 0, li = 0;
        // interleave the two pair sources proportionally so neither task
        // dominates the tail of an epoch
        while (wi < word_pairs.size() || li < link_pairs.size()) {
            bool take_word;
            if (li >= link_pairs.size()) take_word = true;
            else if (wi >= word_pairs.size()) take_word = false;
            else take_word = wi * link_pairs.size() <= li * word_pairs.size();
            if (take_word) {
                sgns_update(ent_in, word_out, word_pairs[wi++], cfg.negatives, cfg.lr, neg_rng);
            } else {
                sgns_update(ent_in, ent_out, link_pairs[li++], cfg.negatives, cfg.lr * cfg.link_task_weight, neg_rng);
            }
        }
        result.epoch_loss.push_back(eval_loss());
    }

    result.store = EntityEmbeddingStore(KbSource::KbText, cfg.dim);
    for (size_t i = 0; i < entities.size(); ++i) {
        const double* r = ent_in.row(static_cast<int>(i));
        result.store.insert(entities[i], std::vector<double>(r, r + cfg.dim));
    }
    for (size_t i = 0; i < words.size(); ++i) {
        const double* r = word_out.row(static_cast<int>(i));
        result.word_vectors[words[i]] = std::vector<double>(r, r + cfg.dim);
    }
    return result;
}

namespace {

Tape::NodeId triple_ce_loss(Tape& tape, Parameter& ent, Parameter& rel, Parameter& out,
                            int s_idx, int r_idx, int o_idx) {
    auto vs = tape.embedding_lookup(tape.leaf(ent), {s_idx});
    auto vr = tape.embedding_lookup(tape.leaf(rel), {r_idx});
    auto logits = tape.matmul(tape.add(vs, vr), tape.leaf(out));
    auto probs = tape.softmax(logits, 1);
    auto picked = tape.slice(probs, 1, o_idx, o_idx + 1);
    return tape.scalar_scale(tape.log(picked), -1.0);
}

}  // namespace

Tape::NodeId kb_graph_loss(Tape& tape, const TripleSet& triples, Parameter& ent, Parameter& rel,
                           Parameter& out) {
    std::map<std::string, int> e_idx, r_idx;
    for (size_t i = 0; i < triples.entities().size(); ++i) e_idx[triples.entities()[i]] = static_cast<int>(i);
    for (size_t i = 0; i < triples.relations().size(); ++i) r_idx[triples.relations()[i]] = static_cast<int>(i);
    Tape::NodeId total = tape.constant(Tensor::scalar(0.0));
    for (const auto& t : triples.triples()) {
        total = tape.add(total, triple_ce_loss(tape, ent, rel, out, e_idx[t.subj], r_idx[t.rel], e_idx[t.obj]));
    }
    return tape.scalar_scale(total, 1.0 / static_cast<double>(triples.triples().size()));
}

KbGraphResult train_kb_graph(const TripleSet& triples, const KbGraphConfig& cfg, uint64_t seed) {
    if (triples.triples().empty()) throw ConfigError("train_kb_graph: empty triple set");
    if (cfg.dim <= 0 || cfg.epochs < 0 || cfg.lr <= 0) {
        throw ConfigError("train_kb_graph: dim and lr must be positive");
    }

    const auto& entities = triples.entities();
    const auto& relations = triples.relations();
    std::map<std::string, int> e_idx, r_idx;
    for (size_t i = 0; i < entities.size(); ++i) e_idx[entities[i]] = static_cast<int>(i);
    for (size_t i = 0; i < relations.size(); ++i) r_idx[relations[i]] = static_cast<int>(i);

    Rng master(seed);
    Rng init_rng = master.substream("kbgraph/init");
    double bound = 0.5 / cfg.dim;
    Parameter ent("entity_in", Tensor::uniform({static_cast<int>(entities.size()), cfg.dim}, -bound, bound, init_rng));
    Parameter rel("relation_in", Tensor::uniform({static_cast<int>(relations.size()), cfg.dim}, -bound, bound, init_rng));
    Parameter out("output_weights", Tensor::uniform({cfg.dim, static_cast<int>(entities.size())}, -bound, bound, init_rng));

    auto eval_loss = [&]() {
        Tape tape;
        return tape.value(kb_graph_loss(tape, triples, ent, rel, out)).values[0];
    };

    KbGraphResult result;
    result.epoch_loss.push_back(eval_loss());
    std::vector<Parameter*> params{&ent, &rel, &out};
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (const auto& t : triples.triples()) {
            for (Parameter* p : params) p->zero_grad();
            Tape tape;
            auto loss = triple_ce_loss(tape, ent, rel, out, e_idx[t.subj], r_idx[t.rel], e_idx[t.obj]);
            tape.backward(loss);
            for (Parameter* p : params) {
                for (size_t i = 0; i < p->value.values.size(); ++i) {
                    p->value.values[i] -= cfg.lr * p->grad.values[i];
                }
            }
        }
        result.epoch_loss.push_back(eval_loss());
    }

    result.store = EntityEmbeddingStore(KbSource::KbGraph, cfg.dim);
    for (size_t i = 0; i < entities.size(); ++i) {
        auto row = ent.value.values.begin() + static_cast<long>(i) * cfg.dim;
        result.store.insert(entities[i], std::vector<double>(row, row + cfg.dim));
    }
    for (size_t i = 0; i < relations.size(); ++i) {
        auto row = rel.value.values.begin() + static_cast<long>(i) * cfg.dim;
        result.relation_vectors[relations[i]] = std::vector<double>(row, row + cfg.dim);
    }
    result.entity_vocab = entities;
    result.output_weights = out.value.values;
    return result;
}

std::string KbGraphResult::predict_object(const std::string& subj, const std::string& rel) const {
    const std::vector<double>* vs = store.find(subj);
    auto it = relation_vectors.find(rel);
    if (!vs || it == relation_vectors.end()) {
        throw ValidationError("predict_object: unknown subject or relation");
    }
    const int d = store.dim();
    const int n = static_cast<int>(entity_vocab.size());
    std::vector<double> h(static_cast<size_t>(d));
    for (int i = 0; i < d; ++i) h[static_cast<size_t>(i)] = (*vs)[static_cast<size_t>(i)] + it->second[static_cast<size_t>(i)];
    int best = 0;
    double best_score = -1e300;
    for (int o = 0; o < n; ++o) {
        double s = 0;
        for (int i = 0; i < d; ++i) s += h[static_cast<size_t>(i)] * output_weights[static_cast<size_t>(i) * n + o];
        if (s > best_score) {
            best_score = s;
            best = o;
        }
    }
    return entity_vocab[static_cast<size_t>(best)];
}

}  // namespace kbie
