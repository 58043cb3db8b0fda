#include "kbie/synthetic.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "json.hpp"
#include "kbie/errors.hpp"
#include "kbie/rng.hpp"

namespace kbie {

using ojson = nlohmann::ordered_json;

namespace {

// Type-neutral sentence templates; "@" marks the mention slot.
const std::vector<std::vector<std::string>> kTemplates = {
    {"the", "report", "about", "@", "was", "filed", "today"},
    {"officials", "confirmed", "the", "statement", "from", "@", "yesterday"},
    {"sources", "again", "cited", "@", "in", "the", "briefing"},
    {"a", "new", "note", "on", "@", "was", "released"},
    {"the", "panel", "discussed", "@", "at", "length"},
    {"records", "involving", "@", "were", "reviewed"},
    {"the", "update", "mentioned", "@", "twice", "overall"},
    {"analysts", "tracked", "@", "over", "the", "week"},
};

struct EntityView {
    const GenEntity* gen = nullptr;
    int index = 0;
};

struct Pools {
    // type -> entities usable in train/dev docs resp. test docs
    std::map<std::string, std::vector<const GenEntity*>> train;
    std::map<std::string, std::vector<const GenEntity*>> test;
};

void validate_config(const GeneratorConfig& cfg) {
    std::set<std::string> types(cfg.entity_types.begin(), cfg.entity_types.end());
    if (types.size() != cfg.entity_types.size()) throw ConfigError("generator: duplicate entity type");
    std::set<std::string> rel_types(cfg.relation_types.begin(), cfg.relation_types.end());
    if (rel_types.size() != cfg.relation_types.size()) throw ConfigError("generator: duplicate relation type");

    std::set<std::string> ids;
    std::map<std::string, std::string> surface_owner;
    std::map<std::string, const GenAmbiguousSurface*> ambiguous_by_surface;
    for (const auto& a : cfg.ambiguous) ambiguous_by_surface[a.surface] = &a;

    for (const auto& e : cfg.entities) {
        if (!ids.insert(e.id).second) throw ConfigError("generator: duplicate entity id '" + e.id + "'");
        if (!types.count(e.type)) throw ConfigError("generator: entity '" + e.id + "' has unknown type '" + e.type + "'");
        if (e.split != "train" && e.split != "eval" && e.split != "both" && e.split != "kb") {
            throw ConfigError("generator: entity '" + e.id + "' has unknown split '" + e.split + "'");
        }
        if (e.surface.empty() || e.surface.find(' ') != std::string::npos) {
            throw ConfigError("generator: entity '" + e.id + "' needs a single-token surface");
        }
        auto [it, inserted] = surface_owner.emplace(e.surface, e.id);
        if (!inserted && !ambiguous_by_surface.count(e.surface)) {
            throw ConfigError("generator: surface '" + e.surface + "' shared by '" + it->second + "' and '" +
                              e.id + "' but not declared ambiguous");
        }
    }
    for (const auto& r : cfg.relations) {
        if (!ids.count(r.head) || !ids.count(r.tail)) {
            throw ConfigError("generator: relation references unknown entity '" + r.head + "'/'" + r.tail + "'");
        }
        if (!rel_types.count(r.type)) throw ConfigError("generator: unknown relation type '" + r.type + "'");
        if (r.head == r.tail) throw ConfigError("generator: self-relation on '" + r.head + "'");
    }
    for (const auto& a : cfg.ambiguous) {
        if (!ids.count(a.gold) || !ids.count(a.decoy)) {
            throw ConfigError("generator: ambiguous surface '" + a.surface + "' references unknown entities");
        }
        if (a.decoy_anchor_boost < 1) throw ConfigError("generator: decoy_anchor_boost must be >= 1");
    }
    if (cfg.sentences_per_doc < 1) throw ConfigError("generator: sentences_per_doc must be >= 1");
    if (cfg.train_docs < 0 || cfg.dev_docs < 0 || cfg.test_docs < 0) {
        throw ConfigError("generator: negative document count");
    }
    if (cfg.kb_separable) {
        int t = static_cast<int>(cfg.entity_types.size());
        if (t < 2) throw ConfigError("generator: kb_separable needs at least two entity types");
        for (int docs : {cfg.train_docs, cfg.dev_docs, cfg.test_docs}) {
            if (docs % t != 0) {
                throw ConfigError("generator: kb_separable document counts must be multiples of the type count");
            }
        }
    }
}

Pools build_pools(const GeneratorConfig& cfg) {
    Pools pools;
    for (const auto& e : cfg.entities) {
        if (e.split == "train" || e.split == "both") pools.train[e.type].push_back(&e);
        if (e.split == "eval" || e.split == "both") pools.test[e.type].push_back(&e);
    }
    return pools;
}

const GenEntity* pick(const std::vector<const GenEntity*>& pool, Rng& rng, const GenEntity* avoid) {
    if (pool.empty()) throw ConfigError("generator: empty entity pool for a requested document");
    if (pool.size() == 1) return pool[0];
    for (;;) {
        const GenEntity* e = pool[static_cast<size_t>(rng.next_int(static_cast<int>(pool.size())))];
        if (e != avoid) return e;
    }
}

// Shared sentence/slot structure for one document group.
struct DocPlan {
    std::vector<int> template_ids;    // one per sentence
    std::vector<int> main_sentences;  // sentences carrying the main entity
    std::vector<int> side_sentences;  // one distinct secondary entity each
};

DocPlan make_plan(const GeneratorConfig& cfg, Rng& rng) {
    DocPlan plan;
    const int k = cfg.sentences_per_doc;
    for (int s = 0; s < k; ++s) plan.template_ids.push_back(rng.next_int(static_cast<int>(kTemplates.size())));
    if (k == 1) {
        plan.main_sentences = {0};
        return plan;
    }
    // main entity appears twice so every document carries a coreference link
    int second = 1 + rng.next_int(k - 1);
    plan.main_sentences = {0, second};
    for (int s = 1; s < k; ++s) {
        if (s != second) plan.side_sentences.push_back(s);
    }
    return plan;
}

Document realize_doc(const std::string& id, const DocPlan& plan, const GenEntity* main,
                     const std::vector<const GenEntity*>& sides,
                     const std::map<std::string, std::map<std::string, std::set<std::string>>>& fact_index) {
    Document doc;
    doc.id = id;

    struct Slot {
        const GenEntity* entity;
        int token = -1;
    };
    std::vector<Slot> slots;
    size_t side_i = 0;
    for (size_t s = 0; s < plan.template_ids.size(); ++s) {
        const auto& tpl = kTemplates[static_cast<size_t>(plan.template_ids[s])];
        bool is_main = std::find(plan.main_sentences.begin(), plan.main_sentences.end(), static_cast<int>(s)) !=
                       plan.main_sentences.end();
        const GenEntity* filler = is_main ? main : sides[side_i++];
        for (const auto& tok : tpl) {
            if (tok == "@") {
                slots.push_back({filler, static_cast<int>(doc.tokens.size())});
                doc.tokens.push_back(filler->surface);
            } else {
                doc.tokens.push_back(tok);
            }
        }
    }

    std::map<std::string, std::string> cluster_of;  // entity id -> cluster id
    for (const auto& slot : slots) {
        auto [it, inserted] = cluster_of.emplace(slot.entity->id, "c_" + slot.entity->id);
        if (inserted) {
            doc.clusters.push_back({it->second, {slot.entity->type}, {}});
        }
        doc.mentions.push_back({slot.token, slot.token, it->second, slot.entity->id});
    }

    // gold relations for co-mentioned KB facts
    std::set<std::string> present;
    for (const auto& [eid, cid] : cluster_of) present.insert(eid);
    for (const auto& [head, by_tail] : fact_index) {
        if (!present.count(head)) continue;
        for (const auto& [tail, rel_types] : by_tail) {
            if (!present.count(tail) || head == tail) continue;
            GoldRelation r;
            r.head_cluster = cluster_of[head];
            r.tail_cluster = cluster_of[tail];
            r.types.assign(rel_types.begin(), rel_types.end());
            doc.relations.push_back(std::move(r));
        }
    }
    validate_document(doc);
    return doc;
}

Corpus generate_split(const GeneratorConfig& cfg, const std::string& split_name, int count,
                      const std::map<std::string, std::vector<const GenEntity*>>& pools,
                      const std::map<std::string, std::map<std::string, std::set<std::string>>>& fact_index,
                      const LabelVocab& vocab, Rng rng) {
    Corpus corpus;
    corpus.vocab = vocab;
    if (count == 0) return corpus;

    const int type_count = static_cast<int>(cfg.entity_types.size());
    int made = 0;
    while (made < count) {
        DocPlan plan = make_plan(cfg, rng);
        if (cfg.kb_separable) {
            // one document per type with identical structure, so per-type
            // context histograms match exactly
            for (int t = 0; t < type_count && made < count; ++t) {
                const std::string& main_type = cfg.entity_types[static_cast<size_t>(t)];
                const std::string& side_type = cfg.entity_types[static_cast<size_t>((t + 1) % type_count)];
                const GenEntity* main = pick(pools.at(main_type), rng, nullptr);
                std::vector<const GenEntity*> sides;
                for (size_t s = 0; s < plan.side_sentences.size(); ++s) {
                    // prefer the fact partner half the time so relations occur
                    const GenEntity* side = nullptr;
                    if (rng.next_double() < 0.5) {
                        auto it = fact_index.find(main->id);
                        if (it != fact_index.end()) {
                            for (const auto& [tail, types] : it->second) {
                                for (const GenEntity* cand : pools.at(side_type)) {
                                    if (cand->id == tail) {
                                        side = cand;
                                        break;
                                    }
                                }
                                if (side) break;
                            }
                        }
                    }
                    if (!side) side = pick(pools.at(side_type), rng, main);
                    sides.push_back(side);
                }
                corpus.docs.push_back(realize_doc(split_name + "-" + std::to_string(made), plan, main,
                                                  sides, fact_index));
                ++made;
            }
        } else {
            std::vector<const GenEntity*> all;
            for (const auto& [type, pool] : pools) all.insert(all.end(), pool.begin(), pool.end());
            std::map<std::string, const GenEntity*> by_id;
            for (const GenEntity* e : all) by_id[e->id] = e;
            const GenEntity* main = pick(all, rng, nullptr);
            std::vector<const GenEntity*> sides;
            for (size_t s = 0; s < plan.side_sentences.size(); ++s) {
                const GenEntity* side = nullptr;
                if (rng.next_double() < 0.5) {
                    // prefer a fact partner so gold relations occur
                    auto it = fact_index.find(main->id);
                    if (it != fact_index.end()) {
                        for (const auto& [tail, types] : it->second) {
                            auto cand = by_id.find(tail);
                            if (cand != by_id.end()) {
                                side = cand->second;
                                break;
                            }
                        }
                    }
                }
                if (!side) side = pick(all, rng, main);
                sides.push_back(side);
            }
            corpus.docs.push_back(realize_doc(split_name + "-" + std::to_string(made), plan, main, sides,
                                              fact_index));
            ++made;
        }
    }
    return corpus;
}

}  // namespace

SyntheticData generate_synthetic(const GeneratorConfig& cfg, uint64_t seed) {
    validate_config(cfg);
    Rng master(seed);

    LabelVocab vocab;
    vocab.entity_types = cfg.entity_types;
    vocab.relation_types = cfg.relation_types;
    std::sort(vocab.entity_types.begin(), vocab.entity_types.end());
    std::sort(vocab.relation_types.begin(), vocab.relation_types.end());

    std::map<std::string, std::map<std::string, std::set<std::string>>> fact_index;
    for (const auto& r : cfg.relations) fact_index[r.head][r.tail].insert(r.type);

    Pools pools = build_pools(cfg);

    SyntheticData data;
    data.train = generate_split(cfg, "train", cfg.train_docs, pools.train, fact_index, vocab,
                                master.substream("gen/train"));
    data.dev = generate_split(cfg, "dev", cfg.dev_docs, pools.train, fact_index, vocab,
                              master.substream("gen/dev"));
    data.test = generate_split(cfg, "test", cfg.test_docs, pools.test, fact_index, vocab,
                               master.substream("gen/test"));

    // hypercorpus: one page per entity; type cue words surround self-anchors,
    // then anchors to fact partners
    std::map<std::string, const GenAmbiguousSurface*> ambiguous_by_entity;
    for (const auto& a : cfg.ambiguous) {
        ambiguous_by_entity[a.gold] = &a;
        ambiguous_by_entity[a.decoy] = &a;
    }
    std::map<std::string, const GenEntity*> by_id;
    for (const auto& e : cfg.entities) by_id[e.id] = &e;

    for (const auto& e : cfg.entities) {
        HyperPage page;
        page.page_entity = e.id;
        int repeats = cfg.anchor_repeats;
        if (auto it = ambiguous_by_entity.find(e.id); it != ambiguous_by_entity.end() && it->second->decoy == e.id) {
            repeats *= it->second->decoy_anchor_boost;
        }
        for (int r = 0; r < repeats; ++r) {
            for (int c = 0; c < cfg.type_cue_repeats; ++c) {
                page.tokens.push_back("cue_" + e.type + "_" + std::to_string(c));
            }
            int pos = static_cast<int>(page.tokens.size());
            page.tokens.push_back(e.surface);
            page.anchors.push_back({pos, pos, e.id});
            // a page-specific word keeps same-type entities apart in the
            // skip-gram space while the cue words pull them together
            page.tokens.push_back("about_" + e.id);
        }
        if (auto it = fact_index.find(e.id); it != fact_index.end()) {
            for (const auto& [tail, types] : it->second) {
                page.tokens.push_back("see");
                int pos = static_cast<int>(page.tokens.size());
                page.tokens.push_back(by_id.at(tail)->surface);
                page.anchors.push_back({pos, pos, tail});
            }
        }
        data.hypercorpus.pages.push_back(std::move(page));
    }

    // triples: typing facts plus the declared relations
    std::vector<Triple> triples;
    for (const auto& e : cfg.entities) triples.push_back({e.id, "isa", "type:" + e.type});
    for (const auto& r : cfg.relations) triples.push_back({r.head, r.type, r.tail});
    data.triples = TripleSet::from_triples(std::move(triples));

    data.dictionary = CandidateDictionary::build(data.hypercorpus.anchor_stream());
    return data;
}

GeneratorConfig GeneratorConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open generator config " + path);
    ojson j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    GeneratorConfig cfg;
    try {
        cfg.entity_types = j.at("entity_types").get<std::vector<std::string>>();
        cfg.relation_types = j.value("relation_types", std::vector<std::string>());
        for (const auto& je : j.at("entities")) {
            GenEntity e;
            e.id = je.at("id").get<std::string>();
            e.type = je.at("type").get<std::string>();
            e.surface = je.at("surface").get<std::string>();
            e.split = je.value("split", std::string("both"));
            cfg.entities.push_back(std::move(e));
        }
        for (const auto& jr : j.value("relations", ojson::array())) {
            cfg.relations.push_back({jr.at("head").get<std::string>(), jr.at("tail").get<std::string>(),
                                     jr.at("type").get<std::string>()});
        }
        for (const auto& ja : j.value("ambiguous", ojson::array())) {
            GenAmbiguousSurface a;
            a.surface = ja.at("surface").get<std::string>();
            a.gold = ja.at("gold").get<std::string>();
            a.decoy = ja.at("decoy").get<std::string>();
            a.decoy_anchor_boost = ja.value("decoy_anchor_boost", 4);
            cfg.ambiguous.push_back(std::move(a));
        }
        cfg.train_docs = j.value("train_docs", 0);
        cfg.dev_docs = j.value("dev_docs", 0);
        cfg.test_docs = j.value("test_docs", 0);
        cfg.sentences_per_doc = j.value("sentences_per_doc", 3);
        cfg.kb_separable = j.value("kb_separable", false);
        cfg.anchor_repeats = j.value("anchor_repeats", 3);
        cfg.type_cue_repeats = j.value("type_cue_repeats", 2);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    return cfg;
}

GeneratorConfig memorizable_config(int train_docs) {
    GeneratorConfig cfg;
    cfg.entity_types = {"org", "person", "place"};
    cfg.relation_types = {"works_for", "based_in"};
    auto add = [&](const std::string& id, const std::string& type, const std::string& surface) {
        cfg.entities.push_back({id, type, surface, "both"});
    };
    add("E_acme", "org", "acme");
    add("E_globex", "org", "globex");
    add("E_initech", "org", "initech");
    add("E_smith", "person", "smith");
    add("E_jones", "person", "jones");
    add("E_doe", "person", "doe");
    add("E_parona", "place", "parona");
    add("E_velden", "place", "velden");
    cfg.relations = {
        {"E_smith", "E_acme", "works_for"},
        {"E_jones", "E_globex", "works_for"},
        {"E_doe", "E_initech", "works_for"},
        {"E_acme", "E_parona", "based_in"},
        {"E_globex", "E_velden", "based_in"},
    };
    cfg.train_docs = train_docs;
    cfg.dev_docs = 4;
    cfg.test_docs = 4;
    cfg.sentences_per_doc = 3;
    cfg.kb_separable = false;
    return cfg;
}

namespace {

// surfaces with no systematic character-level type signal: syllable strings
// assigned to entities from a fixed shuffled list
std::vector<std::string> shuffled_surfaces(size_t count) {
    const std::vector<std::string> onsets = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"};
    const std::vector<std::string> nuclei = {"a", "e", "i", "o", "u"};
    std::vector<std::string> all;
    for (const auto& o1 : onsets) {
        for (const auto& n1 : nuclei) {
            for (const auto& o2 : onsets) {
                all.push_back(o1 + n1 + o2 + "ix");
            }
        }
    }
    Rng rng(0x5eedf00dULL);  // fixed: surfaces are part of the config, not the seed
    for (size_t i = all.size() - 1; i > 0; --i) {
        size_t k = static_cast<size_t>(rng.next_int(static_cast<int>(i + 1)));
        std::swap(all[i], all[k]);
    }
    all.resize(count);
    return all;
}

}  // namespace

GeneratorConfig kb_separable_config() {
    GeneratorConfig cfg;
    cfg.entity_types = {"alpha", "beta"};
    cfg.relation_types = {"linked_to"};
    const int train_pool = 10, eval_pool = 6;
    auto surfaces = shuffled_surfaces(2 * (train_pool + eval_pool));
    size_t s = 0;
    for (int i = 0; i < train_pool + eval_pool; ++i) {
        std::string split = i < train_pool ? "train" : "eval";
        cfg.entities.push_back({"A" + std::to_string(i), "alpha", surfaces[s++], split});
        cfg.entities.push_back({"B" + std::to_string(i), "beta", surfaces[s++], split});
    }
    // facts in both directions so every entity is the subject of an
    // entity-specific triple in the graph store
    for (int i = 0; i < train_pool + eval_pool; ++i) {
        cfg.relations.push_back({"A" + std::to_string(i), "B" + std::to_string(i), "linked_to"});
        cfg.relations.push_back({"B" + std::to_string(i), "A" + std::to_string(i), "linked_to"});
    }
    cfg.train_docs = 40;
    cfg.dev_docs = 8;
    cfg.test_docs = 16;
    cfg.sentences_per_doc = 3;
    cfg.kb_separable = true;
    return cfg;
}

GeneratorConfig el_misleading_config() {
    GeneratorConfig cfg = kb_separable_config();
    auto surfaces = shuffled_surfaces(200);  // take fresh ones from the tail
    for (int m = 0; m < 3; ++m) {
        std::string surface = surfaces[static_cast<size_t>(180 + m)];
        std::string gold = "MG" + std::to_string(m);
        std::string decoy = "MD" + std::to_string(m);
        cfg.entities.push_back({gold, "alpha", surface, "both"});
        cfg.entities.push_back({decoy, "beta", surface, "kb"});
        cfg.ambiguous.push_back({surface, gold, decoy, 4});
    }
    return cfg;
}

}  // namespace kbie
