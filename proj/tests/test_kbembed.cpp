#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>

#include "kbie/errors.hpp"
#include "kbie/gradcheck.hpp"
#include "kbie/kbembed.hpp"
#include "kbie/rng.hpp"

using namespace kbie;
namespace fs = std::filesystem;

namespace {

// two entities with identical context-word distributions, one disjoint
HyperCorpus shared_context_corpus() {
    HyperCorpus corpus;
    auto page = [&](const std::string& entity, const std::vector<std::string>& cue) {
        HyperPage p;
        p.page_entity = entity;
        for (int r = 0; r < 8; ++r) {
            for (const auto& w : cue) p.tokens.push_back(w);
            int pos = static_cast<int>(p.tokens.size());
            p.tokens.push_back("surf_" + entity);
            p.anchors.push_back({pos, pos, entity});
        }
        return p;
    };
    corpus.pages.push_back(page("E1", {"glow", "shine"}));
    corpus.pages.push_back(page("E2", {"glow", "shine"}));
    corpus.pages.push_back(page("E3", {"rumble", "thud"}));
    return corpus;
}

TripleSet memorizable_triples() {
    return TripleSet::from_triples({
        {"a", "r", "b"},
        {"b", "r", "c"},
        {"c", "r", "a"},
    });
}

}  // namespace

TEST_CASE("triple sets reject duplicates and sort vocabularies") {
    CHECK_THROWS_AS(TripleSet::from_triples({{"a", "r", "b"}, {"a", "r", "b"}}), ValidationError);
    auto ts = memorizable_triples();
    CHECK(ts.entities() == std::vector<std::string>{"a", "b", "c"});
    CHECK(ts.relations() == std::vector<std::string>{"r"});
}

TEST_CASE("triples round-trip through tsv") {
    auto ts = memorizable_triples();
    auto p = fs::temp_directory_path() / "kbie_triples.tsv";
    ts.save_tsv(p.string());
    auto again = TripleSet::load_tsv(p.string());
    CHECK(again.triples() == ts.triples());
    fs::remove(p);
}

TEST_CASE("malformed triple lines are parse errors") {
    auto p = fs::temp_directory_path() / "kbie_triples_bad.tsv";
    {
        std::ofstream out(p);
        out << "a\trel\n";
    }
    CHECK_THROWS_AS(TripleSet::load_tsv(p.string()), ParseError);
    fs::remove(p);
}

TEST_CASE("kb-text: shared contexts move entities together") {
    KbTextConfig cfg;
    cfg.dim = 12;
    cfg.window = 2;
    cfg.negatives = 3;
    cfg.epochs = 10;
    cfg.lr = 0.08;
    auto result = train_kb_text(shared_context_corpus(), cfg, 3);
    const auto& e1 = *result.store.find("E1");
    const auto& e2 = *result.store.find("E2");
    const auto& e3 = *result.store.find("E3");
    CHECK(cosine(e1, e2) > cosine(e1, e3));
}

TEST_CASE("kb-text: zero epochs returns the initialization") {
    KbTextConfig cfg;
    cfg.epochs = 0;
    auto a = train_kb_text(shared_context_corpus(), cfg, 5);
    cfg.epochs = 3;
    auto b = train_kb_text(shared_context_corpus(), cfg, 5);
    CHECK(a.store.size() == b.store.size());
    CHECK(!(*a.store.find("E1") == *b.store.find("E1")));  // training moved it
    auto a2 = train_kb_text(shared_context_corpus(), KbTextConfig{.epochs = 0}, 5);
    CHECK(*a.store.find("E1") == *a2.store.find("E1"));  // init is seed-determined
}

TEST_CASE("kb-text: same seed gives identical stores, different seeds differ") {
    KbTextConfig cfg;
    cfg.epochs = 4;
    auto a = train_kb_text(shared_context_corpus(), cfg, 9);
    auto b = train_kb_text(shared_context_corpus(), cfg, 9);
    CHECK(a.store == b.store);
    auto c = train_kb_text(shared_context_corpus(), cfg, 10);
    CHECK(!(a.store == c.store));
}

TEST_CASE("kb-text: empty corpus is a config error") {
    CHECK_THROWS_AS(train_kb_text(HyperCorpus{}, KbTextConfig{}, 1), ConfigError);
    HyperCorpus no_anchors;
    no_anchors.pages.push_back({"E", {"just", "words"}, {}});
    CHECK_THROWS_AS(train_kb_text(no_anchors, KbTextConfig{}, 1), ConfigError);
}

TEST_CASE("kb-text: training loss decreases over the first epoch") {
    KbTextConfig cfg;
    cfg.epochs = 1;
    auto result = train_kb_text(shared_context_corpus(), cfg, 21);
    REQUIRE(result.epoch_loss.size() == 2);
    CHECK(result.epoch_loss[1] < result.epoch_loss[0]);
}

TEST_CASE("kb-graph: memorizable set is reproduced exactly after training") {
    KbGraphConfig cfg;
    cfg.dim = 8;
    cfg.epochs = 200;
    cfg.lr = 0.3;
    auto triples = memorizable_triples();
    auto result = train_kb_graph(triples, cfg, 7);
    for (const auto& t : triples.triples()) {
        CHECK(result.predict_object(t.subj, t.rel) == t.obj);
    }
}

TEST_CASE("kb-graph: zero epochs leaves the initialization unchanged") {
    KbGraphConfig cfg;
    cfg.epochs = 0;
    auto a = train_kb_graph(memorizable_triples(), cfg, 2);
    auto b = train_kb_graph(memorizable_triples(), cfg, 2);
    CHECK(a.store == b.store);
    CHECK(a.epoch_loss.size() == 1);
}

TEST_CASE("kb-graph: empty triples are a config error") {
    CHECK_THROWS_AS(train_kb_graph(TripleSet::from_triples({}), KbGraphConfig{}, 1), ConfigError);
}

TEST_CASE("kb-graph: loss decreases over the first epoch") {
    KbGraphConfig cfg;
    cfg.epochs = 1;
    cfg.lr = 0.2;
    auto result = train_kb_graph(memorizable_triples(), cfg, 17);
    REQUIRE(result.epoch_loss.size() == 2);
    CHECK(result.epoch_loss[1] < result.epoch_loss[0]);
}

TEST_CASE("kb-graph: determinism across runs") {
    KbGraphConfig cfg;
    cfg.epochs = 12;
    auto a = train_kb_graph(memorizable_triples(), cfg, 4);
    auto b = train_kb_graph(memorizable_triples(), cfg, 4);
    CHECK(a.store == b.store);
    CHECK(a.output_weights == b.output_weights);
}

TEST_CASE("kb-graph loss gradients pass the checker on a 5-entity instance") {
    auto triples = TripleSet::from_triples({
        {"e0", "r0", "e1"},
        {"e1", "r0", "e2"},
        {"e2", "r1", "e3"},
        {"e3", "r1", "e4"},
        {"e4", "r0", "e0"},
    });
    const int dim = 4;
    Rng rng(33);
    Parameter ent("ent", Tensor::uniform({5, dim}, -0.3, 0.3, rng));
    Parameter rel("rel", Tensor::uniform({2, dim}, -0.3, 0.3, rng));
    Parameter out("out", Tensor::uniform({dim, 5}, -0.3, 0.3, rng));
    auto report = gradient_check(
        [&](Tape& tape) { return kb_graph_loss(tape, triples, ent, rel, out); }, {&ent, &rel, &out}, 1e-4);
    CHECK(report.pass());
}

TEST_CASE("trained stores satisfy the embedding-store invariants") {
    KbGraphConfig cfg;
    cfg.epochs = 5;
    auto g = train_kb_graph(memorizable_triples(), cfg, 1);
    CHECK(g.store.source() == KbSource::KbGraph);
    for (const auto& [id, vec] : g.store.entries()) CHECK(static_cast<int>(vec.size()) == g.store.dim());

    KbTextConfig tc;
    tc.epochs = 2;
    auto t = train_kb_text(shared_context_corpus(), tc, 1);
    CHECK(t.store.source() == KbSource::KbText);
    CHECK(!t.word_vectors.empty());
}
