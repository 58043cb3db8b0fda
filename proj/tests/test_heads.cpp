#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "kbie/errors.hpp"
#include "kbie/gradcheck.hpp"
#include "kbie/heads.hpp"
#include "kbie/synthetic.hpp"

using namespace kbie;
namespace fs = std::filesystem;

namespace {

ModelConfig tiny_config() {
    ModelConfig cfg;
    cfg.encoder.word_dim = 6;
    cfg.encoder.char_dim = 3;
    cfg.encoder.char_filters = 2;
    cfg.encoder.char_widths = {2};
    cfg.encoder.hidden = 4;
    cfg.encoder.dropout = 0.0;
    cfg.spans.max_width = 2;
    cfg.spans.keep_ratio = 1.0;
    cfg.spans.width_dim = 2;
    cfg.heads.hidden = 6;
    return cfg;
}

Document simple_doc(const std::string& id, std::vector<std::string> tokens,
                    std::vector<GoldMention> mentions, std::vector<GoldCluster> clusters,
                    std::vector<GoldRelation> relations = {}) {
    Document d;
    d.id = id;
    d.tokens = std::move(tokens);
    d.mentions = std::move(mentions);
    d.clusters = std::move(clusters);
    d.relations = std::move(relations);
    validate_document(d);
    return d;
}

Corpus micro_corpus() {
    Corpus c;
    c.vocab.entity_types = {"kind_a", "kind_b"};
    c.vocab.relation_types = {"linked"};
    c.docs.push_back(simple_doc("m0", {"zorp", "met", "quil"},
                                {{0, 0, "c0", ""}, {2, 2, "c1", ""}},
                                {{"c0", {"kind_a"}, {}}, {"c1", {"kind_b"}, {}}},
                                {{"c0", "c1", {"linked"}}}));
    c.docs.push_back(simple_doc("m1", {"quil", "saw", "zorp", "again"},
                                {{0, 0, "c1", ""}, {2, 2, "c0", ""}},
                                {{"c0", {"kind_a"}, {}}, {"c1", {"kind_b"}, {}}}));
    return c;
}

JointModel micro_model(uint64_t seed = 1) {
    Corpus c = micro_corpus();
    return JointModel(tiny_config(), c.vocab, WordVocab::build(c.docs), CharVocab::build(c.docs), nullptr,
                      nullptr, seed);
}

}  // namespace

TEST_CASE("ner decoding uses a strict sign test") {
    CHECK(decode_ner(Tensor::zeros({2, 3})) == std::vector<std::set<int>>{{}, {}});
    Tensor logits = Tensor::matrix(1, 3, {1.2, -0.3, 0.1});
    CHECK(decode_ner(logits) == std::vector<std::set<int>>{{0, 2}});
    // multi-label: no argmax, every positive logit is accepted
    Tensor two = Tensor::matrix(1, 2, {0.4, 2.0});
    CHECK(decode_ner(two) == std::vector<std::set<int>>{{0, 1}});
}

TEST_CASE("antecedent decoding prefers SELF on ties and the smallest index otherwise") {
    // spans 0..2, packed scores for (0,1), (0,2), (1,2)
    SUBCASE("all negative scores choose SELF") {
        Tensor scores = Tensor::matrix(3, 1, {-1.0, -0.5, -2.0});
        CHECK(decode_antecedents(scores, 3) == std::vector<int>{kSelf, kSelf, kSelf});
    }
    SUBCASE("a positive score wins") {
        Tensor scores = Tensor::matrix(3, 1, {1.2, -0.5, 0.3});
        auto a = decode_antecedents(scores, 3);
        CHECK(a[0] == kSelf);  // first span has no predecessors
        CHECK(a[1] == 0);
        CHECK(a[2] == 1);
    }
    SUBCASE("zero ties go to SELF; equal positives to the smallest index") {
        Tensor scores = Tensor::matrix(3, 1, {0.0, 0.7, 0.7});
        auto a = decode_antecedents(scores, 3);
        CHECK(a[1] == kSelf);
        CHECK(a[2] == 0);
    }
}

TEST_CASE("re decoding accepts labels by sign per ordered pair") {
    std::vector<std::pair<int, int>> pairs = {{0, 1}, {1, 0}};
    SUBCASE("all negative yields no relations") {
        Tensor logits = Tensor::matrix(2, 2, {-1, -2, -3, -0.1});
        CHECK(decode_re(logits, pairs).empty());
    }
    SUBCASE("ordered pairs decode independently") {
        Tensor logits = Tensor::matrix(2, 2, {0.5, -1, -1, -1});
        auto out = decode_re(logits, pairs);
        REQUIRE(out.size() == 1);
        CHECK(out.at({0, 1}) == std::set<int>{0});
    }
    SUBCASE("a single positive logit over one type is accepted") {
        Tensor logits = Tensor::matrix(2, 1, {0.5, -0.5});
        auto out = decode_re(logits, pairs);
        CHECK(out.at({0, 1}) == std::set<int>{0});
    }
}

TEST_CASE("loss weights mask components exactly") {
    Corpus c = micro_corpus();
    ModelConfig cfg = tiny_config();
    cfg.heads.w_ner = 1.0;
    cfg.heads.w_coref = 0.0;
    cfg.heads.w_re = 0.0;
    JointModel model(cfg, c.vocab, WordVocab::build(c.docs), CharVocab::build(c.docs), nullptr, nullptr, 3);
    Tape tape;
    auto fwd = model.forward(tape, c.docs[0], true);
    LossParts parts;
    auto loss = model.loss(tape, fwd, c.docs[0], &parts);
    CHECK(tape.value(loss).values[0] == doctest::Approx(parts.ner).epsilon(1e-12));
}

TEST_CASE("single span with gold SELF has zero coref loss") {
    Corpus c;
    c.vocab.entity_types = {"t"};
    c.docs.push_back(simple_doc("one", {"solo"}, {{0, 0, "c0", ""}}, {{"c0", {"t"}, {}}}));
    ModelConfig cfg = tiny_config();
    cfg.spans.max_width = 1;
    JointModel model(cfg, c.vocab, WordVocab::build(c.docs), CharVocab::build(c.docs), nullptr, nullptr, 3);
    Tape tape;
    auto fwd = model.forward(tape, c.docs[0], true);
    LossParts parts;
    model.loss(tape, fwd, c.docs[0], &parts);
    CHECK(parts.coref == doctest::Approx(0.0));
    CHECK(parts.re == 0.0);
}

TEST_CASE("single ner cell with zero logit and positive gold is ln 2") {
    Corpus c;
    c.vocab.entity_types = {"t"};
    c.docs.push_back(simple_doc("one", {"solo"}, {{0, 0, "c0", ""}}, {{"c0", {"t"}, {}}}));
    ModelConfig cfg = tiny_config();
    cfg.spans.max_width = 1;
    JointModel model(cfg, c.vocab, WordVocab::build(c.docs), CharVocab::build(c.docs), nullptr, nullptr, 3);
    for (Parameter* p : model.parameters()) std::fill(p->value.values.begin(), p->value.values.end(), 0.0);
    Tape tape;
    auto fwd = model.forward(tape, c.docs[0], true);
    LossParts parts;
    model.loss(tape, fwd, c.docs[0], &parts);
    CHECK(parts.ner == doctest::Approx(std::log(2.0)));
}

TEST_CASE("zero learning rate leaves parameters unchanged after an epoch") {
    Corpus c = micro_corpus();
    JointModel model = micro_model(5);
    std::vector<std::vector<double>> before;
    for (Parameter* p : model.parameters()) before.push_back(p->value.values);
    TrainConfig tc;
    tc.epochs = 1;
    tc.adam.lr = 0.0;
    tc.seed = 5;
    train_model(model, c, nullptr, tc);
    size_t i = 0;
    for (Parameter* p : model.parameters()) CHECK(p->value.values == before[i++]);
}

TEST_CASE("same seed trains to byte-identical checkpoints") {
    Corpus c = micro_corpus();
    TrainConfig tc;
    tc.epochs = 3;
    tc.adam.lr = 0.01;
    tc.seed = 9;

    auto run = [&](const std::string& name) {
        JointModel model = micro_model(9);
        train_model(model, c, nullptr, tc);
        fs::path p = fs::temp_directory_path() / name;
        model.save_checkpoint(p.string());
        std::ifstream in(p, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        fs::remove(p);
        return ss.str();
    };
    std::string a = run("kbie_h1.ckpt");
    std::string b = run("kbie_h2.ckpt");
    CHECK(a == b);
    CHECK(!a.empty());
}

TEST_CASE("prediction is deterministic and decoding is pure") {
    Corpus c = micro_corpus();
    JointModel model = micro_model(11);
    auto p1 = model.predict(c.docs[0]);
    auto p2 = model.predict(c.docs[0]);
    CHECK(p1.doc == p2.doc);

    // re-decoding dumped logits reproduces the decisions bit for bit
    Tape tape;
    auto fwd = model.forward(tape, c.docs[0], false);
    Tensor ner_dump = tape.value(fwd.ner_logits);
    auto once = decode_ner(ner_dump);
    auto again = decode_ner(ner_dump);
    CHECK(once == again);
}

TEST_CASE("antecedent choices never reference later spans") {
    Corpus c = micro_corpus();
    JointModel model = micro_model(13);
    for (const auto& doc : c.docs) {
        Tape tape;
        auto fwd = model.forward(tape, doc, false);
        if (fwd.spans.size() < 2) continue;
        auto ante = decode_antecedents(tape.value(fwd.coref_scores), static_cast<int>(fwd.spans.size()));
        for (size_t j = 0; j < ante.size(); ++j) {
            CHECK(ante[j] < static_cast<int>(j));  // SELF is -1
        }
    }
}

TEST_CASE("checkpoint save and load restores the model exactly") {
    Corpus c = micro_corpus();
    JointModel model = micro_model(17);
    TrainConfig tc;
    tc.epochs = 2;
    tc.seed = 17;
    train_model(model, c, nullptr, tc);
    fs::path p = fs::temp_directory_path() / "kbie_roundtrip.ckpt";
    model.save_checkpoint(p.string());

    JointModel fresh = micro_model(999);  // different init
    fresh.load_checkpoint(p.string());
    auto a = model.predict(c.docs[0]);
    auto b = fresh.predict(c.docs[0]);
    CHECK(a.doc == b.doc);
    fs::remove(p);
}

TEST_CASE("whole model passes the gradient check on a micro corpus") {
    Corpus c = micro_corpus();

    // KB resources so the attention pathway is exercised end to end
    EntityEmbeddingStore store(KbSource::Both, 2);
    store.insert("E_zorp", {0.5, -0.5});
    store.insert("E_quil", {-0.25, 0.75});
    auto dict = CandidateDictionary::build({{"zorp", "E_zorp"}, {"quil", "E_quil"}, {"quil", "E_zorp"}});

    ModelConfig cfg = tiny_config();
    cfg.encoder.word_dim = 3;
    cfg.encoder.hidden = 3;
    cfg.heads.hidden = 4;
    cfg.kb.scheme = WeightScheme::AttPrior;
    cfg.kb.attention_hidden = 3;
    JointModel model(cfg, c.vocab, WordVocab::build(c.docs), CharVocab::build(c.docs), &dict, &store, 23);

    auto params = model.parameters();
    auto report = gradient_check(
        [&](Tape& tape) {
            auto fwd0 = model.forward(tape, c.docs[0], true);
            auto l0 = model.loss(tape, fwd0, c.docs[0]);
            auto fwd1 = model.forward(tape, c.docs[1], true);
            auto l1 = model.loss(tape, fwd1, c.docs[1]);
            return tape.add(l0, l1);
        },
        params, 1e-3);
    INFO("worst " << report.worst);
    CHECK(report.pass());
}

TEST_CASE("joint loss stays strictly positive on finite logits") {
    Corpus c = micro_corpus();
    JointModel model = micro_model(29);
    TrainConfig tc;
    tc.epochs = 30;
    tc.adam.lr = 0.01;
    tc.seed = 29;
    auto result = train_model(model, c, nullptr, tc);
    CHECK(result.log.back().losses.total > 0.0);
    CHECK(result.log.back().losses.total < result.log.front().losses.total);
}

TEST_CASE("training rejects an empty corpus and negative loss weights") {
    Corpus empty;
    JointModel model = micro_model(31);
    TrainConfig tc;
    CHECK_THROWS_AS(train_model(model, empty, nullptr, tc), ConfigError);

    Corpus c = micro_corpus();
    ModelConfig cfg = tiny_config();
    cfg.heads.w_coref = -1.0;
    CHECK_THROWS_AS(JointModel(cfg, c.vocab, WordVocab::build(c.docs), CharVocab::build(c.docs), nullptr,
                               nullptr, 1),
                    ConfigError);
}

TEST_CASE("prune recall diagnostic reports dropped gold spans during training") {
    Corpus c = micro_corpus();
    ModelConfig cfg = tiny_config();
    cfg.spans.keep_ratio = 0.34;  // keeps 1-2 spans per doc, some gold falls out
    JointModel model(cfg, c.vocab, WordVocab::build(c.docs), CharVocab::build(c.docs), nullptr, nullptr, 37);
    TrainConfig tc;
    tc.epochs = 1;
    tc.seed = 37;
    auto result = train_model(model, c, nullptr, tc);
    CHECK(result.log[0].dropped_gold_spans > 0);
    CHECK(result.log[0].unaligned_gold > 0);  // the pruned gold spans have no kept twin
}
