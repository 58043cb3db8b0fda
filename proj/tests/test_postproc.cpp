#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "kbie/errors.hpp"
#include "kbie/postproc.hpp"
#include "kbie/rng.hpp"

using namespace kbie;

namespace {

std::vector<std::set<int>> labels(std::initializer_list<std::set<int>> ls) { return ls; }

}  // namespace

TEST_CASE("antecedent chains collapse into one cluster") {
    // a <- b <- c
    auto clusters = build_clusters({kSelf, 0, 1}, labels({{1}, {}, {}}));
    REQUIRE(clusters.size() == 1);
    CHECK(clusters[0] == std::vector<int>{0, 1, 2});
}

TEST_CASE("a SELF span without entity labels is dropped") {
    int dropped = 0;
    auto clusters = build_clusters({kSelf}, labels({{}}), &dropped);
    CHECK(clusters.empty());
    CHECK(dropped == 1);
}

TEST_CASE("spans chained to a dropped root are dropped with it") {
    int dropped = 0;
    auto clusters = build_clusters({kSelf, 0, 1}, labels({{}, {2}, {3}}), &dropped);
    CHECK(clusters.empty());
    CHECK(dropped == 3);
}

TEST_CASE("two labeled SELF spans form two singletons") {
    auto clusters = build_clusters({kSelf, kSelf}, labels({{0}, {1}}));
    REQUIRE(clusters.size() == 2);
    CHECK(clusters[0] == std::vector<int>{0});
    CHECK(clusters[1] == std::vector<int>{1});
}

TEST_CASE("invalid antecedent indices are rejected") {
    CHECK_THROWS_AS(build_clusters({0}, labels({{0}})), ContractError);       // self-index, not SELF
    CHECK_THROWS_AS(build_clusters({kSelf, 2}, labels({{0}, {0}})), ContractError);  // forward reference
}

TEST_CASE("cluster types are the union of member label sets") {
    // members typed {person} and {politician} -> cluster {person, politician}
    auto clusters = build_clusters({kSelf, 0}, labels({{0}, {1}}));
    auto preds = unify(clusters, labels({{0}, {1}}), {});
    REQUIRE(preds.clusters.size() == 1);
    CHECK(preds.clusters[0].types == std::set<int>{0, 1});
}

TEST_CASE("relations require at least one positive mention pair") {
    auto clusters = build_clusters({kSelf, kSelf}, labels({{0}, {0}}));
    auto no_rel = unify(clusters, labels({{0}, {0}}), {});
    CHECK(no_rel.relations.empty());

    std::map<std::pair<int, int>, std::set<int>> re;
    re[{0, 1}] = {2};
    auto with_rel = unify(clusters, labels({{0}, {0}}), re);
    REQUIRE(with_rel.relations.size() == 1);
    CHECK(with_rel.relations[0].head == 0);
    CHECK(with_rel.relations[0].tail == 1);
    CHECK(with_rel.relations[0].types == std::set<int>{2});
}

TEST_CASE("relation types union over all ordered cross pairs") {
    auto clusters = build_clusters({kSelf, 0, kSelf}, labels({{0}, {0}, {1}}));
    REQUIRE(clusters.size() == 2);
    std::map<std::pair<int, int>, std::set<int>> re;
    re[{0, 2}] = {0};
    re[{1, 2}] = {1};
    re[{2, 0}] = {2};  // reverse direction stays separate
    auto preds = unify(clusters, labels({{0}, {0}, {1}}), re);
    REQUIRE(preds.relations.size() == 2);
    CHECK(preds.relations[0].head == 0);
    CHECK(preds.relations[0].tail == 1);
    CHECK(preds.relations[0].types == std::set<int>{0, 1});
    CHECK(preds.relations[1].head == 1);
    CHECK(preds.relations[1].tail == 0);
    CHECK(preds.relations[1].types == std::set<int>{2});
}

TEST_CASE("retained clusters partition the retained spans") {
    Rng rng(13);
    for (int trial = 0; trial < 100; ++trial) {
        int n = 1 + rng.next_int(12);
        std::vector<int> antecedents;
        std::vector<std::set<int>> ner;
        for (int j = 0; j < n; ++j) {
            antecedents.push_back(rng.next_double() < 0.4 && j > 0 ? rng.next_int(j) : kSelf);
            ner.push_back(rng.next_double() < 0.6 ? std::set<int>{rng.next_int(3)} : std::set<int>{});
        }
        int dropped = 0;
        auto clusters = build_clusters(antecedents, ner, &dropped);
        std::set<int> seen;
        int covered = 0;
        for (const auto& members : clusters) {
            CHECK(!members.empty());
            for (int m : members) {
                CHECK(!seen.count(m));  // disjoint
                seen.insert(m);
                ++covered;
            }
        }
        CHECK(covered + dropped == n);
    }
}

TEST_CASE("unify is monotone in mention labels") {
    Rng rng(29);
    for (int trial = 0; trial < 50; ++trial) {
        int n = 2 + rng.next_int(6);
        std::vector<int> antecedents{kSelf};
        std::vector<std::set<int>> ner;
        for (int j = 0; j < n; ++j) {
            if (j > 0) antecedents.push_back(rng.next_double() < 0.5 ? rng.next_int(j) : kSelf);
            ner.push_back({rng.next_int(4)});
        }
        auto clusters = build_clusters(antecedents, ner);
        auto before = unify(clusters, ner, {});
        auto ner_more = ner;
        ner_more[static_cast<size_t>(rng.next_int(n))].insert(rng.next_int(4));
        auto after = unify(clusters, ner_more, {});
        REQUIRE(before.clusters.size() == after.clusters.size());
        for (size_t c = 0; c < before.clusters.size(); ++c) {
            for (int t : before.clusters[c].types) CHECK(after.clusters[c].types.count(t));
        }
    }
}

TEST_CASE("unify is idempotent on its own output") {
    auto clusters = build_clusters({kSelf, 0, kSelf}, labels({{0}, {1}, {2}}));
    std::map<std::pair<int, int>, std::set<int>> re;
    re[{1, 2}] = {0};
    auto once = unify(clusters, labels({{0}, {1}, {2}}), re);
    // map cluster-level results back to mentions and unify again
    std::vector<std::set<int>> broadcast(3);
    for (const auto& c : once.clusters) {
        for (int m : c.members) broadcast[static_cast<size_t>(m)] = c.types;
    }
    std::map<std::pair<int, int>, std::set<int>> re_broadcast;
    for (const auto& r : once.relations) {
        for (int a : once.clusters[static_cast<size_t>(r.head)].members) {
            for (int b : once.clusters[static_cast<size_t>(r.tail)].members) re_broadcast[{a, b}] = r.types;
        }
    }
    auto twice = unify(clusters, broadcast, re_broadcast);
    REQUIRE(twice.clusters.size() == once.clusters.size());
    for (size_t c = 0; c < once.clusters.size(); ++c) {
        CHECK(twice.clusters[c].types == once.clusters[c].types);
    }
    REQUIRE(twice.relations.size() == once.relations.size());
    for (size_t r = 0; r < once.relations.size(); ++r) {
        CHECK(twice.relations[r].types == once.relations[r].types);
    }
}

TEST_CASE("predictions convert to a valid gold-schema document") {
    LabelVocab vocab;
    vocab.entity_types = {"person", "org"};
    vocab.relation_types = {"works_for"};
    std::vector<Span> spans = {{0, 0}, {2, 3}, {5, 5}};
    auto clusters = build_clusters({kSelf, 0, kSelf}, labels({{0}, {0}, {1}}));
    std::map<std::pair<int, int>, std::set<int>> re;
    re[{0, 2}] = {0};
    auto preds = unify(clusters, labels({{0}, {0}, {1}}), re);
    Document doc = prediction_to_document("d9", {"a", "b", "c", "d", "e", "f"}, spans, preds, vocab);
    CHECK(doc.clusters.size() == 2);
    CHECK(doc.mentions.size() == 3);
    REQUIRE(doc.relations.size() == 1);
    CHECK(doc.relations[0].types == std::vector<std::string>{"works_for"});
}
