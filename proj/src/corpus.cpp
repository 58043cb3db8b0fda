#include "kbie/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "json.hpp"
#include "kbie/errors.hpp"

namespace kbie {

using ojson = nlohmann::ordered_json;

int LabelVocab::entity_index(const std::string& label) const {
    auto it = std::find(entity_types.begin(), entity_types.end(), label);
    return it == entity_types.end() ? -1 : static_cast<int>(it - entity_types.begin());
}

int LabelVocab::relation_index(const std::string& label) const {
    auto it = std::find(relation_types.begin(), relation_types.end(), label);
    return it == relation_types.end() ? -1 : static_cast<int>(it - relation_types.begin());
}

void validate_document(Document& doc, const LabelVocab* vocab) {
    auto fail = [&](const std::string& what) {
        throw ValidationError("document '" + doc.id + "': " + what);
    };
    const int n = static_cast<int>(doc.tokens.size());
    std::set<std::string> cluster_ids;
    for (const auto& c : doc.clusters) {
        if (!cluster_ids.insert(c.id).second) fail("duplicate cluster id '" + c.id + "'");
        if (vocab) {
            for (const auto& t : c.types) {
                if (vocab->entity_index(t) < 0) fail("unknown entity type '" + t + "'");
            }
        }
    }
    for (auto& c : doc.clusters) c.mentions.clear();
    for (size_t i = 0; i < doc.mentions.size(); ++i) {
        const GoldMention& m = doc.mentions[i];
        if (m.start < 0 || m.start > m.end || m.end >= n) {
            fail("mention span [" + std::to_string(m.start) + "," + std::to_string(m.end) +
                 "] out of range for " + std::to_string(n) + " tokens");
        }
        bool found = false;
        for (auto& c : doc.clusters) {
            if (c.id == m.cluster_id) {
                c.mentions.push_back(static_cast<int>(i));
                found = true;
                break;
            }
        }
        if (!found) fail("mention references unknown cluster '" + m.cluster_id + "'");
    }
    for (const auto& c : doc.clusters) {
        if (c.mentions.empty()) fail("cluster '" + c.id + "' has no mentions");
    }
    for (const auto& r : doc.relations) {
        if (!cluster_ids.count(r.head_cluster)) fail("relation head '" + r.head_cluster + "' unknown");
        if (!cluster_ids.count(r.tail_cluster)) fail("relation tail '" + r.tail_cluster + "' unknown");
        if (r.head_cluster == r.tail_cluster) fail("self-relation on cluster '" + r.head_cluster + "'");
        if (vocab) {
            for (const auto& t : r.types) {
                if (vocab->relation_index(t) < 0) fail("unknown relation type '" + t + "'");
            }
        }
    }
}

std::string doc_to_json_line(const Document& doc) {
    ojson j;
    j["id"] = doc.id;
    j["tokens"] = doc.tokens;
    j["mentions"] = ojson::array();
    for (const auto& m : doc.mentions) {
        ojson jm;
        jm["start"] = m.start;
        jm["end"] = m.end;
        jm["cluster"] = m.cluster_id;
        if (!m.link.empty()) jm["link"] = m.link;
        j["mentions"].push_back(std::move(jm));
    }
    j["clusters"] = ojson::array();
    for (const auto& c : doc.clusters) {
        ojson jc;
        jc["id"] = c.id;
        jc["types"] = c.types;
        j["clusters"].push_back(std::move(jc));
    }
    j["relations"] = ojson::array();
    for (const auto& r : doc.relations) {
        ojson jr;
        jr["head"] = r.head_cluster;
        jr["tail"] = r.tail_cluster;
        jr["types"] = r.types;
        j["relations"].push_back(std::move(jr));
    }
    return j.dump();
}

Document doc_from_json_line(const std::string& line) {
    ojson j = ojson::parse(line);
    Document doc;
    doc.id = j.at("id").get<std::string>();
    doc.tokens = j.at("tokens").get<std::vector<std::string>>();
    for (const auto& jm : j.value("mentions", ojson::array())) {
        GoldMention m;
        m.start = jm.at("start").get<int>();
        m.end = jm.at("end").get<int>();
        m.cluster_id = jm.at("cluster").get<std::string>();
        m.link = jm.value("link", std::string());
        doc.mentions.push_back(std::move(m));
    }
    for (const auto& jc : j.value("clusters", ojson::array())) {
        GoldCluster c;
        c.id = jc.at("id").get<std::string>();
        c.types = jc.value("types", std::vector<std::string>());
        doc.clusters.push_back(std::move(c));
    }
    for (const auto& jr : j.value("relations", ojson::array())) {
        GoldRelation r;
        r.head_cluster = jr.at("head").get<std::string>();
        r.tail_cluster = jr.at("tail").get<std::string>();
        r.types = jr.value("types", std::vector<std::string>());
        doc.relations.push_back(std::move(r));
    }
    return doc;
}

Corpus load_corpus(const std::string& path, const LabelVocab* vocab) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open corpus file " + path);
    Corpus corpus;
    std::set<std::string> entity_labels, relation_labels;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        Document doc;
        try {
            doc = doc_from_json_line(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        validate_document(doc, vocab);
        for (const auto& c : doc.clusters) entity_labels.insert(c.types.begin(), c.types.end());
        for (const auto& r : doc.relations) relation_labels.insert(r.types.begin(), r.types.end());
        corpus.docs.push_back(std::move(doc));
    }
    if (vocab) {
        corpus.vocab = *vocab;
    } else {
        corpus.vocab.entity_types.assign(entity_labels.begin(), entity_labels.end());
        corpus.vocab.relation_types.assign(relation_labels.begin(), relation_labels.end());
    }
    return corpus;
}

void save_corpus(const std::string& path, const Corpus& corpus) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    for (const auto& doc : corpus.docs) out << doc_to_json_line(doc) << "\n";
    if (!out) throw IoError("write failed: " + path);
}

LabelVocab load_vocab(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open vocab file " + path);
    ojson j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    LabelVocab vocab;
    vocab.entity_types = j.at("entity_types").get<std::vector<std::string>>();
    vocab.relation_types = j.at("relation_types").get<std::vector<std::string>>();
    auto check_unique = [&](const std::vector<std::string>& v, const char* what) {
        std::set<std::string> seen(v.begin(), v.end());
        if (seen.size() != v.size()) throw ValidationError(std::string("duplicate ") + what + " in vocab");
    };
    check_unique(vocab.entity_types, "entity type");
    check_unique(vocab.relation_types, "relation type");
    return vocab;
}

void save_vocab(const std::string& path, const LabelVocab& vocab) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    ojson j;
    j["entity_types"] = vocab.entity_types;
    j["relation_types"] = vocab.relation_types;
    out << j.dump(2) << "\n";
}

}  // namespace kbie
