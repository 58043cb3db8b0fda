#include "kbie/kbstore.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "kbie/checkpoint.hpp"
#include "kbie/errors.hpp"

namespace kbie {

using ojson = nlohmann::ordered_json;

std::string CandidateDictionary::normalize(const std::string& surface) {
    std::string out;
    out.reserve(surface.size());
    bool pending_space = false;
    for (unsigned char c : surface) {
        if (std::isspace(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

CandidateDictionary CandidateDictionary::build(
    const std::vector<std::pair<std::string, std::string>>& anchors, int cap) {
    if (cap < 1) throw ConfigError("dictionary cap must be >= 1, got " + std::to_string(cap));
    std::map<std::string, std::map<std::string, int64_t>> counts;
    std::map<std::string, int64_t> totals;
    for (const auto& [surface, entity] : anchors) {
        std::string key = normalize(surface);
        if (key.empty()) continue;
        ++counts[key][entity];
        ++totals[key];
    }
    CandidateDictionary dict;
    for (const auto& [surface, per_entity] : counts) {
        std::vector<CandidateEntity> list;
        list.reserve(per_entity.size());
        double total = static_cast<double>(totals[surface]);
        for (const auto& [entity, count] : per_entity) {
            list.push_back({entity, static_cast<double>(count) / total});
        }
        std::sort(list.begin(), list.end(), [](const CandidateEntity& a, const CandidateEntity& b) {
            if (a.prior != b.prior) return a.prior > b.prior;
            return a.entity_id < b.entity_id;
        });
        if (static_cast<int>(list.size()) > cap) list.resize(static_cast<size_t>(cap));
        dict.table_[surface] = std::move(list);
    }
    dict.validate();
    return dict;
}

void CandidateDictionary::validate() const {
    for (const auto& [surface, list] : table_) {
        double sum = 0.0;
        for (size_t i = 0; i < list.size(); ++i) {
            const auto& c = list[i];
            if (!(c.prior > 0.0 && c.prior <= 1.0)) {
                throw ValidationError("dictionary '" + surface + "': prior " + std::to_string(c.prior) +
                                      " outside (0,1]");
            }
            sum += c.prior;
            if (i > 0) {
                bool ordered = list[i - 1].prior > c.prior ||
                               (list[i - 1].prior == c.prior && list[i - 1].entity_id < c.entity_id);
                if (!ordered) throw ValidationError("dictionary '" + surface + "': candidates not in order");
            }
        }
        if (sum > 1.0 + 1e-9) {
            throw ValidationError("dictionary '" + surface + "': priors sum to " + std::to_string(sum));
        }
    }
}

const std::vector<CandidateEntity>& CandidateDictionary::lookup(const std::string& surface) const {
    static const std::vector<CandidateEntity> kEmpty;
    auto it = table_.find(normalize(surface));
    return it == table_.end() ? kEmpty : it->second;
}

void CandidateDictionary::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    for (const auto& [surface, list] : table_) {
        ojson j;
        j["surface"] = surface;
        j["candidates"] = ojson::array();
        for (const auto& c : list) {
            ojson jc;
            jc["entity"] = c.entity_id;
            jc["prior"] = c.prior;
            j["candidates"].push_back(std::move(jc));
        }
        out << j.dump() << "\n";
    }
    if (!out) throw IoError("write failed: " + path);
}

CandidateDictionary CandidateDictionary::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dictionary file " + path);
    CandidateDictionary dict;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            ojson j = ojson::parse(line);
            std::string surface = j.at("surface").get<std::string>();
            std::vector<CandidateEntity> list;
            for (const auto& jc : j.at("candidates")) {
                list.push_back({jc.at("entity").get<std::string>(), jc.at("prior").get<double>()});
            }
            dict.table_[surface] = std::move(list);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    dict.validate();
    return dict;
}

std::string kb_source_name(KbSource k) {
    switch (k) {
        case KbSource::KbText: return "kb-text";
        case KbSource::KbGraph: return "kb-graph";
        case KbSource::Both: return "both";
    }
    return "?";
}

KbSource kb_source_from_name(const std::string& name) {
    if (name == "kb-text") return KbSource::KbText;
    if (name == "kb-graph") return KbSource::KbGraph;
    if (name == "both") return KbSource::Both;
    throw ConfigError("unknown KB source '" + name + "' (expected kb-text, kb-graph or both)");
}

EntityEmbeddingStore::EntityEmbeddingStore(KbSource source, int dim) : source_(source), dim_(dim) {
    if (dim <= 0) throw ConfigError("embedding store dim must be positive, got " + std::to_string(dim));
}

void EntityEmbeddingStore::insert(const std::string& entity_id, std::vector<double> vec) {
    if (static_cast<int>(vec.size()) != dim_) {
        throw ValidationError("store '" + entity_id + "': vector length " + std::to_string(vec.size()) +
                              " != dim " + std::to_string(dim_));
    }
    for (double x : vec) {
        if (!std::isfinite(x)) throw NumericsError("store '" + entity_id + "': non-finite component");
    }
    table_[entity_id] = std::move(vec);
}

const std::vector<double>* EntityEmbeddingStore::find(const std::string& entity_id) const {
    auto it = table_.find(entity_id);
    return it == table_.end() ? nullptr : &it->second;
}

void EntityEmbeddingStore::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    ojson header;
    header["source"] = kb_source_name(source_);
    header["dim"] = dim_;
    header["count"] = table_.size();
    out << header.dump() << "\n";
    std::vector<std::pair<std::string, const Tensor*>> tensors;
    std::vector<Tensor> storage;
    storage.reserve(table_.size());
    for (const auto& [id, vec] : table_) {
        storage.emplace_back(Shape{1, dim_}, vec);
    }
    size_t i = 0;
    for (const auto& [id, vec] : table_) tensors.emplace_back(id, &storage[i++]);
    write_checkpoint(out, tensors);
}

EntityEmbeddingStore EntityEmbeddingStore::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open store file " + path);
    std::string header_line;
    if (!std::getline(in, header_line)) throw ParseError(path + ": missing store header");
    ojson header;
    try {
        header = ojson::parse(header_line);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": bad store header: " + e.what());
    }
    EntityEmbeddingStore store(kb_source_from_name(header.at("source").get<std::string>()),
                               header.at("dim").get<int>());
    auto entries = read_checkpoint(in);
    if (entries.size() != header.at("count").get<size_t>()) {
        throw ValidationError(path + ": header count " + std::to_string(header.at("count").get<size_t>()) +
                              " != payload count " + std::to_string(entries.size()));
    }
    for (auto& [id, tensor] : entries) store.insert(id, std::move(tensor.values));
    return store;
}

EntityEmbeddingStore combine_stores(const EntityEmbeddingStore& text, const EntityEmbeddingStore& graph) {
    EntityEmbeddingStore out(KbSource::Both, text.dim() + graph.dim());
    size_t shared = 0;
    for (const auto& [id, tvec] : text.entries()) {
        const std::vector<double>* gvec = graph.find(id);
        if (!gvec) continue;
        std::vector<double> merged;
        merged.reserve(tvec.size() + gvec->size());
        merged.insert(merged.end(), tvec.begin(), tvec.end());
        merged.insert(merged.end(), gvec->begin(), gvec->end());
        out.insert(id, std::move(merged));
        ++shared;
    }
    if (shared == 0) throw ConfigError("combine_stores: no shared entity ids between kb-text and kb-graph");
    return out;
}

}  // namespace kbie
