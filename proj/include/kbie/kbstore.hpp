#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace kbie {

struct CandidateEntity {
    std::string entity_id;  // c_ij
    double prior = 0.0;     // p_ij, anchor-conditional link frequency

    bool operator==(const CandidateEntity&) const = default;
};

// Surface form -> candidate entities with priors, descending by prior with
// entity-id tie-break, at most `cap` entries per surface. Priors are raw
// corpus frequencies; truncation does not renormalize them.
class CandidateDictionary {
public:
    static constexpr int kDefaultCap = 16;

    // anchors: (surface, target entity) occurrence stream
    static CandidateDictionary build(const std::vector<std::pair<std::string, std::string>>& anchors,
                                     int cap = kDefaultCap);

    // lowercased, whitespace runs collapsed to single spaces, trimmed
    static std::string normalize(const std::string& surface);

    const std::vector<CandidateEntity>& lookup(const std::string& surface) const;

    size_t size() const { return table_.size(); }
    const std::map<std::string, std::vector<CandidateEntity>>& entries() const { return table_; }

    void save(const std::string& path) const;  // JSON-lines, sorted by surface
    static CandidateDictionary load(const std::string& path);

    bool operator==(const CandidateDictionary&) const = default;

private:
    void validate() const;

    std::map<std::string, std::vector<CandidateEntity>> table_;
};

enum class KbSource { KbText, KbGraph, Both };

std::string kb_source_name(KbSource k);
KbSource kb_source_from_name(const std::string& name);  // ConfigError on unknown

// Entity id -> dense vector for one source K. Immutable once built; lookups
// are read-only and thread-safe.
class EntityEmbeddingStore {
public:
    EntityEmbeddingStore() = default;
    EntityEmbeddingStore(KbSource source, int dim);

    void insert(const std::string& entity_id, std::vector<double> vec);

    // nullptr when the entity is absent; callers substitute the zero vector
    // and count the miss in their diagnostics
    const std::vector<double>* find(const std::string& entity_id) const;

    KbSource source() const { return source_; }
    int dim() const { return dim_; }
    size_t size() const { return table_.size(); }
    const std::map<std::string, std::vector<double>>& entries() const { return table_; }

    // JSON header line {source, dim, count} followed by the tensor
    // checkpoint payload keyed by entity id
    void save(const std::string& path) const;
    static EntityEmbeddingStore load(const std::string& path);

    bool operator==(const EntityEmbeddingStore&) const = default;

private:
    KbSource source_ = KbSource::KbText;
    int dim_ = 0;
    std::map<std::string, std::vector<double>> table_;
};

// K = both: concatenation [text; graph] over the id intersection.
EntityEmbeddingStore combine_stores(const EntityEmbeddingStore& text, const EntityEmbeddingStore& graph);

}  // namespace kbie
