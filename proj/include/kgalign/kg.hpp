#pragma once

#include <Eigen/Dense>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "kgalign/common.hpp"

namespace kgalign {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

using EntityId = int;
using RelationId = int;

// Label <-> dense index map. Indices follow insertion order.
class Vocabulary {
public:
    int add(const std::string& label);  // returns existing id when present
    int id(const std::string& label) const;  // throws LookupError
    bool contains(const std::string& label) const { return index_.count(label) != 0; }
    const std::string& label(int id) const;
    int size() const { return static_cast<int>(labels_.size()); }
    const std::vector<std::string>& labels() const { return labels_; }

private:
    std::vector<std::string> labels_;
    std::unordered_map<std::string, int> index_;
};

struct Triple {
    EntityId head;
    RelationId relation;
    EntityId tail;
    bool operator==(const Triple&) const = default;
};

class KnowledgeGraph {
public:
    Vocabulary entities;
    Vocabulary relations;

    // Returns false when the triple was already present.
    bool add(const std::string& head, const std::string& relation, const std::string& tail);
    bool add(Triple t);

    const std::vector<Triple>& triples() const { return triples_; }
    bool contains(const Triple& t) const { return set_.count(key(t)) != 0; }

    // Tails t with (head, relation, t) in triple order.
    const std::vector<EntityId>& tails(EntityId head, RelationId relation) const;
    // Heads h with (h, relation, tail) in triple order.
    const std::vector<EntityId>& heads(EntityId tail, RelationId relation) const;

    std::string to_tsv() const;

private:
    static uint64_t key(const Triple& t) {
        // 26 + 12 + 26 bits; add() rejects graphs beyond those limits
        return (static_cast<uint64_t>(t.head) << 38) | (static_cast<uint64_t>(t.relation) << 26) |
               static_cast<uint64_t>(t.tail);
    }
    static uint64_t pair_key(EntityId e, RelationId r) { return (static_cast<uint64_t>(e) << 32) | static_cast<uint32_t>(r); }
    void check_ids(EntityId e, RelationId r) const;

    std::vector<Triple> triples_;
    std::unordered_set<uint64_t> set_;
    std::unordered_map<uint64_t, std::vector<EntityId>> tail_index_;
    std::unordered_map<uint64_t, std::vector<EntityId>> head_index_;
};

KnowledgeGraph load_triples(std::string_view text);
KnowledgeGraph load_triples_file(const std::string& path);

struct EmbeddingTable {
    std::vector<std::string> entity_labels;
    std::vector<std::string> relation_labels;
    Mat entity_vectors;    // |E| x d_e
    Mat relation_vectors;  // |R| x d_r

    int d_e() const { return static_cast<int>(entity_vectors.cols()); }
    int d_r() const { return static_cast<int>(relation_vectors.cols()); }
    void validate() const;
};

std::string save_table(const EmbeddingTable& table);
EmbeddingTable load_table(std::string_view text);

// Shared with the checkpoint container: one row per line, hex-float components.
std::string encode_row(const double* data, int n);
void decode_row(std::string_view line, double* out, int n);

}  // namespace kgalign
