#pragma once

#include <functional>
#include <vector>

#include "kgalign/kg.hpp"

namespace kgalign {

struct TranseConfig {
    int dim = 32;
    double margin = 1.0;
    double learning_rate = 0.01;
    int epochs = 300;
    int negatives_per_positive = 1;
    uint64_t seed = 0;
    bool norm_entities = true;

    void validate() const;  // throws ConfigError
};

struct RankingReport {
    double mrr = 0.0;
    double hits_at_1 = 0.0;
    double hits_at_10 = 0.0;
    int evaluated_triples = 0;
    // One entry per (triple, direction), tail rank first. Ties count half,
    // so a constant table cannot score a perfect rank.
    std::vector<double> ranks;
};

// ||X_h + r - X_t||_2
double score(EntityId h, RelationId r, EntityId t, const EmbeddingTable& table);

EmbeddingTable empty_table(const KnowledgeGraph& kg, int dim);
EmbeddingTable train_transe(const KnowledgeGraph& kg, const TranseConfig& config,
                            const std::function<void(int epoch, double mean_loss)>& on_epoch = {});

// Filtered ranks against every triple of kg_train plus the evaluation triples.
RankingReport evaluate_ranking(const KnowledgeGraph& kg_train, const std::vector<Triple>& kg_eval,
                               const EmbeddingTable& table);

// Margin loss of one (positive, negative) pair and its gradients, exposed for
// the finite-difference check.
struct MarginTerm {
    double loss;
    Vec d_pos_head, d_pos_tail, d_neg_head, d_neg_tail, d_relation;
};
MarginTerm margin_term(const Vec& ph, const Vec& pt, const Vec& nh, const Vec& nt, const Vec& rel, double margin);

}  // namespace kgalign
