#pragma once

// Independent reference implementations shared by the unit and acceptance
// suites. Nothing here calls the code it is checking beyond tokenization.

#include <string>
#include <vector>

#include "kgalign/infusion.hpp"
#include "kgalign/kge.hpp"
#include "kgalign/metrics.hpp"

namespace oracle {

using kgalign::Scores;

// Naive n-gram matching with used-flags and a quadratic LCS.
Scores naive_scores(const std::string& prediction, const std::string& reference);

// Sort-based filtered ranks, same (triple, direction) order as evaluate_ranking.
std::vector<double> brute_ranks(const kgalign::KnowledgeGraph& kg_train, const std::vector<kgalign::Triple>& eval,
                                const kgalign::EmbeddingTable& table);

// |a - n| / max(|a|, |n|), falling back to |a - n| when both are below 1e-6.
double rel_err(double analytic, double numeric);

struct FdResult {
    double max_rel_err = 0.0;
    long checked = 0;
};

// Central differences on upstream . project(x) over weights, biases and input.
FdResult projection_fd(kgalign::ProjectionVariant variant, uint64_t seed, int in_dim = 5, int out_dim = 4);

// Every LM parameter plus the prefix of a two-example batch.
FdResult lm_fd(const kgalign::LmConfig& cfg, uint64_t seed);

// Random parameters with every tensor populated (gains away from 1).
kgalign::LmParams random_lm(const kgalign::LmConfig& cfg, uint64_t seed, double scale = 0.3);

inline uint64_t lm_digest(const kgalign::LmParams& p) { return kgalign::hash_tensors(p.tensors()); }

// Random lowercase sentences over a small alphabet so that overlaps are common.
std::string random_text(kgalign::Rng& rng, int max_words, bool allow_newlines);

}  // namespace oracle
