#pragma once

#include <string>
#include <utility>
#include <vector>

#include "kgalign/kg.hpp"

namespace kgalign {

struct LmConfig {
    int vocab_size = 0;
    int model_dim = 64;
    int layers = 2;
    int heads = 4;
    int context_len = 64;
    int ffn_mult = 4;
    uint64_t seed = 0;

    void validate() const;  // throws ConfigError
};

// Row vectors (gains, biases) are stored as 1 x n matrices so every tensor
// has one type.
struct LmBlock {
    Mat ln1_gain, ln1_bias;
    Mat attn_w, attn_b;  // D x 3D fused q|k|v
    Mat attn_proj_w, attn_proj_b;
    Mat ln2_gain, ln2_bias;
    Mat fc_w, fc_b;  // D x F
    Mat fc_proj_w, fc_proj_b;
};

struct LmParams {
    Mat token_embedding;     // V x D
    Mat position_embedding;  // context x D
    std::vector<LmBlock> blocks;
    Mat lnf_gain, lnf_bias;
    Mat head;  // D x V unembedding

    // Fixed order; used for hashing, serialization and optimizers.
    std::vector<std::pair<std::string, Mat*>> tensors();
    std::vector<std::pair<std::string, const Mat*>> tensors() const;

    static LmParams zeros(const LmConfig& cfg);
    void set_zero();
};

LmParams init_lm(const LmConfig& cfg);
void check_params(const LmConfig& cfg, const LmParams& params);

struct ForwardOptions {
    // Key position hidden from every other query. Test hook for the
    // "slot ignored" harness.
    int blocked_key = -1;
};

// Position of the single ENT token, or -1 when absent. More than one ENT is a
// contract error.
int find_slot(const std::vector<int>& ids);

// Logits for every position. When prefix is given it replaces the embedding
// of the ENT token.
Mat forward(const LmConfig& cfg, const LmParams& params, const std::vector<int>& ids, const Vec* prefix = nullptr,
            const ForwardOptions& opts = {});

// Row i of logits is scored against targets[i]; mean over rows with mask[i] != 0.
double loss(const Mat& logits, const std::vector<int>& targets, const std::vector<int>& mask);

struct LmExample {
    std::vector<int> ids;
    Vec prefix;  // empty when there is no slot
    // Indices into ids of the tokens to predict (each predicted from row i-1).
    std::vector<int> loss_positions;
};

struct GradRequest {
    bool body = true;    // embeddings, blocks, final norm
    bool head = true;    // unembedding
    bool prefix = true;  // d loss / d prefix
};

struct BackwardResult {
    double loss = 0.0;  // mean over examples of the per-example masked mean
    LmParams grads;
    std::vector<Vec> prefix_grads;  // per example; empty entries when no prefix
    std::vector<double> example_losses;
};

BackwardResult backward(const LmConfig& cfg, const LmParams& params, const std::vector<LmExample>& batch,
                        const GradRequest& req = {}, const ForwardOptions& opts = {});

// Loss only, same definition as backward().
double batch_loss(const LmConfig& cfg, const LmParams& params, const std::vector<LmExample>& batch,
                  const ForwardOptions& opts = {});

// Greedy decoding; argmax ties go to the lowest id. The terminating STOP is
// included in the result when emitted.
std::vector<int> generate(const LmConfig& cfg, const LmParams& params, const std::vector<int>& prompt_ids,
                          const Vec* prefix, int max_new_tokens);

uint64_t hash_tensors(const std::vector<std::pair<std::string, const Mat*>>& tensors);

}  // namespace kgalign
