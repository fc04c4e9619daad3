#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "kgalign/micro_lm.hpp"
#include "kgalign/projection.hpp"
#include "kgalign/qa_gen.hpp"
#include "kgalign/tokenizer.hpp"

namespace kgalign {

struct PromptFormat {
    std::string system_message = "Answer the question.";
    // Stands in for the reference label when names are dropped during pretraining.
    std::string anonymous_reference = "it";
};

struct PromptRender {
    std::string text;
    std::vector<int> ids;
    int slot = -1;           // index of ENT in ids, -1 without infusion
    int response_begin = 0;  // [begin, end) = answer tokens plus the final STOP
    int response_end = 0;

    std::vector<int> prompt_ids() const { return {ids.begin(), ids.begin() + response_begin}; }
    LmExample example() const;  // no prefix yet
};

// "{sys} <STOP>\nHuman:<ENT> {question} <STOP>\nAssistant: {answer} <STOP>", or
// "Human: {question}" without the slot when infuse is false.
std::string qa_prompt_text(const PromptFormat& fmt, const std::string& question, bool infuse);
PromptRender render_qa(const Tokenizer& tok, const PromptFormat& fmt, const QaExample& ex, bool infuse,
                       bool anonymize = false);
// "{sys} <STOP>\nHuman: <ENT> <STOP>\nAssistant: {label} <STOP>"
PromptRender render_alignment(const Tokenizer& tok, const PromptFormat& fmt, const std::string& label);

// Question with every occurrence of the reference label replaced.
std::string anonymize_question(const QaExample& ex, const std::string& replacement);

// Vocabulary over every render the pipeline can produce.
Tokenizer build_tokenizer(const PromptFormat& fmt, const std::vector<QaExample>& examples,
                          const std::vector<std::string>& entity_labels);

// Label -> projected vector through a fixed table.
class EntityProjector {
public:
    EntityProjector(const ProjectionSpec& spec, const ProjectionParams& params, const EmbeddingTable& table);

    int row(const std::string& label) const;  // LookupError when absent
    Vec input(const std::string& label) const;
    Vec operator()(const std::string& label) const;

    const ProjectionSpec& spec;
    const ProjectionParams& params;
    const EmbeddingTable& table;

private:
    std::unordered_map<std::string, int> rows_;
};

struct AssembledInput {
    PromptRender render;
    Mat embeddings;              // T x D token embeddings, slot row replaced
    std::vector<int> loss_mask;  // per position, 1 on response tokens
};

// Without a projector the plain render is used.
AssembledInput assemble_input(const Tokenizer& tok, const PromptFormat& fmt, const LmConfig& cfg,
                              const LmParams& lm, const QaExample& ex, const EntityProjector* projector);

enum class Stage { base_pretrain, feature_alignment, end_to_end, baseline_finetune };
enum class Trainable { lm_all, projection_only, projection_plus_head };
enum class OptimizerKind { sgd, adam };

std::string to_string(Stage s);
std::string to_string(Trainable t);
std::string to_string(OptimizerKind o);
Stage parse_stage(const std::string& s);
Trainable parse_trainable(const std::string& s);
OptimizerKind parse_optimizer(const std::string& s);

struct TrainPlan {
    Stage stage = Stage::end_to_end;
    Trainable trainable = Trainable::projection_plus_head;
    OptimizerKind optimizer = OptimizerKind::adam;
    double learning_rate = 2e-4;
    double warmup_ratio = 0.03;
    int epochs = 1;
    int batch_size = 16;
    uint64_t seed = 0;
    double anonymize_rate = 0.5;  // base_pretrain only

    void validate() const;  // throws ConfigError
    static TrainPlan defaults(Stage stage);
};

// lr * min(1, step / (warmup_ratio * total_steps)); step counts from 1.
double warmup_lr(double lr, double warmup_ratio, long step, long total_steps);

class Optimizer {
public:
    explicit Optimizer(OptimizerKind kind, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

    void next_step();
    // Per-name state; the same name must always come with the same size.
    void update(const std::string& name, double* param, const double* grad, size_t n, double lr);
    long steps() const { return t_; }

private:
    OptimizerKind kind_;
    double beta1_, beta2_, eps_;
    long t_ = 0;
    std::unordered_map<std::string, std::pair<std::vector<double>, std::vector<double>>> state_;
};

struct TrainLog {
    std::vector<double> epoch_loss;  // mean over the epoch's examples
    std::vector<double> step_loss;
    double first_step_loss() const { return step_loss.empty() ? 0.0 : step_loss.front(); }
};

// Base language ability: plain renders, slot renders holding the mean of the
// label's word embeddings (with names dropped at plan.anonymize_rate), and
// naming prompts. Trains every LM tensor.
TrainLog pretrain_base(const Tokenizer& tok, const PromptFormat& fmt, const LmConfig& cfg, LmParams& lm,
                       const std::vector<QaExample>& train, const std::vector<std::string>& entity_labels,
                       const TrainPlan& plan);

// Projection only, LM frozen, naming prompts over entity_labels.
TrainLog train_stage1(const Tokenizer& tok, const PromptFormat& fmt, const LmConfig& cfg, const LmParams& lm,
                      const ProjectionSpec& spec, ProjectionParams& projection, const EmbeddingTable& table,
                      const std::vector<std::string>& entity_labels, const TrainPlan& plan);

// Projection plus the unembedding head.
TrainLog train_stage2(const Tokenizer& tok, const PromptFormat& fmt, const LmConfig& cfg, LmParams& lm,
                      const ProjectionSpec& spec, ProjectionParams& projection, const EmbeddingTable& table,
                      const std::vector<QaExample>& train, const TrainPlan& plan);

// Full fine-tune on plain renders.
TrainLog train_baseline(const Tokenizer& tok, const PromptFormat& fmt, const LmConfig& cfg, LmParams& lm,
                        const std::vector<QaExample>& train, const TrainPlan& plan);

// Greedy answers, STOP stripped. Examples are independent so they are spread
// over `threads` workers; output order is input order.
std::vector<std::string> predict(const Tokenizer& tok, const PromptFormat& fmt, const LmConfig& cfg,
                                 const LmParams& lm, const EntityProjector* projector,
                                 const std::vector<QaExample>& examples, int max_new_tokens = 32, int threads = 1);

// Mean masked loss over examples, no updates.
double dataset_loss(const Tokenizer& tok, const PromptFormat& fmt, const LmConfig& cfg, const LmParams& lm,
                    const EntityProjector* projector, const std::vector<QaExample>& examples,
                    const ForwardOptions& opts = {});

}  // namespace kgalign
