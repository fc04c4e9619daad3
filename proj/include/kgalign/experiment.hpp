#pragma once

#include <optional>
#include <string>
#include <vector>

#include "kgalign/checkpoint.hpp"
#include "kgalign/metrics.hpp"

namespace kgalign {

struct ExperimentConfig {
    uint64_t seed = 0;
    // Paths are resolved against the config file's directory.
    std::string triples_path;  // empty: synthesize a CO-style graph
    std::string templates_path;
    std::string out_dir = "run";

    SynthConfig synth;
    TranseConfig kge;
    QaConfig qa;
    double test_fraction = 0.1;
    ProjectionSpec projection;  // widths are filled from kge.dim and lm.model_dim
    LmConfig lm;                // vocab_size is filled from the tokenizer
    PromptFormat prompt;
    TrainPlan pretrain = TrainPlan::defaults(Stage::base_pretrain);
    TrainPlan stage1 = TrainPlan::defaults(Stage::feature_alignment);
    TrainPlan stage2 = TrainPlan::defaults(Stage::end_to_end);
    TrainPlan baseline = TrainPlan::defaults(Stage::baseline_finetune);
    int max_new_tokens = 32;
    int threads = 4;

    // Every module seed from the top-level seed. The fine-tune arms share one.
    void derive_seeds();
    // Everything that influences results; excludes out_dir and path strings.
    Json canonical() const;
    uint64_t hash() const;
};

// Throws ConfigError carrying a JSON pointer on schema violations.
ExperimentConfig parse_experiment_config(const Json& j, const std::string& base_dir);
ExperimentConfig load_experiment_config(const std::string& path, std::optional<uint64_t> seed_override = {},
                                        std::optional<std::string> out_override = {});

enum class Arm { baseline, aligned };
std::string to_string(Arm a);
Arm parse_arm(const std::string& s);

// Subcommands. Each reads upstream artifacts under cfg.out_dir, writes its own
// artifacts plus manifests/<command>.json, and returns a one-line summary.
std::string run_gen_kg(const ExperimentConfig& cfg);
std::string run_train_kge(const ExperimentConfig& cfg);
std::string run_gen_qa(const ExperimentConfig& cfg);
std::string run_pretrain_lm(const ExperimentConfig& cfg);
std::string run_train_baseline(const ExperimentConfig& cfg);
std::string run_train_align(const ExperimentConfig& cfg);
std::string run_finetune(const ExperimentConfig& cfg);
std::string run_evaluate(const ExperimentConfig& cfg, Arm arm);
std::string run_compare(const ExperimentConfig& cfg);
std::string run_error_report(const ExperimentConfig& cfg);
std::string run_ablate(const ExperimentConfig& cfg, const std::vector<ProjectionVariant>& variants,
                       const std::vector<int>& dims);

// gen-kg through compare, in order.
std::vector<std::string> run_pipeline(const ExperimentConfig& cfg);

struct ComparisonRow {
    std::string subset;  // "all" or "collision"
    std::string row;     // "baseline", "ALIGNed", "delta"
    int n = 0;
    Scores scores;
    std::optional<TTestResult> ttest;  // delta rows only, over per-example EM
};

struct Comparison {
    std::vector<ComparisonRow> rows;
    std::string csv() const;
    Json json() const;
};

// Per-example EM lists must be index-aligned.
Comparison compare_reports(const MetricReport& baseline, const MetricReport& aligned,
                           const std::vector<bool>& collision_mask);

}  // namespace kgalign
