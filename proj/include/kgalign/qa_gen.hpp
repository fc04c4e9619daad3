#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kgalign/kg.hpp"

namespace kgalign {

enum class QaMode { open, verification, counting };
std::string to_string(QaMode m);
QaMode parse_mode(const std::string& s);

// Slots: {Y} reference entity whose heads are asked for, {x} reference entity
// whose tails are asked for (open mode only), {X} candidate, {Z} count.
struct QaTemplate {
    std::string id;
    std::string relation;
    std::string pattern;
    QaMode mode = QaMode::open;

    bool asks_tails() const;  // uses {x}
    void validate() const;    // throws ConfigError
};

std::vector<QaTemplate> load_templates(std::string_view json_text);

struct QaExample {
    std::string reference_entity;  // label, verbatim inside question
    std::string question;
    std::string answer;
    std::string relation;
    std::string template_id;
    QaMode mode = QaMode::open;
    bool positive = true;
    std::string split;  // "train", "test", or empty before splitting
};

std::string to_jsonl(const std::vector<QaExample>& examples);
std::vector<QaExample> load_jsonl(std::string_view text);

struct QaConfig {
    int max_answers = 20;
    double negative_rate = 1.0;
    uint64_t seed = 0;
};

struct DatasetStats {
    int entities = 0;
    int relations = 0;
    int train = 0;
    int test = 0;
    double awc = 0.0;  // mean word count of emitted answers
    std::optional<double> mrr;

    std::string to_json_line() const;
};

// Canonical multi-answer serialization: labels sorted bytewise, joined by ", ".
std::string join_answers(std::vector<std::string> labels);

std::vector<QaExample> generate_qa(const KnowledgeGraph& kg, const std::vector<QaTemplate>& templates,
                                   const QaConfig& config);

// Assigns split in place. Examples sharing a question string share a split.
void split_dataset(std::vector<QaExample>& examples, double test_fraction, uint64_t seed);

DatasetStats compute_stats(const KnowledgeGraph& kg, const std::vector<QaExample>& examples);

// Synthetic company-ownership graph.
struct SynthConfig {
    int n_components = 30;
    int collision_pairs = 5;
    uint64_t seed = 0;
};

struct Shareholding {
    std::string owner;
    std::string owned;
    int percent;
};

struct SynthGraph {
    KnowledgeGraph kg;
    std::vector<Shareholding> shares;
    std::vector<std::pair<std::string, std::string>> collision_pairs;
};

SynthGraph synth_co_graph(const SynthConfig& config);

// x controls y when the shares of y held by x and by companies x controls
// exceed 50%. Returns (controller, controlled) pairs over entity indices of
// `labels`, sorted.
std::vector<std::pair<int, int>> derive_control(const std::vector<std::string>& labels,
                                                const std::vector<Shareholding>& shares);

// Entities whose label has the same word sequence as another entity's label.
std::vector<bool> collision_members(const KnowledgeGraph& kg);

}  // namespace kgalign
