// Command-line front end: one subcommand per pipeline step.
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "kgalign/experiment.hpp"

using namespace kgalign;

namespace {

void print_error(const std::string& command, const char* kind, const std::string& message) {
    Json j{{"error", Json{{"command", command}, {"kind", kind}, {"message", message}}}};
    std::cerr << j.dump() << std::endl;
}

template <typename T>
std::vector<T> parse_list(const std::string& csv, T (*parse)(const std::string&)) {
    std::vector<T> out;
    for (const auto& item : split(csv, ',')) {
        if (item.empty()) continue;
        out.push_back(parse(item));
    }
    return out;
}

int parse_dim(const std::string& s) {
    try {
        size_t used = 0;
        const int d = std::stoi(s, &used);
        if (used != s.size() || d < 1) throw std::invalid_argument(s);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("--dims: '" + s + "' is not a positive integer");
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Knowledge-graph embedding infusion for a small language model"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::optional<uint64_t> seed;
    std::optional<std::string> out;
    app.add_option("--config", config_path, "experiment config (JSON)")->required();
    app.add_option("--seed", seed, "top-level seed, overrides the config");
    app.add_option("--out", out, "output directory, overrides the config");

    std::string arm = "aligned";
    std::string variants = "linear,complex";
    std::string dims;

    struct Cmd {
        const char* name;
        const char* help;
    };
    const Cmd cmds[] = {
        {"gen-kg", "synthesize or import the knowledge graph"},
        {"train-kge", "train TransE entity embeddings"},
        {"gen-qa", "generate and split the QA dataset"},
        {"pretrain-lm", "pretrain the base micro language model"},
        {"train-baseline", "full fine-tune without infusion"},
        {"train-align", "stage 1: train the projection with the LM frozen"},
        {"finetune", "stage 2: train projection and head"},
        {"evaluate", "greedy-decode the test split and score it"},
        {"compare", "baseline vs ALIGNed table with paired t-test"},
        {"error-report", "error categories per arm"},
        {"ablate", "projection variant / embedding width contrast"},
        {"pipeline", "gen-kg through error-report in one go"},
    };
    std::map<std::string, CLI::App*> subs;
    for (const auto& c : cmds) subs[c.name] = app.add_subcommand(c.name, c.help);
    subs["evaluate"]->add_option("--arm", arm, "baseline or aligned")->check(CLI::IsMember({"baseline", "aligned"}));
    subs["ablate"]->add_option("--projection", variants, "comma-separated variants (identity, linear, complex)");
    subs["ablate"]->add_option("--dims", dims, "comma-separated entity embedding widths");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        print_error("", "usage_error", e.what());
        return 2;
    }

    std::string command;
    for (auto& [name, sub] : subs)
        if (sub->parsed()) command = name;

    try {
        const ExperimentConfig cfg = load_experiment_config(config_path, seed, out);
        std::string summary;
        if (command == "gen-kg") summary = run_gen_kg(cfg);
        else if (command == "train-kge") summary = run_train_kge(cfg);
        else if (command == "gen-qa") summary = run_gen_qa(cfg);
        else if (command == "pretrain-lm") summary = run_pretrain_lm(cfg);
        else if (command == "train-baseline") summary = run_train_baseline(cfg);
        else if (command == "train-align") summary = run_train_align(cfg);
        else if (command == "finetune") summary = run_finetune(cfg);
        else if (command == "evaluate") summary = run_evaluate(cfg, parse_arm(arm));
        else if (command == "compare") summary = run_compare(cfg);
        else if (command == "error-report") summary = run_error_report(cfg);
        else if (command == "ablate")
            summary = run_ablate(cfg, parse_list(variants, parse_variant), parse_list(dims, parse_dim));
        else if (command == "pipeline") run_pipeline(cfg);
        if (!summary.empty()) std::cout << summary << std::endl;
    } catch (const ConfigError& e) {
        print_error(command, e.kind(), e.what());
        return 2;
    } catch (const ParseError& e) {
        print_error(command, e.kind(), e.what());
        return 2;
    } catch (const Error& e) {
        print_error(command, e.kind(), e.what());
        return 1;
    } catch (const std::exception& e) {
        print_error(command, "internal_error", e.what());
        return 1;
    }
    return 0;
}
