#include "kgalign/experiment.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>

namespace kgalign {

namespace fs = std::filesystem;

namespace {

std::string fmt_double(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

void reject_key(const Json& j, const std::string& pointer, const char* key, const char* why) {
    if (j.is_object() && j.contains(key)) throw ConfigError(pointer + "/" + key + ": " + why);
}

std::string resolve(const std::string& base_dir, const std::string& p) {
    if (p.empty() || fs::path(p).is_absolute()) return p;
    return (fs::path(base_dir) / p).lexically_normal().string();
}

std::string file_hash(const std::string& path) { return hex64(fnv1a(read_file(path))); }

// Reads and writes artifacts under out_dir and records their hashes for the
// command's manifest.
class Run {
public:
    Run(const ExperimentConfig& cfg, std::string command) : cfg_(cfg), command_(std::move(command)) {}

    std::string read(const std::string& rel, const char* producer) {
        const fs::path p = fs::path(cfg_.out_dir) / rel;
        if (!fs::exists(p))
            throw MissingArtifactError("missing " + p.string() + "; run `kgalign " + producer + "` first");
        std::string text = read_file(p.string());
        inputs_[rel] = hex64(fnv1a(text));
        return text;
    }
    bool exists(const std::string& rel) const { return fs::exists(fs::path(cfg_.out_dir) / rel); }
    void external(const std::string& name, const std::string& text) { external_[name] = hex64(fnv1a(text)); }

    void write(const std::string& rel, const std::string& content) {
        const fs::path p = fs::path(cfg_.out_dir) / rel;
        fs::create_directories(p.parent_path());
        write_file(p.string(), content);
        outputs_[rel] = hex64(fnv1a(content));
    }

    Checkpoint checkpoint(const std::string& rel, const char* producer) {
        const std::string text = read(rel, producer);
        return load_checkpoint(text);
    }

    void finish(const Json& extra = Json::object()) {
        Json m;
        m["command"] = command_;
        m["config_hash"] = hex64(cfg_.hash());
        m["seed"] = cfg_.seed;
        m["external_inputs"] = Json(external_);
        m["inputs"] = Json(inputs_);
        m["outputs"] = Json(outputs_);
        m["details"] = extra;
        const fs::path p = fs::path(cfg_.out_dir) / "manifests" / (command_ + ".json");
        fs::create_directories(p.parent_path());
        write_file(p.string(), m.dump(2) + "\n");
    }

    const ExperimentConfig& cfg() const { return cfg_; }

private:
    const ExperimentConfig& cfg_;
    std::string command_;
    std::map<std::string, std::string> inputs_, outputs_, external_;
};

KnowledgeGraph read_kg(Run& run) { return load_triples(run.read("kg/triples.tsv", "gen-kg")); }

std::vector<QaExample> read_dataset(Run& run) { return load_jsonl(run.read("qa/dataset.jsonl", "gen-qa")); }

std::vector<QaExample> only_split(const std::vector<QaExample>& all, const char* split) {
    std::vector<QaExample> out;
    for (const auto& e : all)
        if (e.split == split) out.push_back(e);
    return out;
}

Json log_json(const TrainLog& log) {
    return Json{{"epoch_loss", log.epoch_loss}, {"first_step_loss", log.first_step_loss()}, {"steps", log.step_loss.size()}};
}

std::string describe(const TrainLog& log) {
    return "loss " + fmt_double("%.4f", log.epoch_loss.front()) + " -> " + fmt_double("%.4f", log.epoch_loss.back());
}

// Metric snapshot: probe loss over the first examples of the train split,
// reproducible bitwise from a loaded checkpoint.
constexpr size_t kProbeSize = 64;

std::vector<QaExample> probe_set(const std::vector<QaExample>& train) {
    return {train.begin(), train.begin() + static_cast<long>(std::min(kProbeSize, train.size()))};
}

ProjectionSpec projection_spec(const ExperimentConfig& cfg, ProjectionVariant variant, int input_dim) {
    ProjectionSpec s = cfg.projection;
    s.variant = variant;
    s.input_dim = input_dim;
    s.output_dim = cfg.lm.model_dim;
    s.validate();
    return s;
}

Json provenance(const ExperimentConfig& cfg, const TrainPlan& plan, const Json& parent) {
    return Json{{"config_hash", hex64(cfg.hash())}, {"seed", cfg.seed}, {"plan", to_json(plan)}, {"parent", parent}};
}

std::vector<bool> collision_mask(const KnowledgeGraph& kg, const std::vector<QaExample>& examples) {
    const auto members = collision_members(kg);
    std::vector<bool> out;
    for (const auto& e : examples) {
        const EntityId id = kg.entities.contains(e.reference_entity) ? kg.entities.id(e.reference_entity) : -1;
        out.push_back(id >= 0 && members[static_cast<size_t>(id)]);
    }
    return out;
}

Json scores_json(const Scores& s) {
    Json j = Json::object();
    for (const auto& f : kMetricFields) j[f.name] = s.*(f.member);
    return j;
}

struct ArmEvaluation {
    std::vector<QaExample> test;
    std::vector<std::string> predictions;
    std::vector<bool> collision;
    MetricReport report;
};

ArmEvaluation evaluate_arm(const ExperimentConfig& cfg, const KnowledgeGraph& kg, const std::vector<QaExample>& test,
                           const Checkpoint& ck, const EmbeddingTable* table) {
    const Tokenizer tok = Tokenizer::load(ck.tokenizer);
    ArmEvaluation ev;
    ev.test = test;
    if (table) {
        if (!ck.has_projection) throw ContractError("aligned checkpoint lacks a projection");
        const EntityProjector proj(ck.projection_spec, ck.projection, *table);
        ev.predictions = predict(tok, cfg.prompt, ck.lm_config, ck.lm, &proj, test, cfg.max_new_tokens, cfg.threads);
    } else {
        ev.predictions = predict(tok, cfg.prompt, ck.lm_config, ck.lm, nullptr, test, cfg.max_new_tokens, cfg.threads);
    }
    std::vector<Scores> per;
    for (size_t i = 0; i < test.size(); ++i) per.push_back(score_pair(ev.predictions[i], test[i].answer));
    ev.report = aggregate(std::move(per));
    ev.collision = collision_mask(kg, test);
    return ev;
}

MetricReport subset(const MetricReport& r, const std::vector<bool>& mask) {
    std::vector<Scores> s;
    for (size_t i = 0; i < r.per_example.size(); ++i)
        if (mask[i]) s.push_back(r.per_example[i]);
    return aggregate(std::move(s));
}

Json report_json(const std::string& arm, const ArmEvaluation& ev) {
    const MetricReport coll = subset(ev.report, ev.collision);
    return Json{{"arm", arm},
                {"count", ev.report.count},
                {"mean", scores_json(ev.report.mean)},
                {"collision", Json{{"count", coll.count}, {"mean", scores_json(coll.mean)}}}};
}

std::string predictions_jsonl(const ArmEvaluation& ev) {
    std::string out;
    for (size_t i = 0; i < ev.test.size(); ++i) {
        Json j;
        j["index"] = i;
        j["reference_entity"] = ev.test[i].reference_entity;
        j["question"] = ev.test[i].question;
        j["answer"] = ev.test[i].answer;
        j["prediction"] = ev.predictions[i];
        j["collision"] = static_cast<bool>(ev.collision[i]);
        j["scores"] = scores_json(ev.report.per_example[i]);
        out += j.dump() + "\n";
    }
    return out;
}

struct StoredPredictions {
    std::vector<std::string> gold, prediction;
    std::vector<bool> collision;
};

StoredPredictions read_predictions(const std::string& text) {
    StoredPredictions p;
    for (const auto& line : split(text, '\n')) {
        if (line.empty()) continue;
        const Json j = parse_json(line, "predictions");
        p.gold.push_back(j.at("answer").get<std::string>());
        p.prediction.push_back(j.at("prediction").get<std::string>());
        p.collision.push_back(j.at("collision").get<bool>());
    }
    return p;
}

MetricReport rescore(const StoredPredictions& p) {
    std::vector<Scores> per;
    for (size_t i = 0; i < p.gold.size(); ++i) per.push_back(score_pair(p.prediction[i], p.gold[i]));
    return aggregate(std::move(per));
}

std::string csv_scores(const Scores& s) {
    std::string out;
    for (const auto& f : kMetricFields) out += "," + fmt_double("%.6f", s.*(f.member));
    return out;
}

std::string csv_header() {
    std::string h;
    for (const auto& f : kMetricFields) h += std::string(",") + f.name;
    return h;
}

}  // namespace

void ExperimentConfig::derive_seeds() {
    synth.seed = derive_seed(seed, "synth");
    kge.seed = derive_seed(seed, "kge");
    qa.seed = derive_seed(seed, "qa");
    lm.seed = derive_seed(seed, "lm-init");
    pretrain.seed = derive_seed(seed, "pretrain");
    stage1.seed = derive_seed(seed, "stage1");
    stage2.seed = baseline.seed = derive_seed(seed, "finetune");
}

Json ExperimentConfig::canonical() const {
    Json j;
    j["seed"] = seed;
    j["triples"] = triples_path.empty() ? Json(nullptr) : Json(file_hash(triples_path));
    j["templates"] = file_hash(templates_path);
    j["synth"] = to_json(synth);
    j["kge"] = to_json(kge);
    j["qa"] = to_json(qa);
    j["test_fraction"] = test_fraction;
    j["projection"] = to_json(projection);
    j["lm"] = to_json(lm);
    j["prompt"] = to_json(prompt);
    j["train"] = Json{{"pretrain", to_json(pretrain)},
                      {"stage1", to_json(stage1)},
                      {"stage2", to_json(stage2)},
                      {"baseline", to_json(baseline)}};
    j["eval"] = Json{{"max_new_tokens", max_new_tokens}};
    return j;
}

uint64_t ExperimentConfig::hash() const { return fnv1a(canonical().dump()); }

ExperimentConfig parse_experiment_config(const Json& j, const std::string& base_dir) {
    ExperimentConfig c;
    JsonReader top(j, "");
    top.get("seed", c.seed);
    if (top.has("paths")) {
        JsonReader p(top.child("paths"), "/paths");
        p.get("triples", c.triples_path);
        p.get("templates", c.templates_path);
        p.get("out", c.out_dir);
        p.finish();
    }
    const char* derived = "module seeds derive from /seed";
    auto section = [&](const char* key, auto& target) {
        if (!top.has(key)) return;
        const Json& s = top.child(key);
        reject_key(s, std::string("/") + key, "seed", derived);
        from_json(s, std::string("/") + key, target);
    };
    section("synth", c.synth);
    section("kge", c.kge);
    section("qa", c.qa);
    section("prompt", c.prompt);
    if (top.has("split")) {
        JsonReader s(top.child("split"), "/split");
        s.get("test_fraction", c.test_fraction);
        s.finish();
        if (!(c.test_fraction > 0 && c.test_fraction < 1)) throw ConfigError("/split/test_fraction: must lie in (0, 1)");
    }
    if (top.has("projection")) {
        const Json& s = top.child("projection");
        reject_key(s, "/projection", "input_dim", "derived from /kge/dim");
        reject_key(s, "/projection", "output_dim", "derived from /lm/model_dim");
        from_json(s, "/projection", c.projection);
    }
    if (top.has("lm")) {
        const Json& s = top.child("lm");
        reject_key(s, "/lm", "vocab_size", "derived from the generated vocabulary");
        reject_key(s, "/lm", "seed", derived);
        from_json(s, "/lm", c.lm);
    }
    if (top.has("train")) {
        JsonReader t(top.child("train"), "/train");
        auto plan = [&](const char* key, TrainPlan& target) {
            if (!t.has(key)) return;
            const Json& s = t.child(key);
            const std::string ptr = std::string("/train/") + key;
            reject_key(s, ptr, "seed", derived);
            const Stage want = target.stage;
            from_json(s, ptr, target);
            if (target.stage != want) throw ConfigError(ptr + "/stage: must be " + to_string(want));
        };
        plan("pretrain", c.pretrain);
        plan("stage1", c.stage1);
        plan("stage2", c.stage2);
        plan("baseline", c.baseline);
        t.finish();
    }
    if (top.has("eval")) {
        JsonReader e(top.child("eval"), "/eval");
        e.get("max_new_tokens", c.max_new_tokens);
        e.get("threads", c.threads);
        e.finish();
        if (c.max_new_tokens < 1) throw ConfigError("/eval/max_new_tokens: must be >= 1");
        if (c.threads < 1) throw ConfigError("/eval/threads: must be >= 1");
    }
    top.finish();

    c.triples_path = resolve(base_dir, c.triples_path);
    c.templates_path = resolve(base_dir, c.templates_path);
    c.out_dir = resolve(base_dir, c.out_dir);
    if (c.templates_path.empty()) throw ConfigError("/paths/templates: required");
    if (!fs::exists(c.templates_path)) throw ConfigError("/paths/templates: file not found: " + c.templates_path);
    if (!c.triples_path.empty() && !fs::exists(c.triples_path))
        throw ConfigError("/paths/triples: file not found: " + c.triples_path);

    c.lm.vocab_size = std::max(c.lm.vocab_size, 1);
    validate_at("/lm", [&] { c.lm.validate(); });
    c.projection.input_dim = c.kge.dim;
    c.projection.output_dim = c.lm.model_dim;
    validate_at("/projection", [&] { c.projection.validate(); });
    c.derive_seeds();
    return c;
}

ExperimentConfig load_experiment_config(const std::string& path, std::optional<uint64_t> seed_override,
                                        std::optional<std::string> out_override) {
    if (!fs::exists(path)) throw ConfigError("config file not found: " + path);
    Json j = parse_json(read_file(path), path);
    if (seed_override && j.is_object()) j["seed"] = *seed_override;
    const std::string base = fs::path(path).parent_path().string();
    ExperimentConfig c = parse_experiment_config(j, base.empty() ? "." : base);
    if (out_override) c.out_dir = *out_override;
    return c;
}

std::string to_string(Arm a) { return a == Arm::baseline ? "baseline" : "aligned"; }

Arm parse_arm(const std::string& s) {
    if (s == "baseline") return Arm::baseline;
    if (s == "aligned") return Arm::aligned;
    throw ConfigError("unknown arm '" + s + "' (expected baseline or aligned)");
}

std::string run_gen_kg(const ExperimentConfig& cfg) {
    Run run(cfg, "gen-kg");
    KnowledgeGraph kg;
    Json pairs = Json::array();
    if (cfg.triples_path.empty()) {
        SynthGraph g = synth_co_graph(cfg.synth);
        kg = std::move(g.kg);
        for (const auto& [a, b] : g.collision_pairs) pairs.push_back(Json::array({a, b}));
    } else {
        const std::string text = read_file(cfg.triples_path);
        run.external("triples", text);
        kg = load_triples(text);
    }
    run.write("kg/triples.tsv", kg.to_tsv());
    run.write("kg/collisions.json", pairs.dump(2) + "\n");
    const Json d{{"entities", kg.entities.size()}, {"relations", kg.relations.size()}, {"triples", kg.triples().size()}};
    run.finish(d);
    return "gen-kg: " + d.dump();
}

std::string run_train_kge(const ExperimentConfig& cfg) {
    Run run(cfg, "train-kge");
    const KnowledgeGraph kg = read_kg(run);
    std::vector<double> losses;
    const EmbeddingTable table = train_transe(kg, cfg.kge, [&](int, double l) { losses.push_back(l); });
    const RankingReport rr = evaluate_ranking(kg, kg.triples(), table);
    run.write("kge/table.txt", save_table(table));
    const Json rep{{"mrr", rr.mrr},
                   {"hits_at_1", rr.hits_at_1},
                   {"hits_at_10", rr.hits_at_10},
                   {"evaluated_triples", rr.evaluated_triples},
                   {"epoch_loss", losses}};
    run.write("kge/report.json", rep.dump(2) + "\n");
    run.finish(Json{{"mrr", rr.mrr}});
    return "train-kge: filtered MRR " + fmt_double("%.4f", rr.mrr) + ", Hits@10 " + fmt_double("%.4f", rr.hits_at_10);
}

std::string run_gen_qa(const ExperimentConfig& cfg) {
    Run run(cfg, "gen-qa");
    const KnowledgeGraph kg = read_kg(run);
    const std::string tmpl = read_file(cfg.templates_path);
    run.external("templates", tmpl);
    std::vector<QaExample> ex = generate_qa(kg, load_templates(tmpl), cfg.qa);
    split_dataset(ex, cfg.test_fraction, derive_seed(cfg.seed, "split"));
    DatasetStats stats = compute_stats(kg, ex);
    if (run.exists("kge/report.json"))
        stats.mrr = parse_json(run.read("kge/report.json", "train-kge"), "kge report").at("mrr").get<double>();
    run.write("qa/dataset.jsonl", to_jsonl(ex));
    run.write("qa/stats.json", stats.to_json_line());
    run.finish(parse_json(stats.to_json_line(), "stats"));
    return "gen-qa: " + std::to_string(stats.train) + " train / " + std::to_string(stats.test) + " test, AWC " +
           fmt_double("%.3f", stats.awc);
}

std::string run_pretrain_lm(const ExperimentConfig& cfg) {
    Run run(cfg, "pretrain-lm");
    const KnowledgeGraph kg = read_kg(run);
    const auto all = read_dataset(run);
    const auto train = only_split(all, "train");
    const Tokenizer tok = build_tokenizer(cfg.prompt, all, kg.entities.labels());
    LmConfig lc = cfg.lm;
    lc.vocab_size = tok.size();
    LmParams lm = init_lm(lc);
    const TrainLog log = pretrain_base(tok, cfg.prompt, lc, lm, train, kg.entities.labels(), cfg.pretrain);
    Checkpoint ck;
    ck.lm_config = lc;
    ck.lm = std::move(lm);
    ck.tokenizer = tok.save();
    ck.provenance = provenance(cfg, cfg.pretrain, nullptr);
    ck.metrics = log_json(log);
    ck.metrics["probe_loss"] = dataset_loss(tok, cfg.prompt, lc, ck.lm, nullptr, probe_set(train));
    run.write("lm/vocab.txt", ck.tokenizer);
    run.write("lm/base.ckpt", save_checkpoint(ck));
    run.write("lm/pretrain_log.json", log_json(log).dump(2) + "\n");
    run.finish(Json{{"vocab_size", lc.vocab_size}});
    return "pretrain-lm: vocab " + std::to_string(lc.vocab_size) + ", " + describe(log);
}

std::string run_train_baseline(const ExperimentConfig& cfg) {
    Run run(cfg, "train-baseline");
    Checkpoint ck = run.checkpoint("lm/base.ckpt", "pretrain-lm");
    const auto train = only_split(read_dataset(run), "train");
    const Tokenizer tok = Tokenizer::load(ck.tokenizer);
    const TrainLog log = train_baseline(tok, cfg.prompt, ck.lm_config, ck.lm, train, cfg.baseline);
    ck.provenance = provenance(cfg, cfg.baseline, ck.provenance);
    ck.metrics = log_json(log);
    ck.metrics["probe_loss"] = dataset_loss(tok, cfg.prompt, ck.lm_config, ck.lm, nullptr, probe_set(train));
    run.write("baseline/model.ckpt", save_checkpoint(ck));
    run.write("baseline/train_log.json", log_json(log).dump(2) + "\n");
    run.finish();
    return "train-baseline: " + describe(log);
}

std::string run_train_align(const ExperimentConfig& cfg) {
    Run run(cfg, "train-align");
    Checkpoint ck = run.checkpoint("lm/base.ckpt", "pretrain-lm");
    const EmbeddingTable table = load_table(run.read("kge/table.txt", "train-kge"));
    const Tokenizer tok = Tokenizer::load(ck.tokenizer);
    ck.has_projection = true;
    ck.projection_spec = projection_spec(cfg, cfg.projection.variant, table.d_e());
    ck.projection = init_projection(ck.projection_spec, derive_seed(cfg.seed, "projection"));
    const TrainLog log = train_stage1(tok, cfg.prompt, ck.lm_config, ck.lm, ck.projection_spec, ck.projection, table,
                                      table.entity_labels, cfg.stage1);
    ck.provenance = provenance(cfg, cfg.stage1, ck.provenance);
    ck.metrics = log_json(log);
    run.write("aligned/stage1.ckpt", save_checkpoint(ck));
    run.write("aligned/stage1_log.json", log_json(log).dump(2) + "\n");
    run.finish();
    return "train-align: " + describe(log);
}

std::string run_finetune(const ExperimentConfig& cfg) {
    Run run(cfg, "finetune");
    Checkpoint ck = run.checkpoint("aligned/stage1.ckpt", "train-align");
    const EmbeddingTable table = load_table(run.read("kge/table.txt", "train-kge"));
    const auto train = only_split(read_dataset(run), "train");
    const Tokenizer tok = Tokenizer::load(ck.tokenizer);
    const TrainLog log = train_stage2(tok, cfg.prompt, ck.lm_config, ck.lm, ck.projection_spec, ck.projection, table,
                                      train, cfg.stage2);
    ck.provenance = provenance(cfg, cfg.stage2, ck.provenance);
    ck.metrics = log_json(log);
    const EntityProjector proj(ck.projection_spec, ck.projection, table);
    ck.metrics["probe_loss"] = dataset_loss(tok, cfg.prompt, ck.lm_config, ck.lm, &proj, probe_set(train));
    run.write("aligned/model.ckpt", save_checkpoint(ck));
    run.write("aligned/stage2_log.json", log_json(log).dump(2) + "\n");
    run.finish();
    return "finetune: " + describe(log);
}

std::string run_evaluate(const ExperimentConfig& cfg, Arm arm) {
    Run run(cfg, "evaluate-" + to_string(arm));
    const KnowledgeGraph kg = read_kg(run);
    const auto test = only_split(read_dataset(run), "test");
    ArmEvaluation ev;
    if (arm == Arm::baseline) {
        const Checkpoint ck = run.checkpoint("baseline/model.ckpt", "train-baseline");
        ev = evaluate_arm(cfg, kg, test, ck, nullptr);
    } else {
        const Checkpoint ck = run.checkpoint("aligned/model.ckpt", "finetune");
        const EmbeddingTable table = load_table(run.read("kge/table.txt", "train-kge"));
        ev = evaluate_arm(cfg, kg, test, ck, &table);
    }
    const std::string dir = "eval/" + to_string(arm) + "/";
    const Json rep = report_json(to_string(arm), ev);
    run.write(dir + "predictions.jsonl", predictions_jsonl(ev));
    run.write(dir + "report.json", rep.dump(2) + "\n");
    run.finish(rep);
    return "evaluate " + to_string(arm) + ": EM " + fmt_double("%.4f", ev.report.mean.em) + " (collision EM " +
           fmt_double("%.4f", rep["collision"]["mean"]["EM"].get<double>()) + ")";
}

Comparison compare_reports(const MetricReport& baseline, const MetricReport& aligned,
                           const std::vector<bool>& collision_mask) {
    if (baseline.per_example.size() != aligned.per_example.size() ||
        collision_mask.size() != baseline.per_example.size())
        throw ContractError("compare: arms were evaluated on different example lists");
    Comparison c;
    auto add = [&](const std::string& name, const std::vector<bool>& mask) {
        const MetricReport b = subset(baseline, mask), a = subset(aligned, mask);
        ComparisonRow rb{name, "baseline", b.count, b.mean, {}}, ra{name, "ALIGNed", a.count, a.mean, {}};
        ComparisonRow d{name, "delta", a.count, {}, {}};
        for (const auto& f : kMetricFields) d.scores.*(f.member) = a.mean.*(f.member) - b.mean.*(f.member);
        std::vector<double> ea, eb;
        for (const auto& s : a.per_example) ea.push_back(s.em);
        for (const auto& s : b.per_example) eb.push_back(s.em);
        try {
            d.ttest = paired_ttest(ea, eb);
        } catch (const DegenerateInputError&) {
        } catch (const ContractError&) {
        }
        c.rows.push_back(rb);
        c.rows.push_back(ra);
        c.rows.push_back(d);
    };
    add("all", std::vector<bool>(collision_mask.size(), true));
    add("collision", collision_mask);
    return c;
}

std::string Comparison::csv() const {
    std::string out = "subset,row,n" + csv_header() + ",t_EM,p_EM,significant_EM\n";
    for (const auto& r : rows) {
        out += r.subset + "," + r.row + "," + std::to_string(r.n) + csv_scores(r.scores);
        if (r.ttest)
            out += "," + fmt_double("%.6f", r.ttest->t_statistic) + "," + fmt_double("%.6g", r.ttest->p_value) + "," +
                   (r.ttest->significant ? "true" : "false");
        else
            out += ",,,";
        out += "\n";
    }
    return out;
}

Json Comparison::json() const {
    Json rows_j = Json::array();
    for (const auto& r : rows) {
        Json j{{"subset", r.subset}, {"row", r.row}, {"n", r.n}, {"scores", scores_json(r.scores)}};
        if (r.ttest)
            j["ttest_EM"] = Json{{"t", r.ttest->t_statistic},
                                 {"p", r.ttest->p_value},
                                 {"significant", r.ttest->significant},
                                 {"n", r.ttest->n},
                                 {"mean_difference", r.ttest->mean_difference}};
        rows_j.push_back(j);
    }
    return Json{{"significance_level", kSignificanceLevel}, {"rows", rows_j}};
}

std::string run_compare(const ExperimentConfig& cfg) {
    Run run(cfg, "compare");
    const StoredPredictions b = read_predictions(run.read("eval/baseline/predictions.jsonl", "evaluate --arm baseline"));
    const StoredPredictions a = read_predictions(run.read("eval/aligned/predictions.jsonl", "evaluate --arm aligned"));
    if (a.gold != b.gold || a.collision != b.collision)
        throw ContractError("compare: baseline and aligned predictions cover different examples");
    const Comparison c = compare_reports(rescore(b), rescore(a), a.collision);
    run.write("compare/compare.csv", c.csv());
    run.write("compare/compare.json", c.json().dump(2) + "\n");
    run.finish();
    std::string s = "compare:";
    for (const auto& r : c.rows)
        if (r.row == "delta") s += " " + r.subset + " dEM " + fmt_double("%+.4f", r.scores.em);
    return s;
}

std::string run_error_report(const ExperimentConfig& cfg) {
    Run run(cfg, "error-report");
    const auto test = only_split(read_dataset(run), "test");
    std::map<std::string, ErrorBreakdown> by_arm;
    for (Arm arm : {Arm::baseline, Arm::aligned}) {
        const StoredPredictions p = read_predictions(
            run.read("eval/" + to_string(arm) + "/predictions.jsonl", ("evaluate --arm " + to_string(arm)).c_str()));
        if (p.gold.size() != test.size()) throw ContractError("error-report: predictions do not match the test split");
        by_arm[to_string(arm)] = error_breakdown(test, p.prediction);
    }
    std::string csv = "category,baseline,ALIGNed\n";
    Json j = Json::object();
    for (auto cat : kErrorCategories) {
        const int b = by_arm["baseline"].counts[cat], a = by_arm["aligned"].counts[cat];
        csv += to_string(cat) + "," + std::to_string(b) + "," + std::to_string(a) + "\n";
        j[to_string(cat)] = Json{{"baseline", b}, {"ALIGNed", a}};
    }
    csv += "total," + std::to_string(by_arm["baseline"].total) + "," + std::to_string(by_arm["aligned"].total) + "\n";
    run.write("errors/error_report.csv", csv);
    run.write("errors/error_report.json", j.dump(2) + "\n");
    run.finish();
    return "error-report: " + std::to_string(test.size()) + " test examples classified";
}

std::string run_ablate(const ExperimentConfig& cfg, const std::vector<ProjectionVariant>& variants,
                       const std::vector<int>& dims) {
    if (variants.empty()) throw ConfigError("ablate: no projection variants");
    Run run(cfg, "ablate");
    const KnowledgeGraph kg = read_kg(run);
    const auto all = read_dataset(run);
    const auto train = only_split(all, "train"), test = only_split(all, "test");
    const Checkpoint base = run.checkpoint("lm/base.ckpt", "pretrain-lm");
    const Tokenizer tok = Tokenizer::load(base.tokenizer);
    std::vector<int> ds = dims.empty() ? std::vector<int>{cfg.kge.dim} : dims;

    std::string csv = "variant,kge_dim,n" + csv_header() + ",collision_n,collision_EM\n";
    Json rows = Json::array();
    for (int dim : ds) {
        EmbeddingTable table;
        if (dim == cfg.kge.dim && run.exists("kge/table.txt")) {
            table = load_table(run.read("kge/table.txt", "train-kge"));
        } else {
            TranseConfig kc = cfg.kge;
            kc.dim = dim;
            table = train_transe(kg, kc);
        }
        for (ProjectionVariant v : variants) {
            Checkpoint ck = base;
            ck.has_projection = true;
            ck.projection_spec = projection_spec(cfg, v, dim);
            ck.projection = init_projection(ck.projection_spec, derive_seed(cfg.seed, "projection"));
            train_stage1(tok, cfg.prompt, ck.lm_config, ck.lm, ck.projection_spec, ck.projection, table,
                         table.entity_labels, cfg.stage1);
            train_stage2(tok, cfg.prompt, ck.lm_config, ck.lm, ck.projection_spec, ck.projection, table, train,
                         cfg.stage2);
            const ArmEvaluation ev = evaluate_arm(cfg, kg, test, ck, &table);
            const MetricReport coll = subset(ev.report, ev.collision);
            csv += to_string(v) + "," + std::to_string(dim) + "," + std::to_string(ev.report.count) +
                   csv_scores(ev.report.mean) + "," + std::to_string(coll.count) + "," +
                   fmt_double("%.6f", coll.mean.em) + "\n";
            rows.push_back(Json{{"variant", to_string(v)},
                                {"kge_dim", dim},
                                {"n", ev.report.count},
                                {"mean", scores_json(ev.report.mean)},
                                {"collision", Json{{"count", coll.count}, {"EM", coll.mean.em}}}});
        }
    }
    run.write("ablate/ablation.csv", csv);
    run.write("ablate/ablation.json", rows.dump(2) + "\n");
    run.finish();
    return "ablate: " + std::to_string(rows.size()) + " rows";
}

std::vector<std::string> run_pipeline(const ExperimentConfig& cfg) {
    std::vector<std::string> out;
    auto step = [&](const std::string& s) {
        out.push_back(s);
        std::cout << s << std::endl;
    };
    step(run_gen_kg(cfg));
    step(run_train_kge(cfg));
    step(run_gen_qa(cfg));
    step(run_pretrain_lm(cfg));
    step(run_train_baseline(cfg));
    step(run_train_align(cfg));
    step(run_finetune(cfg));
    step(run_evaluate(cfg, Arm::baseline));
    step(run_evaluate(cfg, Arm::aligned));
    step(run_compare(cfg));
    step(run_error_report(cfg));
    return out;
}

}  // namespace kgalign
