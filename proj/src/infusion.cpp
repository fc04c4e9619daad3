#include "kgalign/infusion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

namespace kgalign {

namespace {

std::string header(const PromptFormat& fmt) { return fmt.system_message + " <STOP>\n"; }

PromptRender finish(const Tokenizer& tok, std::string prompt, const std::string& response) {
    PromptRender r;
    r.ids = tok.encode(prompt);
    r.response_begin = static_cast<int>(r.ids.size());
    r.text = prompt + " " + response + " <STOP>";
    r.ids = tok.encode(r.text);
    r.response_end = static_cast<int>(r.ids.size());
    r.slot = find_slot(r.ids);
    if (r.response_end - r.response_begin < 1) throw ContractError("render has an empty response");
    return r;
}

std::string alignment_prompt_text(const PromptFormat& fmt) { return header(fmt) + "Human: <ENT> <STOP>\nAssistant:"; }

void check_dims(const LmConfig& cfg, const ProjectionSpec& spec, const EmbeddingTable& table) {
    if (spec.output_dim != cfg.model_dim)
        throw ContractError("projection output width " + std::to_string(spec.output_dim) + " differs from LM width " +
                            std::to_string(cfg.model_dim));
    if (spec.input_dim != table.d_e())
        throw ContractError("projection input width " + std::to_string(spec.input_dim) +
                            " differs from entity embedding width " + std::to_string(table.d_e()));
}

void check_fits(const LmConfig& cfg, const PromptRender& r) {
    if (static_cast<int>(r.ids.size()) > cfg.context_len)
        throw ContractError("render of " + std::to_string(r.ids.size()) + " tokens exceeds the context of " +
                            std::to_string(cfg.context_len));
}

void require_stage(const TrainPlan& plan, Stage want) {
    plan.validate();
    if (plan.stage != want) throw ContractError("plan stage is " + to_string(plan.stage) + ", expected " + to_string(want));
}

// Shared epoch/batch loop. step(batch indices, optimizer, lr) returns the batch mean loss.
template <typename StepFn>
TrainLog run_loop(const TrainPlan& plan, size_t n_items, StepFn step) {
    if (n_items == 0) throw ContractError("training set is empty");
    const size_t bs = static_cast<size_t>(plan.batch_size);
    const long per_epoch = static_cast<long>((n_items + bs - 1) / bs);
    const long total = per_epoch * plan.epochs;
    Rng order(derive_seed(plan.seed, "batch-order"));
    Optimizer opt(plan.optimizer);
    std::vector<size_t> idx(n_items);
    TrainLog log;
    for (int ep = 0; ep < plan.epochs; ++ep) {
        std::iota(idx.begin(), idx.end(), size_t{0});
        order.shuffle(idx);
        double sum = 0.0;
        for (size_t i = 0; i < n_items; i += bs) {
            const std::vector<size_t> batch(idx.begin() + static_cast<long>(i),
                                            idx.begin() + static_cast<long>(std::min(n_items, i + bs)));
            opt.next_step();
            const double l = step(batch, opt, warmup_lr(plan.learning_rate, plan.warmup_ratio, opt.steps(), total));
            log.step_loss.push_back(l);
            sum += l * static_cast<double>(batch.size());
        }
        log.epoch_loss.push_back(sum / static_cast<double>(n_items));
    }
    return log;
}

struct ProjectionAccum {
    std::vector<Mat> weights;
    std::vector<Vec> biases;

    explicit ProjectionAccum(const ProjectionParams& p) {
        for (const auto& w : p.weights) weights.push_back(Mat::Zero(w.rows(), w.cols()));
        for (const auto& b : p.biases) biases.push_back(Vec::Zero(b.size()));
    }
    void add(const ProjectionGrads& g) {
        for (size_t k = 0; k < weights.size(); ++k) {
            weights[k] += g.weights[k];
            biases[k] += g.biases[k];
        }
    }
};

void update_projection(Optimizer& opt, ProjectionParams& p, const ProjectionAccum& g, double lr) {
    for (size_t k = 0; k < p.weights.size(); ++k) {
        opt.update("projection.weight." + std::to_string(k), p.weights[k].data(), g.weights[k].data(),
                   static_cast<size_t>(p.weights[k].size()), lr);
        opt.update("projection.bias." + std::to_string(k), p.biases[k].data(), g.biases[k].data(),
                   static_cast<size_t>(p.biases[k].size()), lr);
    }
}

void update_lm(Optimizer& opt, LmParams& lm, const LmParams& grads, double lr) {
    auto params = lm.tensors();
    const auto g = grads.tensors();
    for (size_t i = 0; i < params.size(); ++i)
        opt.update("lm." + params[i].first, params[i].second->data(), g[i].second->data(),
                   static_cast<size_t>(params[i].second->size()), lr);
}

// Prefixes from the projector, projection gradients from the prefix
// gradients. head is null when the LM stays frozen.
double infused_step(const LmConfig& cfg, const LmParams& lm, Mat* head, const EntityProjector& proj,
                    ProjectionParams& projection, const std::vector<LmExample>& all,
                    const std::vector<std::string>& labels, const std::vector<size_t>& idx, Optimizer& opt,
                    double lr) {
    std::vector<LmExample> batch;
    std::vector<Vec> inputs;
    for (size_t i : idx) {
        batch.push_back(all[i]);
        inputs.push_back(proj.input(labels[i]));
        batch.back().prefix = project(proj.spec, projection, inputs.back());
    }
    const GradRequest req{false, head != nullptr, true};
    const BackwardResult res = backward(cfg, lm, batch, req);
    ProjectionAccum acc(projection);
    for (size_t k = 0; k < batch.size(); ++k)
        acc.add(project_gradients(proj.spec, projection, inputs[k], res.prefix_grads[k]));
    update_projection(opt, projection, acc, lr);
    if (head) opt.update("lm.head", head->data(), res.grads.head.data(), static_cast<size_t>(head->size()), lr);
    return res.loss;
}

}  // namespace

LmExample PromptRender::example() const {
    LmExample ex;
    ex.ids = ids;
    for (int i = response_begin; i < response_end; ++i) ex.loss_positions.push_back(i);
    return ex;
}

std::string qa_prompt_text(const PromptFormat& fmt, const std::string& question, bool infuse) {
    return header(fmt) + (infuse ? "Human:<ENT> " : "Human: ") + question + " <STOP>\nAssistant:";
}

std::string anonymize_question(const QaExample& ex, const std::string& replacement) {
    std::string q = ex.question;
    if (ex.reference_entity.empty()) return q;
    size_t pos = 0;
    while ((pos = q.find(ex.reference_entity, pos)) != std::string::npos) {
        q.replace(pos, ex.reference_entity.size(), replacement);
        pos += replacement.size();
    }
    return q;
}

PromptRender render_qa(const Tokenizer& tok, const PromptFormat& fmt, const QaExample& ex, bool infuse,
                       bool anonymize) {
    const std::string q = anonymize ? anonymize_question(ex, fmt.anonymous_reference) : ex.question;
    PromptRender r = finish(tok, qa_prompt_text(fmt, q, infuse), ex.answer);
    if (infuse && r.slot < 0) throw ContractError("infused render lost its slot");
    if (!infuse && r.slot >= 0) throw ContractError("question text contains the slot marker");
    return r;
}

PromptRender render_alignment(const Tokenizer& tok, const PromptFormat& fmt, const std::string& label) {
    return finish(tok, alignment_prompt_text(fmt), label);
}

Tokenizer build_tokenizer(const PromptFormat& fmt, const std::vector<QaExample>& examples,
                          const std::vector<std::string>& entity_labels) {
    std::vector<std::string> texts{alignment_prompt_text(fmt), fmt.anonymous_reference};
    for (const auto& ex : examples) {
        texts.push_back(qa_prompt_text(fmt, ex.question, true) + " " + ex.answer);
        texts.push_back(anonymize_question(ex, fmt.anonymous_reference));
    }
    for (const auto& l : entity_labels) texts.push_back(l);
    return Tokenizer::build(texts);
}

EntityProjector::EntityProjector(const ProjectionSpec& spec_, const ProjectionParams& params_,
                                 const EmbeddingTable& table_)
    : spec(spec_), params(params_), table(table_) {
    spec.validate();
    check_params(spec, params);
    if (spec.input_dim != table.d_e()) throw ContractError("projection input width differs from the entity table");
    for (size_t i = 0; i < table.entity_labels.size(); ++i) rows_.emplace(table.entity_labels[i], static_cast<int>(i));
}

int EntityProjector::row(const std::string& label) const {
    auto it = rows_.find(label);
    if (it == rows_.end()) throw LookupError("entity '" + label + "' has no embedding; the KG and QA data disagree");
    return it->second;
}

Vec EntityProjector::input(const std::string& label) const { return table.entity_vectors.row(row(label)).transpose(); }

Vec EntityProjector::operator()(const std::string& label) const { return project(spec, params, input(label)); }

AssembledInput assemble_input(const Tokenizer& tok, const PromptFormat& fmt, const LmConfig& cfg,
                              const LmParams& lm, const QaExample& ex, const EntityProjector* projector) {
    AssembledInput a;
    a.render = render_qa(tok, fmt, ex, projector != nullptr);
    check_fits(cfg, a.render);
    const int T = static_cast<int>(a.render.ids.size());
    a.embeddings.resize(T, cfg.model_dim);
    for (int i = 0; i < T; ++i) a.embeddings.row(i) = lm.token_embedding.row(a.render.ids[static_cast<size_t>(i)]);
    if (projector) {
        if (projector->spec.output_dim != cfg.model_dim) throw ContractError("projection output width differs from LM width");
        a.embeddings.row(a.render.slot) = (*projector)(ex.reference_entity).transpose();
    }
    a.loss_mask.assign(static_cast<size_t>(T), 0);
    for (int i = a.render.response_begin; i < a.render.response_end; ++i) a.loss_mask[static_cast<size_t>(i)] = 1;
    return a;
}

std::string to_string(Stage s) {
    switch (s) {
        case Stage::base_pretrain: return "base_pretrain";
        case Stage::feature_alignment: return "feature_alignment";
        case Stage::end_to_end: return "end_to_end";
        case Stage::baseline_finetune: return "baseline_finetune";
    }
    return "?";
}

std::string to_string(Trainable t) {
    switch (t) {
        case Trainable::lm_all: return "lm_all";
        case Trainable::projection_only: return "projection_only";
        case Trainable::projection_plus_head: return "projection_plus_head";
    }
    return "?";
}

std::string to_string(OptimizerKind o) { return o == OptimizerKind::sgd ? "sgd" : "adam"; }

Stage parse_stage(const std::string& s) {
    for (Stage v : {Stage::base_pretrain, Stage::feature_alignment, Stage::end_to_end, Stage::baseline_finetune})
        if (to_string(v) == s) return v;
    throw ConfigError("unknown stage '" + s + "'");
}

Trainable parse_trainable(const std::string& s) {
    for (Trainable v : {Trainable::lm_all, Trainable::projection_only, Trainable::projection_plus_head})
        if (to_string(v) == s) return v;
    throw ConfigError("unknown trainable set '" + s + "'");
}

OptimizerKind parse_optimizer(const std::string& s) {
    if (s == "sgd") return OptimizerKind::sgd;
    if (s == "adam") return OptimizerKind::adam;
    throw ConfigError("unknown optimizer '" + s + "'");
}

void TrainPlan::validate() const {
    const Trainable want = stage == Stage::feature_alignment ? Trainable::projection_only
                           : stage == Stage::end_to_end      ? Trainable::projection_plus_head
                                                             : Trainable::lm_all;
    if (trainable != want)
        throw ConfigError("stage " + to_string(stage) + " trains " + to_string(want) + ", not " + to_string(trainable));
    if (!(learning_rate >= 0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be >= 0");
    if (!(warmup_ratio >= 0 && warmup_ratio < 1)) throw ConfigError("warmup_ratio must lie in [0, 1)");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(anonymize_rate >= 0 && anonymize_rate <= 1)) throw ConfigError("anonymize_rate must lie in [0, 1]");
}

TrainPlan TrainPlan::defaults(Stage stage) {
    TrainPlan p;
    p.stage = stage;
    switch (stage) {
        case Stage::base_pretrain:
            p.trainable = Trainable::lm_all;
            p.learning_rate = 3e-3;
            p.epochs = 30;
            break;
        case Stage::feature_alignment:
            p.trainable = Trainable::projection_only;
            p.learning_rate = 2e-5;
            p.epochs = 50;
            break;
        case Stage::end_to_end:
            p.trainable = Trainable::projection_plus_head;
            break;
        case Stage::baseline_finetune:
            p.trainable = Trainable::lm_all;
            break;
    }
    return p;
}

double warmup_lr(double lr, double warmup_ratio, long step, long total_steps) {
    const double w = warmup_ratio * static_cast<double>(total_steps);
    if (w <= 0) return lr;
    return lr * std::min(1.0, static_cast<double>(step) / w);
}

Optimizer::Optimizer(OptimizerKind kind, double beta1, double beta2, double eps)
    : kind_(kind), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Optimizer::next_step() { ++t_; }

void Optimizer::update(const std::string& name, double* param, const double* grad, size_t n, double lr) {
    if (t_ < 1) throw ContractError("Optimizer::update before next_step");
    if (kind_ == OptimizerKind::sgd) {
        for (size_t i = 0; i < n; ++i) param[i] -= lr * grad[i];
        return;
    }
    auto& [m, v] = state_[name];
    if (m.empty()) {
        m.assign(n, 0.0);
        v.assign(n, 0.0);
    }
    if (m.size() != n) throw ContractError("optimizer state for '" + name + "' changed size");
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (size_t i = 0; i < n; ++i) {
        m[i] = beta1_ * m[i] + (1.0 - beta1_) * grad[i];
        v[i] = beta2_ * v[i] + (1.0 - beta2_) * grad[i] * grad[i];
        param[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
}

TrainLog pretrain_base(const Tokenizer& tok, const PromptFormat& fmt, const LmConfig& cfg, LmParams& lm,
                       const std::vector<QaExample>& train, const std::vector<std::string>& entity_labels,
                       const TrainPlan& plan) {
    require_stage(plan, Stage::base_pretrain);
    check_params(cfg, lm);
    // item kinds: 0 plain QA, 1 slot QA, 2 naming prompt
    struct Item {
        int kind;
        size_t index;
    };
    std::vector<Item> items;
    std::vector<PromptRender> plain, slot, slot_anon, naming;
    std::vector<std::vector<int>> slot_words, naming_words;
    for (size_t i = 0; i < train.size(); ++i) {
        plain.push_back(render_qa(tok, fmt, train[i], false));
        slot.push_back(render_qa(tok, fmt, train[i], true));
        slot_anon.push_back(render_qa(tok, fmt, train[i], true, true));
        slot_words.push_back(tok.encode(train[i].reference_entity));
        for (const auto* r : {&plain.back(), &slot.back(), &slot_anon.back()}) check_fits(cfg, *r);
        items.push_back({0, i});
        items.push_back({1, i});
    }
    for (size_t i = 0; i < entity_labels.size(); ++i) {
        naming.push_back(render_alignment(tok, fmt, entity_labels[i]));
        naming_words.push_back(tok.encode(entity_labels[i]));
        check_fits(cfg, naming.back());
        items.push_back({2, i});
    }
    Rng anon(derive_seed(plan.seed, "anonymize"));
    return run_loop(plan, items.size(), [&](const std::vector<size_t>& idx, Optimizer& opt, double lr) {
        std::vector<LmExample> batch;
        std::vector<const std::vector<int>*> soft;  // label words behind each prefix
        for (size_t i : idx) {
            const Item& it = items[i];
            const std::vector<int>* words = nullptr;
            if (it.kind == 0) {
                batch.push_back(plain[it.index].example());
            } else if (it.kind == 1) {
                const bool drop = anon.uniform() < plan.anonymize_rate;
                batch.push_back((drop ? slot_anon : slot)[it.index].example());
                words = &slot_words[it.index];
            } else {
                batch.push_back(naming[it.index].example());
                words = &naming_words[it.index];
            }
            if (words) {
                if (words->empty()) throw ContractError("entity label has no words");
                Vec mean = Vec::Zero(cfg.model_dim);
                for (int w : *words) mean += lm.token_embedding.row(w).transpose();
                batch.back().prefix = mean / static_cast<double>(words->size());
            }
            soft.push_back(words);
        }
        BackwardResult res = backward(cfg, lm, batch, GradRequest{true, true, true});
        for (size_t k = 0; k < batch.size(); ++k) {
            if (!soft[k]) continue;
            const double share = 1.0 / static_cast<double>(soft[k]->size());
            for (int w : *soft[k]) res.grads.token_embedding.row(w) += share * res.prefix_grads[k].transpose();
        }
        update_lm(opt, lm, res.grads, lr);
        return res.loss;
    });
}

TrainLog train_stage1(const Tokenizer& tok, const PromptFormat& fmt, const LmConfig& cfg, const LmParams& lm,
                      const ProjectionSpec& spec, ProjectionParams& projection, const EmbeddingTable& table,
                      const std::vector<std::string>& entity_labels, const TrainPlan& plan) {
    require_stage(plan, Stage::feature_alignment);
    check_dims(cfg, spec, table);
    check_params(cfg, lm);
    const EntityProjector proj(spec, projection, table);
    std::vector<LmExample> all;
    for (const auto& label : entity_labels) {
        proj.row(label);
        const PromptRender r = render_alignment(tok, fmt, label);
        check_fits(cfg, r);
        all.push_back(r.example());
    }
    return run_loop(plan, all.size(), [&](const std::vector<size_t>& idx, Optimizer& opt, double lr) {
        return infused_step(cfg, lm, nullptr, proj, projection, all, entity_labels, idx, opt, lr);
    });
}

TrainLog train_stage2(const Tokenizer& tok, const PromptFormat& fmt, const LmConfig& cfg, LmParams& lm,
                      const ProjectionSpec& spec, ProjectionParams& projection, const EmbeddingTable& table,
                      const std::vector<QaExample>& train, const TrainPlan& plan) {
    require_stage(plan, Stage::end_to_end);
    check_dims(cfg, spec, table);
    check_params(cfg, lm);
    const EntityProjector proj(spec, projection, table);
    std::vector<LmExample> all;
    std::vector<std::string> labels;
    for (const auto& ex : train) {
        proj.row(ex.reference_entity);
        const PromptRender r = render_qa(tok, fmt, ex, true);
        check_fits(cfg, r);
        all.push_back(r.example());
        labels.push_back(ex.reference_entity);
    }
    return run_loop(plan, all.size(), [&](const std::vector<size_t>& idx, Optimizer& opt, double lr) {
        return infused_step(cfg, lm, &lm.head, proj, projection, all, labels, idx, opt, lr);
    });
}

TrainLog train_baseline(const Tokenizer& tok, const PromptFormat& fmt, const LmConfig& cfg, LmParams& lm,
                        const std::vector<QaExample>& train, const TrainPlan& plan) {
    require_stage(plan, Stage::baseline_finetune);
    check_params(cfg, lm);
    std::vector<LmExample> all;
    for (const auto& ex : train) {
        const PromptRender r = render_qa(tok, fmt, ex, false);
        check_fits(cfg, r);
        all.push_back(r.example());
    }
    return run_loop(plan, all.size(), [&](const std::vector<size_t>& idx, Optimizer& opt, double lr) {
        std::vector<LmExample> batch;
        for (size_t i : idx) batch.push_back(all[i]);
        const BackwardResult res = backward(cfg, lm, batch, GradRequest{true, true, false});
        update_lm(opt, lm, res.grads, lr);
        return res.loss;
    });
}

std::vector<std::string> predict(const Tokenizer& tok, const PromptFormat& fmt, const LmConfig& cfg,
                                 const LmParams& lm, const EntityProjector* projector,
                                 const std::vector<QaExample>& examples, int max_new_tokens, int threads) {
    if (projector && projector->spec.output_dim != cfg.model_dim)
        throw ContractError("projection output width differs from LM width");
    std::vector<PromptRender> renders;
    std::vector<Vec> prefixes;
    for (const auto& ex : examples) {
        renders.push_back(render_qa(tok, fmt, ex, projector != nullptr));
        if (renders.back().response_begin >= cfg.context_len) throw ContractError("prompt fills the whole context");
        prefixes.push_back(projector ? (*projector)(ex.reference_entity) : Vec());
    }
    std::vector<std::string> out(examples.size());
    auto work = [&](size_t first, size_t stride) {
        for (size_t i = first; i < examples.size(); i += stride) {
            std::vector<int> ids = generate(cfg, lm, renders[i].prompt_ids(), projector ? &prefixes[i] : nullptr,
                                            max_new_tokens);
            if (!ids.empty() && ids.back() == Tokenizer::STOP) ids.pop_back();
            out[i] = tok.decode(ids);
        }
    };
    const size_t n_threads = static_cast<size_t>(std::max(1, threads));
    if (n_threads == 1) {
        work(0, 1);
    } else {
        std::vector<std::thread> pool;
        for (size_t t = 0; t < n_threads; ++t) pool.emplace_back(work, t, n_threads);
        for (auto& th : pool) th.join();
    }
    return out;
}

double dataset_loss(const Tokenizer& tok, const PromptFormat& fmt, const LmConfig& cfg, const LmParams& lm,
                    const EntityProjector* projector, const std::vector<QaExample>& examples,
                    const ForwardOptions& opts) {
    std::vector<LmExample> batch;
    for (const auto& ex : examples) {
        const PromptRender r = render_qa(tok, fmt, ex, projector != nullptr);
        check_fits(cfg, r);
        batch.push_back(r.example());
        if (projector) batch.back().prefix = (*projector)(ex.reference_entity);
    }
    return batch_loss(cfg, lm, batch, opts);
}

}  // namespace kgalign
