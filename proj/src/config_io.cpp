#include "kgalign/config_io.hpp"

namespace kgalign {

JsonReader::JsonReader(const Json& j, std::string pointer) : j_(j), pointer_(std::move(pointer)) {
    if (!j_.is_object()) throw ConfigError((pointer_.empty() ? "/" : pointer_) + ": expected an object");
}

const Json* JsonReader::find(const char* key) {
    auto it = j_.find(key);
    if (it == j_.end()) return nullptr;
    seen_.insert(key);
    return &*it;
}

void JsonReader::get(const char* key, int& out) {
    const Json* v = find(key);
    if (!v) return;
    if (!v->is_number_integer()) throw ConfigError(at(key) + ": expected an integer");
    const auto x = v->get<int64_t>();
    if (x < INT32_MIN || x > INT32_MAX) throw ConfigError(at(key) + ": integer out of range");
    out = static_cast<int>(x);
}

void JsonReader::get(const char* key, uint64_t& out) {
    const Json* v = find(key);
    if (!v) return;
    // a programmatically built 4 is signed; parsed text gives unsigned
    if (!v->is_number_integer() || (!v->is_number_unsigned() && v->get<int64_t>() < 0))
        throw ConfigError(at(key) + ": expected a non-negative integer");
    out = v->get<uint64_t>();
}

void JsonReader::get(const char* key, double& out) {
    const Json* v = find(key);
    if (!v) return;
    if (!v->is_number()) throw ConfigError(at(key) + ": expected a number");
    out = v->get<double>();
}

void JsonReader::get(const char* key, bool& out) {
    const Json* v = find(key);
    if (!v) return;
    if (!v->is_boolean()) throw ConfigError(at(key) + ": expected true or false");
    out = v->get<bool>();
}

void JsonReader::get(const char* key, std::string& out) {
    const Json* v = find(key);
    if (!v) return;
    if (!v->is_string()) throw ConfigError(at(key) + ": expected a string");
    out = v->get<std::string>();
}

const Json& JsonReader::child(const char* key) {
    const Json* v = find(key);
    if (!v) throw LookupError(at(key) + ": missing");
    return *v;
}

void JsonReader::finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
        if (!seen_.count(it.key())) throw ConfigError(pointer_ + "/" + it.key() + ": unknown field");
}

Json to_json(const TranseConfig& c) {
    return Json{{"dim", c.dim},
                {"margin", c.margin},
                {"learning_rate", c.learning_rate},
                {"epochs", c.epochs},
                {"negatives_per_positive", c.negatives_per_positive},
                {"seed", c.seed},
                {"norm_entities", c.norm_entities}};
}

Json to_json(const ProjectionSpec& s) {
    return Json{{"variant", to_string(s.variant)},
                {"input_dim", s.input_dim},
                {"output_dim", s.output_dim},
                {"depth", s.depth},
                {"final_activation", to_string(s.final_activation)}};
}

Json to_json(const LmConfig& c) {
    return Json{{"vocab_size", c.vocab_size}, {"model_dim", c.model_dim},     {"layers", c.layers},
                {"heads", c.heads},           {"context_len", c.context_len}, {"ffn_mult", c.ffn_mult},
                {"seed", c.seed}};
}

Json to_json(const TrainPlan& p) {
    return Json{{"stage", to_string(p.stage)},
                {"trainable", to_string(p.trainable)},
                {"optimizer", to_string(p.optimizer)},
                {"learning_rate", p.learning_rate},
                {"warmup_ratio", p.warmup_ratio},
                {"epochs", p.epochs},
                {"batch_size", p.batch_size},
                {"seed", p.seed},
                {"anonymize_rate", p.anonymize_rate}};
}

Json to_json(const QaConfig& c) {
    return Json{{"max_answers", c.max_answers}, {"negative_rate", c.negative_rate}, {"seed", c.seed}};
}

Json to_json(const SynthConfig& c) {
    return Json{{"n_components", c.n_components}, {"collision_pairs", c.collision_pairs}, {"seed", c.seed}};
}

Json to_json(const PromptFormat& f) {
    return Json{{"system_message", f.system_message}, {"anonymous_reference", f.anonymous_reference}};
}

void from_json(const Json& j, const std::string& pointer, TranseConfig& out) {
    JsonReader r(j, pointer);
    r.get("dim", out.dim);
    r.get("margin", out.margin);
    r.get("learning_rate", out.learning_rate);
    r.get("epochs", out.epochs);
    r.get("negatives_per_positive", out.negatives_per_positive);
    r.get("seed", out.seed);
    r.get("norm_entities", out.norm_entities);
    r.finish();
    validate_at(pointer, [&] { out.validate(); });
}

void from_json(const Json& j, const std::string& pointer, ProjectionSpec& out) {
    JsonReader r(j, pointer);
    std::string variant = to_string(out.variant), act = to_string(out.final_activation);
    r.get("variant", variant);
    r.get("input_dim", out.input_dim);
    r.get("output_dim", out.output_dim);
    r.get("depth", out.depth);
    r.get("final_activation", act);
    r.finish();
    validate_at(r.at("variant"), [&] { out.variant = parse_variant(variant); });
    validate_at(r.at("final_activation"), [&] { out.final_activation = parse_activation(act); });
}

void from_json(const Json& j, const std::string& pointer, LmConfig& out) {
    JsonReader r(j, pointer);
    r.get("vocab_size", out.vocab_size);
    r.get("model_dim", out.model_dim);
    r.get("layers", out.layers);
    r.get("heads", out.heads);
    r.get("context_len", out.context_len);
    r.get("ffn_mult", out.ffn_mult);
    r.get("seed", out.seed);
    r.finish();
}

void from_json(const Json& j, const std::string& pointer, TrainPlan& out) {
    JsonReader r(j, pointer);
    std::string stage = to_string(out.stage), trainable = to_string(out.trainable), opt = to_string(out.optimizer);
    r.get("stage", stage);
    r.get("trainable", trainable);
    r.get("optimizer", opt);
    r.get("learning_rate", out.learning_rate);
    r.get("warmup_ratio", out.warmup_ratio);
    r.get("epochs", out.epochs);
    r.get("batch_size", out.batch_size);
    r.get("seed", out.seed);
    r.get("anonymize_rate", out.anonymize_rate);
    r.finish();
    validate_at(r.at("stage"), [&] { out.stage = parse_stage(stage); });
    validate_at(r.at("trainable"), [&] { out.trainable = parse_trainable(trainable); });
    validate_at(r.at("optimizer"), [&] { out.optimizer = parse_optimizer(opt); });
    validate_at(pointer, [&] { out.validate(); });
}

void from_json(const Json& j, const std::string& pointer, QaConfig& out) {
    JsonReader r(j, pointer);
    r.get("max_answers", out.max_answers);
    r.get("negative_rate", out.negative_rate);
    r.get("seed", out.seed);
    r.finish();
    if (out.max_answers < 1) throw ConfigError(r.at("max_answers") + ": must be >= 1");
    if (!(out.negative_rate >= 0 && out.negative_rate <= 1))
        throw ConfigError(r.at("negative_rate") + ": must lie in [0, 1]");
}

void from_json(const Json& j, const std::string& pointer, SynthConfig& out) {
    JsonReader r(j, pointer);
    r.get("n_components", out.n_components);
    r.get("collision_pairs", out.collision_pairs);
    r.get("seed", out.seed);
    r.finish();
    if (out.n_components < 1) throw ConfigError(r.at("n_components") + ": must be >= 1");
    if (out.collision_pairs < 0) throw ConfigError(r.at("collision_pairs") + ": must be >= 0");
}

void from_json(const Json& j, const std::string& pointer, PromptFormat& out) {
    JsonReader r(j, pointer);
    r.get("system_message", out.system_message);
    r.get("anonymous_reference", out.anonymous_reference);
    r.finish();
    if (split_ws(out.anonymous_reference).size() != 1)
        throw ConfigError(r.at("anonymous_reference") + ": must be a single word");
}

Json parse_json(std::string_view text, const std::string& what) {
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ParseError(what + ": " + e.what());
    }
}

}  // namespace kgalign
