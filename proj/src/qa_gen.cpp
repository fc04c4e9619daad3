#include "kgalign/qa_gen.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "json.hpp"

using json = nlohmann::ordered_json;

namespace kgalign {

std::string to_string(QaMode m) {
    switch (m) {
        case QaMode::open: return "open";
        case QaMode::verification: return "verification";
        case QaMode::counting: return "counting";
    }
    return "?";
}

QaMode parse_mode(const std::string& s) {
    if (s == "open") return QaMode::open;
    if (s == "verification") return QaMode::verification;
    if (s == "counting") return QaMode::counting;
    throw ConfigError("unknown template mode '" + s + "'");
}

namespace {

bool has(const std::string& s, std::string_view slot) { return s.find(slot) != std::string::npos; }

std::string replace_all(std::string s, std::string_view from, const std::string& to) {
    size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
        s.replace(pos, from.size(), to);
        pos += to.size();
    }
    return s;
}

}  // namespace

bool QaTemplate::asks_tails() const { return has(pattern, "{x}"); }

void QaTemplate::validate() const {
    const std::string where = "template '" + id + "': ";
    if (relation.empty()) throw ConfigError(where + "empty relation");
    const bool X = has(pattern, "{X}"), Y = has(pattern, "{Y}"), Z = has(pattern, "{Z}"), x = has(pattern, "{x}");
    switch (mode) {
        case QaMode::open:
            if (X || Z || (Y == x)) throw ConfigError(where + "open patterns take exactly one of {Y} or {x}");
            break;
        case QaMode::verification:
            if (!X || !Y || Z || x) throw ConfigError(where + "verification patterns take {X} and {Y}");
            break;
        case QaMode::counting:
            if (!Y || X || x) throw ConfigError(where + "counting patterns take {Y} and optionally {Z}");
            break;
    }
}

std::vector<QaTemplate> load_templates(std::string_view json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("template file: ") + e.what());
    }
    if (!doc.is_array()) throw ConfigError("template file must be a JSON array");
    std::vector<QaTemplate> out;
    std::map<std::string, int> per_key;
    for (size_t i = 0; i < doc.size(); ++i) {
        const json& t = doc[i];
        const std::string ptr = "/" + std::to_string(i);
        if (!t.is_object() || !t.contains("relation") || !t.contains("pattern") || !t.contains("mode"))
            throw ConfigError(ptr + ": template needs relation, pattern and mode");
        QaTemplate q;
        try {
            q.relation = t.at("relation").get<std::string>();
            q.pattern = t.at("pattern").get<std::string>();
            q.mode = parse_mode(t.at("mode").get<std::string>());
        } catch (const json::exception& e) {
            throw ConfigError(ptr + ": " + e.what());
        }
        if (t.contains("id")) {
            q.id = t.at("id").get<std::string>();
        } else {
            const std::string key = q.relation + "/" + to_string(q.mode);
            q.id = key + "/" + std::to_string(per_key[key]++);
        }
        q.validate();
        out.push_back(std::move(q));
    }
    return out;
}

std::string to_jsonl(const std::vector<QaExample>& examples) {
    std::string out;
    for (const auto& e : examples) {
        json j;
        j["reference_entity"] = e.reference_entity;
        j["question"] = e.question;
        j["answer"] = e.answer;
        j["relation"] = e.relation;
        j["template_id"] = e.template_id;
        j["mode"] = to_string(e.mode);
        j["polarity"] = e.positive ? "positive" : "negative";
        j["split"] = e.split;
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::vector<QaExample> load_jsonl(std::string_view text) {
    std::vector<QaExample> out;
    size_t line_no = 0;
    for (const auto& line : split(text, '\n')) {
        ++line_no;
        if (line.empty()) continue;
        try {
            const json j = json::parse(line);
            QaExample e;
            e.reference_entity = j.at("reference_entity").get<std::string>();
            e.question = j.at("question").get<std::string>();
            e.answer = j.at("answer").get<std::string>();
            e.relation = j.at("relation").get<std::string>();
            e.template_id = j.at("template_id").get<std::string>();
            e.mode = parse_mode(j.at("mode").get<std::string>());
            const std::string pol = j.at("polarity").get<std::string>();
            if (pol != "positive" && pol != "negative") throw ParseError("bad polarity '" + pol + "'");
            e.positive = pol == "positive";
            e.split = j.value("split", "");
            out.push_back(std::move(e));
        } catch (const json::exception& ex) {
            throw ParseError("dataset line " + std::to_string(line_no) + ": " + ex.what());
        } catch (const ConfigError& ex) {
            throw ParseError("dataset line " + std::to_string(line_no) + ": " + ex.what());
        }
    }
    return out;
}

std::string DatasetStats::to_json_line() const {
    json j;
    j["entities"] = entities;
    j["relations"] = relations;
    j["train"] = train;
    j["test"] = test;
    j["awc"] = awc;
    j["mrr"] = mrr ? json(*mrr) : json(nullptr);
    return j.dump() + "\n";
}

std::string join_answers(std::vector<std::string> labels) {
    std::sort(labels.begin(), labels.end());
    return join(labels, ", ");
}

std::vector<QaExample> generate_qa(const KnowledgeGraph& kg, const std::vector<QaTemplate>& templates,
                                   const QaConfig& config) {
    if (config.max_answers < 1) throw ConfigError("max_answers must be >= 1");
    if (config.negative_rate < 0 || config.negative_rate > 1) throw ConfigError("negative_rate must lie in [0, 1]");
    for (const auto& t : templates) {
        t.validate();
        if (!kg.relations.contains(t.relation))
            throw ConfigError("template '" + t.id + "' references unknown relation '" + t.relation + "'");
    }
    Rng rng(config.seed);
    std::vector<QaExample> out;
    const int n = kg.entities.size();
    for (const auto& t : templates) {
        const RelationId r = kg.relations.id(t.relation);
        for (EntityId ref = 0; ref < n; ++ref) {
            const auto& related = t.asks_tails() ? kg.tails(ref, r) : kg.heads(ref, r);
            if (related.empty() || static_cast<int>(related.size()) > config.max_answers) continue;
            const std::string& ref_label = kg.entities.label(ref);
            QaExample base;
            base.reference_entity = ref_label;
            base.relation = t.relation;
            base.template_id = t.id;
            base.mode = t.mode;
            const std::string with_ref = replace_all(t.pattern, t.asks_tails() ? "{x}" : "{Y}", ref_label);

            if (t.mode == QaMode::open) {
                std::vector<std::string> labels;
                for (EntityId e : related) labels.push_back(kg.entities.label(e));
                QaExample ex = base;
                ex.question = with_ref;
                ex.answer = join_answers(labels);
                out.push_back(std::move(ex));
            } else if (t.mode == QaMode::verification) {
                const EntityId pos = related[rng.below(related.size())];
                QaExample ex = base;
                ex.question = replace_all(with_ref, "{X}", kg.entities.label(pos));
                ex.answer = "True";
                out.push_back(ex);
                if (rng.uniform() < config.negative_rate) {
                    std::set<EntityId> rel(related.begin(), related.end());
                    std::vector<EntityId> pool;
                    for (EntityId e = 0; e < n; ++e)
                        if (e != ref && !rel.count(e)) pool.push_back(e);
                    if (!pool.empty()) {
                        const EntityId neg = pool[rng.below(pool.size())];
                        if (kg.contains(Triple{neg, r, ref})) throw ContractError("negative sample is a true triple");
                        ex.question = replace_all(with_ref, "{X}", kg.entities.label(neg));
                        ex.answer = "False";
                        ex.positive = false;
                        out.push_back(std::move(ex));
                    }
                }
            } else {
                const int count = static_cast<int>(related.size());
                QaExample ex = base;
                if (t.pattern.find("{Z}") == std::string::npos) {
                    ex.question = with_ref;
                    ex.answer = std::to_string(count);
                    out.push_back(std::move(ex));
                } else {
                    ex.question = replace_all(with_ref, "{Z}", std::to_string(count));
                    ex.answer = "True";
                    out.push_back(ex);
                    if (rng.uniform() < config.negative_rate) {
                        int z = rng.coin() ? count + 1 : count - 1;
                        if (z <= 0) z = count + 1;
                        ex.question = replace_all(with_ref, "{Z}", std::to_string(z));
                        ex.answer = "False";
                        ex.positive = false;
                        out.push_back(std::move(ex));
                    }
                }
            }
        }
    }
    return out;
}

void split_dataset(std::vector<QaExample>& examples, double test_fraction, uint64_t seed) {
    if (!(test_fraction > 0 && test_fraction < 1)) throw ContractError("test_fraction must lie in (0, 1)");
    std::set<std::string> unique;
    for (const auto& e : examples) unique.insert(e.question);
    if (unique.size() < 2) throw ContractError("split needs at least 2 distinct questions");
    std::vector<std::string> groups(unique.begin(), unique.end());
    Rng rng(seed);
    rng.shuffle(groups);
    const long g = static_cast<long>(groups.size());
    long n_test = std::lround(test_fraction * static_cast<double>(g));
    n_test = std::clamp(n_test, 1L, g - 1);
    std::set<std::string> test(groups.begin(), groups.begin() + n_test);
    for (auto& e : examples) e.split = test.count(e.question) ? "test" : "train";
}

DatasetStats compute_stats(const KnowledgeGraph& kg, const std::vector<QaExample>& examples) {
    DatasetStats s;
    s.entities = kg.entities.size();
    s.relations = kg.relations.size();
    double words = 0;
    for (const auto& e : examples) {
        if (e.split == "train") ++s.train;
        if (e.split == "test") ++s.test;
        words += static_cast<double>(split_ws(e.answer).size());
    }
    s.awc = examples.empty() ? 0.0 : words / static_cast<double>(examples.size());
    return s;
}

std::vector<bool> collision_members(const KnowledgeGraph& kg) {
    std::map<std::vector<std::string>, std::vector<int>> groups;
    for (int i = 0; i < kg.entities.size(); ++i) groups[split_ws(kg.entities.label(i))].push_back(i);
    std::vector<bool> out(static_cast<size_t>(kg.entities.size()), false);
    for (const auto& [words, ids] : groups)
        if (ids.size() > 1)
            for (int i : ids) out[static_cast<size_t>(i)] = true;
    return out;
}

}  // namespace kgalign
