#pragma once

#include <set>
#include <string>

#include "json.hpp"
#include "kgalign/infusion.hpp"
#include "kgalign/kge.hpp"

namespace kgalign {

using Json = nlohmann::ordered_json;

// Strict object reader: typed fields, unknown keys rejected, errors carry the
// JSON pointer of the offending value.
class JsonReader {
public:
    JsonReader(const Json& j, std::string pointer);

    void get(const char* key, int& out);
    void get(const char* key, uint64_t& out);
    void get(const char* key, double& out);
    void get(const char* key, bool& out);
    void get(const char* key, std::string& out);
    bool has(const char* key) const { return j_.contains(key); }
    const Json& child(const char* key);  // marks key as seen; LookupError when absent
    std::string at(const char* key) const { return pointer_ + "/" + key; }
    void finish() const;  // throws on unknown keys

private:
    const Json* find(const char* key);
    const Json& j_;
    std::string pointer_;
    std::set<std::string> seen_;
};

// Runs fn and prefixes any ConfigError from validation with the pointer.
template <typename Fn>
void validate_at(const std::string& pointer, Fn fn) {
    try {
        fn();
    } catch (const ConfigError& e) {
        throw ConfigError(pointer + ": " + e.what());
    }
}

Json to_json(const TranseConfig& c);
Json to_json(const ProjectionSpec& s);
Json to_json(const LmConfig& c);
Json to_json(const TrainPlan& p);
Json to_json(const QaConfig& c);
Json to_json(const SynthConfig& c);
Json to_json(const PromptFormat& f);

// Missing fields keep the value already in `out`.
void from_json(const Json& j, const std::string& pointer, TranseConfig& out);
void from_json(const Json& j, const std::string& pointer, ProjectionSpec& out);
void from_json(const Json& j, const std::string& pointer, LmConfig& out);
void from_json(const Json& j, const std::string& pointer, TrainPlan& out);
void from_json(const Json& j, const std::string& pointer, QaConfig& out);
void from_json(const Json& j, const std::string& pointer, SynthConfig& out);
void from_json(const Json& j, const std::string& pointer, PromptFormat& out);

Json parse_json(std::string_view text, const std::string& what);  // ParseError with context

}  // namespace kgalign
