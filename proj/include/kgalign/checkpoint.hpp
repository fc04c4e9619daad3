#pragma once

#include <string>
#include <string_view>

#include "kgalign/config_io.hpp"

namespace kgalign {

// ALM-CKPT v1 text container:
//   ALM-CKPT v1
//   lm <json>
//   projection <json | null>
//   provenance <json>
//   metrics <json>
//   tokenizer <n>        followed by n vocabulary lines
//   tensor <name> <rows> <cols>   followed by rows hex-float lines
//   ...
//   end
struct Checkpoint {
    LmConfig lm_config;
    LmParams lm;
    bool has_projection = false;
    ProjectionSpec projection_spec;
    ProjectionParams projection;
    std::string tokenizer;  // Tokenizer::save() text
    Json provenance = Json::object();
    Json metrics = Json::object();
};

std::string save_checkpoint(const Checkpoint& ckpt);
Checkpoint load_checkpoint(std::string_view text);  // FormatError on any defect

void write_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::string& path);

}  // namespace kgalign
