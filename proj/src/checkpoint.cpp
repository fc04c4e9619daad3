#include "kgalign/checkpoint.hpp"

namespace kgalign {

namespace {

constexpr const char* kMagic = "ALM-CKPT v1";

struct NamedTensor {
    std::string name;
    double* data;
    Eigen::Index rows, cols;
};

// Fixed tensor order. Projection biases are written as 1 x n rows.
std::vector<NamedTensor> layout(LmParams& lm, bool has_projection, ProjectionParams& proj) {
    std::vector<NamedTensor> out;
    for (auto& [name, m] : lm.tensors()) out.push_back({"lm." + name, m->data(), m->rows(), m->cols()});
    if (has_projection) {
        for (size_t k = 0; k < proj.weights.size(); ++k) {
            Mat& w = proj.weights[k];
            Vec& b = proj.biases[k];
            out.push_back({"projection.weight." + std::to_string(k), w.data(), w.rows(), w.cols()});
            out.push_back({"projection.bias." + std::to_string(k), b.data(), 1, b.size()});
        }
    }
    return out;
}

class LineCursor {
public:
    explicit LineCursor(std::string_view text) : text_(text) {}

    std::string_view next(const char* expecting) {
        if (pos_ >= text_.size()) throw FormatError(std::string("checkpoint truncated: expected ") + expecting);
        size_t end = text_.find('\n', pos_);
        if (end == std::string_view::npos)
            throw FormatError(std::string("checkpoint truncated: unterminated line while reading ") + expecting);
        std::string_view line = text_.substr(pos_, end - pos_);
        pos_ = end + 1;
        ++line_no_;
        return line;
    }
    bool at_end() const { return pos_ >= text_.size(); }
    int line_no() const { return line_no_; }

private:
    std::string_view text_;
    size_t pos_ = 0;
    int line_no_ = 0;
};

Json keyed_json(LineCursor& cur, const std::string& key) {
    const std::string_view line = cur.next(key.c_str());
    if (line.substr(0, key.size() + 1) != key + " ")
        throw FormatError("checkpoint line " + std::to_string(cur.line_no()) + ": expected '" + key + "'");
    try {
        return Json::parse(line.substr(key.size() + 1));
    } catch (const Json::exception& e) {
        throw FormatError("checkpoint line " + std::to_string(cur.line_no()) + ": " + e.what());
    }
}

}  // namespace

std::string save_checkpoint(const Checkpoint& ckpt) {
    Checkpoint c = ckpt;  // layout() needs mutable views
    check_params(c.lm_config, c.lm);
    if (c.has_projection) check_params(c.projection_spec, c.projection);
    std::string out = std::string(kMagic) + "\n";
    out += "lm " + to_json(c.lm_config).dump() + "\n";
    out += "projection " + (c.has_projection ? to_json(c.projection_spec).dump() : std::string("null")) + "\n";
    out += "provenance " + c.provenance.dump() + "\n";
    out += "metrics " + c.metrics.dump() + "\n";
    auto vocab = split(c.tokenizer, '\n');
    if (!vocab.empty() && vocab.back().empty()) vocab.pop_back();
    out += "tokenizer " + std::to_string(vocab.size()) + "\n";
    for (const auto& v : vocab) out += v + "\n";
    for (const auto& t : layout(c.lm, c.has_projection, c.projection)) {
        out += "tensor " + t.name + " " + std::to_string(t.rows) + " " + std::to_string(t.cols) + "\n";
        for (Eigen::Index r = 0; r < t.rows; ++r) out += encode_row(t.data + r * t.cols, static_cast<int>(t.cols)) + "\n";
    }
    out += "end\n";
    return out;
}

Checkpoint load_checkpoint(std::string_view text) {
    LineCursor cur(text);
    const std::string_view magic = cur.next("header");
    if (magic != kMagic) {
        if (magic.substr(0, 9) == "ALM-CKPT ")
            throw FormatError("unsupported checkpoint version '" + std::string(magic.substr(9)) + "'");
        throw FormatError("not a checkpoint (bad header)");
    }
    Checkpoint c;
    try {
        from_json(keyed_json(cur, "lm"), "/lm", c.lm_config);
        c.lm_config.validate();
        const Json proj = keyed_json(cur, "projection");
        c.has_projection = !proj.is_null();
        if (c.has_projection) {
            from_json(proj, "/projection", c.projection_spec);
            c.projection_spec.validate();
        }
    } catch (const ConfigError& e) {
        throw FormatError(std::string("checkpoint config: ") + e.what());
    }
    c.provenance = keyed_json(cur, "provenance");
    c.metrics = keyed_json(cur, "metrics");

    const auto tok_head = split(cur.next("tokenizer"), ' ');
    if (tok_head.size() != 2 || tok_head[0] != "tokenizer") throw FormatError("checkpoint: expected tokenizer block");
    long n_vocab = 0;
    try {
        n_vocab = std::stol(tok_head[1]);
    } catch (const std::exception&) {
        throw FormatError("checkpoint: bad tokenizer size");
    }
    if (n_vocab != c.lm_config.vocab_size) throw FormatError("checkpoint: tokenizer size differs from lm vocab_size");
    for (long i = 0; i < n_vocab; ++i) {
        c.tokenizer += cur.next("vocabulary line");
        c.tokenizer += '\n';
    }
    Tokenizer::load(c.tokenizer);  // validates

    c.lm = LmParams::zeros(c.lm_config);
    if (c.has_projection) {
        // shapes from a throwaway init; values are overwritten below
        c.projection = init_projection(c.projection_spec, 0);
    }
    for (const auto& t : layout(c.lm, c.has_projection, c.projection)) {
        const auto head = split_ws(cur.next(("tensor " + t.name).c_str()));
        if (head.size() != 4 || head[0] != "tensor" || head[1] != t.name)
            throw FormatError("checkpoint line " + std::to_string(cur.line_no()) + ": expected tensor " + t.name);
        if (head[2] != std::to_string(t.rows) || head[3] != std::to_string(t.cols))
            throw FormatError("checkpoint tensor " + t.name + ": shape mismatch");
        for (Eigen::Index r = 0; r < t.rows; ++r) {
            try {
                decode_row(cur.next(t.name.c_str()), t.data + r * t.cols, static_cast<int>(t.cols));
            } catch (const FormatError& e) {
                throw FormatError("checkpoint tensor " + t.name + " row " + std::to_string(r) + ": " + e.what());
            }
        }
    }
    if (cur.next("end") != "end") throw FormatError("checkpoint: expected end marker");
    if (!cur.at_end()) throw FormatError("checkpoint: trailing content after end marker");
    return c;
}

void write_checkpoint(const std::string& path, const Checkpoint& ckpt) { write_file(path, save_checkpoint(ckpt)); }

Checkpoint read_checkpoint(const std::string& path) { return load_checkpoint(read_file(path)); }

}  // namespace kgalign
