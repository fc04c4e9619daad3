#include "kgalign/tokenizer.hpp"

#include "kgalign/common.hpp"

namespace kgalign {

namespace {

const char* const kSurface[Tokenizer::kReserved] = {"<PAD>", "<UNK>", "<BOS>", "<STOP>", "<ENT>"};

}  // namespace

Tokenizer::Tokenizer() {
    for (const char* s : kSurface) add(s);
}

std::vector<std::string> Tokenizer::words(std::string_view text) {
    std::vector<std::string> out;
    for (const std::string& chunk : split_ws(text)) {
        size_t i = 0;
        while (i < chunk.size()) {
            size_t best = std::string::npos, best_len = 0;
            for (const char* s : kSurface) {
                const size_t p = chunk.find(s, i);
                if (p != std::string::npos && p < best) {
                    best = p;
                    best_len = std::char_traits<char>::length(s);
                }
            }
            if (best == std::string::npos) {
                out.push_back(chunk.substr(i));
                break;
            }
            if (best > i) out.push_back(chunk.substr(i, best - i));
            out.push_back(chunk.substr(best, best_len));
            i = best + best_len;
        }
    }
    return out;
}

Tokenizer Tokenizer::build(const std::vector<std::string>& texts) {
    Tokenizer t;
    for (const auto& text : texts)
        for (const auto& w : words(text)) t.add(w);
    return t;
}

int Tokenizer::add(const std::string& word) {
    auto it = index_.find(word);
    if (it != index_.end()) return it->second;
    if (word.empty() || split_ws(word).size() != 1 || split_ws(word)[0] != word)
        throw ContractError("token must be a single non-empty word: '" + word + "'");
    const int id = size();
    tokens_.push_back(word);
    index_.emplace(word, id);
    return id;
}

int Tokenizer::id(const std::string& word) const {
    auto it = index_.find(word);
    return it == index_.end() ? UNK : it->second;
}

const std::string& Tokenizer::token(int id) const {
    if (id < 0 || id >= size()) throw LookupError("token id " + std::to_string(id) + " out of range");
    return tokens_[static_cast<size_t>(id)];
}

std::vector<int> Tokenizer::encode(std::string_view text) const {
    std::vector<int> ids;
    for (const auto& w : words(text)) ids.push_back(id(w));
    return ids;
}

std::string Tokenizer::decode(const std::vector<int>& ids) const {
    std::string out;
    for (int i : ids) {
        if (i == PAD || i == BOS || i == ENT) continue;
        if (!out.empty()) out += ' ';
        out += token(i);
    }
    return out;
}

std::string Tokenizer::save() const {
    std::string out;
    for (const auto& t : tokens_) {
        out += t;
        out += '\n';
    }
    return out;
}

Tokenizer Tokenizer::load(std::string_view text) {
    auto lines = split(text, '\n');
    if (!lines.empty() && lines.back().empty()) lines.pop_back();
    if (lines.size() < static_cast<size_t>(kReserved)) throw FormatError("vocabulary lacks the reserved tokens");
    for (int i = 0; i < kReserved; ++i)
        if (lines[static_cast<size_t>(i)] != kSurface[i])
            throw FormatError("vocabulary line " + std::to_string(i + 1) + " must be " + kSurface[i]);
    Tokenizer t;
    for (size_t i = kReserved; i < lines.size(); ++i) {
        if (t.contains(lines[i])) throw FormatError("duplicate vocabulary entry '" + lines[i] + "'");
        try {
            t.add(lines[i]);
        } catch (const ContractError& e) {
            throw FormatError(e.what());
        }
    }
    return t;
}

}  // namespace kgalign
