#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace kgalign {

// Word-level vocabulary. Reserved markers are split out even when glued to a
// word ("Human:<ENT>" -> "Human:", "<ENT>").
class Tokenizer {
public:
    static constexpr int PAD = 0;
    static constexpr int UNK = 1;
    static constexpr int BOS = 2;
    static constexpr int STOP = 3;
    static constexpr int ENT = 4;
    static constexpr int kReserved = 5;

    Tokenizer();

    static std::vector<std::string> words(std::string_view text);
    // Adds every word of every text in first-appearance order.
    static Tokenizer build(const std::vector<std::string>& texts);

    int add(const std::string& word);
    bool contains(const std::string& word) const { return index_.count(word) != 0; }
    int id(const std::string& word) const;  // UNK when absent
    const std::string& token(int id) const;
    int size() const { return static_cast<int>(tokens_.size()); }

    std::vector<int> encode(std::string_view text) const;
    // Joins with single spaces; drops PAD, BOS and ENT, keeps STOP and UNK.
    std::string decode(const std::vector<int>& ids) const;

    // One token per line, line number = id.
    std::string save() const;
    static Tokenizer load(std::string_view text);

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> index_;
};

}  // namespace kgalign
