#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

namespace voxalign {

struct ReportRecord {
    int age = 0;
    char sex = 'F';  // 'M' or 'F'
    int education_years = 0;
    int apoe4_count = 0;   // 0..2
    int mmse = 0;          // 0..30
    double cdr = 0.0;      // one of {0, 0.5, 1, 2, 3}
    std::string note;      // may be empty
};

// Throws DataError when a field is outside its documented domain.
void validate_record(const ReportRecord& record);

// Deterministic fixed-order key-value template; empty note renders "none".
std::string render_report(const ReportRecord& record);

// Token table with two reserved ids. Stored ids are contiguous; the token
// at tokens[i] has id i + 2.
struct Vocabulary {
    static constexpr std::size_t kPad = 0;
    static constexpr std::size_t kUnk = 1;

    std::vector<std::string> tokens;
    std::unordered_map<std::string, std::size_t> ids;

    std::size_t size() const { return tokens.size() + 2; }
    std::size_t id_of(const std::string& token) const {
        const auto it = ids.find(token);
        return it == ids.end() ? kUnk : it->second;
    }
};

// Lowercases and splits on every non-alphanumeric character.
std::vector<std::string> split_tokens(const std::string& text);

// Keeps the max_size-2 most frequent corpus tokens, ties broken
// lexicographically; ids assigned in that order after PAD and UNK.
Vocabulary build_vocab(const std::vector<std::string>& corpus,
                       std::size_t max_size);

// In-vocab tokens map to their ids, unknown to UNK; result has length
// exactly max_len after truncation and PAD padding.
std::vector<std::size_t> tokenize(const std::string& text,
                                  const Vocabulary& vocab, std::size_t max_len);

// One token per line; line number = id - 2.
void store_vocab(const Vocabulary& vocab, const std::filesystem::path& path);
Vocabulary load_vocab(const std::filesystem::path& path);

}  // namespace voxalign
