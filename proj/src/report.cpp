#include "voxalign/report.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

#include "voxalign/common.hpp"

namespace voxalign {

namespace {

bool valid_cdr(double cdr) {
    return cdr == 0.0 || cdr == 0.5 || cdr == 1.0 || cdr == 2.0 || cdr == 3.0;
}

std::string format_cdr(double cdr) {
    if (cdr == 0.5) return "0.5";
    return std::to_string(static_cast<int>(cdr));
}

}  // namespace

void validate_record(const ReportRecord& record) {
    if (record.mmse < 0 || record.mmse > 30) {
        throw DataError("report record: mmse " + std::to_string(record.mmse) +
                        " outside [0,30]");
    }
    if (record.apoe4_count < 0 || record.apoe4_count > 2) {
        throw DataError("report record: apoe4_count " +
                        std::to_string(record.apoe4_count) + " outside {0,1,2}");
    }
    if (!valid_cdr(record.cdr)) {
        throw DataError("report record: cdr " + std::to_string(record.cdr) +
                        " not one of {0, 0.5, 1, 2, 3}");
    }
    if (record.sex != 'M' && record.sex != 'F') {
        throw DataError("report record: sex must be 'M' or 'F'");
    }
}

std::string render_report(const ReportRecord& record) {
    validate_record(record);
    std::ostringstream os;
    os << "Age: " << record.age << ". Sex: " << record.sex
       << ". Education: " << record.education_years
       << " years. APOE4 alleles: " << record.apoe4_count
       << ". MMSE: " << record.mmse << ". CDR: " << format_cdr(record.cdr)
       << ". Notes: " << (record.note.empty() ? "none" : record.note);
    return os.str();
}

std::vector<std::string> split_tokens(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        const auto uc = static_cast<unsigned char>(c);
        if (std::isalnum(uc)) {
            cur.push_back(static_cast<char>(std::tolower(uc)));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

Vocabulary build_vocab(const std::vector<std::string>& corpus,
                       std::size_t max_size) {
    if (max_size < 3) {
        throw ConfigError("build_vocab: max_size must be at least 3 (two ids "
                          "are reserved)");
    }
    if (corpus.empty()) throw DataError("build_vocab: empty corpus");

    std::map<std::string, std::size_t> freq;
    for (const std::string& text : corpus) {
        for (std::string& tok : split_tokens(text)) ++freq[std::move(tok)];
    }
    std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(),
                                                            freq.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (ranked.size() > max_size - 2) ranked.resize(max_size - 2);

    Vocabulary vocab;
    vocab.tokens.reserve(ranked.size());
    for (auto& [tok, n] : ranked) {
        vocab.ids.emplace(tok, vocab.tokens.size() + 2);
        vocab.tokens.push_back(std::move(tok));
    }
    return vocab;
}

std::vector<std::size_t> tokenize(const std::string& text,
                                  const Vocabulary& vocab,
                                  std::size_t max_len) {
    if (max_len < 1) throw ConfigError("tokenize: max_len must be >= 1");
    std::vector<std::size_t> ids;
    ids.reserve(max_len);
    for (const std::string& tok : split_tokens(text)) {
        if (ids.size() == max_len) break;
        ids.push_back(vocab.id_of(tok));
    }
    ids.resize(max_len, Vocabulary::kPad);
    return ids;
}

void store_vocab(const Vocabulary& vocab, const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw DataError("cannot open for write: " + path.string());
    for (const std::string& tok : vocab.tokens) f << tok << "\n";
    if (!f) throw DataError("write failed: " + path.string());
}

Vocabulary load_vocab(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open vocabulary file: " + path.string());
    Vocabulary vocab;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) {
            throw DataError("empty vocabulary line in " + path.string());
        }
        vocab.ids.emplace(line, vocab.tokens.size() + 2);
        vocab.tokens.push_back(line);
    }
    return vocab;
}

}  // namespace voxalign
