#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace fnbench {

/// Lowercased alphabetic tokens; every non-letter byte separates tokens and
/// stopwords are dropped.
std::vector<std::string> tokenize(const std::string& text);

const std::vector<std::string>& english_stopwords();
bool is_stopword(const std::string& token);

/// Token -> column mapping fitted on a corpus. Tokens are ranked by total
/// occurrence count (ties broken lexicographically) before an optional cap.
struct Vocabulary {
    std::vector<std::string> tokens;             // column -> token
    std::unordered_map<std::string, std::uint32_t> index; // token -> column
    std::size_t fitted_docs = 0;

    std::size_t size() const { return tokens.size(); }
};

/// max_vocab == 0 keeps every token.
Vocabulary fit_vocabulary(const std::vector<std::string>& docs,
                          std::size_t max_vocab = 0);

/// One document as sorted (column, count) pairs.
struct SparseRow {
    std::vector<std::uint32_t> idx;
    std::vector<double> val;
};

struct DocMatrix {
    std::size_t cols = 0;
    std::vector<SparseRow> rows;

    std::size_t size() const { return rows.size(); }
};

SparseRow vectorize(const Vocabulary& vocab, const std::string& text);
DocMatrix vectorize_all(const Vocabulary& vocab,
                        const std::vector<std::string>& docs);

struct CorpusDoc {
    std::string id;
    int label = 0;
    std::string text;
};

/// RFC 4180 id,label,text rows with a header. Quoted fields may contain
/// commas, doubled quotes and newlines.
std::vector<CorpusDoc> load_corpus_csv(const std::string& path);
void save_corpus_csv(const std::string& path, const std::vector<CorpusDoc>& docs);

} // namespace fnbench
