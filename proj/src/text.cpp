#include "fnbench/text.hpp"

#include "fnbench/errors.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

namespace fnbench {

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty() && !is_stopword(cur)) out.push_back(cur);
        cur.clear();
    };
    for (const char ch : text) {
        if (ch >= 'a' && ch <= 'z') {
            cur.push_back(ch);
        } else if (ch >= 'A' && ch <= 'Z') {
            cur.push_back(static_cast<char>(ch - 'A' + 'a'));
        } else {
            flush();
        }
    }
    flush();
    return out;
}

Vocabulary fit_vocabulary(const std::vector<std::string>& docs,
                          std::size_t max_vocab) {
    std::map<std::string, std::size_t> counts;
    for (const std::string& doc : docs)
        for (const std::string& tok : tokenize(doc)) ++counts[tok];

    std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(),
                                                            counts.end());
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    if (max_vocab > 0 && ranked.size() > max_vocab) ranked.resize(max_vocab);

    Vocabulary v;
    v.fitted_docs = docs.size();
    v.tokens.reserve(ranked.size());
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        v.tokens.push_back(ranked[i].first);
        v.index.emplace(ranked[i].first, static_cast<std::uint32_t>(i));
    }
    return v;
}

SparseRow vectorize(const Vocabulary& vocab, const std::string& text) {
    std::map<std::uint32_t, double> counts;
    for (const std::string& tok : tokenize(text)) {
        const auto it = vocab.index.find(tok);
        if (it != vocab.index.end()) counts[it->second] += 1.0;
    }
    SparseRow row;
    row.idx.reserve(counts.size());
    row.val.reserve(counts.size());
    for (const auto& [col, count] : counts) {
        row.idx.push_back(col);
        row.val.push_back(count);
    }
    return row;
}

DocMatrix vectorize_all(const Vocabulary& vocab,
                        const std::vector<std::string>& docs) {
    DocMatrix m;
    m.cols = vocab.size();
    m.rows.reserve(docs.size());
    for (const std::string& doc : docs) m.rows.push_back(vectorize(vocab, doc));
    return m;
}

namespace {

// RFC 4180 record reader over the whole file: quoted fields may contain
// commas, doubled quotes and embedded line breaks.
std::vector<std::vector<std::string>> parse_csv(const std::string& body,
                                                const std::string& path) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    std::size_t i = 0;
    const std::size_t n = body.size();
    auto fail = [&](const std::string& msg) {
        throw validation_error(path + ": row " + std::to_string(records.size() + 1) +
                               ": " + msg);
    };

    while (i < n) {
        field.clear();
        if (body[i] == '"') {
            ++i;
            while (true) {
                if (i >= n) fail("unterminated quoted field");
                if (body[i] == '"') {
                    if (i + 1 < n && body[i + 1] == '"') {
                        field.push_back('"');
                        i += 2;
                    } else {
                        ++i;
                        break;
                    }
                } else {
                    field.push_back(body[i++]);
                }
            }
            if (i < n && body[i] != ',' && body[i] != '\r' && body[i] != '\n')
                fail("garbage after closing quote");
        } else {
            while (i < n && body[i] != ',' && body[i] != '\r' && body[i] != '\n') {
                if (body[i] == '"') fail("bare quote in unquoted field");
                field.push_back(body[i++]);
            }
        }
        record.push_back(field);

        if (i >= n) break;
        if (body[i] == ',') {
            ++i;
            if (i >= n) { // trailing comma: final empty field
                record.emplace_back();
                break;
            }
            continue;
        }
        // end of record: consume CRLF or LF
        if (body[i] == '\r') ++i;
        if (i < n && body[i] == '\n') ++i;
        records.push_back(std::move(record));
        record.clear();
    }
    if (!record.empty()) records.push_back(std::move(record));
    return records;
}

bool needs_quoting(const std::string& field) {
    return field.find_first_of(",\"\r\n") != std::string::npos;
}

void write_csv_field(std::ostream& out, const std::string& field) {
    if (!needs_quoting(field)) {
        out << field;
        return;
    }
    out << '"';
    for (const char ch : field) {
        if (ch == '"') out << "\"\"";
        else out << ch;
    }
    out << '"';
}

} // namespace

std::vector<CorpusDoc> load_corpus_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string body = buf.str();

    const auto records = parse_csv(body, path);
    if (records.empty()) throw validation_error(path + ": empty corpus file");
    if (records[0] != std::vector<std::string>{"id", "label", "text"})
        throw validation_error(path + ": expected header 'id,label,text'");

    std::vector<CorpusDoc> docs;
    docs.reserve(records.size() - 1);
    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto& rec = records[r];
        const std::string where = path + ": row " + std::to_string(r + 1);
        if (rec.size() != 3)
            throw validation_error(where + ": expected 3 fields, got " +
                                   std::to_string(rec.size()));
        CorpusDoc d;
        d.id = rec[0];
        if (d.id.empty()) throw validation_error(where + ": empty id");
        if (rec[1] == "0") d.label = 0;
        else if (rec[1] == "1") d.label = 1;
        else throw validation_error(where + ": label must be 0 or 1, got '" +
                                    rec[1] + "'");
        d.text = rec[2];
        docs.push_back(std::move(d));
    }
    return docs;
}

void save_corpus_csv(const std::string& path, const std::vector<CorpusDoc>& docs) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open " + path + " for writing");
    out << "id,label,text\r\n";
    for (const CorpusDoc& d : docs) {
        write_csv_field(out, d.id);
        out << ',' << d.label << ',';
        write_csv_field(out, d.text);
        out << "\r\n";
    }
    if (!out.flush()) throw io_error("failed writing " + path);
}

} // namespace fnbench
