#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "atom/diffparse.hpp"

namespace atom {

struct DiffDocument {
    std::string commit_id;
    std::string message;
    std::vector<std::string> tokens;  // added ++ deleted, with multiplicity
};

struct RetrievalResult {
    std::string message;
    std::string commit_id;
    double cosine = 0.0;
    int doc_index = -1;
};

class TfIdfIndex {
public:
    RetrievalResult retrieve(const std::vector<std::string>& query_tokens) const;
    RetrievalResult retrieve_excluding(const std::vector<std::string>& query_tokens,
                                       const std::string& excluded_commit_id) const;

    std::size_t doc_count() const { return docs_.size(); }
    double idf(const std::string& token) const;  // 0 for unknown tokens
    double doc_norm(int doc_index) const;
    double recomputed_doc_norm(int doc_index) const;

    // multiply every idf (and the stored rows/norms) by c > 0
    void scale_idf(double c);

    void save(const std::string& path) const;
    static TfIdfIndex load(const std::string& path);
    std::uint64_t content_hash() const;

private:
    friend TfIdfIndex build_index(const std::vector<DiffDocument>& docs);

    struct Row {
        std::vector<std::pair<int, double>> entries;  // (column, tf*idf), column ascending
        double norm = 0.0;
    };

    std::vector<std::string> col_token_;
    std::unordered_map<std::string, int> token_col_;
    std::vector<double> idf_;
    std::vector<Row> rows_;
    std::vector<std::pair<std::string, std::string>> docs_;  // (commit_id, message)
};

TfIdfIndex build_index(const std::vector<DiffDocument>& docs);

// flatten W+ ++ W- into the token multiset the index consumes
std::vector<std::string> diff_token_strings(const TokenGroups& groups);

}  // namespace atom
