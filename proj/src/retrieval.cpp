#include "atom/retrieval.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

#include "atom/errors.hpp"
#include "atom/rng.hpp"

namespace atom {

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw IoError("truncated index file");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f64(std::ostream& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    for (int i = 0; i < 8; ++i)
        out.put(static_cast<char>(static_cast<unsigned char>(bits >> (8 * i))));
}

double get_f64(std::istream& in) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) {
        int c = in.get();
        if (c == EOF) throw IoError("truncated index file");
        bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
    }
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

void put_str(std::ostream& out, const std::string& s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_str(std::istream& in) {
    std::uint32_t n = get_u32(in);
    std::string s(n, '\0');
    in.read(s.data(), n);
    if (!in) throw IoError("truncated index file");
    return s;
}

constexpr std::uint32_t kIndexMagic = 0x54464944;  // "TFID"

}  // namespace

std::vector<std::string> diff_token_strings(const TokenGroups& groups) {
    std::vector<std::string> out;
    out.reserve(groups.added.size() + groups.deleted.size());
    for (const auto& t : groups.added) out.push_back(t.text);
    for (const auto& t : groups.deleted) out.push_back(t.text);
    return out;
}

TfIdfIndex build_index(const std::vector<DiffDocument>& docs) {
    if (docs.empty()) throw EmptyIndex("cannot build a tf-idf index from zero documents");
    TfIdfIndex idx;

    // document frequencies over a stable column order (first appearance)
    for (const auto& d : docs) {
        std::map<std::string, int> counts;
        for (const auto& t : d.tokens) ++counts[t];
        for (const auto& [tok, n] : counts) {
            auto it = idx.token_col_.find(tok);
            if (it == idx.token_col_.end()) {
                idx.token_col_[tok] = static_cast<int>(idx.col_token_.size());
                idx.col_token_.push_back(tok);
                idx.idf_.push_back(1.0);  // df so far, reused as a counter
            } else {
                idx.idf_[static_cast<std::size_t>(it->second)] += 1.0;
            }
        }
    }
    const double n_docs = static_cast<double>(docs.size());
    for (double& v : idx.idf_) v = std::log(n_docs / v);

    for (const auto& d : docs) {
        std::map<int, double> counts;  // ordered -> ascending columns
        for (const auto& t : d.tokens) ++counts[idx.token_col_.at(t)];
        const double total = static_cast<double>(d.tokens.size());
        TfIdfIndex::Row row;
        double sq = 0.0;
        for (const auto& [col, n] : counts) {
            double w = (n / total) * idx.idf_[static_cast<std::size_t>(col)];
            if (w != 0.0) {
                row.entries.emplace_back(col, w);
                sq += w * w;
            }
        }
        row.norm = std::sqrt(sq);
        idx.rows_.push_back(std::move(row));
        idx.docs_.emplace_back(d.commit_id, d.message);
    }
    return idx;
}

double TfIdfIndex::idf(const std::string& token) const {
    auto it = token_col_.find(token);
    return it == token_col_.end() ? 0.0 : idf_[static_cast<std::size_t>(it->second)];
}

double TfIdfIndex::doc_norm(int doc_index) const {
    return rows_.at(static_cast<std::size_t>(doc_index)).norm;
}

double TfIdfIndex::recomputed_doc_norm(int doc_index) const {
    double sq = 0.0;
    for (const auto& [col, w] : rows_.at(static_cast<std::size_t>(doc_index)).entries)
        sq += w * w;
    return std::sqrt(sq);
}

void TfIdfIndex::scale_idf(double c) {
    for (double& v : idf_) v *= c;
    for (auto& row : rows_) {
        for (auto& [col, w] : row.entries) w *= c;
        row.norm *= c;
    }
}

RetrievalResult TfIdfIndex::retrieve(const std::vector<std::string>& query_tokens) const {
    return retrieve_excluding(query_tokens, "");
}

RetrievalResult TfIdfIndex::retrieve_excluding(const std::vector<std::string>& query_tokens,
                                               const std::string& excluded_commit_id) const {
    if (docs_.empty()) throw EmptyIndex("empty tf-idf index");

    // query tf over in-index tokens; unknown tokens are dropped
    std::map<int, double> counts;
    const double total = static_cast<double>(query_tokens.size());
    for (const auto& t : query_tokens) {
        auto it = token_col_.find(t);
        if (it != token_col_.end()) ++counts[it->second];
    }
    std::vector<std::pair<int, double>> q;
    double qsq = 0.0;
    for (const auto& [col, n] : counts) {
        double w = (n / total) * idf_[static_cast<std::size_t>(col)];
        if (w != 0.0) {
            q.emplace_back(col, w);
            qsq += w * w;
        }
    }
    const double qnorm = std::sqrt(qsq);

    int best = -1;
    double best_cos = -1.0;
    for (std::size_t d = 0; d < docs_.size(); ++d) {
        if (!excluded_commit_id.empty() && docs_[d].first == excluded_commit_id) continue;
        double cos = 0.0;
        const Row& row = rows_[d];
        if (qnorm > 0.0 && row.norm > 0.0) {
            double dot = 0.0;
            std::size_t i = 0, j = 0;
            while (i < q.size() && j < row.entries.size()) {
                if (q[i].first == row.entries[j].first) {
                    dot += q[i].second * row.entries[j].second;
                    ++i;
                    ++j;
                } else if (q[i].first < row.entries[j].first) {
                    ++i;
                } else {
                    ++j;
                }
            }
            cos = dot / (qnorm * row.norm);
        }
        if (cos > best_cos) {  // strict: ties keep the lowest document index
            best_cos = cos;
            best = static_cast<int>(d);
        }
    }
    if (best < 0) throw EmptyIndex("exclusion removed every document");
    RetrievalResult r;
    r.commit_id = docs_[static_cast<std::size_t>(best)].first;
    r.message = docs_[static_cast<std::size_t>(best)].second;
    r.cosine = best_cos;
    r.doc_index = best;
    return r;
}

void TfIdfIndex::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write index: " + path);
    put_u32(out, kIndexMagic);
    put_u32(out, static_cast<std::uint32_t>(docs_.size()));
    put_u32(out, static_cast<std::uint32_t>(col_token_.size()));
    for (std::size_t c = 0; c < col_token_.size(); ++c) {
        put_str(out, col_token_[c]);
        put_f64(out, idf_[c]);
    }
    for (const auto& row : rows_) {
        put_u32(out, static_cast<std::uint32_t>(row.entries.size()));
        for (const auto& [col, w] : row.entries) {
            put_u32(out, static_cast<std::uint32_t>(col));
            put_f64(out, w);
        }
        put_f64(out, row.norm);
    }
    for (const auto& [id, msg] : docs_) {
        put_str(out, id);
        put_str(out, msg);
    }
}

TfIdfIndex TfIdfIndex::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read index: " + path);
    if (get_u32(in) != kIndexMagic) throw IoError("not a tf-idf index file: " + path);
    TfIdfIndex idx;
    std::uint32_t n_docs = get_u32(in);
    std::uint32_t n_cols = get_u32(in);
    for (std::uint32_t c = 0; c < n_cols; ++c) {
        std::string tok = get_str(in);
        idx.token_col_[tok] = static_cast<int>(c);
        idx.col_token_.push_back(std::move(tok));
        idx.idf_.push_back(get_f64(in));
    }
    for (std::uint32_t d = 0; d < n_docs; ++d) {
        Row row;
        std::uint32_t n = get_u32(in);
        for (std::uint32_t i = 0; i < n; ++i) {
            int col = static_cast<int>(get_u32(in));
            double w = get_f64(in);
            row.entries.emplace_back(col, w);
        }
        row.norm = get_f64(in);
        idx.rows_.push_back(std::move(row));
    }
    for (std::uint32_t d = 0; d < n_docs; ++d) {
        std::string id = get_str(in);
        std::string msg = get_str(in);
        idx.docs_.emplace_back(std::move(id), std::move(msg));
    }
    return idx;
}

std::uint64_t TfIdfIndex::content_hash() const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix_bytes = [&](const void* p, std::size_t n) {
        const unsigned char* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 1099511628211ull;
        }
    };
    auto mix_str = [&](const std::string& s) { mix_bytes(s.data(), s.size()); };
    for (std::size_t c = 0; c < col_token_.size(); ++c) {
        mix_str(col_token_[c]);
        mix_bytes(&idf_[c], 8);
    }
    for (const auto& row : rows_) {
        for (const auto& [col, w] : row.entries) {
            mix_bytes(&col, 4);
            mix_bytes(&w, 8);
        }
    }
    for (const auto& [id, msg] : docs_) {
        mix_str(id);
        mix_str(msg);
    }
    return h;
}

}  // namespace atom
