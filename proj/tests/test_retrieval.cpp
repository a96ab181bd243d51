#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <map>

#include "atom/errors.hpp"
#include "atom/retrieval.hpp"
#include "atom/rng.hpp"

using namespace atom;

namespace {

DiffDocument doc(const std::string& id, const std::string& msg,
                 std::vector<std::string> tokens) {
    return {id, msg, std::move(tokens)};
}

// dense brute-force tf-idf cosine oracle, independent of the index code
double oracle_cosine(const std::vector<std::vector<std::string>>& corpus,
                     const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::map<std::string, double> df;
    std::map<std::string, bool> seen;
    for (const auto& d : corpus) {
        std::map<std::string, bool> in_doc;
        for (const auto& t : d) in_doc[t] = true;
        for (const auto& [t, _] : in_doc) df[t] += 1.0;
    }
    auto vec = [&](const std::vector<std::string>& tokens) {
        std::map<std::string, double> tf;
        for (const auto& t : tokens) tf[t] += 1.0;
        std::map<std::string, double> v;
        for (auto& [t, n] : tf) {
            auto it = df.find(t);
            if (it == df.end()) continue;
            v[t] = (n / static_cast<double>(tokens.size())) *
                   std::log(static_cast<double>(corpus.size()) / it->second);
        }
        return v;
    };
    auto va = vec(a), vb = vec(b);
    double dot = 0, na = 0, nb = 0;
    for (auto& [t, x] : va) {
        na += x * x;
        auto it = vb.find(t);
        if (it != vb.end()) dot += x * it->second;
    }
    for (auto& [t, x] : vb) nb += x * x;
    if (na == 0 || nb == 0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace

TEST_CASE("idf formula: shared token scores zero, rare token ln 3") {
    auto idx = build_index({doc("a", "ma", {"t", "x"}), doc("b", "mb", {"t", "y"})});
    CHECK(idx.idf("t") == doctest::Approx(0.0));
    CHECK(idx.idf("x") == doctest::Approx(std::log(2.0)));

    auto idx3 = build_index({doc("a", "ma", {"p", "q"}), doc("b", "mb", {"p", "r"}),
                             doc("c", "mc", {"p", "s"})});
    CHECK(idx3.idf("q") == doctest::Approx(std::log(3.0)).epsilon(1e-9));
    CHECK(idx3.idf("q") == doctest::Approx(1.0986).epsilon(1e-3));
}

TEST_CASE("tf is count over document length") {
    // doc "a a b": tf(a)=2/3, tf(b)=1/3; make idf(a)=idf(b)=ln 2 via a second doc
    auto idx = build_index({doc("d1", "m1", {"a", "a", "b"}), doc("d2", "m2", {"c"})});
    // row weight ratio a:b must be 2:1 -> norm identity pins the values
    const double w_a = (2.0 / 3.0) * std::log(2.0);
    const double w_b = (1.0 / 3.0) * std::log(2.0);
    CHECK(idx.doc_norm(0) == doctest::Approx(std::sqrt(w_a * w_a + w_b * w_b)).epsilon(1e-12));
}

TEST_CASE("stored norms equal recomputed norms to 1e-9") {
    Rng rng(5);
    std::vector<DiffDocument> docs;
    const char* pool[6] = {"alpha", "beta", "gamma", "delta", "eps", "zeta"};
    for (int d = 0; d < 20; ++d) {
        std::vector<std::string> toks;
        int n = 1 + static_cast<int>(rng.next_below(10));
        for (int i = 0; i < n; ++i) toks.push_back(pool[rng.next_below(6)]);
        docs.push_back(doc("c" + std::to_string(d), "m" + std::to_string(d), toks));
    }
    auto idx = build_index(docs);
    for (int d = 0; d < 20; ++d)
        CHECK(std::abs(idx.doc_norm(d) - idx.recomputed_doc_norm(d)) <= 1e-9);
}

TEST_CASE("self-retrieval returns the document itself at cosine 1") {
    std::vector<DiffDocument> docs = {doc("c0", "m0", {"a", "b", "c"}),
                                      doc("c1", "m1", {"b", "d"}),
                                      doc("c2", "m2", {"e", "f", "a"})};
    auto idx = build_index(docs);
    for (const auto& d : docs) {
        auto r = idx.retrieve(d.tokens);
        CHECK(r.commit_id == d.commit_id);
        CHECK(std::abs(r.cosine - 1.0) <= 1e-9);
    }
}

TEST_CASE("disjoint query: cosine 0, lowest doc index wins") {
    auto idx = build_index({doc("c0", "m0", {"a"}), doc("c1", "m1", {"b"})});
    auto r = idx.retrieve({"zzz", "qqq"});
    CHECK(r.cosine == 0.0);
    CHECK(r.doc_index == 0);
    CHECK(r.commit_id == "c0");
}

TEST_CASE("argmax matches the brute-force oracle") {
    Rng rng(11);
    const char* pool[8] = {"a", "b", "c", "d", "e", "f", "g", "h"};
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<std::vector<std::string>> corpus;
        std::vector<DiffDocument> docs;
        for (int d = 0; d < 10; ++d) {
            std::vector<std::string> toks;
            int n = 2 + static_cast<int>(rng.next_below(8));
            for (int i = 0; i < n; ++i) toks.push_back(pool[rng.next_below(8)]);
            corpus.push_back(toks);
            docs.push_back(doc("c" + std::to_string(d), "m" + std::to_string(d), toks));
        }
        std::vector<std::string> query;
        int qn = 2 + static_cast<int>(rng.next_below(6));
        for (int i = 0; i < qn; ++i) query.push_back(pool[rng.next_below(8)]);

        auto idx = build_index(docs);
        auto got = idx.retrieve(query);
        int best = 0;
        double best_cos = -1;
        for (int d = 0; d < 10; ++d) {
            double cos = oracle_cosine(corpus, query, corpus[d]);
            if (cos > best_cos) {
                best_cos = cos;
                best = d;
            }
        }
        CHECK(got.doc_index == best);
        CHECK(got.cosine == doctest::Approx(best_cos).epsilon(1e-9));
        CHECK(got.cosine >= 0.0);
        CHECK(got.cosine <= 1.0 + 1e-12);
    }
}

TEST_CASE("retrieve_excluding") {
    std::vector<DiffDocument> docs = {doc("A", "msg a", {"x", "y"}),
                                      doc("B", "msg b", {"x", "z"})};
    auto idx = build_index(docs);
    auto r = idx.retrieve_excluding(docs[0].tokens, "A");
    CHECK(r.commit_id == "B");
    // absent exclusion id behaves like plain retrieve
    auto full = idx.retrieve(docs[0].tokens);
    auto same = idx.retrieve_excluding(docs[0].tokens, "NOPE");
    CHECK(full.commit_id == same.commit_id);
    CHECK(full.cosine == same.cosine);
    // excluding everything raises
    auto one = build_index({doc("A", "m", {"x"})});
    CHECK_THROWS_AS(one.retrieve_excluding({"x"}, "A"), EmptyIndex);
}

TEST_CASE("retrieve_excluding the argmax yields the second-best") {
    Rng rng(17);
    const char* pool[8] = {"a", "b", "c", "d", "e", "f", "g", "h"};
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<std::vector<std::string>> corpus;
        std::vector<DiffDocument> docs;
        for (int d = 0; d < 10; ++d) {
            std::vector<std::string> toks;
            int n = 2 + static_cast<int>(rng.next_below(8));
            for (int i = 0; i < n; ++i) toks.push_back(pool[rng.next_below(8)]);
            corpus.push_back(toks);
            docs.push_back(doc("c" + std::to_string(d), "m" + std::to_string(d), toks));
        }
        std::vector<std::string> query = corpus[rng.next_below(10)];
        auto idx = build_index(docs);
        auto first = idx.retrieve(query);
        auto second = idx.retrieve_excluding(query, first.commit_id);
        // oracle: best among all but the argmax
        int best = -1;
        double best_cos = -1;
        for (int d = 0; d < 10; ++d) {
            if (d == first.doc_index) continue;
            double cos = oracle_cosine(corpus, query, corpus[d]);
            if (cos > best_cos) {
                best_cos = cos;
                best = d;
            }
        }
        CHECK(second.doc_index == best);
        CHECK(second.cosine == doctest::Approx(best_cos).epsilon(1e-9));
    }
}

TEST_CASE("uniform idf scaling leaves the argmax unchanged") {
    Rng rng(23);
    const char* pool[6] = {"a", "b", "c", "d", "e", "f"};
    std::vector<DiffDocument> docs;
    for (int d = 0; d < 12; ++d) {
        std::vector<std::string> toks;
        int n = 2 + static_cast<int>(rng.next_below(6));
        for (int i = 0; i < n; ++i) toks.push_back(pool[rng.next_below(6)]);
        docs.push_back(doc("c" + std::to_string(d), "m", toks));
    }
    auto idx = build_index(docs);
    auto scaled = build_index(docs);
    scaled.scale_idf(3.5);
    for (int t = 0; t < 20; ++t) {
        std::vector<std::string> query;
        int qn = 1 + static_cast<int>(rng.next_below(5));
        for (int i = 0; i < qn; ++i) query.push_back(pool[rng.next_below(6)]);
        CHECK(idx.retrieve(query).doc_index == scaled.retrieve(query).doc_index);
    }
}

TEST_CASE("empty inputs raise EmptyIndex") {
    CHECK_THROWS_AS(build_index({}), EmptyIndex);
}

TEST_CASE("index persistence round trip") {
    std::vector<DiffDocument> docs = {doc("c0", "fix the bug", {"a", "b", "a"}),
                                      doc("c1", "add a test", {"b", "c"}),
                                      doc("c2", "refactor", {"d"})};
    auto idx = build_index(docs);
    auto path = (std::filesystem::temp_directory_path() / "atom_tfidf.bin").string();
    idx.save(path);
    auto loaded = TfIdfIndex::load(path);
    CHECK(loaded.doc_count() == 3);
    CHECK(loaded.content_hash() == idx.content_hash());
    for (const auto& d : docs) {
        auto a = idx.retrieve(d.tokens);
        auto b = loaded.retrieve(d.tokens);
        CHECK(a.doc_index == b.doc_index);
        CHECK(a.cosine == b.cosine);
        CHECK(a.message == b.message);
    }
}

TEST_CASE("diff_token_strings concatenates added then deleted") {
    TokenGroups g;
    g.added = {{"x", TokenKind::Identifier}, {"1", TokenKind::Literal}};
    g.deleted = {{"y", TokenKind::Identifier}};
    CHECK(diff_token_strings(g) == std::vector<std::string>{"x", "1", "y"});
}
