#pragma once

// Synthetic corpus of one-line arithmetic edits used by the end-to-end tests:
// each commit swaps the operator in a single assignment and carries a message
// describing the swap, so a small model can learn the mapping exactly.

#include <string>
#include <vector>

#include "atom/preprocess.hpp"
#include "atom/rng.hpp"

namespace toy {

inline const std::vector<std::string>& names() {
    static const std::vector<std::string> n = {
        "count", "offset", "total", "index", "size",  "limit",
        "value", "delta",  "width", "height", "depth", "scale"};
    return n;
}

struct Op {
    const char* sym;
    const char* word;
};

inline const std::vector<Op>& ops() {
    static const std::vector<Op> o = {{"+", "plus"}, {"-", "minus"}, {"*", "times"}};
    return o;
}

inline atom::CommitRecord make_commit(int i, std::size_t xi, std::size_t yi,
                                      std::size_t oi, std::size_t ni) {
    const auto& nm = names();
    const auto& op = ops();
    const std::string& x = nm[xi % nm.size()];
    const std::string& y = nm[yi % nm.size()];

    auto body = [&](const char* sym) {
        return "int update() {\n    " + x + " = " + x + " " + sym + " " + y +
               ";\n    return " + x + ";\n}";
    };
    std::string file = "src/F" + std::to_string(i) + ".java";

    atom::CommitRecord r;
    r.commit_id = "c" + std::to_string(i);
    r.message = "use " + std::string(op[ni].word) + " instead of " + op[oi].word +
                " for " + x;
    r.subject = r.message;
    r.diff = "diff --git a/" + file + " b/" + file + "\n--- a/" + file + "\n+++ b/" +
             file + "\n@@ -1,4 +1,4 @@\n int update() {\n-    " + x + " = " + x + " " +
             op[oi].sym + " " + y + ";\n+    " + x + " = " + x + " " + op[ni].sym +
             " " + y + ";\n     return " + x + ";\n }\n";
    r.file_changed = 1;
    static const char* projects[4] = {"alpha", "beta", "gamma", "delta"};
    r.project = projects[i % 4];
    r.timestamp = 1500000000 + i * 86400;
    r.functions.push_back({atom::Polarity::Added, body(op[ni].sym), file});
    r.functions.push_back({atom::Polarity::Deleted, body(op[oi].sym), file});
    return r;
}

inline atom::CommitRecord make_commit(int i, atom::Rng& rng) {
    const std::size_t n = names().size(), k = ops().size();
    std::size_t xi = rng.next_below(n);
    std::size_t yi = (xi + 1 + rng.next_below(n - 1)) % n;
    std::size_t oi = rng.next_below(k);
    std::size_t ni = (oi + 1 + rng.next_below(k - 1)) % k;
    return make_commit(i, xi, yi, oi, ni);
}

inline std::vector<atom::CommitRecord> corpus(int n, std::uint64_t seed) {
    atom::Rng rng(seed, "toy.corpus");
    std::vector<atom::CommitRecord> out;
    for (int i = 0; i < n; ++i) out.push_back(make_commit(i, rng));
    return out;
}

// every message token recurs: names and operators cycle round-robin
inline std::vector<atom::CommitRecord> dense_corpus(int n, std::size_t name_pool = 6) {
    std::vector<atom::CommitRecord> out;
    for (int i = 0; i < n; ++i) {
        std::size_t u = static_cast<std::size_t>(i);
        std::size_t oi = u % 3;
        std::size_t ni = (oi + 1 + (u / 3) % 2) % 3;
        out.push_back(make_commit(i, u % name_pool, name_pool + u % (12 - name_pool),
                                  oi, ni));
    }
    return out;
}

}  // namespace toy
