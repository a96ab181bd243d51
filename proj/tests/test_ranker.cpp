#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "atom/errors.hpp"
#include "atom/ranker.hpp"

using namespace atom;
using ad::Var;

namespace {

Vocabulary vocab_with(int n, Vocabulary::Kind kind = Vocabulary::Kind::Subtoken) {
    Vocabulary v(kind);
    for (int i = 0; i < n; ++i) v.add("t" + std::to_string(i));
    return v;
}

Ranker toy_ranker(int embed, int caps_d, int caps_m, int kernels, std::uint64_t seed,
                  int vocab_extra = 8) {
    RankerConfig rc;
    rc.embed = embed;
    rc.diff_cap = caps_d;
    rc.msg_cap = caps_m;
    rc.kernels = kernels;
    return Ranker(vocab_with(vocab_extra), vocab_with(vocab_extra, Vocabulary::Kind::Target),
                  rc, seed);
}

const char* kDiff =
    "diff --git a/src/A.java b/src/A.java\n"
    "--- a/src/A.java\n"
    "+++ b/src/A.java\n"
    "@@ -1,3 +1,3 @@\n"
    " void f() {\n"
    "-    a = b + c;\n"
    "+    a = b + d;\n"
    " }\n";

CommitRecord make_record(const std::string& id, std::int64_t ts, const std::string& msg) {
    CommitRecord r;
    r.commit_id = id;
    r.subject = msg;
    r.message = msg;
    r.diff = kDiff;
    r.file_changed = 1;
    r.project = "p";
    r.timestamp = ts;
    r.functions.push_back({Polarity::Added, "void f() {\n    a = b + d;\n}", "src/A.java"});
    r.functions.push_back({Polarity::Deleted, "void f() {\n    a = b + c;\n}", "src/A.java"});
    return r;
}

}  // namespace

TEST_CASE("matching matrix: orthogonal, identical, and brute-force oracle") {
    auto r = toy_ranker(2, 1, 1, 1, 3);
    auto& ed = r.params().get("rank.E_d").val();
    auto& ey = r.params().get("rank.E_y").val();
    ed.at(4, 0) = 1.0f;
    ed.at(4, 1) = 0.0f;
    ey.at(4, 0) = 0.0f;
    ey.at(4, 1) = 1.0f;
    auto d = r.matching_matrix({4}, {4});
    CHECK(d.val().v[0] == doctest::Approx(0.0f));  // orthogonal

    ey.at(4, 0) = 1.0f;
    ey.at(4, 1) = 0.0f;
    auto d2 = r.matching_matrix({4}, {4});
    CHECK(d2.val().v[0] == doctest::Approx(1.0f));  // identical unit vectors

    // 3 x 2 with hand-set rows against an exhaustive dot-product oracle
    auto r2 = toy_ranker(3, 3, 2, 1, 5);
    auto& ed2 = r2.params().get("rank.E_d").val();
    auto& ey2 = r2.params().get("rank.E_y").val();
    std::vector<int> dids = {4, 5, 6}, mids = {4, 5};
    auto m = r2.matching_matrix(dids, mids);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 2; ++j) {
            double dot = 0;
            for (int k = 0; k < 3; ++k)
                dot += static_cast<double>(ed2.at(dids[static_cast<std::size_t>(i)], k)) *
                       static_cast<double>(ey2.at(mids[static_cast<std::size_t>(j)], k));
            CHECK(m.val().at(i, j) == doctest::Approx(dot).epsilon(1e-6));
        }

    CHECK_THROWS_AS(r.matching_matrix({}, {4}), EmptyMessage);
}

TEST_CASE("matching matrix transposition with swapped tables") {
    auto a = toy_ranker(3, 3, 2, 1, 7);
    auto b = toy_ranker(3, 2, 3, 1, 99);
    // swap the tables: b.E_d := a.E_y, b.E_y := a.E_d
    b.params().get("rank.E_d").val() = a.params().get("rank.E_y").val();
    b.params().get("rank.E_y").val() = a.params().get("rank.E_d").val();
    std::vector<int> dids = {4, 5, 6}, mids = {5, 7};
    auto d = a.matching_matrix(dids, mids);   // [3,2]
    auto dt = b.matching_matrix(mids, dids);  // [2,3]
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 2; ++j) CHECK(d.val().at(i, j) == dt.val().at(j, i));
}

TEST_CASE("score: zero params give zero, repetition is bit-identical") {
    auto r = toy_ranker(4, 4, 4, 2, 11);
    for (auto& [name, var] : r.params().params())
        for (float& x : var.val().v) x = 0.0f;
    CHECK(r.score({4, 5, 6, 7}, {4, 5, 6, 7}) == 0.0);

    auto r2 = toy_ranker(4, 4, 4, 2, 13);
    double s1 = r2.score({4, 5, 6, 7}, {7, 6, 5, 4});
    double s2 = r2.score({4, 5, 6, 7}, {7, 6, 5, 4});
    CHECK(s1 == s2);
}

TEST_CASE("score matches a hand conv/pool/linear evaluation") {
    auto r = toy_ranker(4, 4, 4, 1, 17);
    auto& ed = r.params().get("rank.E_d").val();
    auto& ey = r.params().get("rank.E_y").val();
    // E_y rows = unit basis so D[i][j] = E_d[dids[i]][j]
    for (float& x : ey.v) x = 0.0f;
    for (int j = 0; j < 4; ++j) ey.at(4 + j, j) = 1.0f;
    std::vector<int> dids = {4, 5, 6, 7}, mids = {4, 5, 6, 7};
    double D[4][4];
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) D[i][j] = ed.at(dids[static_cast<std::size_t>(i)], j);

    const auto& K = r.params().get("rank.kernels").val();  // [1,1,3,3]
    const float kb = r.params().get("rank.kbias").val().v[0];
    const auto& W = r.params().get("rank.W_head").val();  // [4,1]
    const float bh = r.params().get("rank.b_head").val().v[0];

    double conv[4][4];
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            double acc = kb;
            for (int di = -1; di <= 1; ++di)
                for (int dj = -1; dj <= 1; ++dj) {
                    int a = i + di, b = j + dj;
                    if (a < 0 || a >= 4 || b < 0 || b >= 4) continue;
                    acc += D[a][b] * K.v[static_cast<std::size_t>((di + 1) * 3 + (dj + 1))];
                }
            conv[i][j] = std::max(0.0, acc);
        }
    double expect = bh;
    int w = 0;
    for (int i = 0; i < 4; i += 2)
        for (int j = 0; j < 4; j += 2) {
            double mx = std::max(std::max(conv[i][j], conv[i][j + 1]),
                                 std::max(conv[i + 1][j], conv[i + 1][j + 1]));
            expect += mx * W.v[static_cast<std::size_t>(w++)];
        }
    CHECK(r.score(dids, mids) == doctest::Approx(expect).epsilon(1e-5));
}

TEST_CASE("toy ConvNet passes the gradient check") {
    auto r = toy_ranker(3, 4, 4, 2, 23);
    std::vector<int> dids = {4, 5, 6, 7}, mids = {5, 6, 7, 4};
    auto f = [&]() {
        return ad::mse(r.score_var(dids, mids), Var(Tensor::scalar(0.7f)));
    };
    auto report = ad::grad_check(f, r.params(), 1e-3f, 1e-2);
    if (!report.ok()) {
        for (auto& fl : report.failures)
            MESSAGE(fl.param, "[", fl.index, "] analytic=", fl.analytic,
                    " numeric=", fl.numeric, " rel=", fl.rel_err);
    }
    CHECK(report.ok());
}

TEST_CASE("constant-target training converges to the mean") {
    auto r = toy_ranker(4, 4, 4, 2, 29);
    Rng rng(3);
    std::vector<RankingExample> data;
    for (int i = 0; i < 8; ++i) {
        RankingExample ex;
        for (int j = 0; j < 4; ++j) {
            ex.diff_ids.push_back(4 + static_cast<int>(rng.next_below(8)));
            ex.msg_ids.push_back(4 + static_cast<int>(rng.next_below(8)));
        }
        ex.target = 0.5f;
        data.push_back(ex);
    }
    RankTrainConfig cfg;
    cfg.batch = 4;
    cfg.max_epochs = 150;
    cfg.patience = 150;
    cfg.lr = 0.01f;
    cfg.seed = 7;
    r.train(data, data, cfg);
    double mean = 0;
    for (const auto& ex : data) mean += r.score(ex.diff_ids, ex.msg_ids);
    mean /= static_cast<double>(data.size());
    CHECK(std::abs(mean - 0.5) <= 0.05);
}

TEST_CASE("zero-epoch training leaves the checkpoint at initialization") {
    auto r = toy_ranker(4, 4, 4, 2, 31);
    auto before = r.params().content_hash();
    RankingExample ex;
    ex.diff_ids = {4, 5, 6, 7};
    ex.msg_ids = {4, 5, 6, 7};
    ex.target = 1.0f;
    RankTrainConfig cfg;
    cfg.max_epochs = 0;
    r.train({ex}, {}, cfg);
    CHECK(r.params().content_hash() == before);

    CHECK_THROWS_AS(r.train({}, {}, cfg), EmptyTrainingSet);
}

TEST_CASE("selection rule and tie-break") {
    auto r = toy_ranker(4, 4, 4, 2, 37);
    std::vector<std::string> diff = {"t0", "t1"};
    auto tie = r.select(diff, {"t2", "t3"}, {"t2", "t3"});
    CHECK(tie.score_t == tie.score_g);
    CHECK(tie.chosen == Chosen::Retrieved);

    auto s = r.select(diff, {"t2"}, {"t3", "t4"});
    CHECK(s.chosen == (s.score_g > s.score_t ? Chosen::Generated : Chosen::Retrieved));
}

TEST_CASE("ranking targets from the metrics module") {
    TokenSeq ref = {"fix", "the", "parser", "bug", "now"};
    CHECK(ranking_target(ref, ref) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(ranking_target({"zz", "yy", "xx", "ww"}, ref) <= 1e-6);
    // cross-checked against the metrics module itself
    TokenSeq cand = {"fix", "the", "bug", "now"};
    CHECK(ranking_target(cand, ref) == doctest::Approx(bleu(cand, ref, 4) / 100.0));
}

TEST_CASE("oracle selection achieves the per-commit max exactly") {
    Rng rng(41);
    const char* pool[6] = {"a", "b", "c", "d", "e", "f"};
    double sum_sel = 0, sum_ret = 0, sum_gen = 0;
    const int n = 40;
    for (int i = 0; i < n; ++i) {
        auto rand_msg = [&](int len) {
            TokenSeq m;
            for (int j = 0; j < len; ++j) m.push_back(pool[rng.next_below(6)]);
            return m;
        };
        TokenSeq ref = rand_msg(5);
        TokenSeq mt = rand_msg(4 + static_cast<int>(rng.next_below(3)));
        TokenSeq mg = rand_msg(4 + static_cast<int>(rng.next_below(3)));
        auto sel = oracle_select(mt, mg, ref);
        double bt = bleu(mt, ref, 4), bg = bleu(mg, ref, 4);
        double chosen_bleu = sel.chosen == Chosen::Generated ? bg : bt;
        CHECK(chosen_bleu == std::max(bt, bg));
        sum_sel += chosen_bleu;
        sum_ret += bt;
        sum_gen += bg;
    }
    CHECK(sum_sel / n >= sum_ret / n);
    CHECK(sum_sel / n >= sum_gen / n);
}

TEST_CASE("build_ranking_dataset emits two labeled rows per commit") {
    std::vector<CommitRecord> train = {make_record("A", 1, "fix the parser bug now"),
                                       make_record("B", 2, "fix the parser bug now")};
    // index over both training diffs with normalized messages
    std::vector<DiffDocument> docs;
    for (const auto& r : train) {
        auto toks = diff_token_strings(tokenize_changes(parse_diff({r.diff})));
        docs.push_back({r.commit_id, normalize_message(r.message).joined(), toks});
    }
    auto index = build_index(docs);

    auto vs = build_vocab(train, 1);
    ModelConfig mc;
    mc.embed = 4;
    mc.hidden = 4;
    mc.max_len = 6;
    Ast2Seq model(vs.subtoken, vs.node_type, vs.target, mc, 43);

    int skipped = -1;
    auto rows = build_ranking_dataset(train, model, index, 1, &skipped);
    CHECK(skipped == 0);
    REQUIRE(rows.size() == 4);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].target >= 0.0f);
        CHECK(rows[i].target <= 1.0f);
        CHECK((i % 2 == 1) == rows[i].from_generator);
    }
    // both commits share the message, so the retrieved candidate is exact: Y = 1
    CHECK(rows[0].target == doctest::Approx(1.0f));
    CHECK(rows[0].candidate == TokenSeq{"fix", "the", "parser", "bug", "now"});
    CHECK(rows[0].commit_id == "A");

    auto [dv, mv] = build_ranker_vocabs(rows);
    for (const auto& t : rows[0].diff_tokens) CHECK(dv.contains(t));
    for (const auto& t : rows[0].candidate) CHECK(mv.contains(t));
}
