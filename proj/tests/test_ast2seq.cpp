#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "atom/ast2seq.hpp"
#include "atom/errors.hpp"

using namespace atom;
using ad::Var;

namespace {

Vocabulary make_subtoken_vocab(std::initializer_list<const char*> tokens) {
    Vocabulary v(Vocabulary::Kind::Subtoken);
    for (const char* t : tokens) v.add(t);
    return v;
}

Vocabulary make_node_vocab() {
    Vocabulary v(Vocabulary::Kind::NodeType);
    for (int i = 0; i < kNodeTypeCount; ++i) v.add(node_type_name(static_cast<NodeType>(i)));
    return v;
}

Vocabulary make_target_vocab(std::initializer_list<const char*> tokens) {
    Vocabulary v(Vocabulary::Kind::Target);
    for (const char* t : tokens) v.add(t);
    return v;
}

AstPath make_path(const char* a, const char* b,
                  std::initializer_list<NodeType> nodes = {NodeType::BlockStmt}) {
    AstPath p;
    p.start_leaf = a;
    p.end_leaf = b;
    p.node_sequence = nodes;
    return p;
}

PathContextSet two_path_ctx() {
    PathContextSet ctx;
    ctx.added.push_back(make_path("aa", "bb", {NodeType::NameExpr, NodeType::ArgumentList}));
    ctx.deleted.push_back(make_path("bb", "cc", {NodeType::IfStmt}));
    return ctx;
}

Ast2Seq toy_model(std::uint64_t seed = 3, int embed = 4, int hidden = 4) {
    ModelConfig mc;
    mc.embed = embed;
    mc.hidden = hidden;
    mc.dropout = 0.4f;
    mc.max_len = 8;
    return Ast2Seq(make_subtoken_vocab({"aa", "bb", "cc"}), make_node_vocab(),
                   make_target_vocab({"fix", "bug", "now", "fast"}), mc, seed);
}

void zero_params(Ast2Seq& m) {
    for (auto& [name, var] : m.params().params())
        for (float& x : var.val().v) x = 0.0f;
}

}  // namespace

TEST_CASE("leaf feature summation commutes") {
    auto m = toy_model();
    // "aaBb" and "bbAa" split to {aa,bb} / {bb,aa}: identical summed feature
    auto z1 = m.encode_path(make_path("aaBb", "cc"), Polarity::Added);
    auto z2 = m.encode_path(make_path("bbAa", "cc"), Polarity::Added);
    REQUIRE(z1.val().size() == z2.val().size());
    for (std::size_t i = 0; i < z1.val().size(); ++i)
        CHECK(z1.val().v[i] == doctest::Approx(z2.val().v[i]).epsilon(1e-6));
}

TEST_CASE("all-zero parameters: z = 0, logits = 0, loss = ln r") {
    auto m = toy_model();
    zero_params(m);
    auto z = m.encode_path(make_path("aa", "bb"), Polarity::Added);
    for (float v : z.val().v) CHECK(v == 0.0f);

    auto enc = m.encode_diff(two_path_ctx());
    Rng rng(1);
    auto step = m.decode_step(Vocabulary::kSos, m.initial_state(enc), enc, false, rng);
    for (float v : step.logits.val().v) CHECK(v == 0.0f);

    TrainSample s;
    s.paths = two_path_ctx();
    s.target = {4, 5, 6};
    double loss = m.sample_loss(s, false, rng).scalar();
    CHECK(std::abs(loss - std::log(8.0)) <= 1e-4);  // r = 4 reserved + 4 tokens
}

TEST_CASE("loss with zeroed output layer is ln r on a trained-size model") {
    auto m = toy_model(9, 8, 8);
    for (float& x : m.params().get("dec.W_s").val().v) x = 0.0f;
    Rng rng(1);
    TrainSample s;
    s.paths = two_path_ctx();
    s.target = {4, 7};
    CHECK(std::abs(m.sample_loss(s, false, rng).scalar() - std::log(8.0)) <= 1e-4);
}

TEST_CASE("encode_diff assembly and h0") {
    auto m = toy_model();
    PathContextSet one;
    one.added.push_back(make_path("aa", "bb"));
    auto enc1 = m.encode_diff(one);
    CHECK(enc1.Z.val().shape == std::vector<int>{1, 4});
    for (int j = 0; j < 4; ++j)
        CHECK(enc1.h0.val().v[j] == doctest::Approx(enc1.Z.val().at(0, j)));

    auto enc2 = m.encode_diff(two_path_ctx());
    REQUIRE(enc2.Z.val().shape == std::vector<int>{2, 4});
    for (int j = 0; j < 4; ++j) {
        float mean = 0.5f * (enc2.Z.val().at(0, j) + enc2.Z.val().at(1, j));
        CHECK(enc2.h0.val().v[j] == doctest::Approx(mean).epsilon(1e-5));
    }
    PathContextSet empty;
    CHECK_THROWS_AS(m.encode_diff(empty), EmptyContext);
}

TEST_CASE("permuting paths permutes Z rows but not h0 or the decode") {
    auto m = toy_model(11);
    PathContextSet ctx;
    ctx.added.push_back(make_path("aa", "bb", {NodeType::ForStmt}));
    ctx.added.push_back(make_path("bb", "cc", {NodeType::IfStmt, NodeType::BlockStmt}));
    ctx.added.push_back(make_path("cc", "aa", {NodeType::ReturnStmt}));
    PathContextSet perm;
    perm.added = {ctx.added[2], ctx.added[0], ctx.added[1]};

    auto e1 = m.encode_diff(ctx);
    auto e2 = m.encode_diff(perm);
    for (int j = 0; j < 4; ++j)
        CHECK(e1.h0.val().v[j] == doctest::Approx(e2.h0.val().v[j]).epsilon(1e-5));
    // row 0 of perm equals row 2 of ctx
    for (int j = 0; j < 4; ++j)
        CHECK(e2.Z.val().at(0, j) == doctest::Approx(e1.Z.val().at(2, j)));

    CHECK(m.greedy_decode(e1) == m.greedy_decode(e2));
    CHECK(m.beam_search(e1, 3, 8) == m.beam_search(e2, 3, 8));
}

TEST_CASE("attention: single path, zero W_a, hand oracle") {
    auto m = toy_model(13);
    PathContextSet one;
    one.added.push_back(make_path("aa", "cc"));
    auto enc = m.encode_diff(one);
    Var h(Tensor({1, 4}, {0.3f, -0.2f, 0.5f, 0.1f}));
    auto att = m.attention_step(h, enc);
    REQUIRE(att.alpha.val().size() == 1);
    CHECK(att.alpha.val().v[0] == doctest::Approx(1.0f));
    for (int j = 0; j < 4; ++j) CHECK(att.c_t.val().v[j] == enc.Z.val().at(0, j));

    // zero W_a: uniform attention
    for (float& x : m.params().get("dec.W_a").val().v) x = 0.0f;
    auto enc2 = m.encode_diff(two_path_ctx());
    auto att2 = m.attention_step(h, enc2);
    CHECK(att2.alpha.val().v[0] == doctest::Approx(0.5f));
    CHECK(att2.alpha.val().v[1] == doctest::Approx(0.5f));

    // hand-set W_a, h_t, Z: independent double-precision evaluation
    auto& wa = m.params().get("dec.W_a").val();
    float wa_vals[16] = {0.1f, -0.2f, 0.3f,  0.0f, 0.2f, 0.1f, -0.1f, 0.4f,
                         -0.3f, 0.2f, 0.05f, 0.1f, 0.0f, 0.3f, -0.2f, 0.25f};
    for (int i = 0; i < 16; ++i) wa.v[static_cast<std::size_t>(i)] = wa_vals[i];
    Tensor zt({2, 4}, {0.5f, -0.1f, 0.2f, 0.7f, -0.4f, 0.3f, 0.6f, -0.2f});
    auto encz = m.assemble(Var(zt), {true, true});
    float ht_vals[4] = {0.3f, -0.2f, 0.5f, 0.1f};
    auto att3 = m.attention_step(Var(Tensor({1, 4}, {0.3f, -0.2f, 0.5f, 0.1f})), encz);
    double score[2];
    for (int i = 0; i < 2; ++i) {
        double s = 0;
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b)
                s += static_cast<double>(ht_vals[a]) * static_cast<double>(wa_vals[a * 4 + b]) *
                     static_cast<double>(zt.at(i, b));
        score[i] = s;
    }
    double mx = std::max(score[0], score[1]);
    double e0 = std::exp(score[0] - mx), e1 = std::exp(score[1] - mx);
    double a0 = e0 / (e0 + e1), a1 = e1 / (e0 + e1);
    CHECK(att3.alpha.val().v[0] == doctest::Approx(a0).epsilon(1e-5));
    CHECK(att3.alpha.val().v[1] == doctest::Approx(a1).epsilon(1e-5));
    for (int j = 0; j < 4; ++j) {
        double c = a0 * zt.at(0, j) + a1 * zt.at(1, j);
        CHECK(att3.c_t.val().v[static_cast<std::size_t>(j)] == doctest::Approx(c).epsilon(1e-5));
    }
}

TEST_CASE("alpha simplex and exact masking") {
    auto m = toy_model(17);
    Rng rng(5);
    for (int t = 0; t < 100; ++t) {
        int n = 2 + static_cast<int>(rng.next_below(5));
        Tensor z({n, 4});
        for (float& x : z.v) x = rng.uniform(-2.0f, 2.0f);
        std::vector<bool> mask(static_cast<std::size_t>(n), true);
        mask[rng.next_below(static_cast<std::uint64_t>(n))] = false;
        bool any_valid = false;
        for (bool b : mask) any_valid |= b;
        if (!any_valid) mask[0] = true;
        auto enc = m.assemble(Var(z), mask);
        Tensor h({1, 4});
        for (float& x : h.v) x = rng.uniform(-2.0f, 2.0f);
        auto att = m.attention_step(Var(h), enc);
        double sum = 0;
        for (int i = 0; i < n; ++i) {
            float a = att.alpha.val().v[static_cast<std::size_t>(i)];
            CHECK(a >= 0.0f);
            if (!mask[static_cast<std::size_t>(i)]) CHECK(a == 0.0f);
            sum += a;
        }
        CHECK(std::abs(sum - 1.0) <= 1e-6);
        // h0 equals the masked mean to 1e-5
        for (int j = 0; j < 4; ++j) {
            double acc = 0;
            int cnt = 0;
            for (int i = 0; i < n; ++i)
                if (mask[static_cast<std::size_t>(i)]) {
                    acc += z.at(i, j);
                    ++cnt;
                }
            CHECK(std::abs(enc.h0.val().v[static_cast<std::size_t>(j)] - acc / cnt) <= 1e-5);
        }
    }
}

TEST_CASE("dropout: train stochastic, eval deterministic") {
    auto m = toy_model(19);
    auto enc = m.encode_diff(two_path_ctx());
    Rng rng(7);
    auto t1 = m.decode_step(Vocabulary::kSos, m.initial_state(enc), enc, true, rng);
    auto t2 = m.decode_step(Vocabulary::kSos, m.initial_state(enc), enc, true, rng);
    bool differ = false;
    for (std::size_t i = 0; i < t1.logits.val().size(); ++i)
        if (t1.logits.val().v[i] != t2.logits.val().v[i]) differ = true;
    CHECK(differ);
    Rng r1(9), r2(99);
    auto e1 = m.decode_step(Vocabulary::kSos, m.initial_state(enc), enc, false, r1);
    auto e2 = m.decode_step(Vocabulary::kSos, m.initial_state(enc), enc, false, r2);
    for (std::size_t i = 0; i < e1.logits.val().size(); ++i)
        CHECK(e1.logits.val().v[i] == e2.logits.val().v[i]);
}

TEST_CASE("early stopping counter semantics") {
    EarlyStopping s(20);
    CHECK_FALSE(s.observe(1.0));  // epoch 1 sets the best
    bool stopped = false;
    int epochs = 1;
    for (int i = 0; i < 30 && !stopped; ++i) {
        ++epochs;
        stopped = s.observe(1.0 + 0.1 * (i + 1));  // strictly worsening
    }
    CHECK(stopped);
    CHECK(epochs == 21);
    CHECK(s.best_epoch() == 0);

    EarlyStopping s2(2);
    CHECK_FALSE(s2.observe(5.0));
    CHECK_FALSE(s2.observe(6.0));
    CHECK_FALSE(s2.observe(4.0));  // improvement resets the counter
    CHECK_FALSE(s2.observe(4.5));
    CHECK(s2.observe(4.6));
    CHECK(s2.best() == doctest::Approx(4.0));
}

TEST_CASE("end-to-end gradient check on a toy model") {
    auto m = toy_model(23);
    TrainSample s;
    s.paths = two_path_ctx();
    s.target = {4, 5, 6};
    Rng rng(1);
    auto f = [&]() { return m.sample_loss(s, false, rng); };
    auto report = ad::grad_check(f, m.params(), 1e-3f, 1e-2);
    if (!report.ok()) {
        for (auto& fl : report.failures)
            MESSAGE(fl.param, "[", fl.index, "] analytic=", fl.analytic,
                    " numeric=", fl.numeric, " rel=", fl.rel_err);
    }
    CHECK(report.ok());
    CHECK(report.checked > 500);
}

TEST_CASE("single-sample overfit: loss < 0.01 and exact greedy decode") {
    ModelConfig mc;
    mc.embed = 16;
    mc.hidden = 32;
    mc.dropout = 0.0f;
    mc.max_len = 8;
    Ast2Seq m(make_subtoken_vocab({"aa", "bb", "cc"}), make_node_vocab(),
              make_target_vocab({"fix", "bug", "now", "fast"}), mc, 31);
    TrainSample s;
    s.paths = two_path_ctx();
    s.target = {4, 5, 7};  // fix bug fast
    TrainConfig tc;
    tc.batch = 1;
    tc.max_epochs = 200;
    tc.patience = 200;
    tc.lr = 0.01f;
    tc.seed = 5;
    auto report = m.train({s}, {s}, tc);
    REQUIRE_FALSE(report.train_losses.empty());
    CHECK(report.best_valid < 0.01);
    auto enc = m.encode_diff(s.paths);
    CHECK(m.greedy_decode(enc) == s.target);
    CHECK(m.beam_search(enc, 5, 8) == s.target);
}

TEST_CASE("train on empty set raises") {
    auto m = toy_model();
    CHECK_THROWS_AS(m.train({}, {}, TrainConfig{}), EmptyTrainingSet);
}

TEST_CASE("beam width 1 equals greedy on 50 random models") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        auto m = toy_model(seed * 7 + 1);
        PathContextSet ctx;
        Rng rng(seed);
        const char* leaves[3] = {"aa", "bb", "cc"};
        int np = 1 + static_cast<int>(rng.next_below(3));
        for (int i = 0; i < np; ++i) {
            auto p = make_path(leaves[rng.next_below(3)], leaves[rng.next_below(3)],
                               {static_cast<NodeType>(rng.next_below(kNodeTypeCount))});
            if (rng.next_float() < 0.5f) ctx.added.push_back(p);
            else ctx.deleted.push_back(p);
        }
        auto enc = m.encode_diff(ctx);
        CHECK(m.beam_search(enc, 1, 8) == m.greedy_decode(enc));
    }
}

TEST_CASE("near-deterministic model repeats its token until max_len") {
    auto m = toy_model(41);
    zero_params(m);
    // b_fuse drives Z; identity-ish W_c forwards c_t; W_s pushes token 5
    for (float& x : m.params().get("enc.b_fuse").val().v) x = 1.0f;
    auto& wc = m.params().get("dec.W_c").val();  // [8,4]
    for (int i = 0; i < 4; ++i) wc.at(i, i) = 1.0f;
    auto& ws = m.params().get("dec.W_s").val();  // [4,8]
    for (int i = 0; i < 4; ++i) ws.at(i, 5) = 5.0f;
    auto enc = m.encode_diff(two_path_ctx());
    auto out = m.greedy_decode(enc);
    REQUIRE(out.size() == 8);  // max_len, never EOS
    for (int t : out) CHECK(t == 5);
    CHECK(m.beam_search(enc, 5, 8) == out);
}

TEST_CASE("training is deterministic under a fixed seed") {
    auto run = [&]() {
        auto m = toy_model(51, 8, 8);
        TrainSample s;
        s.paths = two_path_ctx();
        s.target = {4, 6};
        TrainConfig tc;
        tc.batch = 1;
        tc.max_epochs = 5;
        tc.patience = 50;
        tc.lr = 0.01f;
        tc.seed = 77;
        auto rep = m.train({s}, {s}, tc);
        return std::make_pair(rep.train_losses, m.params().content_hash());
    };
    auto a = run();
    auto b = run();
    CHECK(a.first == b.first);
    CHECK(a.second == b.second);
}
