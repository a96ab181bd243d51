#include "atom/ast2seq.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "atom/errors.hpp"

namespace atom {

using namespace ad;

// --- early stopping ---------------------------------------------------------

bool EarlyStopping::observe(double valid_loss) {
    ++seen_;
    if (best_epoch_ < 0 || valid_loss < best_) {
        best_ = valid_loss;
        best_epoch_ = seen_ - 1;
        since_best_ = 0;
        return false;
    }
    ++since_best_;
    return since_best_ >= patience_;
}

// --- model ------------------------------------------------------------------

namespace {

void init_lstm(ParamStore& store, const std::string& prefix, int in, int hidden, Rng& rng) {
    for (const char* g : {"i", "f", "g", "o"}) {
        store.add(prefix + ".Wx" + g, xavier_uniform(in, hidden, rng));
        store.add(prefix + ".Wh" + g, xavier_uniform(hidden, hidden, rng));
        Tensor b = Tensor::zeros({hidden});
        if (g[0] == 'f') b = Tensor::full({hidden}, 1.0f);  // forget-gate bias
        store.add(prefix + ".b" + g, std::move(b));
    }
}

}  // namespace

Ast2Seq::Ast2Seq(Vocabulary subtoken, Vocabulary node_type, Vocabulary target,
                 ModelConfig config, std::uint64_t seed)
    : subtoken_(std::move(subtoken)),
      node_type_(std::move(node_type)),
      target_(std::move(target)),
      config_(config) {
    if (config_.hidden % 2 != 0) throw ShapeMismatch("hidden width must be even");
    Rng rng(seed, "ast2seq.init");
    const int e = config_.embed;
    const int h = config_.hidden;
    const int hp = h / 2;
    const int r = target_.size();

    store_.add("enc.E_nodes", xavier_uniform(node_type_.size(), e, rng));
    if (config_.separate_polarity_tables) {
        store_.add("enc.E_sub_added", xavier_uniform(subtoken_.size(), e, rng));
        store_.add("enc.E_sub_deleted", xavier_uniform(subtoken_.size(), e, rng));
    } else {
        store_.add("enc.E_sub", xavier_uniform(subtoken_.size(), e, rng));
    }
    init_lstm(store_, "enc.fw", e, hp, rng);
    init_lstm(store_, "enc.bw", e, hp, rng);
    store_.add("enc.W_fuse", xavier_uniform(2 * e + h, h, rng));
    store_.add("enc.b_fuse", Tensor::zeros({h}));

    store_.add("dec.E_target", xavier_uniform(r, e, rng));
    init_lstm(store_, "dec.lstm", e, h, rng);
    store_.add("dec.W_a", xavier_uniform(h, h, rng));
    store_.add("dec.W_c", xavier_uniform(2 * h, h, rng));
    store_.add("dec.W_s", xavier_uniform(h, r, rng));
}

Var Ast2Seq::lstm_cell(const std::string& prefix, const Var& x, Var& h, Var& c) {
    auto gate = [&](const char* g) {
        return add(add(matmul(x, store_.get(prefix + ".Wx" + g)),
                       matmul(h, store_.get(prefix + ".Wh" + g))),
                   store_.get(prefix + ".b" + g));
    };
    Var i = sigmoid_(gate("i"));
    Var f = sigmoid_(gate("f"));
    Var g = tanh_(gate("g"));
    Var o = sigmoid_(gate("o"));
    c = add(mul(f, c), mul(i, g));
    h = mul(o, tanh_(c));
    return h;
}

Var Ast2Seq::encode_path(const AstPath& path, Polarity polarity) {
    const int e = config_.embed;
    const int hp = config_.hidden / 2;

    std::vector<int> node_ids;
    for (NodeType t : path.node_sequence) node_ids.push_back(node_type_.encode(node_type_name(t)));
    Var node_emb = embedding_lookup(store_.get("enc.E_nodes"), node_ids);  // [L, e]
    const int L = static_cast<int>(node_ids.size());

    Var h_fw(Tensor::zeros({1, hp})), c_fw(Tensor::zeros({1, hp}));
    for (int t = 0; t < L; ++t) lstm_cell("enc.fw", slice_rows(node_emb, t, 1), h_fw, c_fw);
    Var h_bw(Tensor::zeros({1, hp})), c_bw(Tensor::zeros({1, hp}));
    for (int t = L - 1; t >= 0; --t) lstm_cell("enc.bw", slice_rows(node_emb, t, 1), h_bw, c_bw);
    // [h<-_first ; h->_last]
    Var path_feat = concat({h_bw, h_fw}, 1);  // [1, hidden]

    const char* table = "enc.E_sub";
    if (config_.separate_polarity_tables)
        table = polarity == Polarity::Added ? "enc.E_sub_added" : "enc.E_sub_deleted";
    auto leaf_feat = [&](const std::string& leaf) {
        auto subs = split_subtokens(leaf);
        std::vector<int> ids;
        for (const auto& s : subs) ids.push_back(subtoken_.encode(s));
        if (ids.empty()) ids.push_back(Vocabulary::kUnk);
        Var emb = embedding_lookup(store_.get(table), ids);  // [n, e]
        return scale(mean_rows(emb), static_cast<float>(ids.size()));  // sum of rows
    };
    Var fused_in = concat({leaf_feat(path.start_leaf), path_feat, leaf_feat(path.end_leaf)}, 1);
    (void)e;
    return tanh_(add(matmul(fused_in, store_.get("enc.W_fuse")), store_.get("enc.b_fuse")));
}

EncodedDiff Ast2Seq::assemble(Var Z, std::vector<bool> mask) const {
    EncodedDiff enc;
    enc.Z = Z;
    enc.h0 = masked_mean_rows(Z, mask);
    enc.mask = std::move(mask);
    return enc;
}

EncodedDiff Ast2Seq::encode_diff(const PathContextSet& ctx) {
    if (ctx.added.empty() && ctx.deleted.empty())
        throw EmptyContext("cannot encode a commit without paths");
    std::vector<Var> rows;
    for (const auto& p : ctx.added) rows.push_back(encode_path(p, Polarity::Added));
    for (const auto& p : ctx.deleted) rows.push_back(encode_path(p, Polarity::Deleted));
    Var Z = rows.size() == 1 ? rows[0] : concat(rows, 0);
    return assemble(Z, std::vector<bool>(rows.size(), true));
}

AttentionResult Ast2Seq::attention_step(const Var& h_t, const EncodedDiff& enc) {
    Var scores = matmul_nt(matmul(h_t, store_.get("dec.W_a")), enc.Z);  // [1, n]
    const int n = enc.Z.val().shape[0];
    bool any_masked = false;
    for (bool b : enc.mask)
        if (!b) any_masked = true;
    if (any_masked) {
        Tensor m({1, n});
        for (int i = 0; i < n; ++i) m.v[static_cast<std::size_t>(i)] = enc.mask[static_cast<std::size_t>(i)] ? 0.0f : -1e30f;
        scores = add(scores, Var(std::move(m)));
    }
    AttentionResult r;
    r.alpha = softmax(scores);
    r.c_t = matmul(r.alpha, enc.Z);
    return r;
}

DecoderState Ast2Seq::initial_state(const EncodedDiff& enc) {
    DecoderState st;
    st.h = enc.h0;
    st.c = Var(Tensor::zeros({1, config_.hidden}));
    return st;
}

DecodeStepResult Ast2Seq::decode_step(int y_prev, const DecoderState& state,
                                      const EncodedDiff& enc, bool training, Rng& rng) {
    Var x = embedding_lookup(store_.get("dec.E_target"), {y_prev});  // [1, e]
    DecoderState next = state;
    lstm_cell("dec.lstm", x, next.h, next.c);
    AttentionResult att = attention_step(next.h, enc);
    Var comb = tanh_(matmul(concat({att.c_t, next.h}, 1), store_.get("dec.W_c")));
    comb = dropout(comb, config_.dropout, training, rng);
    DecodeStepResult r;
    r.logits = matmul(comb, store_.get("dec.W_s"));
    r.state = next;
    r.alpha = att.alpha;
    return r;
}

Var Ast2Seq::sample_loss(const TrainSample& sample, bool training, Rng& rng) {
    EncodedDiff enc = encode_diff(sample.paths);
    DecoderState st = initial_state(enc);
    std::vector<int> seq;
    seq.push_back(Vocabulary::kSos);
    for (int t : sample.target) seq.push_back(t);
    seq.push_back(Vocabulary::kEos);

    Var total;
    for (std::size_t t = 0; t + 1 < seq.size(); ++t) {
        DecodeStepResult r = decode_step(seq[t], st, enc, training, rng);
        st = r.state;
        Var step = cross_entropy_with_logits(r.logits, seq[t + 1]);
        total = total.valid() ? add(total, step) : step;
    }
    return scale(total, 1.0f / static_cast<float>(seq.size() - 1));
}

TrainReport Ast2Seq::train(const std::vector<TrainSample>& train_set,
                           const std::vector<TrainSample>& valid_set, const TrainConfig& cfg) {
    if (train_set.empty()) throw EmptyTrainingSet("no training samples");
    Rng shuffle_rng(cfg.seed, "ast2seq.shuffle");
    Rng drop_rng(cfg.seed, "ast2seq.dropout");
    Rng eval_rng(cfg.seed, "ast2seq.eval");  // never draws: dropout off at eval

    TrainReport report;
    EarlyStopping stop(cfg.patience);
    std::map<std::string, Tensor> best_params = store_.snapshot();

    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch)) {
            std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch));
            store_.zero_grad();
            Var batch_loss;
            for (std::size_t i = start; i < end; ++i) {
                Var l = sample_loss(train_set[order[i]], true, drop_rng);
                batch_loss = batch_loss.valid() ? add(batch_loss, l) : l;
            }
            batch_loss = scale(batch_loss, 1.0f / static_cast<float>(end - start));
            backward(batch_loss);
            store_.adam_step(cfg.lr);
            epoch_loss += static_cast<double>(batch_loss.scalar()) * static_cast<double>(end - start);
        }
        epoch_loss /= static_cast<double>(order.size());
        report.train_losses.push_back(epoch_loss);

        double vloss = epoch_loss;
        if (!valid_set.empty()) {
            double sum = 0.0;
            for (const auto& s : valid_set)
                sum += static_cast<double>(sample_loss(s, false, eval_rng).scalar());
            vloss = sum / static_cast<double>(valid_set.size());
        }
        report.valid_losses.push_back(vloss);

        bool must_stop = stop.observe(vloss);
        if (stop.best_epoch() == epoch) best_params = store_.snapshot();
        report.stopped_epoch = epoch;
        if (must_stop) break;
    }
    store_.restore(best_params);
    report.best_epoch = stop.best_epoch();
    report.best_valid = stop.best();
    return report;
}

std::vector<int> Ast2Seq::greedy_decode(const EncodedDiff& enc) {
    Rng rng(0);  // unused: dropout disabled outside training
    DecoderState st = initial_state(enc);
    std::vector<int> out;
    int prev = Vocabulary::kSos;
    for (int t = 0; t < config_.max_len; ++t) {
        DecodeStepResult r = decode_step(prev, st, enc, false, rng);
        st = r.state;
        const auto& v = r.logits.val().v;
        int best = 0;
        for (std::size_t i = 1; i < v.size(); ++i)
            if (v[i] > v[best]) best = static_cast<int>(i);
        if (best == Vocabulary::kEos) break;
        out.push_back(best);
        prev = best;
    }
    return out;
}

std::vector<int> Ast2Seq::beam_search(const EncodedDiff& enc, int beam_width, int max_len) {
    Rng rng(0);
    struct Hyp {
        std::vector<int> tokens;
        double logp = 0.0;
        DecoderState state;
        bool done = false;
    };
    std::vector<Hyp> beam(1);
    beam[0].state = initial_state(enc);
    std::vector<Hyp> finished;

    for (int step = 0; step < max_len && !beam.empty(); ++step) {
        struct Cand {
            double logp;
            int token;
            std::size_t parent;
        };
        std::vector<Cand> cands;
        std::vector<DecoderState> next_states(beam.size());
        for (std::size_t b = 0; b < beam.size(); ++b) {
            int prev = beam[b].tokens.empty() ? Vocabulary::kSos : beam[b].tokens.back();
            DecodeStepResult r = decode_step(prev, beam[b].state, enc, false, rng);
            next_states[b] = r.state;
            std::vector<float> logp = log_softmax_values(r.logits.val());
            for (std::size_t tok = 0; tok < logp.size(); ++tok)
                cands.push_back({beam[b].logp + static_cast<double>(logp[tok]),
                                 static_cast<int>(tok), b});
        }
        std::stable_sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
            if (a.logp != b.logp) return a.logp > b.logp;
            if (a.token != b.token) return a.token < b.token;
            return a.parent < b.parent;
        });
        std::vector<Hyp> next;
        for (const Cand& c : cands) {
            if (static_cast<int>(next.size()) >= beam_width) break;
            Hyp h;
            h.tokens = beam[c.parent].tokens;
            h.logp = c.logp;
            h.state = next_states[c.parent];
            if (c.token == Vocabulary::kEos) {
                h.done = true;
                finished.push_back(h);
                // a finished hypothesis still occupies a beam slot this step
                next.push_back(std::move(h));
            } else {
                h.tokens.push_back(c.token);
                next.push_back(std::move(h));
            }
        }
        // finished hypotheses leave the active beam
        beam.clear();
        for (auto& h : next)
            if (!h.done) beam.push_back(std::move(h));
    }
    for (auto& h : beam) finished.push_back(std::move(h));  // ran into max_len

    // highest log-prob; ties -> earlier completion, then lexicographic tokens
    const Hyp* best = nullptr;
    for (const auto& h : finished) {
        if (!best || h.logp > best->logp ||
            (h.logp == best->logp && (h.tokens.size() < best->tokens.size() ||
                                      (h.tokens.size() == best->tokens.size() &&
                                       h.tokens < best->tokens))))
            best = &h;
    }
    return best ? best->tokens : std::vector<int>{};
}

std::vector<std::string> Ast2Seq::decode_tokens(const std::vector<int>& ids) const {
    std::vector<std::string> out;
    for (int id : ids) out.push_back(target_.decode(id));
    return out;
}

}  // namespace atom
