#include "atom/ranker.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "atom/diffparse.hpp"
#include "atom/errors.hpp"

namespace atom {

using namespace ad;

namespace {

int pooled(int dim) { return (dim - 2) / 2 + 1; }  // 2x2 window, stride 2

}  // namespace

Ranker::Ranker(Vocabulary diff_vocab, Vocabulary msg_vocab, RankerConfig config,
               std::uint64_t seed)
    : diff_vocab_(std::move(diff_vocab)), msg_vocab_(std::move(msg_vocab)), config_(config) {
    Rng rng(seed, "ranker.init");
    const int e = config_.embed;
    const int k = config_.kernel_size;
    store_.add("rank.E_d", xavier_uniform(diff_vocab_.size(), e, rng));
    store_.add("rank.E_y", xavier_uniform(msg_vocab_.size(), e, rng));
    store_.add("rank.kernels",
               uniform_init({config_.kernels, 1, k, k}, -0.3f, 0.3f, rng));
    store_.add("rank.kbias", Tensor::zeros({config_.kernels}));
    const int head_in = config_.kernels * pooled(config_.diff_cap) * pooled(config_.msg_cap);
    store_.add("rank.W_head", xavier_uniform(head_in, 1, rng));
    store_.add("rank.b_head", Tensor::zeros({1}));
}

RankingExample Ranker::encode_example(const RankingRow& row) const {
    RankingExample ex;
    ex.target = row.target;
    for (int i = 0; i < config_.diff_cap; ++i)
        ex.diff_ids.push_back(i < static_cast<int>(row.diff_tokens.size())
                                  ? diff_vocab_.encode(row.diff_tokens[static_cast<std::size_t>(i)])
                                  : Vocabulary::kPad);
    for (int i = 0; i < config_.msg_cap; ++i)
        ex.msg_ids.push_back(i < static_cast<int>(row.candidate.size())
                                 ? msg_vocab_.encode(row.candidate[static_cast<std::size_t>(i)])
                                 : Vocabulary::kPad);
    return ex;
}

Var Ranker::matching_matrix(const std::vector<int>& diff_ids, const std::vector<int>& msg_ids) {
    if (diff_ids.empty() || msg_ids.empty())
        throw EmptyMessage("matching matrix needs tokens on both sides");
    Var ed = embedding_lookup(store_.get("rank.E_d"), diff_ids);  // [L_d, e]
    Var ey = embedding_lookup(store_.get("rank.E_y"), msg_ids);   // [L_y, e]
    return matmul_nt(ed, ey);                                     // [L_d, L_y]
}

Var Ranker::score_var(const std::vector<int>& diff_ids, const std::vector<int>& msg_ids) {
    Var d = matching_matrix(diff_ids, msg_ids);
    Var c = relu_(conv_2d(d, store_.get("rank.kernels"), store_.get("rank.kbias"), true));
    Var p = max_pool_2d(c, 2, 2, 2, 2);
    const int n = static_cast<int>(p.val().size());
    Var flat = reshape(p, {1, n});
    Var out = add(matmul(flat, store_.get("rank.W_head")), store_.get("rank.b_head"));
    return reshape(out, {1});
}

double Ranker::score(const std::vector<int>& diff_ids, const std::vector<int>& msg_ids) {
    return static_cast<double>(score_var(diff_ids, msg_ids).scalar());
}

TrainReport Ranker::train(const std::vector<RankingExample>& train_set,
                          const std::vector<RankingExample>& valid_set,
                          const RankTrainConfig& cfg) {
    if (train_set.empty()) throw EmptyTrainingSet("no ranking examples");
    Rng shuffle_rng(cfg.seed, "ranker.shuffle");

    TrainReport report;
    EarlyStopping stop(cfg.patience);
    std::map<std::string, Tensor> best_params = store_.snapshot();

    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    auto example_loss = [&](const RankingExample& ex) {
        Var pred = score_var(ex.diff_ids, ex.msg_ids);
        return mse(pred, Var(Tensor::scalar(ex.target)));
    };

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch)) {
            std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch));
            store_.zero_grad();
            Var batch_loss;
            for (std::size_t i = start; i < end; ++i) {
                Var l = example_loss(train_set[order[i]]);
                batch_loss = batch_loss.valid() ? add(batch_loss, l) : l;
            }
            batch_loss = scale(batch_loss, 1.0f / static_cast<float>(end - start));
            backward(batch_loss);
            store_.adam_step(cfg.lr);
            epoch_loss +=
                static_cast<double>(batch_loss.scalar()) * static_cast<double>(end - start);
        }
        epoch_loss /= static_cast<double>(order.size());
        report.train_losses.push_back(epoch_loss);

        double vloss = epoch_loss;
        if (!valid_set.empty()) {
            double sum = 0.0;
            for (const auto& ex : valid_set)
                sum += static_cast<double>(example_loss(ex).scalar());
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

Selection Ranker::select(const std::vector<std::string>& diff_tokens,
                         const std::vector<std::string>& msg_t,
                         const std::vector<std::string>& msg_g) {
    RankingRow rt{"", diff_tokens, msg_t, 0.0f, false};
    RankingRow rg{"", diff_tokens, msg_g, 0.0f, true};
    auto et = encode_example(rt);
    auto eg = encode_example(rg);
    Selection s;
    s.score_t = score(et.diff_ids, et.msg_ids);
    s.score_g = score(eg.diff_ids, eg.msg_ids);
    s.chosen = s.score_g > s.score_t ? Chosen::Generated : Chosen::Retrieved;
    return s;
}

double ranking_target(const TokenSeq& candidate, const TokenSeq& reference) {
    return bleu(candidate, reference, 4) / 100.0;
}

Selection oracle_select(const TokenSeq& msg_t, const TokenSeq& msg_g,
                        const TokenSeq& reference) {
    Selection s;
    s.score_t = ranking_target(msg_t, reference);
    s.score_g = ranking_target(msg_g, reference);
    s.chosen = s.score_g > s.score_t ? Chosen::Generated : Chosen::Retrieved;
    return s;
}

std::vector<std::string> split_ws(const std::string& text) {
    std::istringstream in(text);
    std::vector<std::string> out;
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

std::vector<RankingRow> build_ranking_dataset(const std::vector<CommitRecord>& train_set,
                                              Ast2Seq& model, const TfIdfIndex& index,
                                              std::uint64_t seed, int* skipped) {
    std::vector<RankingRow> rows;
    int skip = 0;
    for (const auto& rec : train_set) {
        try {
            TokenSeq reference = normalize_message(rec.message).tokens;
            auto diff_toks = diff_token_strings(tokenize_changes(parse_diff({rec.diff})));
            auto enc = model.encode_diff(commit_paths(rec, seed));
            TokenSeq generated = model.decode_tokens(model.beam_search(enc));
            auto retrieved = index.retrieve_excluding(diff_toks, rec.commit_id);
            TokenSeq ret_toks = split_ws(retrieved.message);

            RankingRow rt;
            rt.commit_id = rec.commit_id;
            rt.diff_tokens = diff_toks;
            rt.candidate = ret_toks;
            rt.target = static_cast<float>(ranking_target(ret_toks, reference));
            rows.push_back(std::move(rt));

            RankingRow rg;
            rg.commit_id = rec.commit_id;
            rg.diff_tokens = diff_toks;
            rg.candidate = generated;
            rg.target = static_cast<float>(ranking_target(generated, reference));
            rg.from_generator = true;
            rows.push_back(std::move(rg));
        } catch (const Error&) {
            ++skip;
        }
    }
    if (skipped) *skipped = skip;
    return rows;
}

std::pair<Vocabulary, Vocabulary> build_ranker_vocabs(const std::vector<RankingRow>& rows) {
    Vocabulary diff_vocab(Vocabulary::Kind::Subtoken);
    Vocabulary msg_vocab(Vocabulary::Kind::Target);
    for (const auto& r : rows) {
        for (const auto& t : r.diff_tokens) diff_vocab.add(t);
        for (const auto& t : r.candidate) msg_vocab.add(t);
    }
    return {std::move(diff_vocab), std::move(msg_vocab)};
}

}  // namespace atom
