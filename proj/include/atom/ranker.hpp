#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "atom/ast2seq.hpp"
#include "atom/autodiff.hpp"
#include "atom/metrics.hpp"
#include "atom/preprocess.hpp"
#include "atom/retrieval.hpp"

namespace atom {

struct RankerConfig {
    int embed = 128;
    int diff_cap = 128;  // L_d
    int msg_cap = 20;    // L_y
    int kernels = 16;
    int kernel_size = 3;
};

struct RankingRow {
    std::string commit_id;
    std::vector<std::string> diff_tokens;
    std::vector<std::string> candidate;
    float target = 0.0f;  // Y = BLEU-4 / 100
    bool from_generator = false;
};

struct RankingExample {
    std::vector<int> diff_ids;  // padded/truncated to diff_cap
    std::vector<int> msg_ids;   // padded/truncated to msg_cap
    float target = 0.0f;
};

enum class Chosen { Retrieved, Generated };

struct Selection {
    double score_t = 0.0;
    double score_g = 0.0;
    Chosen chosen = Chosen::Retrieved;  // generated iff score_g > score_t
};

struct RankTrainConfig {
    int batch = 16;
    int max_epochs = 200;
    int patience = 20;
    float lr = 1e-4f;
    std::uint64_t seed = 1;
};

class Ranker {
public:
    Ranker(Vocabulary diff_vocab, Vocabulary msg_vocab, RankerConfig config,
           std::uint64_t seed);

    RankingExample encode_example(const RankingRow& row) const;

    ad::Var matching_matrix(const std::vector<int>& diff_ids,
                            const std::vector<int>& msg_ids);  // [L_d, L_y]
    ad::Var score_var(const std::vector<int>& diff_ids, const std::vector<int>& msg_ids);
    double score(const std::vector<int>& diff_ids, const std::vector<int>& msg_ids);

    TrainReport train(const std::vector<RankingExample>& train_set,
                      const std::vector<RankingExample>& valid_set,
                      const RankTrainConfig& cfg);

    Selection select(const std::vector<std::string>& diff_tokens,
                     const std::vector<std::string>& msg_t,
                     const std::vector<std::string>& msg_g);

    ad::ParamStore& params() { return store_; }
    const RankerConfig& config() const { return config_; }
    const Vocabulary& diff_vocab() const { return diff_vocab_; }
    const Vocabulary& msg_vocab() const { return msg_vocab_; }

private:
    Vocabulary diff_vocab_;
    Vocabulary msg_vocab_;
    RankerConfig config_;
    ad::ParamStore store_;
};

// Y for one candidate against the normalized reference
double ranking_target(const TokenSeq& candidate, const TokenSeq& reference);

// selection by true BLEU-4 (the oracle ranker); same tie rule as Ranker::select
Selection oracle_select(const TokenSeq& msg_t, const TokenSeq& msg_g, const TokenSeq& reference);

std::vector<RankingRow> build_ranking_dataset(const std::vector<CommitRecord>& train_set,
                                              Ast2Seq& model, const TfIdfIndex& index,
                                              std::uint64_t seed, int* skipped = nullptr);

// vocabularies over the rows' diff and candidate tokens (min frequency 1)
std::pair<Vocabulary, Vocabulary> build_ranker_vocabs(const std::vector<RankingRow>& rows);

std::vector<std::string> split_ws(const std::string& text);

}  // namespace atom
