#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "atom/ast.hpp"
#include "atom/autodiff.hpp"
#include "atom/preprocess.hpp"

namespace atom {

struct ModelConfig {
    int embed = 128;        // node/subtoken/target embedding width
    int hidden = 256;       // fused path width == decoder hidden; must be even
    float dropout = 0.4f;
    int max_len = 20;       // decoded message length bound
    int beam_width = 5;
    bool separate_polarity_tables = true;
};

struct TrainConfig {
    int batch = 16;
    int max_epochs = 500;
    int patience = 20;
    float lr = 1e-4f;
    std::uint64_t seed = 1;
};

struct EncodedDiff {
    ad::Var Z;                // (p+k) x hidden
    ad::Var h0;               // 1 x hidden, masked mean of Z rows
    std::vector<bool> mask;   // validity per row
};

struct DecoderState {
    ad::Var h;  // 1 x hidden
    ad::Var c;  // 1 x hidden
};

struct AttentionResult {
    ad::Var alpha;  // 1 x (p+k)
    ad::Var c_t;    // 1 x hidden
};

struct DecodeStepResult {
    ad::Var logits;  // 1 x r
    DecoderState state;
    ad::Var alpha;
};

struct TrainSample {
    PathContextSet paths;
    std::vector<int> target;  // message token ids, no SOS/EOS
};

struct TrainReport {
    std::vector<double> train_losses;
    std::vector<double> valid_losses;
    int best_epoch = -1;      // 0-based
    int stopped_epoch = -1;   // epoch index after which training stopped
    double best_valid = 0.0;
};

// patience-based early stopping; observe() returns true when training must stop
class EarlyStopping {
public:
    explicit EarlyStopping(int patience) : patience_(patience) {}
    bool observe(double valid_loss);
    double best() const { return best_; }
    int best_epoch() const { return best_epoch_; }
    int epochs_seen() const { return seen_; }

private:
    int patience_;
    int seen_ = 0;
    int since_best_ = 0;
    int best_epoch_ = -1;
    double best_ = 0.0;
};

class Ast2Seq {
public:
    Ast2Seq(Vocabulary subtoken, Vocabulary node_type, Vocabulary target,
            ModelConfig config, std::uint64_t seed);

    ad::Var encode_path(const AstPath& path, Polarity polarity);
    EncodedDiff encode_diff(const PathContextSet& ctx);
    // Z rows with an explicit mask (padded-batch form); h0 = masked mean
    EncodedDiff assemble(ad::Var Z, std::vector<bool> mask) const;

    AttentionResult attention_step(const ad::Var& h_t, const EncodedDiff& enc);
    DecodeStepResult decode_step(int y_prev, const DecoderState& state,
                                 const EncodedDiff& enc, bool training, Rng& rng);
    DecoderState initial_state(const EncodedDiff& enc);

    // teacher-forced cross entropy averaged over the sample's non-PAD targets
    ad::Var sample_loss(const TrainSample& sample, bool training, Rng& rng);

    TrainReport train(const std::vector<TrainSample>& train_set,
                      const std::vector<TrainSample>& valid_set, const TrainConfig& cfg);

    std::vector<int> greedy_decode(const EncodedDiff& enc);
    std::vector<int> beam_search(const EncodedDiff& enc, int beam_width, int max_len);
    std::vector<int> beam_search(const EncodedDiff& enc) {
        return beam_search(enc, config_.beam_width, config_.max_len);
    }

    std::vector<std::string> decode_tokens(const std::vector<int>& ids) const;

    ad::ParamStore& params() { return store_; }
    const ModelConfig& config() const { return config_; }
    const Vocabulary& target_vocab() const { return target_; }
    const Vocabulary& subtoken_vocab() const { return subtoken_; }
    const Vocabulary& node_vocab() const { return node_type_; }

private:
    ad::Var lstm_cell(const std::string& prefix, const ad::Var& x, ad::Var& h, ad::Var& c);

    Vocabulary subtoken_;
    Vocabulary node_type_;
    Vocabulary target_;
    ModelConfig config_;
    ad::ParamStore store_;
};

}  // namespace atom
