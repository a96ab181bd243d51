#include "atom/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

#include "atom/errors.hpp"

namespace atom {

namespace {

constexpr double kEps = 1e-9;  // smoothing for zero n-gram precisions

std::map<std::vector<std::string>, int> ngram_counts(const TokenSeq& s, int n) {
    std::map<std::vector<std::string>, int> counts;
    if (static_cast<int>(s.size()) < n) return counts;
    for (std::size_t i = 0; i + n <= s.size(); ++i)
        ++counts[std::vector<std::string>(s.begin() + i, s.begin() + i + n)];
    return counts;
}

// Modified (clipped) n-gram precision.
double clipped_precision(const TokenSeq& cand, const TokenSeq& ref, int n) {
    auto cc = ngram_counts(cand, n);
    auto rc = ngram_counts(ref, n);
    long total = 0, clipped = 0;
    for (const auto& [gram, cnt] : cc) {
        total += cnt;
        auto it = rc.find(gram);
        if (it != rc.end()) clipped += std::min(cnt, it->second);
    }
    if (total == 0) return 0.0;
    return static_cast<double>(clipped) / static_cast<double>(total);
}

int lcs_length(const TokenSeq& a, const TokenSeq& b) {
    const std::size_t n = a.size(), m = b.size();
    std::vector<int> prev(m + 1, 0), cur(m + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        for (std::size_t j = 1; j <= m; ++j) {
            cur[j] = (a[i - 1] == b[j - 1]) ? prev[j - 1] + 1
                                            : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

struct Alignment {
    int matches = 0;
    int chunks = 0;
};

// Exhaustive minimum-chunk alignment among maximal exact-match alignments.
class ChunkSearch {
public:
    ChunkSearch(const TokenSeq& cand, const TokenSeq& ref)
        : cand_(cand), ref_(ref), ref_used_(ref.size(), false) {
        std::unordered_map<std::string, int> cc, rc;
        for (const auto& t : cand) ++cc[t];
        for (const auto& t : ref) ++rc[t];
        for (const auto& [tok, c] : cc) {
            auto it = rc.find(tok);
            if (it != rc.end()) max_matches_ += std::min(c, it->second);
        }
        for (std::size_t j = 0; j < ref.size(); ++j) ref_pos_[ref[j]].push_back(j);
    }

    Alignment run() {
        if (max_matches_ == 0) return {0, 0};
        best_chunks_ = max_matches_ + 1;
        dfs(0, 0, 0, -2, -2);
        if (nodes_ > kNodeCap) return greedy();  // blown budget; fall back
        return {max_matches_, best_chunks_};
    }

    Alignment greedy() const {
        std::unordered_map<std::string, int> budget;
        for (const auto& t : ref_) ++budget[t];
        std::vector<bool> used(ref_.size(), false);
        int matches = 0, chunks = 0;
        int prev_c = -2, prev_r = -2;
        for (int i = 0; i < static_cast<int>(cand_.size()); ++i) {
            auto b = budget.find(cand_[i]);
            if (b == budget.end() || b->second == 0) continue;
            int pick = -1;
            // prefer extending the current chunk
            if (prev_c == i - 1 && prev_r + 1 < static_cast<int>(ref_.size()) &&
                !used[prev_r + 1] && ref_[prev_r + 1] == cand_[i]) {
                pick = prev_r + 1;
            } else {
                for (int j : ref_pos_.at(cand_[i])) {
                    if (!used[j]) { pick = j; break; }
                }
            }
            if (pick < 0) continue;
            used[pick] = true;
            --b->second;
            if (!(prev_c == i - 1 && prev_r == pick - 1)) ++chunks;
            prev_c = i;
            prev_r = pick;
            ++matches;
        }
        return {matches, chunks};
    }

private:
    static constexpr long kNodeCap = 200000;

    void dfs(int ci, int matched, int chunks, int prev_c, int prev_r) {
        if (nodes_ > kNodeCap || chunks >= best_chunks_) return;
        ++nodes_;
        if (matched == max_matches_) {
            best_chunks_ = std::min(best_chunks_, chunks);
            return;
        }
        if (ci >= static_cast<int>(cand_.size())) return;
        // prune: not enough candidate positions left to reach max matches
        if (matched + (static_cast<int>(cand_.size()) - ci) < max_matches_) return;
        auto it = ref_pos_.find(cand_[ci]);
        if (it != ref_pos_.end()) {
            for (int j : it->second) {
                if (ref_used_[j]) continue;
                bool extends = (prev_c == ci - 1 && prev_r == j - 1);
                ref_used_[j] = true;
                dfs(ci + 1, matched + 1, chunks + (extends ? 0 : 1), ci, j);
                ref_used_[j] = false;
            }
        }
        dfs(ci + 1, matched, chunks, prev_c, prev_r);  // leave ci unmatched
    }

    const TokenSeq& cand_;
    const TokenSeq& ref_;
    std::vector<bool> ref_used_;
    std::unordered_map<std::string, std::vector<int>> ref_pos_;
    int max_matches_ = 0;
    int best_chunks_ = 0;
    long nodes_ = 0;
};

}  // namespace

double bleu(const TokenSeq& candidate, const TokenSeq& reference, int n) {
    if (reference.empty()) throw EmptyReference("bleu: empty reference");
    if (candidate.empty()) return 0.0;
    const double c = static_cast<double>(candidate.size());
    const double r = static_cast<double>(reference.size());
    const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
    double log_sum = 0.0;
    for (int k = 1; k <= n; ++k) {
        double p = clipped_precision(candidate, reference, k);
        if (p <= 0.0) p = kEps;
        log_sum += std::log(p) / n;
    }
    return 100.0 * bp * std::exp(log_sum);
}

double rouge_l(const TokenSeq& candidate, const TokenSeq& reference) {
    if (candidate.empty() || reference.empty())
        throw EmptySequence("rouge_l: empty sequence");
    const double lcs = lcs_length(candidate, reference);
    const double p = lcs / static_cast<double>(candidate.size());
    const double r = lcs / static_cast<double>(reference.size());
    if (p + r == 0.0) return 0.0;
    return 100.0 * 2.0 * p * r / (p + r);
}

double meteor(const TokenSeq& candidate, const TokenSeq& reference) {
    if (candidate.empty() || reference.empty())
        throw EmptySequence("meteor: empty sequence");
    ChunkSearch search(candidate, reference);
    Alignment a = (candidate.size() > 20 || reference.size() > 20) ? search.greedy()
                                                                   : search.run();
    if (a.matches == 0) return 0.0;
    const double p = static_cast<double>(a.matches) / candidate.size();
    const double r = static_cast<double>(a.matches) / reference.size();
    const double f_mean = 10.0 * p * r / (r + 9.0 * p);
    const double frag = static_cast<double>(a.chunks) / a.matches;
    const double penalty = 0.5 * frag * frag * frag;
    return 100.0 * f_mean * (1.0 - penalty);
}

MetricReport sentence_report(const TokenSeq& candidate, const TokenSeq& reference) {
    MetricReport rep;
    rep.bleu1 = bleu(candidate, reference, 1);
    rep.bleu2 = bleu(candidate, reference, 2);
    rep.bleu3 = bleu(candidate, reference, 3);
    rep.bleu4 = bleu(candidate, reference, 4);
    rep.rouge_l = candidate.empty() ? 0.0 : rouge_l(candidate, reference);
    rep.meteor = candidate.empty() ? 0.0 : meteor(candidate, reference);
    return rep;
}

MetricReport corpus_report(const std::vector<std::pair<TokenSeq, TokenSeq>>& pairs) {
    MetricReport total;
    if (pairs.empty()) return total;
    for (const auto& [cand, ref] : pairs) {
        MetricReport s = sentence_report(cand, ref);
        total.bleu1 += s.bleu1;
        total.bleu2 += s.bleu2;
        total.bleu3 += s.bleu3;
        total.bleu4 += s.bleu4;
        total.rouge_l += s.rouge_l;
        total.meteor += s.meteor;
    }
    const double n = static_cast<double>(pairs.size());
    total.bleu1 /= n;
    total.bleu2 /= n;
    total.bleu3 /= n;
    total.bleu4 /= n;
    total.rouge_l /= n;
    total.meteor /= n;
    return total;
}

}  // namespace atom
