#pragma once

#include <string>
#include <vector>

namespace atom {

using TokenSeq = std::vector<std::string>;

struct MetricReport {
    double bleu1 = 0, bleu2 = 0, bleu3 = 0, bleu4 = 0;
    double rouge_l = 0, meteor = 0;
};

// Sentence-level BLEU-N, uniform weights, brevity penalty, epsilon smoothing
// for zero n-gram precisions. Returned x100.
double bleu(const TokenSeq& candidate, const TokenSeq& reference, int n);

// LCS-based F-score, x100.
double rouge_l(const TokenSeq& candidate, const TokenSeq& reference);

// Exact-match unigram alignment (max matches, then min chunks),
// F_mean = 10PR/(R+9P), Penalty = 0.5*(chunks/matched)^3, x100.
double meteor(const TokenSeq& candidate, const TokenSeq& reference);

MetricReport sentence_report(const TokenSeq& candidate, const TokenSeq& reference);

// Arithmetic mean of sentence-level scores over (candidate, reference) pairs.
MetricReport corpus_report(const std::vector<std::pair<TokenSeq, TokenSeq>>& pairs);

}  // namespace atom
