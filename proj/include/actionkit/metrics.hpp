#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "actionkit/records.hpp"
#include "actionkit/schema.hpp"

namespace actionkit {

using Tokens = std::vector<std::string>;

std::size_t levenshtein_distance(std::u32string_view a, std::u32string_view b);

/// 1 - d(a, b) / max(|a|, |b|) over code points; 1.0 when both are empty.
double levenshtein_similarity(std::string_view a, std::string_view b);

/// Fraction of scores strictly above `p`. For p = 1 the fraction of scores
/// equal to 1 is returned instead, which is what "100%LEV" reports.
/// Throws EmptyCorpus on an empty list.
double lev_threshold_fraction(std::span<const double> scores, double p);

enum class Smoothing {
    kNone,
    kAddOne,  // zero-match precisions become 1 / (total + 1)
};

/// Sentence BLEU against one or more references, on a 0..100 scale.
/// Uniform weights over 1..n-gram precisions, clipped counts, brevity
/// penalty against the closest reference length. Throws EmptyPrediction.
double bleu(const Tokens& pred, const std::vector<Tokens>& refs, int n,
            Smoothing smoothing = Smoothing::kNone);

/// Corpus BLEU: n-gram statistics and lengths are pooled over all pairs
/// before the precisions and brevity penalty are formed.
double corpus_bleu(const std::vector<Tokens>& preds, const std::vector<Tokens>& refs, int n);

struct RougeScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct RougeVariant {
    int n = 1;         // ignored when lcs is set
    bool lcs = false;  // ROUGE-L

    static RougeVariant ngram(int n) { return {n, false}; }
    static RougeVariant longest_common_subsequence() { return {0, true}; }
    // "1", "2", "4", "L", ...
    static RougeVariant from_string(std::string_view name);
    std::string name() const;
};

RougeScore rouge(const Tokens& pred, const Tokens& ref, RougeVariant variant);

/// Unique n-grams over total n-grams across the corpus; 0 with no n-grams.
double distinct_n(const std::vector<Tokens>& corpus, int n);

bool exact_match(std::string_view pred, std::string_view gold, Dialect dialect);

enum class MatchMode {
    kOps,         // SM-O: action types only
    kOpsAndArgs,  // SM-A: action types with their canonical arguments
};

/// Gestalt ratio between the token sequences of two parsed sequences.
double sequence_match(const ActionSequence& pred, const ActionSequence& gold, MatchMode mode);
std::vector<std::string> match_tokens(const ActionSequence& seq, MatchMode mode);

struct PairScore {
    std::string id;
    double levenshtein = 0.0;
    std::map<int, double> bleu;  // n -> unsmoothed sentence BLEU
    double modified_bleu = 0.0;  // add-one smoothed BLEU-4
    std::map<std::string, RougeScore> rouge;  // "1", "2", "4", "L"
    bool exact_match = false;
    double sm_o = 0.0;
    double sm_a = 0.0;
    bool valid = false;  // prediction passes check_validity
};

struct MetricReport {
    std::vector<PairScore> pairs;  // ordered by id
    std::map<std::string, double> aggregates;  // mean of every per-pair metric
    std::map<double, double> lev_thresholds;   // p -> fraction (0.5, 0.75, 0.9, 1.0)
    double validity_rate = 0.0;
    std::map<int, double> distinct_n;   // over predictions
    std::map<int, double> corpus_bleu;  // n -> pooled BLEU
    std::size_t unparsed_predictions = 0;
    std::size_t unparsed_golds = 0;
};

struct ScoreOptions {
    std::size_t threads = 0;  // 0 = hardware concurrency
};

PairScore score_pair(const std::string& id, std::string_view pred, std::string_view gold,
                     Dialect dialect);

/// Scores every prediction against the gold record with the same id.
/// Throws IdMismatch listing ids present on only one side, EmptyCorpus when
/// there is nothing to score.
MetricReport score_corpus(std::span<const Prediction> preds, std::span<const CorpusRecord> golds,
                          Dialect dialect, const ScoreOptions& options = {});

}  // namespace actionkit
