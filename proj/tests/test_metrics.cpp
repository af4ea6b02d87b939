#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>

#include "actionkit/error.hpp"
#include "actionkit/metrics.hpp"
#include "actionkit/text.hpp"
#include "generators.hpp"
#include "oracles.hpp"

using namespace actionkit;

namespace {

Tokens toks(const std::string& s) { return tokenize(s); }

// Sentence BLEU straight from the definition, single reference.
double bleu_oracle(const Tokens& hyp, const Tokens& ref, int n, bool add_one) {
    double log_sum = 0.0;
    for (int k = 1; k <= n; ++k) {
        std::map<Tokens, int> h, r;
        for (std::size_t i = 0; i + k <= hyp.size(); ++i) ++h[Tokens(hyp.begin() + i, hyp.begin() + i + k)];
        for (std::size_t i = 0; i + k <= ref.size(); ++i) ++r[Tokens(ref.begin() + i, ref.begin() + i + k)];
        int match = 0, total = 0;
        for (const auto& [g, c] : h) {
            total += c;
            match += std::min(c, r.count(g) ? r[g] : 0);
        }
        double p;
        if (match > 0) {
            p = static_cast<double>(match) / total;
        } else if (add_one) {
            p = 1.0 / (total + 1);
        } else {
            return 0.0;
        }
        log_sum += std::log(p);
    }
    double c = static_cast<double>(hyp.size()), rl = static_cast<double>(ref.size());
    double bp = c > rl ? 1.0 : std::exp(1.0 - rl / c);
    return 100.0 * bp * std::exp(log_sum / n);
}

std::size_t lcs_oracle(const Tokens& a, std::size_t i, const Tokens& b, std::size_t j) {
    if (i == a.size() || j == b.size()) return 0;
    if (a[i] == b[j]) return 1 + lcs_oracle(a, i + 1, b, j + 1);
    return std::max(lcs_oracle(a, i + 1, b, j), lcs_oracle(a, i, b, j + 1));
}

const std::vector<std::string> kVocab = {"add", "stir", "the", "cat", "sat", "on", "mat", "water"};

}  // namespace

// --- Levenshtein -----------------------------------------------------------

TEST(Levenshtein, SpecExamples) {
    EXPECT_DOUBLE_EQ(levenshtein_similarity("kitten", "sitting"), 1.0 - 3.0 / 7.0);
    EXPECT_EQ(levenshtein_similarity("same", "same"), 1.0);
    EXPECT_EQ(levenshtein_similarity("", "abc"), 0.0);
    EXPECT_EQ(levenshtein_similarity("", ""), 1.0);
}

TEST(Levenshtein, CountsCodePointsNotBytes) {
    EXPECT_DOUBLE_EQ(levenshtein_similarity("25 \xC2\xB0""C", "25 C"), 1.0 - 1.0 / 5.0);
}

TEST(Levenshtein, MatchesDpOracleSymmetricAndTriangle) {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 500; ++i) {
        std::string a = oracle::random_string(rng, 20), b = oracle::random_string(rng, 20),
                    c = oracle::random_string(rng, 20);
        ASSERT_EQ(levenshtein_similarity(a, b), oracle::lev_similarity(a, b));
        ASSERT_EQ(levenshtein_similarity(a, b), levenshtein_similarity(b, a));
        std::u32string ua = utf8_codepoints(a), ub = utf8_codepoints(b), uc = utf8_codepoints(c);
        ASSERT_LE(levenshtein_distance(ua, uc), levenshtein_distance(ua, ub) + levenshtein_distance(ub, uc));
    }
}

TEST(LevThreshold, StrictAboveAndEqualityAtOne) {
    std::vector<double> s = {1.0, 0.95, 0.5};
    EXPECT_DOUBLE_EQ(lev_threshold_fraction(s, 0.9), 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(lev_threshold_fraction(s, 0.5), 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(lev_threshold_fraction(s, 1.0), 1.0 / 3.0);
    std::vector<double> ones(5, 1.0);
    EXPECT_EQ(lev_threshold_fraction(ones, 0.75), 1.0);
    EXPECT_THROW(lev_threshold_fraction(std::vector<double>{}, 0.9), EmptyCorpus);
}

TEST(LevThreshold, MonotoneInP) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 50; ++t) {
        std::vector<double> s(20);
        for (double& x : s) x = u(rng) < 0.2 ? 1.0 : u(rng);
        double prev = 2.0;
        for (double p = 0.0; p <= 1.0; p += 0.05) {
            double f = lev_threshold_fraction(s, std::min(p, 1.0));
            EXPECT_LE(f, prev);
            prev = f;
        }
    }
}

// --- BLEU --------------------------------------------------------------------

TEST(Bleu, SpecExamples) {
    EXPECT_NEAR(bleu(toks("the cat sat"), {toks("the cat sat on")}, 2), 100.0 * std::exp(1.0 - 4.0 / 3.0), 1e-9);
    EXPECT_NEAR(bleu(toks("the cat sat"), {toks("the cat sat on")}, 2), 71.65313105737893, 1e-6);
    EXPECT_EQ(bleu(toks("a b c d"), {toks("a b c d")}, 4), 100.0);
    EXPECT_EQ(bleu(toks("a b"), {toks("c d")}, 2), 0.0);
    EXPECT_THROW(bleu({}, {toks("a")}, 1), EmptyPrediction);
}

TEST(Bleu, AddOneSmoothingOnlyTouchesZeroCounts) {
    // unigram 2/3, bigram 0/2 -> smoothed 1/3
    double expected = 100.0 * std::exp(1.0 - 4.0 / 3.0) * std::sqrt(2.0 / 3.0 * 1.0 / 3.0);
    EXPECT_NEAR(bleu(toks("a x b"), {toks("a y b z")}, 2, Smoothing::kAddOne), expected, 1e-9);
    EXPECT_EQ(bleu(toks("a x b"), {toks("a y b z")}, 2, Smoothing::kNone), 0.0);
}

TEST(Bleu, ClosestReferenceLength) {
    Tokens hyp = toks("a b c");
    EXPECT_NEAR(bleu(hyp, {toks("a b c d e f"), toks("a b c d")}, 1), 100.0 * std::exp(1.0 - 4.0 / 3.0), 1e-9);
}

TEST(Bleu, MatchesOracleOnRandomPairs) {
    std::mt19937_64 rng(8);
    for (int i = 0; i < 500; ++i) {
        Tokens h = oracle::random_tokens(rng, 12, kVocab), r = oracle::random_tokens(rng, 12, kVocab);
        if (h.empty()) continue;
        for (int n = 1; n <= 4; ++n) {
            ASSERT_NEAR(bleu(h, {r}, n), bleu_oracle(h, r, n, false), 1e-9);
            ASSERT_NEAR(bleu(h, {r}, n, Smoothing::kAddOne), bleu_oracle(h, r, n, true), 1e-9);
        }
    }
}

TEST(Bleu, SelfIdentityIsMaximal) {
    std::mt19937_64 rng(9);
    for (int i = 0; i < 200; ++i) {
        Tokens x = oracle::random_tokens(rng, 15, kVocab);
        if (x.size() < 4) continue;
        for (int n = 1; n <= 4; ++n) EXPECT_NEAR(bleu(x, {x}, n), 100.0, 1e-9);
    }
}

TEST(Bleu, CorpusPoolsStatistics) {
    std::vector<Tokens> p = {toks("the cat sat"), toks("a b")};
    std::vector<Tokens> r = {toks("the cat sat on"), toks("a b")};
    // 1-grams 5/5, 2-grams 3/3; lengths 5 vs 6
    EXPECT_NEAR(corpus_bleu(p, r, 2), 100.0 * std::exp(1.0 - 6.0 / 5.0), 1e-9);
}

// --- ROUGE -------------------------------------------------------------------

TEST(Rouge, SpecExamples) {
    RougeScore r1 = rouge(toks("a b c"), toks("a c d"), RougeVariant::ngram(1));
    EXPECT_NEAR(r1.recall, 2.0 / 3.0, 1e-12);
    EXPECT_NEAR(r1.precision, 2.0 / 3.0, 1e-12);
    EXPECT_NEAR(r1.f1, 2.0 / 3.0, 1e-12);
    RougeScore rl = rouge(toks("a b c"), toks("c b a"), RougeVariant::longest_common_subsequence());
    EXPECT_NEAR(rl.recall, 1.0 / 3.0, 1e-12);
    for (const char* v : {"1", "2", "4", "L"}) {
        RougeScore s = rouge(toks("w x y z"), toks("w x y z"), RougeVariant::from_string(v));
        EXPECT_EQ(s.precision, 1.0);
        EXPECT_EQ(s.recall, 1.0);
        EXPECT_EQ(s.f1, 1.0);
    }
}

TEST(Rouge, LcsMatchesRecursiveOracle) {
    std::mt19937_64 rng(10);
    for (int i = 0; i < 300; ++i) {
        Tokens a = oracle::random_tokens(rng, 8, kVocab), b = oracle::random_tokens(rng, 8, kVocab);
        RougeScore s = rouge(a, b, RougeVariant::longest_common_subsequence());
        double l = static_cast<double>(lcs_oracle(a, 0, b, 0));
        EXPECT_EQ(s.precision, a.empty() ? 0.0 : l / a.size());
        EXPECT_EQ(s.recall, b.empty() ? 0.0 : l / b.size());
    }
}

TEST(Rouge, ZeroWhenDisjoint) {
    RougeScore s = rouge(toks("a b"), toks("c d"), RougeVariant::ngram(1));
    EXPECT_EQ(s.f1, 0.0);
    EXPECT_THROW(RougeVariant::from_string("x"), InvalidArgument);
}

// --- distinct-n, EM, SM ---------------------------------------------------------

TEST(DistinctN, SpecExamples) {
    EXPECT_EQ(distinct_n({toks("a b c d")}, 4), 1.0);
    EXPECT_DOUBLE_EQ(distinct_n(std::vector<Tokens>(10, toks("a b c d")), 4), 0.1);
    EXPECT_EQ(distinct_n({toks("a b"), toks("c")}, 4), 0.0);
}

TEST(ExactMatch, Canonicalized) {
    const char* q = "[ quench ] reagent: ( name: ice water & type: pure & )";
    EXPECT_TRUE(exact_match(q, q, Dialect::kChemTrans));
    EXPECT_FALSE(exact_match(q, "[ quench ] reagent: ( name: ice watex & type: pure & )", Dialect::kChemTrans));
    EXPECT_TRUE(exact_match("[quench]   reagent:(name: ice water&type: pure)", q, Dialect::kChemTrans));
}

TEST(SequenceMatch, SpecExamples) {
    auto ct = [](const char* s) { return parse(s, Dialect::kChemTrans); };
    ActionSequence pred = ct("[ add ] ( name: a & ) [ reflux ] [ filter ]");
    ActionSequence gold = ct("[ add ] ( name: a & ) [ filter ]");
    EXPECT_DOUBLE_EQ(sequence_match(pred, gold, MatchMode::kOps), 0.8);
    EXPECT_EQ(sequence_match(gold, gold, MatchMode::kOps), 1.0);
    EXPECT_EQ(sequence_match(gold, gold, MatchMode::kOpsAndArgs), 1.0);
    ActionSequence changed = ct("[ add ] ( name: b & ) [ filter ]");
    EXPECT_EQ(sequence_match(changed, gold, MatchMode::kOps), 1.0);
    EXPECT_LT(sequence_match(changed, gold, MatchMode::kOpsAndArgs), 1.0);
}

TEST(SequenceMatch, AgreesWithBruteForceOnRandomSequences) {
    std::mt19937_64 rng(13);
    for (int i = 0; i < 500; ++i) {
        ActionSequence a = gen::chemtrans_sequence(rng), b = gen::chemtrans_sequence(rng);
        std::vector<std::string> ops_a, ops_b;
        for (const auto& x : a.actions) ops_a.push_back(x.type.name());
        for (const auto& x : b.actions) ops_b.push_back(x.type.name());
        ASSERT_EQ(sequence_match(a, b, MatchMode::kOps), oracle::gestalt(ops_a, ops_b));
    }
}

TEST(ScorePair, InvariantsOnRandomPairs) {
    std::mt19937_64 rng(14);
    for (int i = 0; i < 200; ++i) {
        std::string g = serialize(gen::chemtrans_sequence(rng));
        std::string p = i % 3 == 0 ? g : serialize(gen::chemtrans_sequence(rng));
        PairScore s = score_pair("x", p, g, Dialect::kChemTrans);
        for (double v : {s.levenshtein, s.sm_o, s.sm_a}) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
        for (const auto& [n, v] : s.bleu) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 100.0 + 1e-9);
        }
        if (s.exact_match) {
            EXPECT_EQ(s.levenshtein, 1.0);
            EXPECT_EQ(s.sm_o, 1.0);
            EXPECT_EQ(s.sm_a, 1.0);
            std::size_t len = tokenize(g).size();
            for (const auto& [n, v] : s.bleu) {
                if (static_cast<std::size_t>(n) <= len) EXPECT_NEAR(v, 100.0, 1e-9);
            }
        }
    }
}

// --- corpus ------------------------------------------------------------------

namespace {

std::vector<CorpusRecord> four_golds() {
    return {{"r1", std::nullopt, "d", "[ add ] reagent: ( name: water & )"},
            {"r2", std::nullopt, "d", "[ filter ]"},
            {"r3", std::nullopt, "d", "[ wash ] reagent: ( name: brine & )"},
            {"r4", std::nullopt, "d", "[ evaporate ]"}};
}

std::vector<Prediction> as_predictions(const std::vector<CorpusRecord>& golds) {
    std::vector<Prediction> out;
    for (const auto& g : golds) out.push_back({g.id, g.actions});
    return out;
}

}  // namespace

TEST(ScoreCorpus, PerfectPredictions) {
    auto golds = four_golds();
    MetricReport r = score_corpus(as_predictions(golds), golds, Dialect::kChemTrans);
    EXPECT_EQ(r.aggregates.at("exact_match"), 1.0);
    for (const auto& [p, f] : r.lev_thresholds) EXPECT_EQ(f, 1.0) << p;
    EXPECT_EQ(r.validity_rate, 1.0);
    ASSERT_EQ(r.pairs.size(), 4u);
    EXPECT_EQ(r.pairs[0].id, "r1");
}

TEST(ScoreCorpus, OneCorruptedOfFour) {
    auto golds = four_golds();
    auto preds = as_predictions(golds);
    preds[2].prediction = "[ wash ] reagent: ( name: water & )";
    MetricReport r = score_corpus(preds, golds, Dialect::kChemTrans);
    EXPECT_EQ(r.aggregates.at("exact_match"), 0.75);
    EXPECT_EQ(r.lev_thresholds.at(1.0), 0.75);
}

TEST(ScoreCorpus, IdMismatchListsOrphans) {
    auto golds = four_golds();
    auto preds = as_predictions(golds);
    preds[0].id = "zz";
    try {
        score_corpus(preds, golds, Dialect::kChemTrans);
        FAIL();
    } catch (const IdMismatch& e) {
        EXPECT_EQ(e.ids(), (std::vector<std::string>{"r1", "zz"}));
        EXPECT_EQ(e.kind(), ErrorKind::kData);
    }
}

TEST(ScoreCorpus, DeterministicAcrossThreadCounts) {
    std::mt19937_64 rng(15);
    std::vector<CorpusRecord> golds;
    std::vector<Prediction> preds;
    for (int i = 0; i < 60; ++i) {
        std::string id = "id" + std::to_string(i);
        golds.push_back({id, std::nullopt, "d", serialize(gen::chemtrans_sequence(rng))});
        preds.push_back({id, serialize(gen::chemtrans_sequence(rng))});
    }
    MetricReport one = score_corpus(preds, golds, Dialect::kChemTrans, {1});
    MetricReport four = score_corpus(preds, golds, Dialect::kChemTrans, {4});
    EXPECT_EQ(one.aggregates, four.aggregates);
    EXPECT_EQ(one.lev_thresholds, four.lev_thresholds);
    double prev = 2.0;
    for (const auto& [p, f] : one.lev_thresholds) {
        EXPECT_LE(f, prev);
        prev = f;
    }
}

TEST(ScoreCorpus, UnparseablePredictionScoredNotFatal) {
    auto golds = four_golds();
    auto preds = as_predictions(golds);
    preds[1].prediction = "[ filter";
    MetricReport r = score_corpus(preds, golds, Dialect::kChemTrans);
    EXPECT_EQ(r.unparsed_predictions, 1u);
    EXPECT_EQ(r.validity_rate, 0.75);
}
