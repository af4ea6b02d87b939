#include <gtest/gtest.h>

#include <random>

#include "actionkit/error.hpp"
#include "actionkit/typematch.hpp"
#include "oracles.hpp"

using namespace actionkit;

namespace {

const std::string kNone(kNoActionLabel);

std::vector<ActionPhrase> phrases(const char* text) {
    return split_phrases(parse(text, Dialect::kChemTrans));
}

std::vector<ActionPhrase> random_phrases(std::mt19937_64& rng, std::size_t max_n) {
    static const std::vector<std::string> types = {"add", "wash", "filter", "dry"};
    std::vector<ActionPhrase> out(std::uniform_int_distribution<std::size_t>(0, max_n)(rng));
    for (auto& p : out) {
        p.type = types[std::uniform_int_distribution<std::size_t>(0, types.size() - 1)(rng)];
        p.component_text = oracle::random_string(rng, 12, "abcd");
    }
    return out;
}

std::size_t real_pairs(const MatchResult& r) {
    std::size_t n = 0;
    for (const auto& p : r.pairs) n += (p.pred_type != kNone && p.gold_type != kNone) ? 1 : 0;
    return n;
}

}  // namespace

TEST(SplitPhrases, TypeAndCanonicalComponents) {
    auto p = phrases("[ add ] reagent: ( name: water & ) [ filter ]");
    ASSERT_EQ(p.size(), 2u);
    EXPECT_EQ(p[0].type, "add");
    EXPECT_EQ(p[0].component_text, "reagent: ( name: water & )");
    EXPECT_EQ(p[1].type, "filter");
    EXPECT_EQ(p[1].component_text, "");
}

TEST(MatchPhrases, IdenticalSequencesAreDiagonal) {
    auto p = phrases("[ add ] ( name: a & ) [ wash ] ( name: brine & ) [ dry ] ( agent: MgSO4 & )");
    MatchResult r = match_phrases(p, p);
    for (const auto& pair : r.pairs) EXPECT_EQ(pair.pred_type, pair.gold_type);
    for (const auto& [type, recall] : r.recall) EXPECT_EQ(recall, 1.0) << type;
    EXPECT_EQ(r.recall.size(), 3u);
}

TEST(MatchPhrases, HallucinatedPhrasePairsWithNoAction) {
    auto gold = phrases("[ add ] ( name: water & ) [ filter ] ( note: fast & )");
    auto pred = phrases("[ add ] ( name: water & ) [ distill ] ( pressure: 10 mbar & ) [ filter ] ( note: fast & )");
    MatchResult r = match_phrases(pred, gold);
    EXPECT_EQ(r.confusion.at("distill", kNone), 1u);
    EXPECT_EQ(r.confusion.at("add", "add"), 1u);
    EXPECT_EQ(r.confusion.at("filter", "filter"), 1u);
    EXPECT_EQ(r.confusion.total(), 3u);
}

TEST(MatchPhrases, SimilarityExactlyAtThresholdIsRejected) {
    std::vector<ActionPhrase> pred = {{"wash", "a"}};
    std::vector<ActionPhrase> gold = {{"add", "abcd"}};
    ASSERT_EQ(gestalt_similarity("a", "abcd"), 0.4);
    MatchResult r = match_phrases(pred, gold, 0.4);
    ASSERT_EQ(r.pairs.size(), 2u);
    EXPECT_EQ(r.pairs[0].pred_type, kNone);
    EXPECT_EQ(r.pairs[0].gold_type, "add");
    EXPECT_EQ(r.pairs[1].gold_type, kNone);
    MatchResult looser = match_phrases(pred, gold, 0.39);
    EXPECT_EQ(looser.confusion.at("wash", "add"), 1u);
}

TEST(MatchPhrases, SubstitutionLandsOffDiagonal) {
    auto gold = phrases("[ wash ] ( name: brine & )");
    auto pred = phrases("[ extract ] ( name: brine & )");
    MatchResult r = match_phrases(pred, gold);
    EXPECT_EQ(r.confusion.at("extract", "wash"), 1u);
    EXPECT_EQ(r.recall.at("wash"), 0.0);
    EXPECT_EQ(r.recall.count("extract"), 0u);
}

TEST(MatchPhrases, RejectsThresholdOutsideUnitInterval) {
    EXPECT_THROW(match_phrases({}, {}, 1.5), InvalidArgument);
    EXPECT_THROW(match_phrases({}, {}, -0.1), InvalidArgument);
}

TEST(PerTypeRecall, ThreeOfFourAddsMatched) {
    std::vector<MatchResult> results;
    for (int i = 0; i < 4; ++i) {
        auto gold = phrases("[ add ] ( name: sodium chloride & )");
        auto pred = i == 3 ? phrases("[ quench ] ( name: sodium chloride & )") : gold;
        results.push_back(match_phrases(pred, gold));
    }
    auto recall = per_type_recall(results);
    EXPECT_EQ(recall.at("add"), 0.75);
    EXPECT_EQ(recall.count("quench"), 0u);
    EXPECT_EQ(format_recall_table(recall), "add               75.00\n");
    EXPECT_THROW(per_type_recall(std::vector<MatchResult>{}), EmptyCorpus);
}

TEST(ConfusionCsv, HeaderAndRows) {
    ConfusionMatrix m;
    m.add("add", "add", 2);
    m.add("wash", "add");
    EXPECT_EQ(confusion_to_csv(m), "pred\\gold,add,wash\nadd,2,0\nwash,1,0\n");
}

TEST(MatchProperties, EveryPhraseInExactlyOnePair) {
    std::mt19937_64 rng(21);
    for (int t = 0; t < 500; ++t) {
        auto pred = random_phrases(rng, 6), gold = random_phrases(rng, 6);
        double threshold = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        MatchResult r = match_phrases(pred, gold, threshold);
        std::size_t pred_side = 0, gold_side = 0;
        for (const auto& p : r.pairs) {
            pred_side += p.pred_type != kNone;
            gold_side += p.gold_type != kNone;
            if (p.pred_type != kNone && p.gold_type != kNone) EXPECT_GT(p.similarity, threshold);
        }
        EXPECT_EQ(pred_side, pred.size());
        EXPECT_EQ(gold_side, gold.size());
        EXPECT_EQ(r.confusion.total(), r.pairs.size());
        EXPECT_EQ(r.pairs.size(), gold.size() + (pred.size() - real_pairs(r)));
        for (const auto& g : gold) EXPECT_GE(r.confusion.gold_total(g.type), 1u);
    }
}

TEST(MatchProperties, RaisingThresholdNeverAddsPairs) {
    std::mt19937_64 rng(22);
    for (int t = 0; t < 500; ++t) {
        auto pred = random_phrases(rng, 6), gold = random_phrases(rng, 6);
        std::size_t prev = pred.size() + 1;
        for (double th = 0.0; th <= 1.0; th += 0.05) {
            std::size_t n = real_pairs(match_phrases(pred, gold, std::min(th, 1.0)));
            ASSERT_LE(n, prev) << "threshold " << th;
            prev = n;
        }
    }
}
