#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <random>
#include <sstream>

#include "actionkit/http.hpp"
#include "actionkit/review.hpp"
#include "oracles.hpp"

using namespace actionkit;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Eigen::MatrixXd rows(std::initializer_list<std::initializer_list<double>> r) {
    Eigen::MatrixXd m(r.size(), r.begin()->size());
    Eigen::Index i = 0;
    for (const auto& row : r) {
        Eigen::Index j = 0;
        for (double v : row) m(i, j++) = v;
        ++i;
    }
    return m;
}

TokenEmbeddings random_tokens(std::mt19937_64& rng, std::size_t n, std::size_t dim, bool nonneg) {
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::MatrixXd m(n, dim);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = nonneg ? std::abs(g(rng)) + 1e-3 : g(rng);
    }
    return TokenEmbeddings::normalized(std::vector<std::string>(n, "t"), m);
}

// Answers from a per-(judge, case) table; records every prompt it was sent.
class TableClient : public JudgeClient {
public:
    std::map<std::string, std::vector<std::string>> replies;  // judge|case -> per round
    std::vector<std::string> prompts;

    std::string complete(const JudgeConfig& judge, const std::string&, const std::string& user) override {
        std::string case_id = user.substr(6, user.find('\n') - 6);
        std::size_t r0 = user.find("Round: ") + 7;
        int round = std::stoi(user.substr(r0, user.find('\n', r0) - r0));
        std::lock_guard lock(mu_);
        prompts.push_back(judge.name + "|" + user);
        auto& list = replies.at(judge.name + "|" + case_id);
        return list[std::min<std::size_t>(round, list.size() - 1)];
    }

private:
    std::mutex mu_;
};

class DownClient : public JudgeClient {
public:
    std::atomic<int> calls{0};
    std::string complete(const JudgeConfig&, const std::string&, const std::string&) override {
        ++calls;
        throw TransportError("connection refused");
    }
};

std::vector<JudgeConfig> table_judges() {
    std::vector<JudgeConfig> out;
    for (const char* n : {"a", "b", "c"}) out.push_back({n, "http://unused/", n});
    return out;
}

ReviewCase make_case(const std::string& id) {
    return {id, "The mixture was filtered.", "[ filter ]", "[ filter ] [ dry ]"};
}

// Four judges against an in-process mock service.
class MockReview : public ::testing::Test {
protected:
    void SetUp() override {
        server_ = std::make_unique<MockJudgeServer>(read_file(ACTIONKIT_FIXTURES "/judges_mock.json"));
        server_->start();
        for (auto [name, model] : {std::pair{"gpt35", "gpt-3.5-turbo"}, {"gpt4o", "gpt-4o"},
                                   {"llama3", "llama-3"}, {"mistral", "mistral-7b"}}) {
            JudgeConfig j{name, server_->chat_url(), model};
            j.timeout = std::chrono::milliseconds(300);
            judges_.push_back(j);
        }
    }
    void TearDown() override { server_->stop(); }

    ReviewTranscript review(const std::string& case_id, int rounds) {
        ReviewOptions opts;
        opts.rounds = rounds;
        std::vector<ReviewCase> cases = {make_case(case_id)};
        return run_circle_review(cases, judges_, client_, opts).at(0);
    }

    std::unique_ptr<MockJudgeServer> server_;
    std::vector<JudgeConfig> judges_;
    HttpJudgeClient client_;
};

}  // namespace

// --- BERTScore -------------------------------------------------------------------

TEST(BertScore, IdenticalAndOrthogonal) {
    TokenEmbeddings x({"a", "b"}, rows({{1, 0, 0}, {0, 1, 0}}));
    BertScore s = bertscore(x, x);
    EXPECT_NEAR(s.precision, 1.0, 1e-12);
    EXPECT_NEAR(s.recall, 1.0, 1e-12);
    EXPECT_NEAR(s.f1, 1.0, 1e-12);
    TokenEmbeddings y({"c"}, rows({{0, 0, 1}}));
    BertScore z = bertscore(y, x);
    EXPECT_EQ(z.precision, 0.0);
    EXPECT_EQ(z.recall, 0.0);
    EXPECT_EQ(z.f1, 0.0);
}

TEST(BertScore, SubsetOfBasis) {
    TokenEmbeddings gold({"a", "b"}, rows({{1, 0}, {0, 1}}));
    TokenEmbeddings pred({"a"}, rows({{1, 0}}));
    BertScore s = bertscore(pred, gold);
    EXPECT_NEAR(s.recall, 0.5, 1e-12);
    EXPECT_NEAR(s.precision, 1.0, 1e-12);
    EXPECT_NEAR(s.f1, 2.0 / 3.0, 1e-12);
}

TEST(BertScore, BoundsAndPermutationInvariance) {
    std::mt19937_64 rng(31);
    for (int t = 0; t < 200; ++t) {
        bool nonneg = t % 2 == 0;
        auto p = random_tokens(rng, 1 + t % 7, 6, nonneg), g = random_tokens(rng, 1 + t % 5, 6, nonneg);
        BertScore s = bertscore(p, g);
        double lo = nonneg ? 0.0 : -1.0;
        for (double v : {s.precision, s.recall}) {
            EXPECT_GE(v, lo - 1e-12);
            EXPECT_LE(v, 1.0 + 1e-12);
        }
        if (s.precision > 0 && s.recall > 0) {
            EXPECT_LE(s.f1, std::max(s.precision, s.recall) + 1e-12);
            EXPECT_GE(s.f1, std::min(s.precision, s.recall) - 1e-12);
        }
        Eigen::MatrixXd flipped = p.vectors().colwise().reverse();
        BertScore r = bertscore(TokenEmbeddings(p.tokens(), flipped), g);
        EXPECT_NEAR(r.precision, s.precision, 1e-12);
        EXPECT_NEAR(r.recall, s.recall, 1e-12);
    }
}

TEST(BertScore, Validation) {
    EXPECT_THROW(TokenEmbeddings({}, Eigen::MatrixXd(0, 3)), EmptyTokens);
    EXPECT_THROW(TokenEmbeddings({"a"}, rows({{1, 1}})), InvalidArgument);
    EXPECT_THROW(TokenEmbeddings({"a", "b"}, rows({{1, 0}})), DimensionMismatch);
    TokenEmbeddings two({"a"}, rows({{1, 0}})), three({"a"}, rows({{1, 0, 0}}));
    EXPECT_THROW(bertscore(two, three), DimensionMismatch);
}

TEST(BertScore, LookupProviderSkipsUnknownTokens) {
    LookupTokenEmbeddingProvider p({{"add", {3, 4}}, {"water", {0, 2}}});
    TokenEmbeddings e = p.embed("add salt water");
    EXPECT_EQ(e.tokens(), (std::vector<std::string>{"add", "water"}));
    EXPECT_NEAR(e.vectors()(0, 0), 0.6, 1e-12);
    EXPECT_THROW(p.embed("salt pepper"), EmptyTokens);
}

// --- reply grammar -------------------------------------------------------------

TEST(JudgeReply, Parses) {
    auto r = parse_judge_reply("Some preamble\nscore: 0.85\nRationale: Same steps,\n  different order.");
    ASSERT_TRUE(r);
    EXPECT_EQ(r->score, 0.85);
    EXPECT_EQ(r->rationale, "Same steps, different order.");
    EXPECT_FALSE(parse_judge_reply("SCORE: 1.2\nRATIONALE: x"));
    EXPECT_FALSE(parse_judge_reply("SCORE: -0.1\nRATIONALE: x"));
    EXPECT_FALSE(parse_judge_reply("SCORE: high\nRATIONALE: x"));
    EXPECT_FALSE(parse_judge_reply("SCORE: 0.5"));
    EXPECT_FALSE(parse_judge_reply("RATIONALE: x\nSCORE: 0.5"));
    EXPECT_FALSE(parse_judge_reply("SCORE: nan\nRATIONALE: x"));
}

TEST(JudgeReply, FormatRoundTrips) {
    std::mt19937_64 rng(32);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 200; ++i) {
        JudgeReply r{u(rng), "Reason number " + std::to_string(i) + "."};
        auto back = parse_judge_reply(format_judge_reply(r));
        ASSERT_TRUE(back);
        EXPECT_EQ(back->score, r.score);
        EXPECT_EQ(back->rationale, r.rationale);
    }
}

// --- orchestration with an in-process client ------------------------------------

TEST(CircleReview, ConstantJudgesAreAFixedPoint) {
    TableClient client;
    for (const char* j : {"a", "b", "c"}) client.replies[std::string(j) + "|k"] = {"SCORE: 0.5\nRATIONALE: ok"};
    std::vector<ReviewCase> cases = {make_case("k")};
    ReviewOptions opts;
    auto t = run_circle_review(cases, table_judges(), client, opts).at(0);
    ASSERT_EQ(t.rounds.size(), 3u);
    EXPECT_EQ(t.rounds[1], t.rounds[0]);
    EXPECT_EQ(t.rounds[2], t.rounds[1]);
    EXPECT_EQ(t.final_score, 0.5);
}

TEST(CircleReview, RoundsZeroUsesRoundZeroMean) {
    TableClient client;
    client.replies["a|k"] = {"SCORE: 0.2\nRATIONALE: x", "SCORE: 0.9\nRATIONALE: y"};
    client.replies["b|k"] = {"SCORE: 0.4\nRATIONALE: x"};
    client.replies["c|k"] = {"SCORE: 0.6\nRATIONALE: x"};
    std::vector<ReviewCase> cases = {make_case("k")};
    ReviewOptions opts;
    opts.rounds = 0;
    auto t = run_circle_review(cases, table_judges(), client, opts).at(0);
    ASSERT_EQ(t.rounds.size(), 1u);
    EXPECT_NEAR(*t.final_score, 0.4, 1e-15);
    EXPECT_EQ(client.prompts.size(), 3u);
}

TEST(CircleReview, AllAbstainGivesNoScore) {
    TableClient client;
    for (const char* j : {"a", "b", "c"}) client.replies[std::string(j) + "|k"] = {"no idea"};
    std::vector<ReviewCase> cases = {make_case("k")};
    auto t = run_circle_review(cases, table_judges(), client, ReviewOptions{}).at(0);
    EXPECT_FALSE(t.scored());
    EXPECT_FALSE(aggregate_score(std::vector<ReviewTranscript>{t}).has_value());
}

TEST(CircleReview, TransportFailureEverywhereIsUnavailable) {
    DownClient client;
    std::vector<ReviewCase> cases = {make_case("k")};
    auto judges = table_judges();
    EXPECT_THROW(run_circle_review(cases, judges, client, ReviewOptions{}), JudgeUnavailable);
    EXPECT_EQ(client.calls.load() % 3, 0);
}

TEST(CircleReview, Validation) {
    TableClient client;
    std::vector<ReviewCase> cases = {make_case("k")};
    std::vector<JudgeConfig> none;
    EXPECT_THROW(run_circle_review(cases, none, client, ReviewOptions{}), InvalidArgument);
    auto dup = table_judges();
    dup[1].name = "a";
    EXPECT_THROW(run_circle_review(cases, dup, client, ReviewOptions{}), InvalidArgument);
    ReviewOptions tiny;
    tiny.max_prompt_bytes = 64;
    EXPECT_THROW(run_circle_review(cases, table_judges(), client, tiny), PromptTooLong);
    JudgeConfig bad{"x", "", "m"};
    EXPECT_THROW(bad.validate(), InvalidArgument);
}

TEST(CircleReview, FinalScoreIsMeanOfLastRoundOnRandomTables) {
    std::mt19937_64 rng(33);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 20; ++t) {
        TableClient client;
        std::vector<ReviewCase> cases;
        for (int c = 0; c < 3; ++c) {
            std::string id = "c" + std::to_string(c);
            cases.push_back(make_case(id));
            for (const char* j : {"a", "b", "c"}) {
                std::vector<std::string> per_round;
                for (int r = 0; r < 3; ++r) {
                    per_round.push_back(u(rng) < 0.2 ? std::string("garbled")
                                                     : format_judge_reply({u(rng), "because"}));
                }
                client.replies[std::string(j) + "|" + id] = per_round;
            }
        }
        ReviewOptions opts;
        opts.case_workers = 2;
        auto transcripts = run_circle_review(cases, table_judges(), client, opts);
        for (std::size_t c = 0; c < cases.size(); ++c) {
            EXPECT_EQ(transcripts[c].case_id, cases[c].id);
            double sum = 0;
            int n = 0;
            for (const auto& e : transcripts[c].rounds.back()) {
                if (e.score) sum += *e.score, ++n;
            }
            if (n == 0) {
                EXPECT_FALSE(transcripts[c].scored());
            } else {
                EXPECT_NEAR(*transcripts[c].final_score, sum / n, 1e-15);
            }
        }
    }
}

// --- orchestration over HTTP ----------------------------------------------------

TEST_F(MockReview, RoundZeroMeanOfFourJudges) {
    ReviewTranscript t = review("plain", 0);
    ASSERT_EQ(t.rounds.at(0).size(), 4u);
    std::vector<double> scores;
    for (const auto& e : t.rounds[0]) scores.push_back(*e.score);
    EXPECT_EQ(scores, (std::vector<double>{0.6, 0.8, 0.7, 0.9}));
    EXPECT_NEAR(*t.final_score, 0.75, 1e-12);
}

TEST_F(MockReview, ScoreShiftAfterDebate) {
    ReviewTranscript t = review("debate", 2);
    ASSERT_EQ(t.rounds.size(), 3u);
    EXPECT_EQ(t.rounds[0][0].score, 1.0);
    EXPECT_EQ(t.rounds[1][0].score, 0.8);
    EXPECT_EQ(t.rounds[2][0].score, 0.8);
    EXPECT_NEAR(*t.final_score, (0.8 + 0.9 + 0.7 + 0.8) / 4.0, 1e-12);
}

TEST_F(MockReview, OutOfRangeScoreIsRetriedThenAbstains) {
    ReviewTranscript t = review("flaky", 0);
    EXPECT_TRUE(t.rounds[0][0].abstained());
    int gpt35_calls = 0;
    for (const auto& r : server_->requests()) gpt35_calls += r.model == "gpt-3.5-turbo";
    EXPECT_EQ(gpt35_calls, 3);
    // gpt4o timed out once, then answered.
    EXPECT_EQ(t.rounds[0][1].score, 0.7);
    EXPECT_EQ(t.rounds[0][1].rationale, "Answered on the second try.");
    EXPECT_NEAR(*t.final_score, (0.7 + 0.7 + 0.9) / 3.0, 1e-12);
}

TEST_F(MockReview, AbstainingPeerIsLeftOutOfDebatePrompts) {
    ReviewTranscript t = review("silent", 1);
    EXPECT_TRUE(t.rounds[0][3].abstained());
    for (const auto& r : server_->requests()) {
        if (r.round != 1) continue;
        EXPECT_EQ(r.user_prompt.find("[mistral]"), std::string::npos);
        if (r.model != "gpt-3.5-turbo") EXPECT_NE(r.user_prompt.find("[gpt35]"), std::string::npos);
    }
    EXPECT_NEAR(*t.final_score, (0.6 + 0.8 + 0.7) / 3.0, 1e-12);
}

TEST_F(MockReview, TranscriptsAreDeterministic) {
    std::vector<ReviewCase> cases = {make_case("debate"), make_case("plain"), make_case("silent")};
    ReviewOptions opts;
    opts.case_workers = 3;
    auto a = run_circle_review(cases, judges_, client_, opts);
    auto b = run_circle_review(cases, judges_, client_, opts);
    EXPECT_EQ(a, b);
}

TEST_F(MockReview, BearerTokenFromEnvironment) {
    ::setenv(judge_key_env("llama3").c_str(), "secret", 1);
    review("plain", 0);
    ::unsetenv(judge_key_env("llama3").c_str());
    bool seen = false;
    for (const auto& r : server_->requests()) {
        if (r.model == "llama-3") seen = r.authorization == "Bearer secret";
    }
    EXPECT_TRUE(seen);
    EXPECT_EQ(judge_key_env("gpt-4o"), "JUDGE_GPT_4O_KEY");
}

TEST(HttpJudge, UnreachableEndpointIsTransportError) {
    HttpJudgeClient client;
    JudgeConfig j{"x", "http://127.0.0.1:9/v1/chat/completions", "m"};
    j.timeout = std::chrono::milliseconds(200);
    EXPECT_THROW(client.complete(j, "s", "u"), TransportError);
    EXPECT_THROW(split_url("ftp://host/x"), InvalidArgument);
}

// --- hard cases -----------------------------------------------------------------

TEST(HardCases, KeepsPairsBelowThreshold) {
    const std::string gold = "[ add ] reagent: ( name: sodium hydroxide & volume: 20 mL & )";
    std::vector<ReviewCase> cases;
    for (int i = 0; i < 10; ++i) {
        std::string pred = i < 3 ? "[ filter ]" : (i < 6 ? gold : "[ add ] reagent: ( name: sodium hydroxide & )");
        cases.push_back({"h" + std::to_string(i), "d", gold, pred});
    }
    auto hard = filter_hard_cases(cases, Dialect::kChemTrans);
    ASSERT_EQ(hard.size(), 3u);
    for (const auto& c : hard) EXPECT_LT(oracle::gestalt(c.pred_actions, c.gold_actions), 0.4);
    // Threshold 1.0 keeps everything that is not an exact match.
    EXPECT_EQ(filter_hard_cases(cases, Dialect::kChemTrans, 1.0).size(), 7u);
    std::vector<ReviewCase> perfect(cases.begin() + 3, cases.begin() + 6);
    EXPECT_TRUE(filter_hard_cases(perfect, Dialect::kChemTrans).empty());
    EXPECT_THROW(filter_hard_cases(cases, Dialect::kChemTrans, 1.5), InvalidArgument);
}

TEST_F(MockReview, EmbeddingServiceChunksAndOrders) {
    HttpEmbeddingProvider embed(server_->embeddings_url(), "emb", std::chrono::milliseconds(2000), 2, 16);
    std::vector<CorpusRecord> recs;
    for (int i = 0; i < 40; ++i) recs.push_back({"e" + std::to_string(i), std::nullopt, "text " + std::to_string(i % 7), "a"});
    Eigen::MatrixXd m = embed.embed(recs);
    ASSERT_EQ(m.rows(), 40);
    ASSERT_EQ(m.cols(), 8);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        EXPECT_NEAR(m.row(i).norm(), 1.0, 1e-12);
        EXPECT_EQ(m.row(i), m.row(i % 7));
    }
    EXPECT_NE(m.row(0), m.row(1));
    HttpEmbeddingProvider down("http://127.0.0.1:9/v1/embeddings", "emb", std::chrono::milliseconds(200));
    EXPECT_THROW(down.embed(recs), ServiceError);
}
