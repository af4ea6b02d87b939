#pragma once

#include <chrono>
#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "actionkit/error.hpp"
#include "actionkit/schema.hpp"

namespace actionkit {

// ---------------------------------------------------------------------------
// BERTScore
// ---------------------------------------------------------------------------

/// Ordered tokens with one unit-length row per token.
class TokenEmbeddings {
public:
    /// Throws EmptyTokens, DimensionMismatch (row count != token count) or
    /// InvalidArgument when a row norm is not 1 within 1e-6.
    TokenEmbeddings(std::vector<std::string> tokens, Eigen::MatrixXd vectors);

    /// Rescales every row to unit length first. Zero rows are rejected.
    static TokenEmbeddings normalized(std::vector<std::string> tokens, Eigen::MatrixXd vectors);

    std::size_t size() const noexcept { return tokens_.size(); }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(vectors_.cols()); }
    const std::vector<std::string>& tokens() const noexcept { return tokens_; }
    const Eigen::MatrixXd& vectors() const noexcept { return vectors_; }

private:
    std::vector<std::string> tokens_;
    Eigen::MatrixXd vectors_;
};

struct BertScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Greedy max-cosine matching: recall averages, over gold tokens, the best
/// cosine with any predicted token; precision does the same from the
/// predicted side. Throws DimensionMismatch.
BertScore bertscore(const TokenEmbeddings& pred, const TokenEmbeddings& gold);

class TokenEmbeddingProvider {
public:
    virtual ~TokenEmbeddingProvider() = default;
    virtual TokenEmbeddings embed(std::string_view text) = 0;
};

/// Whitespace tokens looked up in a fixed table. Unknown tokens are skipped;
/// EmptyTokens when nothing is left.
class LookupTokenEmbeddingProvider : public TokenEmbeddingProvider {
public:
    explicit LookupTokenEmbeddingProvider(std::map<std::string, std::vector<double>> table);
    TokenEmbeddings embed(std::string_view text) override;

private:
    std::map<std::string, std::vector<double>> table_;
    std::size_t dim_ = 0;
};

// ---------------------------------------------------------------------------
// Judges
// ---------------------------------------------------------------------------

struct JudgeConfig {
    std::string name;
    std::string endpoint;  // e.g. http://127.0.0.1:8080/v1/chat/completions
    std::string model_id;
    std::chrono::milliseconds timeout{30000};
    int max_retries = 2;

    /// Throws InvalidArgument on an empty name or endpoint, timeout <= 0 or
    /// max_retries < 0.
    void validate() const;
};

/// Raised by a JudgeClient when the request itself failed (connection,
/// timeout, non-2xx status). Retried by the orchestrator.
class TransportError : public ServiceError {
public:
    using ServiceError::ServiceError;
};

class JudgeClient {
public:
    virtual ~JudgeClient() = default;
    /// Returns the assistant message text. Throws TransportError.
    virtual std::string complete(const JudgeConfig& judge, const std::string& system_prompt,
                                 const std::string& user_prompt) = 0;
};

struct JudgeReply {
    double score = 0.0;
    std::string rationale;
};

/// Reads `SCORE: <float>` and the following `RATIONALE: <text>` line
/// (case-insensitive markers). nullopt when a marker is missing, the number
/// does not parse, or the score lies outside [0, 1].
std::optional<JudgeReply> parse_judge_reply(std::string_view text);

std::string format_judge_reply(const JudgeReply& reply);

struct ReviewCase {
    std::string id;
    std::string description;
    std::string gold_actions;
    std::string pred_actions;
};

struct JudgeEntry {
    std::string judge;
    std::optional<double> score;  // nullopt = abstained
    std::string rationale;

    bool abstained() const noexcept { return !score.has_value(); }
    friend bool operator==(const JudgeEntry&, const JudgeEntry&) = default;
};

using Round = std::vector<JudgeEntry>;

struct ReviewTranscript {
    std::string case_id;
    std::vector<Round> rounds;
    std::optional<double> final_score;  // nullopt = every judge abstained

    bool scored() const noexcept { return final_score.has_value(); }
    friend bool operator==(const ReviewTranscript&, const ReviewTranscript&) = default;
};

struct ReviewOptions {
    int rounds = 2;                      // debate rounds after round 0
    std::size_t max_prompt_bytes = 32768;
    std::size_t max_in_flight = 8;       // concurrent judge requests, all cases
    std::size_t case_workers = 1;        // cases reviewed concurrently

    void validate() const;
};

extern const char* const kJudgeSystemPrompt;

/// The user prompts start with `Case: <id>` and `Round: <n>` header lines.
std::string round0_prompt(const ReviewCase& c);
std::string debate_prompt(const ReviewCase& c, int round, const JudgeEntry& own,
                          std::span<const JudgeEntry> peers);

/// Mean of the non-abstaining scores; nullopt when all abstained.
std::optional<double> round_mean(const Round& round);

/// Caps the number of judge requests in flight across threads.
class RequestLimiter {
public:
    explicit RequestLimiter(std::size_t limit);
    ~RequestLimiter();
    void acquire();
    void release();

private:
    struct State;
    std::unique_ptr<State> state_;
};

/// Judges run concurrently. Each judge gets 1 + max_retries attempts:
/// transport failures and malformed replies are retried; a judge whose
/// attempts all failed in transport raises JudgeUnavailable, one that got
/// only malformed (or mixed) replies abstains. Throws PromptTooLong.
Round judge_round0(const ReviewCase& c, std::span<const JudgeConfig> judges, JudgeClient& client,
                   const ReviewOptions& opts, RequestLimiter* limiter = nullptr);

/// Each judge sees its own previous entry and the scores and rationales of
/// every non-abstaining peer. `round` is the index of the new round (>= 1).
Round debate_round(const Round& prev, const ReviewCase& c, std::span<const JudgeConfig> judges,
                   JudgeClient& client, const ReviewOptions& opts, int round,
                   RequestLimiter* limiter = nullptr);

/// Round 0 plus opts.rounds debate rounds per case, transcripts in input
/// order. Throws InvalidArgument when judges is empty or names repeat.
std::vector<ReviewTranscript> run_circle_review(std::span<const ReviewCase> cases,
                                                std::span<const JudgeConfig> judges,
                                                JudgeClient& client, const ReviewOptions& opts);

/// Mean final score over scored transcripts; nullopt when none is scored.
std::optional<double> aggregate_score(std::span<const ReviewTranscript> transcripts);

inline constexpr double kDefaultHardCaseThreshold = 0.4;

/// Cases whose canonical prediction and gold have gestalt similarity below
/// the threshold. Throws InvalidArgument outside [0, 1].
std::vector<ReviewCase> filter_hard_cases(std::span<const ReviewCase> cases, Dialect dialect,
                                          double threshold = kDefaultHardCaseThreshold);

}  // namespace actionkit
