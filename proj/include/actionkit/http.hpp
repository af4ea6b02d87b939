#pragma once

#include <chrono>
#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "actionkit/review.hpp"
#include "actionkit/select.hpp"

namespace actionkit {

struct UrlParts {
    std::string base;  // scheme://host[:port]
    std::string path;  // starts with '/'
};

/// Throws InvalidArgument on anything but http:// or https:// URLs.
UrlParts split_url(const std::string& url);

/// JUDGE_<NAME>_KEY with the name upper-cased and other characters mapped to '_'.
std::string judge_key_env(const std::string& judge_name);

/// OpenAI-style chat completion: POST {model, messages: [system, user]} and
/// read choices[0].message.content. A bearer token is sent when the judge's
/// key variable is set. Connection errors, timeouts and non-2xx statuses
/// raise TransportError; a body of unexpected shape yields "" (treated as a
/// malformed reply).
class HttpJudgeClient : public JudgeClient {
public:
    std::string complete(const JudgeConfig& judge, const std::string& system_prompt,
                         const std::string& user_prompt) override;
};

/// Embeds record descriptions through POST {model, input: [texts]} and reads
/// data[i].embedding. Records are sent in chunks, at most `max_in_flight`
/// chunks concurrently. Failures raise ServiceError.
class HttpEmbeddingProvider : public EmbeddingProvider {
public:
    HttpEmbeddingProvider(std::string url, std::string model, std::chrono::milliseconds timeout,
                          std::size_t max_in_flight = 4, std::size_t chunk_size = 16);
    Eigen::MatrixXd embed(std::span<const CorpusRecord> records) override;

private:
    std::vector<std::vector<double>> request(const std::vector<std::string>& texts) const;

    UrlParts url_;
    std::string model_;
    std::chrono::milliseconds timeout_;
    std::size_t max_in_flight_;
    std::size_t chunk_size_;
};

struct MockRequest {
    std::string model;
    std::string case_id;
    int round = -1;
    std::string user_prompt;
    std::string authorization;
};

/// Deterministic stand-in for judge and embedding services.
///
/// Script (JSON):
///   {"models": {"<model_id>": {
///       "default": {"score": 0.5, "rationale": "..."},
///       "cases": {"<case id>": [<round 0>, <round 1>, ...]}}},
///    "embedding_dim": 8}
/// A round entry is a reply {"score", "rationale"}, or {"attempts": [...]}
/// whose items are replies, {"raw": "<content>"} or {"status": <code>}, each
/// with an optional "delay_ms". Attempts are consumed in order per
/// (model, case, round) and the last one repeats; rounds past the end of the
/// list reuse the last round. Case and round come from the `Case:` and
/// `Round:` lines of the user prompt.
///
/// POST /v1/chat/completions answers judges; POST /v1/embeddings returns
/// hash-seeded unit vectors of `embedding_dim` components per input text.
class MockJudgeServer {
public:
    explicit MockJudgeServer(const std::string& script_json);
    static MockJudgeServer from_file(const std::string& path);
    ~MockJudgeServer();
    MockJudgeServer(MockJudgeServer&&) noexcept;
    MockJudgeServer& operator=(MockJudgeServer&&) noexcept;

    /// Binds (port 0 picks a free port) and serves on a background thread.
    int start(const std::string& host = "127.0.0.1", int port = 0);
    void stop();
    /// Blocks until stop() is called from elsewhere.
    void wait();

    int port() const;
    std::string chat_url() const;
    std::string embeddings_url() const;
    std::vector<MockRequest> requests() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace actionkit
