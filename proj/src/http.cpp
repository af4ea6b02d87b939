#include "actionkit/http.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>
#include <tuple>

#include "httplib.h"
#include "json.hpp"

#include "actionkit/error.hpp"

namespace actionkit {

using nlohmann::json;

UrlParts split_url(const std::string& url) {
    std::size_t scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw InvalidArgument("not a URL: " + url);
    std::string scheme = url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https") throw InvalidArgument("unsupported URL scheme: " + url);
    std::size_t path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    if (path_start == scheme_end + 3) throw InvalidArgument("URL has no host: " + url);
    return {url.substr(0, path_start), url.substr(path_start)};
}

std::string judge_key_env(const std::string& judge_name) {
    std::string var = "JUDGE_";
    for (unsigned char c : judge_name) var += std::isalnum(c) ? static_cast<char>(std::toupper(c)) : '_';
    return var + "_KEY";
}

namespace {

httplib::Client make_client(const UrlParts& url, std::chrono::milliseconds timeout) {
    httplib::Client cli(url.base);
    cli.set_connection_timeout(timeout);
    cli.set_read_timeout(timeout);
    cli.set_write_timeout(timeout);
    return cli;
}

}  // namespace

// ---------------------------------------------------------------------------
// Clients
// ---------------------------------------------------------------------------

std::string HttpJudgeClient::complete(const JudgeConfig& judge, const std::string& system_prompt,
                                      const std::string& user_prompt) {
    UrlParts url = split_url(judge.endpoint);
    json body = {{"model", judge.model_id},
                 {"temperature", 0},
                 {"messages",
                  json::array({{{"role", "system"}, {"content", system_prompt}},
                               {{"role", "user"}, {"content", user_prompt}}})}};

    httplib::Client cli = make_client(url, judge.timeout);
    if (const char* key = std::getenv(judge_key_env(judge.name).c_str()); key && *key) {
        cli.set_bearer_token_auth(key);
    }
    auto res = cli.Post(url.path, body.dump(), "application/json");
    if (!res) throw TransportError(judge.name + ": " + httplib::to_string(res.error()));
    if (res->status < 200 || res->status >= 300) {
        throw TransportError(judge.name + ": HTTP " + std::to_string(res->status));
    }

    json reply = json::parse(res->body, nullptr, false);
    if (reply.is_discarded()) return "";
    if (!reply.contains("choices") || !reply["choices"].is_array() || reply["choices"].empty()) return "";
    json msg = reply["choices"][0].value("message", json::object());
    if (!msg.contains("content") || !msg["content"].is_string()) return "";
    return msg["content"].get<std::string>();
}

HttpEmbeddingProvider::HttpEmbeddingProvider(std::string url, std::string model,
                                             std::chrono::milliseconds timeout,
                                             std::size_t max_in_flight, std::size_t chunk_size)
    : url_(split_url(url)), model_(std::move(model)), timeout_(timeout),
      max_in_flight_(max_in_flight), chunk_size_(chunk_size) {
    if (timeout_.count() <= 0) throw InvalidArgument("embedding timeout must be > 0");
    if (max_in_flight_ == 0 || chunk_size_ == 0) {
        throw InvalidArgument("embedding in-flight cap and chunk size must be positive");
    }
}

std::vector<std::vector<double>> HttpEmbeddingProvider::request(
    const std::vector<std::string>& texts) const {
    json body = {{"model", model_}, {"input", texts}};
    httplib::Client cli = make_client(url_, timeout_);
    auto res = cli.Post(url_.path, body.dump(), "application/json");
    if (!res) throw ServiceError("embedding service: " + httplib::to_string(res.error()));
    if (res->status < 200 || res->status >= 300) {
        throw ServiceError("embedding service: HTTP " + std::to_string(res->status));
    }
    json reply = json::parse(res->body, nullptr, false);
    if (reply.is_discarded() || !reply.contains("data") || !reply["data"].is_array() ||
        reply["data"].size() != texts.size()) {
        throw ServiceError("embedding service: unexpected response shape");
    }
    std::vector<std::vector<double>> out(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) {
        const json& item = reply["data"][i];
        std::size_t slot = item.value("index", i);
        if (slot >= texts.size() || !item.contains("embedding")) {
            throw ServiceError("embedding service: bad item " + std::to_string(i));
        }
        out[slot] = item["embedding"].get<std::vector<double>>();
    }
    return out;
}

Eigen::MatrixXd HttpEmbeddingProvider::embed(std::span<const CorpusRecord> records) {
    std::vector<std::vector<std::string>> chunks;
    for (std::size_t i = 0; i < records.size(); i += chunk_size_) {
        std::vector<std::string> texts;
        for (std::size_t j = i; j < std::min(records.size(), i + chunk_size_); ++j) {
            texts.push_back(records[j].description);
        }
        chunks.push_back(std::move(texts));
    }

    std::vector<std::vector<std::vector<double>>> results(chunks.size());
    std::vector<std::exception_ptr> errors(chunks.size());
    for (std::size_t start = 0; start < chunks.size(); start += max_in_flight_) {
        std::vector<std::jthread> wave;
        for (std::size_t c = start; c < std::min(chunks.size(), start + max_in_flight_); ++c) {
            wave.emplace_back([&, c] {
                try {
                    results[c] = request(chunks[c]);
                } catch (...) {
                    errors[c] = std::current_exception();
                }
            });
        }
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    std::size_t dim = records.empty() ? 0 : results.front().front().size();
    Eigen::MatrixXd m(static_cast<Eigen::Index>(records.size()), static_cast<Eigen::Index>(dim));
    Eigen::Index row = 0;
    for (const auto& chunk : results) {
        for (const auto& vec : chunk) {
            if (vec.size() != dim) throw DimensionMismatch("embedding service returned ragged vectors");
            for (std::size_t j = 0; j < dim; ++j) m(row, static_cast<Eigen::Index>(j)) = vec[j];
            ++row;
        }
    }
    return m;
}

// ---------------------------------------------------------------------------
// Mock server
// ---------------------------------------------------------------------------

struct MockJudgeServer::Impl {
    json script;
    httplib::Server server;
    std::thread thread;
    int port = -1;
    std::string host;

    mutable std::mutex mu;
    std::map<std::tuple<std::string, std::string, int>, std::size_t> served;
    std::vector<MockRequest> log;

    void handle_chat(const httplib::Request& req, httplib::Response& res);
    void handle_embeddings(const httplib::Request& req, httplib::Response& res);
};

namespace {

void header_fields(const std::string& prompt, std::string& case_id, int& round) {
    std::istringstream in(prompt);
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("Case: ", 0) == 0) {
            case_id = normalize_space(line.substr(6));
        } else if (line.rfind("Round: ", 0) == 0) {
            round = std::atoi(line.c_str() + 7);
        }
        if (!case_id.empty() && round >= 0) return;
    }
}

json pick(const json& list, std::size_t index) {
    if (!list.is_array() || list.empty()) return list;
    return list[std::min(index, list.size() - 1)];
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace

void MockJudgeServer::Impl::handle_chat(const httplib::Request& req, httplib::Response& res) {
    json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.contains("messages")) {
        res.status = 400;
        return;
    }
    MockRequest entry;
    entry.model = body.value("model", "");
    for (const auto& m : body["messages"]) {
        if (m.value("role", "") == "user") entry.user_prompt = m.value("content", "");
    }
    entry.authorization = req.get_header_value("Authorization");
    header_fields(entry.user_prompt, entry.case_id, entry.round);

    json attempt;
    {
        std::lock_guard lock(mu);
        log.push_back(entry);
        const json& models = script.value("models", json::object());
        if (!models.contains(entry.model)) {
            res.status = 404;
            res.set_content(R"({"error":"unknown model"})", "application/json");
            return;
        }
        const json& model = models[entry.model];
        json round_spec = model.value("default", json::object());
        const json& cases = model.value("cases", json::object());
        if (cases.contains(entry.case_id)) {
            round_spec = pick(cases[entry.case_id], static_cast<std::size_t>(std::max(entry.round, 0)));
        }
        std::size_t n = served[{entry.model, entry.case_id, entry.round}]++;
        attempt = round_spec.contains("attempts") ? pick(round_spec["attempts"], n) : round_spec;
    }

    if (int delay = attempt.value("delay_ms", 0); delay > 0) {
        std::this_thread::sleep_for(std::chrono::milliseconds(delay));
    }
    if (attempt.contains("status") && attempt["status"].get<int>() != 200) {
        res.status = attempt["status"].get<int>();
        res.set_content(R"({"error":"scripted failure"})", "application/json");
        return;
    }
    std::string content;
    if (attempt.contains("raw")) {
        content = attempt["raw"].get<std::string>();
    } else {
        content = format_judge_reply({attempt.value("score", 0.0), attempt.value("rationale", "")});
    }
    json reply = {{"id", "mock"},
                  {"model", entry.model},
                  {"choices", json::array({{{"index", 0},
                                            {"message", {{"role", "assistant"}, {"content", content}}},
                                            {"finish_reason", "stop"}}})}};
    res.set_content(reply.dump(), "application/json");
}

void MockJudgeServer::Impl::handle_embeddings(const httplib::Request& req, httplib::Response& res) {
    json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.contains("input") || !body["input"].is_array()) {
        res.status = 400;
        return;
    }
    const int dim = script.value("embedding_dim", 8);
    json data = json::array();
    std::size_t index = 0;
    for (const auto& text : body["input"]) {
        std::mt19937_64 rng(fnv1a(text.get<std::string>()));
        std::normal_distribution<double> normal;
        std::vector<double> v(static_cast<std::size_t>(dim));
        double norm = 0.0;
        for (double& x : v) {
            x = normal(rng);
            norm += x * x;
        }
        norm = std::sqrt(norm);
        for (double& x : v) x /= norm;
        data.push_back({{"index", index++}, {"embedding", v}});
    }
    res.set_content(json{{"data", data}}.dump(), "application/json");
}

MockJudgeServer::MockJudgeServer(const std::string& script_json) : impl_(std::make_unique<Impl>()) {
    impl_->script = json::parse(script_json, nullptr, false);
    if (impl_->script.is_discarded() || !impl_->script.is_object()) {
        throw InvalidArgument("mock judge script is not a JSON object");
    }
    Impl* impl = impl_.get();
    impl_->server.Post("/v1/chat/completions", [impl](const httplib::Request& q, httplib::Response& r) {
        impl->handle_chat(q, r);
    });
    impl_->server.Post("/v1/embeddings", [impl](const httplib::Request& q, httplib::Response& r) {
        impl->handle_embeddings(q, r);
    });
}

MockJudgeServer MockJudgeServer::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return MockJudgeServer(ss.str());
}

MockJudgeServer::~MockJudgeServer() {
    if (impl_) stop();
}

MockJudgeServer::MockJudgeServer(MockJudgeServer&&) noexcept = default;
MockJudgeServer& MockJudgeServer::operator=(MockJudgeServer&&) noexcept = default;

int MockJudgeServer::start(const std::string& host, int port) {
    if (impl_->thread.joinable()) throw InvalidArgument("mock server already started");
    impl_->host = host;
    if (port == 0) {
        impl_->port = impl_->server.bind_to_any_port(host);
    } else {
        impl_->port = impl_->server.bind_to_port(host, port) ? port : -1;
    }
    if (impl_->port < 0) throw ServiceError("cannot bind mock server on " + host);
    impl_->thread = std::thread([impl = impl_.get()] { impl->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return impl_->port;
}

void MockJudgeServer::stop() {
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

void MockJudgeServer::wait() {
    if (impl_->thread.joinable()) impl_->thread.join();
}

int MockJudgeServer::port() const { return impl_->port; }

std::string MockJudgeServer::chat_url() const {
    return "http://" + impl_->host + ":" + std::to_string(impl_->port) + "/v1/chat/completions";
}

std::string MockJudgeServer::embeddings_url() const {
    return "http://" + impl_->host + ":" + std::to_string(impl_->port) + "/v1/embeddings";
}

std::vector<MockRequest> MockJudgeServer::requests() const {
    std::lock_guard lock(impl_->mu);
    return impl_->log;
}

}  // namespace actionkit
