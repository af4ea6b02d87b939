#include "actionkit/review.hpp"

#include <atomic>
#include <cctype>
#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "actionkit/text.hpp"
#include "actionkit/typematch.hpp"

namespace actionkit {

// ---------------------------------------------------------------------------
// BERTScore
// ---------------------------------------------------------------------------

TokenEmbeddings::TokenEmbeddings(std::vector<std::string> tokens, Eigen::MatrixXd vectors)
    : tokens_(std::move(tokens)), vectors_(std::move(vectors)) {
    if (tokens_.empty() || vectors_.rows() == 0) throw EmptyTokens();
    if (static_cast<Eigen::Index>(tokens_.size()) != vectors_.rows()) {
        throw DimensionMismatch(std::to_string(tokens_.size()) + " tokens but " +
                                std::to_string(vectors_.rows()) + " vectors");
    }
    if (!vectors_.allFinite()) throw InvalidArgument("token embedding contains NaN or Inf");
    for (Eigen::Index i = 0; i < vectors_.rows(); ++i) {
        if (std::abs(vectors_.row(i).norm() - 1.0) > 1e-6) {
            throw InvalidArgument("token embedding row " + std::to_string(i) + " is not unit length");
        }
    }
}

TokenEmbeddings TokenEmbeddings::normalized(std::vector<std::string> tokens, Eigen::MatrixXd vectors) {
    for (Eigen::Index i = 0; i < vectors.rows(); ++i) {
        double norm = vectors.row(i).norm();
        if (!(norm > 0.0)) throw InvalidArgument("zero token embedding row " + std::to_string(i));
        vectors.row(i) /= norm;
    }
    return TokenEmbeddings(std::move(tokens), std::move(vectors));
}

BertScore bertscore(const TokenEmbeddings& pred, const TokenEmbeddings& gold) {
    if (pred.dim() != gold.dim()) {
        throw DimensionMismatch("embedding dimensions differ: " + std::to_string(pred.dim()) +
                                " vs " + std::to_string(gold.dim()));
    }
    // sim(i, j) = <gold_i, pred_j>
    const Eigen::MatrixXd sim = gold.vectors() * pred.vectors().transpose();
    BertScore s;
    s.recall = sim.rowwise().maxCoeff().mean();
    s.precision = sim.colwise().maxCoeff().mean();
    const double denom = s.precision + s.recall;
    s.f1 = denom == 0.0 ? 0.0 : 2.0 * s.precision * s.recall / denom;
    return s;
}

LookupTokenEmbeddingProvider::LookupTokenEmbeddingProvider(
    std::map<std::string, std::vector<double>> table)
    : table_(std::move(table)) {
    for (const auto& [token, vec] : table_) {
        if (dim_ == 0) dim_ = vec.size();
        if (vec.size() != dim_ || dim_ == 0) {
            throw DimensionMismatch("token " + token + " has dimension " + std::to_string(vec.size()));
        }
    }
}

TokenEmbeddings LookupTokenEmbeddingProvider::embed(std::string_view text) {
    std::vector<std::string> kept;
    std::vector<const std::vector<double>*> rows;
    for (auto& tok : tokenize(text)) {
        auto it = table_.find(tok);
        if (it == table_.end()) continue;
        rows.push_back(&it->second);
        kept.push_back(std::move(tok));
    }
    if (rows.empty()) throw EmptyTokens();
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim_));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < dim_; ++j) {
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (*rows[i])[j];
        }
    }
    return TokenEmbeddings::normalized(std::move(kept), std::move(m));
}

// ---------------------------------------------------------------------------
// Judge protocol
// ---------------------------------------------------------------------------

void JudgeConfig::validate() const {
    if (name.empty()) throw InvalidArgument("judge name is empty");
    if (endpoint.empty()) throw InvalidArgument("judge " + name + " has no endpoint");
    if (timeout.count() <= 0) throw InvalidArgument("judge " + name + " timeout must be > 0");
    if (max_retries < 0) throw InvalidArgument("judge " + name + " max_retries must be >= 0");
}

void ReviewOptions::validate() const {
    if (rounds < 0) throw InvalidArgument("rounds must be >= 0");
    if (max_in_flight == 0) throw InvalidArgument("max_in_flight must be positive");
    if (case_workers == 0) throw InvalidArgument("case_workers must be positive");
    if (max_prompt_bytes == 0) throw InvalidArgument("max_prompt_bytes must be positive");
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

// Remainder of `line` after a case-insensitive marker, or nullopt.
std::optional<std::string_view> after_marker(std::string_view line, std::string_view marker) {
    line = trim(line);
    if (line.size() < marker.size()) return std::nullopt;
    for (std::size_t i = 0; i < marker.size(); ++i) {
        if (std::toupper(static_cast<unsigned char>(line[i])) != marker[i]) return std::nullopt;
    }
    return trim(line.substr(marker.size()));
}

std::string fmt_score(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

std::optional<JudgeReply> parse_judge_reply(std::string_view text) {
    std::vector<std::string_view> lines;
    for (std::size_t pos = 0; pos <= text.size();) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        lines.push_back(text.substr(pos, nl - pos));
        pos = nl + 1;
    }

    std::size_t i = 0;
    std::optional<double> score;
    for (; i < lines.size(); ++i) {
        auto rest = after_marker(lines[i], "SCORE:");
        if (!rest) continue;
        std::string num(*rest);
        if (num.empty()) return std::nullopt;
        char* end = nullptr;
        double v = std::strtod(num.c_str(), &end);
        if (end != num.c_str() + num.size() || !std::isfinite(v)) return std::nullopt;
        score = v;
        ++i;
        break;
    }
    if (!score || *score < 0.0 || *score > 1.0) return std::nullopt;

    for (; i < lines.size(); ++i) {
        auto rest = after_marker(lines[i], "RATIONALE:");
        if (!rest) continue;
        std::string rationale(*rest);
        for (std::size_t j = i + 1; j < lines.size(); ++j) {
            rationale += ' ';
            rationale += lines[j];
        }
        return JudgeReply{*score, normalize_space(rationale)};
    }
    return std::nullopt;
}

std::string format_judge_reply(const JudgeReply& reply) {
    return "SCORE: " + fmt_score(reply.score) + "\nRATIONALE: " + reply.rationale;
}

const char* const kJudgeSystemPrompt =
    "You are an expert synthetic chemist reviewing machine-extracted action sequences for "
    "experimental procedures. Judge faithfulness to the described procedure, not wording.";

namespace {

std::string case_block(const ReviewCase& c, int round) {
    std::string s = "Case: " + c.id + "\nRound: " + std::to_string(round) + "\n\n";
    s += "Experimental procedure:\n" + c.description + "\n\n";
    s += "Reference action sequence:\n" + c.gold_actions + "\n\n";
    s += "Predicted action sequence:\n" + c.pred_actions + "\n\n";
    return s;
}

const char* const kReplyFormat =
    "Answer with exactly two lines:\n"
    "SCORE: <number between 0 and 1>\n"
    "RATIONALE: <one sentence>\n";

std::string describe_entry(const JudgeEntry& e) {
    if (e.abstained()) return "(no valid assessment)\n";
    return "SCORE: " + fmt_score(*e.score) + "\nRATIONALE: " + e.rationale + "\n";
}

}  // namespace

std::string round0_prompt(const ReviewCase& c) {
    return case_block(c, 0) +
           "Rate how well the predicted sequence reproduces the procedure, from 0 (unrelated) "
           "to 1 (equivalent to the reference), and explain your score in one sentence.\n\n" +
           kReplyFormat;
}

std::string debate_prompt(const ReviewCase& c, int round, const JudgeEntry& own,
                          std::span<const JudgeEntry> peers) {
    std::string s = case_block(c, round);
    s += "Your previous assessment:\n" + describe_entry(own) + "\n";
    s += "Assessments from the other reviewers:\n";
    for (const auto& p : peers) s += "[" + p.judge + "]\n" + describe_entry(p);
    s += "\nWeigh the other reviewers' arguments. Keep your score if you still agree with it, "
         "otherwise revise it.\n\n";
    s += kReplyFormat;
    return s;
}

std::optional<double> round_mean(const Round& round) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& e : round) {
        if (e.score) {
            sum += *e.score;
            ++n;
        }
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
}

struct RequestLimiter::State {
    std::mutex mu;
    std::condition_variable cv;
    std::size_t free;
};

RequestLimiter::RequestLimiter(std::size_t limit) : state_(std::make_unique<State>()) {
    if (limit == 0) throw InvalidArgument("request limit must be positive");
    state_->free = limit;
}

RequestLimiter::~RequestLimiter() = default;

void RequestLimiter::acquire() {
    std::unique_lock lock(state_->mu);
    state_->cv.wait(lock, [this] { return state_->free > 0; });
    --state_->free;
}

void RequestLimiter::release() {
    {
        std::lock_guard lock(state_->mu);
        ++state_->free;
    }
    state_->cv.notify_one();
}

namespace {

JudgeEntry ask_judge(const JudgeConfig& judge, const std::string& user_prompt, JudgeClient& client,
                     RequestLimiter& limiter) {
    const int attempts = 1 + judge.max_retries;
    int transport_failures = 0;
    std::string last_error;
    for (int a = 0; a < attempts; ++a) {
        std::string content;
        limiter.acquire();
        try {
            content = client.complete(judge, kJudgeSystemPrompt, user_prompt);
        } catch (const TransportError& e) {
            limiter.release();
            ++transport_failures;
            last_error = e.what();
            continue;
        } catch (...) {
            limiter.release();
            throw;
        }
        limiter.release();
        if (auto reply = parse_judge_reply(content)) {
            return {judge.name, reply->score, reply->rationale};
        }
        last_error = "malformed reply";
    }
    if (transport_failures == attempts) throw JudgeUnavailable(judge.name, last_error);
    return {judge.name, std::nullopt, ""};
}

void check_prompt(const std::string& prompt, const ReviewOptions& opts) {
    std::size_t len = prompt.size() + std::char_traits<char>::length(kJudgeSystemPrompt);
    if (len > opts.max_prompt_bytes) throw PromptTooLong(len, opts.max_prompt_bytes);
}

// Runs one request per judge concurrently; rethrows the first failure in
// judge order.
Round run_round(std::span<const JudgeConfig> judges, const std::vector<std::string>& prompts,
                JudgeClient& client, const ReviewOptions& opts, RequestLimiter* limiter) {
    std::optional<RequestLimiter> local;
    if (!limiter) limiter = &local.emplace(opts.max_in_flight);

    Round round(judges.size());
    std::vector<std::exception_ptr> errors(judges.size());
    {
        std::vector<std::jthread> workers;
        workers.reserve(judges.size());
        for (std::size_t i = 0; i < judges.size(); ++i) {
            workers.emplace_back([&, i] {
                try {
                    round[i] = ask_judge(judges[i], prompts[i], client, *limiter);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            });
        }
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return round;
}

}  // namespace

Round judge_round0(const ReviewCase& c, std::span<const JudgeConfig> judges, JudgeClient& client,
                   const ReviewOptions& opts, RequestLimiter* limiter) {
    if (judges.empty()) throw InvalidArgument("no judges configured");
    for (const auto& j : judges) j.validate();
    std::string prompt = round0_prompt(c);
    check_prompt(prompt, opts);
    std::vector<std::string> prompts(judges.size(), prompt);
    return run_round(judges, prompts, client, opts, limiter);
}

Round debate_round(const Round& prev, const ReviewCase& c, std::span<const JudgeConfig> judges,
                   JudgeClient& client, const ReviewOptions& opts, int round,
                   RequestLimiter* limiter) {
    if (judges.empty()) throw InvalidArgument("no judges configured");
    if (prev.size() != judges.size()) {
        throw InvalidArgument("previous round has " + std::to_string(prev.size()) +
                              " entries for " + std::to_string(judges.size()) + " judges");
    }
    if (round < 1) throw InvalidArgument("debate rounds are numbered from 1");
    for (const auto& j : judges) j.validate();

    std::vector<std::string> prompts;
    prompts.reserve(judges.size());
    for (std::size_t i = 0; i < judges.size(); ++i) {
        std::vector<JudgeEntry> peers;
        for (std::size_t p = 0; p < prev.size(); ++p) {
            if (p != i && !prev[p].abstained()) peers.push_back(prev[p]);
        }
        prompts.push_back(debate_prompt(c, round, prev[i], peers));
        check_prompt(prompts.back(), opts);
    }
    return run_round(judges, prompts, client, opts, limiter);
}

std::vector<ReviewTranscript> run_circle_review(std::span<const ReviewCase> cases,
                                                std::span<const JudgeConfig> judges,
                                                JudgeClient& client, const ReviewOptions& opts) {
    opts.validate();
    if (judges.empty()) throw InvalidArgument("no judges configured");
    std::set<std::string> names;
    for (const auto& j : judges) {
        j.validate();
        if (!names.insert(j.name).second) throw InvalidArgument("duplicate judge name " + j.name);
    }

    RequestLimiter limiter(opts.max_in_flight);
    std::vector<ReviewTranscript> out(cases.size());
    std::vector<std::exception_ptr> errors(cases.size());
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        for (std::size_t i = next++; i < cases.size(); i = next++) {
            try {
                ReviewTranscript t;
                t.case_id = cases[i].id;
                t.rounds.push_back(judge_round0(cases[i], judges, client, opts, &limiter));
                for (int r = 1; r <= opts.rounds; ++r) {
                    t.rounds.push_back(
                        debate_round(t.rounds.back(), cases[i], judges, client, opts, r, &limiter));
                }
                t.final_score = round_mean(t.rounds.back());
                out[i] = std::move(t);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    {
        std::size_t n = std::min(opts.case_workers, std::max<std::size_t>(cases.size(), 1));
        std::vector<std::jthread> pool;
        for (std::size_t w = 1; w < n; ++w) pool.emplace_back(worker);
        worker();
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return out;
}

std::optional<double> aggregate_score(std::span<const ReviewTranscript> transcripts) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& t : transcripts) {
        if (t.final_score) {
            sum += *t.final_score;
            ++n;
        }
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
}

std::vector<ReviewCase> filter_hard_cases(std::span<const ReviewCase> cases, Dialect dialect,
                                          double threshold) {
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw InvalidArgument("threshold must lie in [0, 1]");
    std::vector<ReviewCase> hard;
    for (const auto& c : cases) {
        double sim = gestalt_similarity(canonicalize_text(c.pred_actions, dialect),
                                        canonicalize_text(c.gold_actions, dialect));
        if (sim < threshold) hard.push_back(c);
    }
    return hard;
}

}  // namespace actionkit
