#include "actionkit/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "actionkit/datatools.hpp"
#include "actionkit/error.hpp"
#include "actionkit/http.hpp"
#include "actionkit/json_io.hpp"
#include "actionkit/metrics.hpp"
#include "actionkit/review.hpp"
#include "actionkit/schema.hpp"
#include "actionkit/select.hpp"
#include "actionkit/typematch.hpp"

namespace actionkit {

using nlohmann::json;

namespace {

enum class LogLevel { kError, kWarn, kInfo, kDebug };

class Logger {
public:
    Logger(std::ostream& err, LogLevel level) : err_(err), level_(level) {}
    void log(LogLevel level, const std::string& msg) const {
        static const char* const names[] = {"error", "warn", "info", "debug"};
        if (level <= level_) err_ << "[" << names[static_cast<int>(level)] << "] " << msg << '\n';
    }
    void info(const std::string& msg) const { log(LogLevel::kInfo, msg); }
    void warn(const std::string& msg) const { log(LogLevel::kWarn, msg); }

private:
    std::ostream& err_;
    LogLevel level_;
};

struct Global {
    std::string dialect = "chemtrans";
    std::string format = "json";
    std::string log_level = "info";
    std::uint64_t seed = 0;
};

LogLevel parse_level(const std::string& s) {
    if (s == "error") return LogLevel::kError;
    if (s == "warn") return LogLevel::kWarn;
    if (s == "debug") return LogLevel::kDebug;
    return LogLevel::kInfo;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    return in;
}

json read_json_file(const std::string& path) {
    std::ifstream in = open_in(path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw MalformedLine(1, path + " is not valid JSON");
    return j;
}

std::vector<json> read_jsonl(const std::string& path) {
    std::ifstream in = open_in(path);
    std::vector<json> out;
    std::string line;
    for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) throw MalformedLine(lineno, "not a JSON object");
        out.push_back(std::move(j));
    }
    return out;
}

// Output sink: a file when a path is given, otherwise stdout.
class Sink {
public:
    Sink(const std::string& path, std::ostream& fallback) : out_(&fallback) {
        if (!path.empty()) {
            file_.open(path);
            if (!file_) throw IoError("cannot write " + path);
            out_ = &file_;
        }
    }
    std::ostream& stream() { return *out_; }

private:
    std::ofstream file_;
    std::ostream* out_;
};

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q += '"';
        q += c;
    }
    return q + "\"";
}

struct Pairing {
    std::string id;
    std::string pred;
    std::string gold;
};

// Joins predictions and golds on id, ordered by id. Throws IdMismatch.
std::vector<Pairing> pair_by_id(const std::vector<Prediction>& preds,
                                const std::vector<CorpusRecord>& golds) {
    std::map<std::string, std::string> gold_by_id;
    for (const auto& g : golds) {
        if (!gold_by_id.emplace(g.id, g.actions).second) {
            throw Error(ErrorKind::kData, "DuplicateId", "duplicate gold id " + g.id);
        }
    }
    std::map<std::string, std::string> pred_by_id;
    for (const auto& p : preds) {
        if (!pred_by_id.emplace(p.id, p.prediction).second) {
            throw Error(ErrorKind::kData, "DuplicateId", "duplicate prediction id " + p.id);
        }
    }
    std::set<std::string> orphans;
    for (const auto& [id, _] : pred_by_id) {
        if (!gold_by_id.count(id)) orphans.insert(id);
    }
    for (const auto& [id, _] : gold_by_id) {
        if (!pred_by_id.count(id)) orphans.insert(id);
    }
    if (!orphans.empty()) throw IdMismatch({orphans.begin(), orphans.end()});
    if (pred_by_id.empty()) throw EmptyCorpus();
    std::vector<Pairing> out;
    for (const auto& [id, pred] : pred_by_id) out.push_back({id, pred, gold_by_id[id]});
    return out;
}

std::vector<CorpusRecord> load_clean_corpus(const std::string& path, Dialect dialect,
                                            bool strip = false) {
    CorpusLoad load = load_corpus(path, dialect, {strip, false});
    throw_if_malformed(load);
    return std::move(load.records);
}

std::vector<ActionPhrase> phrases_or_empty(const std::string& text, Dialect dialect) {
    try {
        return split_phrases(parse(text, dialect));
    } catch (const Error&) {
        return {};
    }
}

void print_json(std::ostream& out, const json& j) { out << j.dump(2) << '\n'; }

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Parse, score and curate structured chemical action sequences.", "actionkit"};
    app.fallthrough();
    app.require_subcommand(1);

    Global g;
    app.add_option("--dialect", g.dialect, "Action dialect")
        ->check(CLI::IsMember({"chemtrans", "openexp"}, CLI::ignore_case))
        ->capture_default_str();
    app.add_option("--format", g.format, "Output format (csv covers tables only)")
        ->check(CLI::IsMember({"json", "csv"}))
        ->capture_default_str();
    app.add_option("--log-level", g.log_level, "Diagnostics on stderr")
        ->check(CLI::IsMember({"error", "warn", "info", "debug"}))
        ->capture_default_str();
    app.add_option("--seed", g.seed, "Seed for every random choice")->capture_default_str();

    // parse
    auto* cmd_parse = app.add_subcommand("parse", "Parse action strings and print their structure");
    std::string parse_text, parse_in;
    auto* opt_text = cmd_parse->add_option("--text", parse_text, "Action string to parse");
    cmd_parse->add_option("--in", parse_in, "JSONL corpus; parses each record's actions")
        ->excludes(opt_text);

    // validate
    auto* cmd_validate = app.add_subcommand("validate", "Check action strings against the grammar");
    std::string validate_in;
    cmd_validate->add_option("--in", validate_in, "JSONL with id and prediction (or actions)")
        ->required();

    // score
    auto* cmd_score = app.add_subcommand("score", "Score predictions against gold actions");
    std::string score_pred, score_gold;
    std::size_t score_threads = 0;
    cmd_score->add_option("--pred", score_pred, "JSONL predictions {id, prediction}")->required();
    cmd_score->add_option("--gold", score_gold, "JSONL corpus with gold actions")->required();
    cmd_score->add_option("--threads", score_threads, "Worker threads (0 = all cores)");

    // match-types
    auto* cmd_match = app.add_subcommand("match-types", "Type-level confusion matrix and recall");
    std::string match_pred, match_gold, match_csv;
    double match_threshold = kDefaultTypeMatchThreshold;
    cmd_match->add_option("--pred", match_pred, "JSONL predictions {id, prediction}")->required();
    cmd_match->add_option("--gold", match_gold, "JSONL corpus with gold actions")->required();
    cmd_match->add_option("--threshold", match_threshold, "Pairing needs similarity above this")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    cmd_match->add_option("--csv-out", match_csv, "Also write the matrix as CSV here");

    // select
    auto* cmd_select = app.add_subcommand("select", "Divergence-gated selection of candidate batches");
    SelectionConfig sel;
    std::string sel_mode = "abs_diff", sel_rule = "ge", sel_projection = "pca";
    std::string sel_real, sel_cand, sel_emb, sel_emb_url, sel_emb_model = "embedder";
    long long sel_timeout_ms = 30000;
    std::size_t sel_in_flight = 4;
    cmd_select->add_option("--tau", sel.tau, "Divergence threshold")->capture_default_str();
    cmd_select->add_option("--k", sel.k, "Batch size")->capture_default_str();
    cmd_select->add_option("--n", sel.n, "Target number of selected records")->capture_default_str();
    cmd_select->add_option("--mode", sel_mode, "Delta definition")
        ->check(CLI::IsMember({"abs_diff", "direct"}))
        ->capture_default_str();
    cmd_select->add_option("--rule", sel_rule, "Accept when delta >= tau (ge) or < tau (lt)")
        ->check(CLI::IsMember({"ge", "lt"}))
        ->capture_default_str();
    cmd_select->add_option("--projection", sel_projection, "2-D projection")
        ->check(CLI::IsMember({"pca", "passthrough"}))
        ->capture_default_str();
    cmd_select->add_option("--grid", sel.grid_size, "Histogram cells per axis")->capture_default_str();
    cmd_select->add_option("--epsilon", sel.epsilon, "Per-cell smoothing mass")->capture_default_str();
    cmd_select->add_option("--max-attempts", sel.max_attempts, "Give up after this many batches")
        ->capture_default_str();
    cmd_select->add_option("--real-emb", sel_real, "JSONL embeddings of the real set")->required();
    cmd_select->add_option("--cand", sel_cand, "JSONL candidate pool (corpus records)")->required();
    auto* opt_emb = cmd_select->add_option("--emb", sel_emb, "JSONL embeddings of the candidates");
    auto* opt_url = cmd_select->add_option("--emb-url", sel_emb_url, "Embedding service URL");
    opt_emb->excludes(opt_url);
    cmd_select->add_option("--emb-model", sel_emb_model, "Model name sent to the embedding service")
        ->capture_default_str();
    cmd_select->add_option("--emb-timeout-ms", sel_timeout_ms, "Embedding request timeout")
        ->capture_default_str();
    cmd_select->add_option("--max-in-flight", sel_in_flight, "Concurrent embedding requests")
        ->capture_default_str();

    // review
    auto* cmd_review = app.add_subcommand("review", "Multi-judge debate review of predictions");
    std::string review_judges, review_cases, review_out;
    ReviewOptions ropts;
    std::optional<double> review_hard;
    cmd_review->add_option("--judges", review_judges, "JSON list of judge configs")->required();
    cmd_review->add_option("--cases", review_cases,
                           "JSONL cases {id, description, gold_actions, pred_actions}")
        ->required();
    cmd_review->add_option("--rounds", ropts.rounds, "Debate rounds after round 0")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    cmd_review->add_option("--out", review_out, "Transcript JSONL file (default stdout)");
    cmd_review->add_option("--max-in-flight", ropts.max_in_flight, "Concurrent judge requests")
        ->capture_default_str();
    cmd_review->add_option("--case-workers", ropts.case_workers, "Cases reviewed concurrently")
        ->capture_default_str();
    cmd_review->add_option("--max-prompt-bytes", ropts.max_prompt_bytes, "Prompt size limit")
        ->capture_default_str();
    cmd_review->add_option("--hard-threshold", review_hard,
                           "Only review cases below this gestalt similarity");

    // stats
    auto* cmd_stats = app.add_subcommand("stats", "Corpus statistics");
    std::string stats_in;
    bool stats_strip = false;
    cmd_stats->add_option("--in", stats_in, "JSONL corpus")->required();
    cmd_stats->add_flag("--strip-yield", stats_strip, "Drop YIELD actions (openexp)");

    // build-qa
    auto* cmd_qa = app.add_subcommand("build-qa", "Instruction/answer pairs from a corpus");
    std::string qa_in, qa_templates, qa_out, qa_direction = "D2A";
    std::size_t qa_max_tokens = kDefaultMaxTargetTokens;
    bool qa_strip = false;
    cmd_qa->add_option("--in", qa_in, "JSONL corpus")->required();
    cmd_qa->add_option("--direction", qa_direction, "D2A, R2D or A2D")
        ->check(CLI::IsMember({"D2A", "R2D", "A2D"}, CLI::ignore_case))
        ->capture_default_str();
    cmd_qa->add_option("--templates", qa_templates, "JSON array of templates (default: bundled)");
    cmd_qa->add_option("--max-target-tokens", qa_max_tokens, "Target token cap, 0 disables")
        ->capture_default_str();
    cmd_qa->add_option("--out", qa_out, "Output JSONL file (default stdout)");
    cmd_qa->add_flag("--strip-yield", qa_strip, "Drop YIELD actions (openexp)");

    // split
    auto* cmd_split = app.add_subcommand("split", "Seeded train/valid/test split");
    std::string split_in, split_dir;
    std::vector<double> split_ratios = {0.8, 0.1, 0.1};
    cmd_split->add_option("--in", split_in, "JSONL corpus")->required();
    cmd_split->add_option("--out-dir", split_dir, "Directory for the three parts and manifest")
        ->required();
    cmd_split->add_option("--ratios", split_ratios, "train,valid,test")
        ->delimiter(',')
        ->expected(3)
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << json{{"code", "Usage"}, {"message", e.what()}}.dump() << '\n';
        return kExitUsage;
    }

    Logger log(err, parse_level(g.log_level));
    CLI::App* sub = app.get_subcommands().front();
    {
        json cfg = {{"command", sub->get_name()},
                    {"dialect", g.dialect},
                    {"format", g.format},
                    {"log_level", g.log_level},
                    {"seed", g.seed}};
        log.info("config " + cfg.dump());
    }

    try {
        const Dialect dialect = dialect_from_string(g.dialect);
        const bool csv = g.format == "csv";

        if (sub == cmd_parse) {
            if (!parse_in.empty()) {
                for (const auto& r : load_clean_corpus(parse_in, dialect)) {
                    json line = {{"id", r.id}};
                    try {
                        line["parsed"] = to_json(parse(r.actions, dialect));
                    } catch (const ParseError& e) {
                        line["error"] = {{"code", e.code()}, {"offset", e.offset()}, {"message", e.what()}};
                    } catch (const Error& e) {
                        line["error"] = {{"code", e.code()}, {"message", e.what()}};
                    }
                    out << line.dump() << '\n';
                }
            } else if (cmd_parse->count("--text")) {
                print_json(out, to_json(parse(parse_text, dialect)));
            } else {
                throw InvalidArgument("parse needs --text or --in");
            }
        } else if (sub == cmd_validate) {
            std::size_t total = 0, valid = 0;
            json invalid = json::array();
            for (const auto& j : read_jsonl(validate_in)) {
                std::string id = j.value("id", std::to_string(total));
                const char* field = j.contains("prediction") ? "prediction" : "actions";
                if (!j.contains(field) || !j[field].is_string()) throw MissingField(id, field);
                ValidityReport rep = check_validity(j[field].get<std::string>(), dialect);
                ++total;
                if (rep.is_valid) {
                    ++valid;
                } else {
                    json e = to_json(rep);
                    e["id"] = id;
                    invalid.push_back(e);
                }
            }
            if (total == 0) throw EmptyCorpus();
            print_json(out, {{"records", total},
                             {"valid", valid},
                             {"validity_rate", static_cast<double>(valid) / static_cast<double>(total)},
                             {"invalid", invalid}});
        } else if (sub == cmd_score) {
            auto preds = load_predictions(score_pred);
            auto golds = load_clean_corpus(score_gold, dialect);
            MetricReport report = score_corpus(preds, golds, dialect, {score_threads});
            if (csv) {
                out << "id,levenshtein,bleu_2,bleu_4,modified_bleu,rouge_1_f1,rouge_L_f1,exact_match,"
                       "sm_o,sm_a,valid\n";
                for (const auto& p : report.pairs) {
                    char buf[512];
                    std::snprintf(buf, sizeof buf, "%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%d,%.10g,%.10g,%d",
                                  p.levenshtein, p.bleu.at(2), p.bleu.at(4), p.modified_bleu,
                                  p.rouge.at("1").f1, p.rouge.at("L").f1, p.exact_match ? 1 : 0,
                                  p.sm_o, p.sm_a, p.valid ? 1 : 0);
                    out << csv_escape(p.id) << ',' << buf << '\n';
                }
            } else {
                print_json(out, to_json(report));
            }
        } else if (sub == cmd_match) {
            auto preds = load_predictions(match_pred);
            auto golds = load_clean_corpus(match_gold, dialect);
            std::vector<MatchResult> results;
            for (const auto& p : pair_by_id(preds, golds)) {
                auto pp = phrases_or_empty(p.pred, dialect);
                auto gp = phrases_or_empty(p.gold, dialect);
                results.push_back(match_phrases(pp, gp, match_threshold));
            }
            ConfusionMatrix matrix = merge_confusion(results);
            if (!match_csv.empty()) {
                Sink sink(match_csv, out);
                sink.stream() << confusion_to_csv(matrix);
            }
            if (csv) {
                out << confusion_to_csv(matrix);
            } else {
                print_json(out, {{"confusion", to_json(matrix)}, {"recall", per_type_recall(results)}});
            }
        } else if (sub == cmd_select) {
            sel.seed = g.seed;
            sel.mode = sel_mode == "direct" ? DeltaMode::kDirect : DeltaMode::kAbsDiff;
            sel.rule = sel_rule == "lt" ? AcceptRule::kDeltaBelowTau : AcceptRule::kDeltaAtLeastTau;
            sel.projection = sel_projection == "passthrough" ? Projection::kPassthrough : Projection::kPca;
            sel.validate();
            EmbeddingSet real = load_embeddings(sel_real);
            auto pool = load_clean_corpus(sel_cand, dialect);
            std::unique_ptr<EmbeddingProvider> embedder;
            if (!sel_emb.empty()) {
                embedder = std::make_unique<LookupEmbeddingProvider>(load_embeddings(sel_emb));
            } else if (!sel_emb_url.empty()) {
                embedder = std::make_unique<HttpEmbeddingProvider>(
                    sel_emb_url, sel_emb_model, std::chrono::milliseconds(sel_timeout_ms), sel_in_flight);
            } else {
                throw InvalidArgument("select needs --emb or --emb-url");
            }
            ShuffledPoolStream stream(std::move(pool), sel.k, sel.seed);
            SelectionResult result = run_selection(stream, real, *embedder, sel);
            if (result.warning) log.warn(*result.warning);
            print_json(out, to_json(result));
        } else if (sub == cmd_review) {
            json jl = read_json_file(review_judges);
            if (!jl.is_array()) throw InvalidArgument("--judges must hold a JSON list");
            std::vector<JudgeConfig> judges;
            for (const auto& j : jl) judges.push_back(judge_config_from_json(j));
            std::vector<ReviewCase> cases;
            for (const auto& j : read_jsonl(review_cases)) cases.push_back(review_case_from_json(j));
            if (review_hard) {
                std::size_t before = cases.size();
                cases = filter_hard_cases(cases, dialect, *review_hard);
                log.info("hard-case filter kept " + std::to_string(cases.size()) + " of " +
                         std::to_string(before) + " cases");
            }
            HttpJudgeClient client;
            auto transcripts = run_circle_review(cases, judges, client, ropts);
            Sink sink(review_out, out);
            for (const auto& t : transcripts) sink.stream() << to_json(t).dump() << '\n';
            std::size_t scored = std::count_if(transcripts.begin(), transcripts.end(),
                                               [](const ReviewTranscript& t) { return t.scored(); });
            auto mean = aggregate_score(transcripts);
            json summary = {{"cases", transcripts.size()},
                            {"scored", scored},
                            {"mean_final_score", mean ? json(*mean) : json(nullptr)}};
            if (review_out.empty()) {
                log.info("summary " + summary.dump());
            } else {
                print_json(out, summary);
            }
        } else if (sub == cmd_stats) {
            auto records = load_clean_corpus(stats_in, dialect, stats_strip);
            CorpusStats stats = corpus_stats(records, dialect);
            if (stats.parse_failures) {
                log.warn(std::to_string(stats.parse_failures) + " record(s) did not parse");
            }
            if (csv) {
                out << "histogram,key,count\n";
                for (const auto& [k, v] : stats.action_count_hist) out << "actions," << k << ',' << v << '\n';
                for (const auto& [k, v] : stats.token_count_hist) out << "tokens," << k << ',' << v << '\n';
            } else {
                print_json(out, to_json(stats));
            }
        } else if (sub == cmd_qa) {
            QADirection dir = qa_direction_from_string(qa_direction);
            auto records = load_clean_corpus(qa_in, dialect, qa_strip);
            std::vector<std::string> templates;
            if (qa_templates.empty()) {
                templates = default_templates(dir);
            } else {
                json jt = read_json_file(qa_templates);
                if (!jt.is_array()) throw InvalidArgument("--templates must hold a JSON list of strings");
                templates = jt.get<std::vector<std::string>>();
            }
            auto pairs = build_qa(records, templates, dir, g.seed, qa_max_tokens);
            Sink sink(qa_out, out);
            for (const auto& p : pairs) sink.stream() << to_json(p).dump() << '\n';
        } else if (sub == cmd_split) {
            SplitRatios ratios{split_ratios[0], split_ratios[1], split_ratios[2]};
            auto records = load_clean_corpus(split_in, dialect);
            SplitResult parts = split(records, ratios, g.seed);
            write_split(split_dir, parts, ratios, g.seed);
            print_json(out, {{"train", parts.train.size()},
                             {"valid", parts.valid.size()},
                             {"test", parts.test.size()},
                             {"seed", g.seed},
                             {"out_dir", split_dir}});
        }
    } catch (const Error& e) {
        err << json{{"code", e.code()}, {"message", e.what()}}.dump() << '\n';
        switch (e.kind()) {
            case ErrorKind::kUsage: return kExitUsage;
            case ErrorKind::kData: return kExitData;
            case ErrorKind::kExternal: return kExitExternal;
        }
    } catch (const json::exception& e) {
        err << json{{"code", "InvalidJson"}, {"message", e.what()}}.dump() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        err << json{{"code", "Internal"}, {"message", e.what()}}.dump() << '\n';
        return kExitData;
    }
    return kExitOk;
}

}  // namespace actionkit
