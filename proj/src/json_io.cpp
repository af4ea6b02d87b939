#include "actionkit/json_io.hpp"

#include <cmath>
#include <cstdio>

#include "actionkit/error.hpp"

namespace actionkit {

using nlohmann::json;

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string require_string(const json& j, const char* field, const std::string& id) {
    if (!j.contains(field) || !j[field].is_string()) throw MissingField(id, field);
    return j[field].get<std::string>();
}

// First present string member among `fields`.
std::string first_string(const json& j, std::initializer_list<const char*> fields,
                         const std::string& id) {
    for (const char* f : fields) {
        if (j.contains(f) && j[f].is_string()) return j[f].get<std::string>();
    }
    throw MissingField(id, *fields.begin());
}

std::string percent_key(double p) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", 100.0 * p);
    return buf;
}

}  // namespace

json to_json(const CorpusRecord& r) {
    return {{"id", r.id},
            {"reaction", r.reaction ? json(*r.reaction) : json(nullptr)},
            {"description", r.description},
            {"actions", r.actions}};
}

json to_json(const ActionSequence& seq) {
    json actions = json::array();
    for (std::size_t i = 0; i < seq.actions.size(); ++i) {
        const Action& a = seq.actions[i];
        json comps = json::array();
        for (const auto& c : a.components) {
            json args = json::array();
            for (const auto& [k, v] : c.args) args.push_back({{"key", k}, {"value", v}});
            comps.push_back({{"role", c.role}, {"args", args}});
        }
        json item = {{"type", a.type.name()}, {"known", a.type.known()}, {"components", comps}};
        if (i < seq.action_offsets.size()) item["offset"] = seq.action_offsets[i];
        actions.push_back(std::move(item));
    }
    return {{"dialect", std::string(to_string(seq.dialect))},
            {"actions", actions},
            {"canonical", serialize(canonicalize(seq))}};
}

json to_json(const ValidityReport& report) {
    json errors = json::array();
    for (const auto& e : report.errors) errors.push_back({{"offset", e.offset}, {"message", e.message}});
    return {{"is_valid", report.is_valid}, {"errors", errors}};
}

json to_json(const PairScore& s) {
    json bleu = json::object();
    for (const auto& [n, v] : s.bleu) bleu[std::to_string(n)] = v;
    json rouge = json::object();
    for (const auto& [name, r] : s.rouge) {
        rouge[name] = {{"precision", r.precision}, {"recall", r.recall}, {"f1", r.f1}};
    }
    return {{"id", s.id},           {"levenshtein", s.levenshtein}, {"bleu", bleu},
            {"modified_bleu", s.modified_bleu}, {"rouge", rouge},   {"exact_match", s.exact_match},
            {"sm_o", s.sm_o},       {"sm_a", s.sm_a},               {"valid", s.valid}};
}

json to_json(const MetricReport& report) {
    json pairs = json::array();
    for (const auto& p : report.pairs) pairs.push_back(to_json(p));
    json thresholds = json::object();
    for (const auto& [p, frac] : report.lev_thresholds) thresholds[percent_key(p) + "%LEV"] = frac;
    json distinct = json::object();
    for (const auto& [n, v] : report.distinct_n) distinct[std::to_string(n)] = v;
    json cbleu = json::object();
    for (const auto& [n, v] : report.corpus_bleu) cbleu[std::to_string(n)] = v;
    return {{"pairs", pairs},
            {"aggregates", report.aggregates},
            {"lev_thresholds", thresholds},
            {"validity_rate", report.validity_rate},
            {"distinct_n", distinct},
            {"corpus_bleu", cbleu},
            {"unparsed_predictions", report.unparsed_predictions},
            {"unparsed_golds", report.unparsed_golds}};
}

json to_json(const ConfusionMatrix& matrix) {
    json cells = json::object();
    for (const auto& [pred, row] : matrix.cells()) {
        for (const auto& [gold, count] : row) cells[pred][gold] = count;
    }
    return {{"labels", matrix.labels()}, {"cells", cells}, {"total", matrix.total()}};
}

json to_json(const SelectionResult& result) {
    json decisions = json::array();
    for (const auto& d : result.deltas) {
        decisions.push_back({{"batch", d.batch}, {"delta", d.delta}, {"accepted", d.accepted}});
    }
    json ids = json::array();
    for (const auto& r : result.selected) ids.push_back(r.id);
    return {{"accepted", result.accepted},
            {"rejected_count", result.rejected_count},
            {"attempts", result.attempts()},
            {"rejection_rate", result.rejection_rate()},
            {"decisions", decisions},
            {"selected_ids", ids},
            {"warning", result.warning ? json(*result.warning) : json(nullptr)}};
}

json to_json(const ReviewTranscript& t) {
    json rounds = json::array();
    for (const auto& round : t.rounds) {
        json entries = json::array();
        for (const auto& e : round) {
            entries.push_back({{"judge", e.judge},
                               {"score", optional_number(e.score)},
                               {"rationale", e.rationale},
                               {"abstained", e.abstained()}});
        }
        rounds.push_back(std::move(entries));
    }
    return {{"case_id", t.case_id},
            {"rounds", rounds},
            {"final_score", optional_number(t.final_score)},
            {"scored", t.scored()}};
}

json to_json(const QAPair& p) {
    return {{"instruction", p.instruction},
            {"source", p.source},
            {"target", p.target},
            {"template_id", p.template_id}};
}

json to_json(const CorpusStats& s) {
    json actions = json::object();
    for (const auto& [k, v] : s.action_count_hist) actions[std::to_string(k)] = v;
    json tokens = json::object();
    for (const auto& [k, v] : s.token_count_hist) tokens[std::to_string(k)] = v;
    return {{"record_count", s.record_count},
            {"parse_failures", s.parse_failures},
            {"action_count_hist", actions},
            {"token_count_hist", tokens},
            {"token_bucket_width", kTokenBucketWidth},
            {"type_freq", s.type_freq}};
}

CorpusRecord corpus_record_from_json(const json& j) {
    if (!j.is_object()) throw InvalidArgument("record is not a JSON object");
    if (!j.contains("id") || !j["id"].is_string()) throw MissingField("?", "id");
    CorpusRecord r;
    r.id = j["id"].get<std::string>();
    r.description = require_string(j, "description", r.id);
    r.actions = require_string(j, "actions", r.id);
    if (j.contains("reaction") && !j["reaction"].is_null()) {
        if (!j["reaction"].is_string()) throw InvalidArgument("record " + r.id + ": reaction is not a string");
        r.reaction = j["reaction"].get<std::string>();
    }
    return r;
}

JudgeConfig judge_config_from_json(const json& j) {
    if (!j.is_object()) throw InvalidArgument("judge entry is not a JSON object");
    JudgeConfig c;
    c.name = require_string(j, "name", "judge");
    c.endpoint = require_string(j, "endpoint", c.name);
    c.model_id = j.contains("model_id") ? require_string(j, "model_id", c.name) : c.name;
    if (j.contains("timeout_ms")) {
        c.timeout = std::chrono::milliseconds(j["timeout_ms"].get<long long>());
    } else if (j.contains("timeout")) {
        c.timeout = std::chrono::milliseconds(std::llround(j["timeout"].get<double>() * 1000.0));
    }
    if (j.contains("max_retries")) c.max_retries = j["max_retries"].get<int>();
    c.validate();
    return c;
}

ReviewCase review_case_from_json(const json& j) {
    if (!j.is_object()) throw InvalidArgument("case is not a JSON object");
    ReviewCase c;
    c.id = require_string(j, "id", "case");
    c.description = require_string(j, "description", c.id);
    c.gold_actions = first_string(j, {"gold_actions", "gold", "actions"}, c.id);
    c.pred_actions = first_string(j, {"pred_actions", "prediction"}, c.id);
    return c;
}

}  // namespace actionkit
