#include "actionkit/datatools.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "json.hpp"

#include "actionkit/error.hpp"
#include "actionkit/json_io.hpp"
#include "actionkit/text.hpp"

namespace actionkit {

using nlohmann::json;

namespace {

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    return in;
}

bool blank(const std::string& line) {
    return std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); });
}

// Parses one JSONL line into an object or explains why it is not one.
json parse_object(const std::string& line, std::string& why) {
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
        why = "invalid JSON";
    } else if (!j.is_object()) {
        why = "not a JSON object";
    }
    return j;
}

}  // namespace

CorpusLoad load_corpus(const std::string& path, Dialect dialect, LoadOptions opts) {
    std::ifstream in = open_input(path);
    CorpusLoad out;
    std::string line;
    for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
        if (blank(line)) continue;
        std::string why;
        json j = parse_object(line, why);
        if (why.empty()) {
            try {
                CorpusRecord r = corpus_record_from_json(j);
                if (opts.strip_yield && dialect == Dialect::kOpenExp) r.actions = strip_yield(r.actions);
                out.records.push_back(std::move(r));
                continue;
            } catch (const Error& e) {
                why = e.what();
            }
        }
        if (opts.strict) throw MalformedLine(lineno, why);
        out.malformed.push_back({lineno, why});
    }
    return out;
}

void throw_if_malformed(const CorpusLoad& load) {
    if (!load.malformed.empty()) {
        throw MalformedLine(load.malformed.front().lineno, load.malformed.front().message);
    }
}

std::vector<Prediction> load_predictions(const std::string& path) {
    std::ifstream in = open_input(path);
    std::vector<Prediction> out;
    std::string line;
    for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
        if (blank(line)) continue;
        std::string why;
        json j = parse_object(line, why);
        if (why.empty()) {
            if (!j.contains("id") || !j["id"].is_string()) {
                why = "missing string field \"id\"";
            } else if (!j.contains("prediction") || !j["prediction"].is_string()) {
                why = "missing string field \"prediction\"";
            }
        }
        if (!why.empty()) throw MalformedLine(lineno, why);
        out.push_back({j["id"].get<std::string>(), j["prediction"].get<std::string>()});
    }
    return out;
}

EmbeddingSet load_embeddings(const std::string& path) {
    std::ifstream in = open_input(path);
    std::vector<std::string> ids;
    std::vector<std::vector<double>> rows;
    std::string line;
    for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
        if (blank(line)) continue;
        std::string why;
        json j = parse_object(line, why);
        if (why.empty()) {
            if (!j.contains("id") || !j["id"].is_string()) {
                why = "missing string field \"id\"";
            } else if (!j.contains("vector") || !j["vector"].is_array() ||
                       !std::all_of(j["vector"].begin(), j["vector"].end(),
                                    [](const json& v) { return v.is_number(); })) {
                why = "missing numeric array \"vector\"";
            }
        }
        if (!why.empty()) throw MalformedLine(lineno, why);
        ids.push_back(j["id"].get<std::string>());
        rows.push_back(j["vector"].get<std::vector<double>>());
    }
    return EmbeddingSet(std::move(ids), rows);
}

// ---------------------------------------------------------------------------
// Instruction pairs
// ---------------------------------------------------------------------------

std::string_view to_string(QADirection d) {
    switch (d) {
        case QADirection::kD2A: return "D2A";
        case QADirection::kR2D: return "R2D";
        case QADirection::kA2D: return "A2D";
    }
    return "D2A";
}

QADirection qa_direction_from_string(std::string_view name) {
    std::string up(name);
    for (char& c : up) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (up == "D2A") return QADirection::kD2A;
    if (up == "R2D") return QADirection::kR2D;
    if (up == "A2D") return QADirection::kA2D;
    throw InvalidArgument("unknown direction '" + std::string(name) + "' (expected D2A, R2D or A2D)");
}

std::string_view source_slot(QADirection d) {
    switch (d) {
        case QADirection::kD2A: return "{description}";
        case QADirection::kR2D: return "{reaction}";
        case QADirection::kA2D: return "{actions}";
    }
    return "{description}";
}

std::string model_input(const QAPair& pair, QADirection d) {
    std::string out = pair.instruction;
    const std::string_view slot = source_slot(d);
    for (std::size_t pos = out.find(slot); pos != std::string::npos;
         pos = out.find(slot, pos + pair.source.size())) {
        out.replace(pos, slot.size(), pair.source);
    }
    return out;
}

const std::vector<std::string>& default_templates(QADirection d) {
    static const std::vector<std::string> d2a = {
        "Convert the following experimental procedure into a sequence of structured actions.\n{description}",
        "Read the synthesis description below and list the actions it performs in structured form.\n{description}",
        "Translate this laboratory procedure into structured synthetic actions.\nProcedure: {description}",
        "Extract the ordered experimental actions described in the text.\n{description}",
        "Given the procedure below, write the corresponding action sequence.\n{description}",
        "Procedure:\n{description}\nRewrite the procedure as structured actions.",
        "Turn the described experiment into a machine-readable action sequence.\n{description}",
        "Identify every operation in this synthesis step and express it as a structured action.\n{description}",
        "Below is an unstructured description of a chemical experiment. Produce its action sequence.\n{description}",
        "Map the following text to the structured action schema.\n{description}",
        "Description: {description}\nActions:",
        "Write the step-by-step actions for this experimental procedure.\n{description}",
        "Parse the synthesis paragraph into structured operations with their arguments.\n{description}",
        "Summarize the procedure as a list of typed actions with reagents and conditions.\n{description}",
        "Generate structured actions that reproduce the experiment described here.\n{description}",
        "A chemist wrote the following procedure. Encode it as structured actions.\n{description}",
        "Convert the text into actions, keeping reagents, amounts and conditions.\n{description}",
        "Experimental section:\n{description}\nGive the equivalent structured action sequence.",
        "List the actions, in order, needed to carry out this procedure.\n{description}",
        "Represent the synthesis below as a structured action sequence.\n{description}",
        "Transform the described workup and reaction steps into structured actions.\n{description}",
        "From this experimental description, extract the structured action sequence.\nText: {description}",
    };
    static const std::vector<std::string> r2d = {
        "Write an experimental procedure for the following reaction.\n{reaction}",
        "Describe how to carry out this reaction in the laboratory.\n{reaction}",
        "Reaction: {reaction}\nWrite the experimental procedure.",
        "Propose a detailed synthesis procedure for the reaction below.\n{reaction}",
        "Given the reaction, write the experimental section a chemist would report.\n{reaction}",
        "Draft a laboratory procedure that performs this transformation.\n{reaction}",
        "Explain step by step how to run the following reaction.\n{reaction}",
        "Compose a procedure, including workup, for this reaction.\n{reaction}",
        "Produce an experimental description for the reaction shown.\n{reaction}",
        "For the reaction {reaction}, write a plausible experimental procedure.",
        "Write the synthesis paragraph for this reaction.\n{reaction}",
        "Describe reagents, conditions and workup for the reaction below.\n{reaction}",
        "Generate the experimental procedure corresponding to this reaction.\n{reaction}",
        "How would you perform this reaction? Answer with a written procedure.\n{reaction}",
        "Provide a detailed procedure for obtaining the product of this reaction.\n{reaction}",
        "Reaction SMILES: {reaction}\nProcedure:",
        "Write a lab protocol for the reaction given here.\n{reaction}",
        "Turn the following reaction into a written experimental procedure.\n{reaction}",
        "Describe a practical way to carry out the reaction below.\n{reaction}",
        "Write a concise experimental procedure for this reaction.\n{reaction}",
    };
    static const std::vector<std::string> a2d = {
        "Write the experimental procedure described by these structured actions.\n{actions}",
        "Convert the structured actions below into a natural-language procedure.\n{actions}",
        "Actions: {actions}\nDescribe the procedure in prose.",
        "Rewrite the following action sequence as an experimental section.\n{actions}",
        "Explain in words what the following actions do in the laboratory.\n{actions}",
        "Turn this machine-readable action sequence into a readable procedure.\n{actions}",
        "Describe the experiment encoded by these actions.\n{actions}",
        "Generate a written procedure that matches the action sequence.\n{actions}",
        "Render the structured actions below as a paragraph a chemist would write.\n{actions}",
        "Given these actions, write the experimental description.\n{actions}",
        "Express the following operations as a fluent procedure.\n{actions}",
        "Write the procedure text for this action sequence.\n{actions}",
        "From the structured actions, produce the experimental procedure.\nActions: {actions}",
        "Narrate the experimental steps encoded below.\n{actions}",
        "Convert these actions back into an experimental description.\n{actions}",
        "Produce a procedure paragraph equivalent to the actions listed.\n{actions}",
        "Describe, step by step, the experiment given by this action sequence.\n{actions}",
        "Translate the action sequence into an experimental procedure.\n{actions}",
        "Write out the procedure these actions represent, keeping all amounts.\n{actions}",
        "Action sequence:\n{actions}\nExperimental procedure:",
    };
    switch (d) {
        case QADirection::kD2A: return d2a;
        case QADirection::kR2D: return r2d;
        case QADirection::kA2D: return a2d;
    }
    return d2a;
}

namespace {

std::string truncate_tokens(const std::string& text, std::size_t cap) {
    if (cap == 0) return text;
    std::vector<std::string> tokens = tokenize(text);
    if (tokens.size() <= cap) return text;
    std::string out;
    for (std::size_t i = 0; i < cap; ++i) {
        if (i) out += ' ';
        out += tokens[i];
    }
    return out;
}

}  // namespace

std::vector<QAPair> build_qa(std::span<const CorpusRecord> records,
                             std::span<const std::string> templates, QADirection direction,
                             std::uint64_t seed, std::size_t max_target_tokens) {
    if (templates.empty()) throw InvalidArgument("no instruction templates");
    const std::string_view slot = source_slot(direction);
    for (std::size_t t = 0; t < templates.size(); ++t) {
        if (templates[t].find(slot) == std::string::npos) {
            throw InvalidArgument("template " + std::to_string(t) + " lacks the " + std::string(slot) +
                                  " slot");
        }
    }

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, templates.size() - 1);
    std::vector<QAPair> out;
    out.reserve(records.size());
    for (const auto& r : records) {
        QAPair p;
        switch (direction) {
            case QADirection::kD2A:
                if (r.description.empty()) throw MissingField(r.id, "description");
                if (r.actions.empty()) throw MissingField(r.id, "actions");
                p.source = r.description;
                p.target = r.actions;
                break;
            case QADirection::kR2D:
                if (!r.reaction || r.reaction->empty()) throw MissingField(r.id, "reaction");
                if (r.description.empty()) throw MissingField(r.id, "description");
                p.source = *r.reaction;
                p.target = r.description;
                break;
            case QADirection::kA2D:
                if (r.actions.empty()) throw MissingField(r.id, "actions");
                if (r.description.empty()) throw MissingField(r.id, "description");
                p.source = r.actions;
                p.target = r.description;
                break;
        }
        p.template_id = pick(rng);
        p.instruction = templates[p.template_id];
        p.target = truncate_tokens(p.target, max_target_tokens);
        out.push_back(std::move(p));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitRatios& ratios) {
    const std::array<double, 3> r = {ratios.train, ratios.valid, ratios.test};
    for (double x : r) {
        if (!(x > 0.0)) throw InvalidArgument("split ratios must be positive");
    }
    if (std::abs(r[0] + r[1] + r[2] - 1.0) > 1e-9) throw InvalidArgument("split ratios must sum to 1");

    std::array<std::size_t, 3> sizes{};
    std::array<long double, 3> frac{};
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        long double share = static_cast<long double>(n) * r[i];
        // Shares like 10 * 0.1 land a hair below the integer in binary.
        long double whole = std::floor(share + 1e-9L);
        sizes[i] = static_cast<std::size_t>(whole);
        frac[i] = share - whole;
        assigned += sizes[i];
    }
    std::array<std::size_t, 3> order = {0, 1, 2};
    std::stable_sort(order.begin(), order.end(),
                     [&frac](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
    for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++sizes[order[k % 3]];
    return sizes;
}

SplitResult split(std::span<const CorpusRecord> records, const SplitRatios& ratios,
                  std::uint64_t seed) {
    if (records.empty()) throw EmptyCorpus();
    const auto sizes = split_sizes(records.size(), ratios);
    std::vector<CorpusRecord> shuffled(records.begin(), records.end());
    std::mt19937_64 rng(seed);
    std::shuffle(shuffled.begin(), shuffled.end(), rng);

    SplitResult out;
    auto it = shuffled.begin();
    auto take = [&it](std::vector<CorpusRecord>& dst, std::size_t n) {
        dst.assign(std::make_move_iterator(it), std::make_move_iterator(it + static_cast<std::ptrdiff_t>(n)));
        it += static_cast<std::ptrdiff_t>(n);
    };
    take(out.train, sizes[0]);
    take(out.valid, sizes[1]);
    take(out.test, sizes[2]);
    return out;
}

void write_split(const std::string& dir, const SplitResult& parts, const SplitRatios& ratios,
                 std::uint64_t seed) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir + ": " + ec.message());

    auto write_jsonl = [&dir](const std::string& name, const std::vector<CorpusRecord>& recs) {
        fs::path path = fs::path(dir) / name;
        std::ofstream out(path);
        if (!out) throw IoError("cannot write " + path.string());
        for (const auto& r : recs) out << to_json(r).dump() << '\n';
        if (!out) throw IoError("write failed: " + path.string());
    };
    write_jsonl("train.jsonl", parts.train);
    write_jsonl("valid.jsonl", parts.valid);
    write_jsonl("test.jsonl", parts.test);

    json manifest = {
        {"seed", seed},
        {"ratios", {{"train", ratios.train}, {"valid", ratios.valid}, {"test", ratios.test}}},
        {"counts",
         {{"train", parts.train.size()}, {"valid", parts.valid.size()}, {"test", parts.test.size()}}},
        {"files", {{"train", "train.jsonl"}, {"valid", "valid.jsonl"}, {"test", "test.jsonl"}}},
    };
    fs::path path = fs::path(dir) / "manifest.json";
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << manifest.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Statistics
// ---------------------------------------------------------------------------

CorpusStats corpus_stats(std::span<const CorpusRecord> records, Dialect dialect) {
    CorpusStats stats;
    std::map<std::string, std::size_t> type_counts;
    std::size_t total_actions = 0;
    for (const auto& r : records) {
        ActionSequence seq;
        try {
            seq = parse(r.actions, dialect);
        } catch (const Error&) {
            ++stats.parse_failures;
            continue;
        }
        ++stats.record_count;
        ++stats.action_count_hist[seq.size()];
        std::size_t tokens = tokenize(r.description).size();
        ++stats.token_count_hist[tokens / kTokenBucketWidth * kTokenBucketWidth];
        for (const auto& a : seq.actions) ++type_counts[a.type.name()];
        total_actions += seq.size();
    }
    for (const auto& [type, count] : type_counts) {
        stats.type_freq[type] = static_cast<double>(count) / static_cast<double>(total_actions);
    }
    return stats;
}

}  // namespace actionkit
