#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "actionkit/records.hpp"
#include "actionkit/schema.hpp"
#include "actionkit/select.hpp"

namespace actionkit {

struct LineIssue {
    std::size_t lineno = 0;  // 1-based
    std::string message;
};

struct LoadOptions {
    bool strip_yield = false;  // drop YIELD actions from OpenExp action strings
    bool strict = false;       // throw MalformedLine on the first bad line
};

struct CorpusLoad {
    std::vector<CorpusRecord> records;
    std::vector<LineIssue> malformed;
};

/// Reads {"id", "description", "actions", "reaction"?} objects, one per
/// line; blank lines are skipped. Bad lines are collected (or thrown when
/// strict). Throws IoError.
CorpusLoad load_corpus(const std::string& path, Dialect dialect, LoadOptions opts = {});

/// Reads {"id", "prediction"} objects. Throws IoError and MalformedLine.
std::vector<Prediction> load_predictions(const std::string& path);

/// Reads {"id", "vector": [...]} objects. Throws IoError, MalformedLine and
/// the EmbeddingSet validation errors.
EmbeddingSet load_embeddings(const std::string& path);

/// Raises MalformedLine for the first collected issue, if any.
void throw_if_malformed(const CorpusLoad& load);

enum class QADirection { kD2A, kR2D, kA2D };

std::string_view to_string(QADirection d);
QADirection qa_direction_from_string(std::string_view name);

struct QAPair {
    std::string instruction;  // template text, slot included
    std::string source;
    std::string target;
    std::size_t template_id = 0;

    friend bool operator==(const QAPair&, const QAPair&) = default;
};

/// "{description}", "{reaction}" or "{actions}": the source field's slot.
std::string_view source_slot(QADirection d);

/// The instruction with its slot replaced by the source.
std::string model_input(const QAPair& pair, QADirection d);

/// Bundled instruction templates for a direction.
const std::vector<std::string>& default_templates(QADirection d);

inline constexpr std::size_t kDefaultMaxTargetTokens = 800;

/// One pair per record, template drawn uniformly with a seeded generator.
/// Targets longer than max_target_tokens whitespace tokens are cut to that
/// many tokens (0 disables the cap). Throws InvalidArgument for an empty
/// template list or a template lacking the direction's slot, and
/// MissingField when a record lacks the source or target field.
std::vector<QAPair> build_qa(std::span<const CorpusRecord> records,
                             std::span<const std::string> templates, QADirection direction,
                             std::uint64_t seed,
                             std::size_t max_target_tokens = kDefaultMaxTargetTokens);

struct SplitRatios {
    double train = 0.8;
    double valid = 0.1;
    double test = 0.1;
};

struct SplitResult {
    std::vector<CorpusRecord> train;
    std::vector<CorpusRecord> valid;
    std::vector<CorpusRecord> test;
};

/// Part sizes by largest remainder: floor(n * ratio) each, leftover records
/// going to the parts with the largest fractional shares (earlier part on
/// ties). Throws InvalidArgument unless all ratios are positive and sum to
/// 1 within 1e-9.
std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitRatios& ratios);

/// Seeded shuffle, then contiguous train/valid/test cuts. Throws EmptyCorpus.
SplitResult split(std::span<const CorpusRecord> records, const SplitRatios& ratios,
                  std::uint64_t seed);

/// Writes train.jsonl, valid.jsonl, test.jsonl and manifest.json into `dir`
/// (created if needed). Throws IoError.
void write_split(const std::string& dir, const SplitResult& parts, const SplitRatios& ratios,
                 std::uint64_t seed);

inline constexpr std::size_t kTokenBucketWidth = 50;

struct CorpusStats {
    std::map<std::size_t, std::size_t> action_count_hist;  // actions per record -> records
    std::map<std::size_t, std::size_t> token_count_hist;   // bucket lower bound -> records
    std::map<std::string, double> type_freq;               // share of all parsed actions
    std::size_t record_count = 0;                          // records whose actions parsed
    std::size_t parse_failures = 0;

    friend bool operator==(const CorpusStats&, const CorpusStats&) = default;
};

/// Both histograms cover the parsed records; records whose actions fail to
/// parse are only counted in parse_failures. type_freq is empty when no
/// action was parsed.
CorpusStats corpus_stats(std::span<const CorpusRecord> records, Dialect dialect);

}  // namespace actionkit
