#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "actionkit/schema.hpp"

namespace actionkit {

// Partner label for phrases that found no sufficiently similar counterpart.
inline constexpr std::string_view kNoActionLabel = "NOACTION";

/// Ratcliff/Obershelp ratio 2M / (|a| + |b|) over code points; 1.0 when both
/// strings are empty.
double gestalt_similarity(std::string_view a, std::string_view b);

struct ActionPhrase {
    std::string type;            // canonical type name
    std::string component_text;  // canonical serialization of the components
};

std::vector<ActionPhrase> split_phrases(const ActionSequence& seq);

struct PhrasePair {
    std::string pred_type;  // kNoActionLabel when unmatched
    std::string gold_type;  // kNoActionLabel when unmatched
    double similarity = 0.0;
};

/// Counts indexed by (pred type, gold type). Labels include kNoActionLabel once
/// any unmatched phrase was counted.
class ConfusionMatrix {
public:
    void add(const std::string& pred_type, const std::string& gold_type, std::size_t count = 1);
    std::size_t at(const std::string& pred_type, const std::string& gold_type) const;
    // Sorted union of all row and column labels.
    std::vector<std::string> labels() const;
    std::size_t total() const;
    // Number of pairs whose gold side is `gold_type`.
    std::size_t gold_total(const std::string& gold_type) const;
    std::size_t pred_total(const std::string& pred_type) const;
    void merge(const ConfusionMatrix& other);

    const std::map<std::string, std::map<std::string, std::size_t>>& cells() const { return cells_; }

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

private:
    std::map<std::string, std::map<std::string, std::size_t>> cells_;  // pred -> gold -> count
    std::set<std::string> labels_;
};

struct MatchResult {
    std::vector<PhrasePair> pairs;
    ConfusionMatrix confusion;
    std::map<std::string, double> recall;  // gold type -> fraction, NOACTION excluded
};

inline constexpr double kDefaultTypeMatchThreshold = 0.4;

/// Greedy one-to-one pairing. Gold phrases are visited in order and take the
/// unused predicted phrase with the most similar component text (earliest on
/// ties); the pair stands only when the similarity is strictly above
/// `threshold`, otherwise the gold phrase is paired with NOACTION. Predicted
/// phrases left over are paired with NOACTION on the gold side.
MatchResult match_phrases(std::span<const ActionPhrase> pred, std::span<const ActionPhrase> gold,
                          double threshold = kDefaultTypeMatchThreshold);

/// Micro-averaged recall per gold type over a corpus of results. Types that
/// never occur on the gold side are omitted. Throws EmptyCorpus.
std::map<std::string, double> per_type_recall(std::span<const MatchResult> results);

ConfusionMatrix merge_confusion(std::span<const MatchResult> results);

/// "type  recall%" rows with two decimals, one per line.
std::string format_recall_table(const std::map<std::string, double>& recall);

/// Matrix as CSV: header row of gold labels, one row per predicted label.
std::string confusion_to_csv(const ConfusionMatrix& matrix);

}  // namespace actionkit
