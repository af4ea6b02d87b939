#include "actionkit/typematch.hpp"

#include <cstdio>

#include "actionkit/error.hpp"
#include "actionkit/sequence_matcher.hpp"
#include "actionkit/text.hpp"

namespace actionkit {

double gestalt_similarity(std::string_view a, std::string_view b) {
    std::u32string ca = utf8_codepoints(a);
    std::u32string cb = utf8_codepoints(b);
    return gestalt_ratio<char32_t>(ca, cb);
}

std::vector<ActionPhrase> split_phrases(const ActionSequence& seq) {
    ActionSequence canon = canonicalize(seq);
    std::vector<ActionPhrase> phrases;
    phrases.reserve(canon.actions.size());
    for (const auto& action : canon.actions) {
        phrases.push_back({action.type.name(), serialize_components(action.components, canon.dialect)});
    }
    return phrases;
}

void ConfusionMatrix::add(const std::string& pred_type, const std::string& gold_type,
                          std::size_t count) {
    cells_[pred_type][gold_type] += count;
    labels_.insert(pred_type);
    labels_.insert(gold_type);
}

std::size_t ConfusionMatrix::at(const std::string& pred_type, const std::string& gold_type) const {
    auto row = cells_.find(pred_type);
    if (row == cells_.end()) return 0;
    auto cell = row->second.find(gold_type);
    return cell == row->second.end() ? 0 : cell->second;
}

std::vector<std::string> ConfusionMatrix::labels() const {
    return {labels_.begin(), labels_.end()};
}

std::size_t ConfusionMatrix::total() const {
    std::size_t sum = 0;
    for (const auto& [pred, row] : cells_) {
        for (const auto& [gold, count] : row) sum += count;
    }
    return sum;
}

std::size_t ConfusionMatrix::gold_total(const std::string& gold_type) const {
    std::size_t sum = 0;
    for (const auto& [pred, row] : cells_) {
        auto cell = row.find(gold_type);
        if (cell != row.end()) sum += cell->second;
    }
    return sum;
}

std::size_t ConfusionMatrix::pred_total(const std::string& pred_type) const {
    auto row = cells_.find(pred_type);
    if (row == cells_.end()) return 0;
    std::size_t sum = 0;
    for (const auto& [gold, count] : row->second) sum += count;
    return sum;
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
    for (const auto& [pred, row] : other.cells_) {
        for (const auto& [gold, count] : row) add(pred, gold, count);
    }
}

namespace {

std::map<std::string, double> recall_from(const ConfusionMatrix& matrix) {
    std::map<std::string, double> recall;
    const std::string none(kNoActionLabel);
    for (const auto& label : matrix.labels()) {
        if (label == none) continue;
        std::size_t total = matrix.gold_total(label);
        if (total == 0) continue;
        recall[label] = static_cast<double>(matrix.at(label, label)) / static_cast<double>(total);
    }
    return recall;
}

}  // namespace

MatchResult match_phrases(std::span<const ActionPhrase> pred, std::span<const ActionPhrase> gold,
                          double threshold) {
    if (threshold < 0.0 || threshold > 1.0) throw InvalidArgument("threshold must lie in [0, 1]");
    const std::string none(kNoActionLabel);

    // Similarities are computed lazily; each gold phrase scans the unused preds.
    std::vector<bool> used(pred.size(), false);
    MatchResult result;
    for (const auto& g : gold) {
        std::size_t best = pred.size();
        double best_sim = -1.0;
        for (std::size_t j = 0; j < pred.size(); ++j) {
            if (used[j]) continue;
            double sim = gestalt_similarity(pred[j].component_text, g.component_text);
            if (sim > best_sim) {
                best_sim = sim;
                best = j;
            }
        }
        if (best < pred.size() && best_sim > threshold) {
            used[best] = true;
            result.pairs.push_back({pred[best].type, g.type, best_sim});
        } else {
            result.pairs.push_back({none, g.type, std::max(best_sim, 0.0)});
        }
    }
    for (std::size_t j = 0; j < pred.size(); ++j) {
        if (!used[j]) result.pairs.push_back({pred[j].type, none, 0.0});
    }

    for (const auto& p : result.pairs) result.confusion.add(p.pred_type, p.gold_type);
    result.recall = recall_from(result.confusion);
    return result;
}

ConfusionMatrix merge_confusion(std::span<const MatchResult> results) {
    ConfusionMatrix merged;
    for (const auto& r : results) merged.merge(r.confusion);
    return merged;
}

std::map<std::string, double> per_type_recall(std::span<const MatchResult> results) {
    if (results.empty()) throw EmptyCorpus();
    return recall_from(merge_confusion(results));
}

std::string format_recall_table(const std::map<std::string, double>& recall) {
    std::string out;
    char line[128];
    for (const auto& [type, r] : recall) {
        std::snprintf(line, sizeof line, "%-16s %6.2f\n", type.c_str(), 100.0 * r);
        out += line;
    }
    return out;
}

std::string confusion_to_csv(const ConfusionMatrix& matrix) {
    const auto labels = matrix.labels();
    std::string out = "pred\\gold";
    for (const auto& g : labels) out += "," + g;
    out += '\n';
    for (const auto& p : labels) {
        out += p;
        for (const auto& g : labels) out += "," + std::to_string(matrix.at(p, g));
        out += '\n';
    }
    return out;
}

}  // namespace actionkit
