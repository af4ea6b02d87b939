#pragma once

#include <string>

#include "json.hpp"

#include "actionkit/datatools.hpp"
#include "actionkit/metrics.hpp"
#include "actionkit/review.hpp"
#include "actionkit/select.hpp"
#include "actionkit/typematch.hpp"

namespace actionkit {

nlohmann::json to_json(const CorpusRecord& r);
nlohmann::json to_json(const ActionSequence& seq);
nlohmann::json to_json(const ValidityReport& report);
nlohmann::json to_json(const PairScore& score);
nlohmann::json to_json(const MetricReport& report);
nlohmann::json to_json(const ConfusionMatrix& matrix);
nlohmann::json to_json(const SelectionResult& result);
nlohmann::json to_json(const ReviewTranscript& transcript);
nlohmann::json to_json(const QAPair& pair);
nlohmann::json to_json(const CorpusStats& stats);

/// Throws MissingField / InvalidArgument on missing or mistyped members.
CorpusRecord corpus_record_from_json(const nlohmann::json& j);
JudgeConfig judge_config_from_json(const nlohmann::json& j);
ReviewCase review_case_from_json(const nlohmann::json& j);

}  // namespace actionkit
