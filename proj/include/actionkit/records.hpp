#pragma once

#include <optional>
#include <string>

namespace actionkit {

// One (reaction, description, actions) triple of a corpus file.
struct CorpusRecord {
    std::string id;
    std::optional<std::string> reaction;
    std::string description;
    std::string actions;

    friend bool operator==(const CorpusRecord&, const CorpusRecord&) = default;
};

struct Prediction {
    std::string id;
    std::string prediction;

    friend bool operator==(const Prediction&, const Prediction&) = default;
};

}  // namespace actionkit
