#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace actionkit {

// Two textual encodings of action sequences:
//   chemtrans  "[ quench ] reagent: ( name: ice water & type: pure & )"
//   openexp    "ADD acetone ; STIR for 5 minutes"
enum class Dialect { kChemTrans, kOpenExp };

std::string_view to_string(Dialect d);
// Accepts "chemtrans" / "openexp" (case-insensitive); throws InvalidArgument.
Dialect dialect_from_string(std::string_view name);

inline constexpr std::string_view kNoAction = "noaction";

class ActionType {
public:
    ActionType() = default;
    // Normalizes case for the dialect (lower for chemtrans, upper for openexp)
    // and looks the name up in the dialect vocabulary.
    ActionType(std::string_view name, Dialect dialect);

    const std::string& name() const noexcept { return name_; }
    Dialect dialect() const noexcept { return dialect_; }
    bool known() const noexcept { return known_; }

    friend bool operator==(const ActionType&, const ActionType&) = default;

private:
    std::string name_;
    Dialect dialect_ = Dialect::kChemTrans;
    bool known_ = false;
};

const std::vector<std::string>& vocabulary(Dialect dialect);
bool is_known_type(std::string_view name, Dialect dialect);

struct Component {
    std::string role;  // empty when the dialect omits a role
    std::vector<std::pair<std::string, std::string>> args;  // order preserved

    friend bool operator==(const Component&, const Component&) = default;
};

struct Action {
    ActionType type;
    std::vector<Component> components;

    friend bool operator==(const Action&, const Action&) = default;
};

struct ActionSequence {
    Dialect dialect = Dialect::kChemTrans;
    std::vector<Action> actions;
    std::string source_text;
    // Byte offset of each action's type token in source_text.
    std::vector<std::size_t> action_offsets;

    std::size_t size() const noexcept { return actions.size(); }
    bool empty() const noexcept { return actions.empty(); }

    // Structural equality: dialect and actions only.
    friend bool operator==(const ActionSequence& a, const ActionSequence& b) {
        return a.dialect == b.dialect && a.actions == b.actions;
    }
};

struct ValidityError {
    std::size_t offset;
    std::string message;
};

struct ValidityReport {
    bool is_valid = true;
    std::vector<ValidityError> errors;
};

// Throws EmptyInput for whitespace-only text and ParseError on malformed
// delimiters. Unknown action types are kept and flagged, not rejected.
ActionSequence parse(std::string_view text, Dialect dialect);

std::string serialize(const ActionSequence& seq);
std::string serialize_components(const std::vector<Component>& components, Dialect dialect);
std::string serialize_action(const Action& action, Dialect dialect);

ActionSequence canonicalize(const ActionSequence& seq);
// serialize(parse(text)); text that does not parse falls back to its
// whitespace-normalized form so metrics can still compare it.
std::string canonicalize_text(std::string_view text, Dialect dialect);

ValidityReport check_validity(std::string_view text, Dialect dialect);

// Replaces `$k$` / `@k@` placeholders using `table` (keys include the
// delimiters) after dropping YIELD actions. Throws UnmappedToken.
std::string detokenize_openexp(std::string_view text,
                               const std::map<std::string, std::string>& table);

// Removes YIELD actions from OpenExp text; returns text unchanged when none.
std::string strip_yield(std::string_view text);

// Collapses whitespace runs to one space and trims both ends.
std::string normalize_space(std::string_view text);

}  // namespace actionkit
