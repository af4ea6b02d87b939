#include "actionkit/schema.hpp"

#include <algorithm>
#include <cctype>
#include <regex>

#include "actionkit/error.hpp"

namespace actionkit {

namespace {

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string to_upper(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

// Annotation vocabulary of the human-labelled corpus. The NOACTION sentinel
// is accepted so that matched outputs can be re-read.
const std::vector<std::string> kChemTransTypes = {
    "add",     "settemp", "yield",   "evaporate",     "dry",       "wash",
    "filter",  "column",  "extract", "quench",        "distill",   "reflux",
    "recrystallize",      "triturate", "transfer",    "noaction",
};

// Verb taxonomy of the reaction-derived corpus.
const std::vector<std::string> kOpenExpTypes = {
    "ADD",          "COLLECTLAYER",   "CONCENTRATE",   "DEGAS",
    "DRYSOLID",     "DRYSOLUTION",    "EXTRACT",       "FILTER",
    "FOLLOWOTHERPROCEDURE",           "INVALIDACTION", "MAKESOLUTION",
    "MICROWAVE",    "NOACTION",       "OTHERLANGUAGE", "PARTITION",
    "PH",           "PHASESEPARATION", "PURIFY",       "QUENCH",
    "RECRYSTALLIZE", "REFLUX",        "SETTEMPERATURE", "SONICATE",
    "STIR",         "TRITURATE",      "WAIT",          "WASH",
    "YIELD",
};

constexpr std::string_view kOpenExpTextKey = "text";

// ---------------------------------------------------------------------------
// ChemTrans grammar
//
//   sequence  := phrase+
//   phrase    := "[" type "]" [ component ( "&" component )* ]
//   component := [ role ":" ] "(" ( key ":" value "&" )* ")"
//
// Values run to the next `&` or `)` outside any parentheses opened inside the
// value itself, so "concentration: 1:1" and "name: 2-(4-tolyl)ethanol" parse.
// ---------------------------------------------------------------------------
class ChemTransParser {
public:
    explicit ChemTransParser(std::string_view text) : text_(text) {}

    ActionSequence run() {
        ActionSequence seq;
        seq.dialect = Dialect::kChemTrans;
        seq.source_text = std::string(text_);

        skip_ws();
        if (at_end()) throw EmptyInput();

        while (!at_end()) {
            expect('[', "'['");
            skip_ws();
            std::size_t type_start = pos_;
            while (!at_end() && !is_space(peek()) && !is_delim(peek())) ++pos_;
            if (pos_ == type_start) throw ParseError(pos_, "action type");
            Action action;
            action.type = ActionType(text_.substr(type_start, pos_ - type_start),
                                     Dialect::kChemTrans);
            skip_ws();
            expect(']', "']'");
            skip_ws();

            if (!at_end() && peek() != '[') {
                while (true) {
                    action.components.push_back(component());
                    skip_ws();
                    if (at_end() || peek() != '&') break;
                    ++pos_;
                    skip_ws();
                    if (at_end() || peek() == '[') throw ParseError(pos_, "component");
                }
                if (!at_end() && peek() != '[') {
                    throw ParseError(pos_, "'&', '[' or end of input");
                }
            }
            seq.action_offsets.push_back(type_start);
            seq.actions.push_back(std::move(action));
        }
        return seq;
    }

private:
    static bool is_delim(char c) {
        return c == '[' || c == ']' || c == '(' || c == ')' || c == '&';
    }

    bool at_end() const { return pos_ >= text_.size(); }
    char peek() const { return text_[pos_]; }
    void skip_ws() {
        while (!at_end() && is_space(peek())) ++pos_;
    }
    void expect(char c, const char* what) {
        if (at_end() || peek() != c) throw ParseError(pos_, what);
        ++pos_;
    }

    Component component() {
        Component comp;
        if (peek() != '(') {
            std::size_t role_start = pos_;
            while (!at_end() && peek() != ':' && !is_delim(peek())) ++pos_;
            if (at_end() || peek() != ':') throw ParseError(pos_, "':' after role");
            comp.role = normalize_space(text_.substr(role_start, pos_ - role_start));
            ++pos_;
            skip_ws();
        }
        expect('(', "'('");

        while (true) {
            skip_ws();
            if (at_end() || peek() == '[') throw ParseError(pos_, "')'");
            if (peek() == ')') {
                ++pos_;
                return comp;
            }
            std::size_t item_start = pos_;
            int depth = 0;
            while (!at_end()) {
                char c = peek();
                if (c == '(') {
                    ++depth;
                } else if (c == ')') {
                    if (depth == 0) break;
                    --depth;
                } else if (c == '&' && depth == 0) {
                    break;
                }
                ++pos_;
            }
            if (at_end()) throw ParseError(pos_, "')'");
            comp.args.push_back(split_arg(item_start, text_.substr(item_start, pos_ - item_start)));
            if (peek() == '&') ++pos_;
        }
    }

    // Keys end at the first colon followed by whitespace ("batch:each: x"
    // has key "batch:each"); otherwise at the first colon.
    std::pair<std::string, std::string> split_arg(std::size_t offset, std::string_view item) const {
        std::size_t colon = std::string_view::npos;
        for (std::size_t i = 0; i < item.size(); ++i) {
            if (item[i] == ':' && (i + 1 == item.size() || is_space(item[i + 1]))) {
                colon = i;
                break;
            }
        }
        if (colon == std::string_view::npos) colon = item.find(':');
        if (colon == std::string_view::npos) throw ParseError(offset, "'key:'");
        std::string key = normalize_space(item.substr(0, colon));
        if (key.empty()) throw ParseError(offset, "argument key");
        return {std::move(key), normalize_space(item.substr(colon + 1))};
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

// OpenExp: verb-first actions separated by ';'. A trailing separator is
// tolerated. The text after the verb becomes one role-less component.
ActionSequence parse_openexp(std::string_view text) {
    ActionSequence seq;
    seq.dialect = Dialect::kOpenExp;
    seq.source_text = std::string(text);
    if (trim(text).empty()) throw EmptyInput();

    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find(';', start);
        bool last = end == std::string_view::npos;
        if (last) end = text.size();
        std::string_view segment = text.substr(start, end - start);

        std::size_t lead = 0;
        while (lead < segment.size() && is_space(segment[lead])) ++lead;
        if (lead == segment.size()) {
            // only a trailing separator may leave an empty segment
            if (last && start > 0) break;
            throw ParseError(start + lead, "action");
        }

        std::size_t verb_end = lead;
        while (verb_end < segment.size() && !is_space(segment[verb_end])) ++verb_end;

        int depth = 0;
        for (std::size_t i = verb_end; i < segment.size(); ++i) {
            if (segment[i] == '(') {
                ++depth;
            } else if (segment[i] == ')') {
                if (depth == 0) throw ParseError(start + i, "matching '('");
                --depth;
            }
        }
        if (depth != 0) throw ParseError(start + segment.size(), "')'");

        Action action;
        action.type = ActionType(segment.substr(lead, verb_end - lead), Dialect::kOpenExp);
        std::string rest = normalize_space(segment.substr(verb_end));
        if (!rest.empty()) {
            action.components.push_back(Component{"", {{std::string(kOpenExpTextKey), rest}}});
        }
        seq.action_offsets.push_back(start + lead);
        seq.actions.push_back(std::move(action));

        if (last) break;
        start = end + 1;
    }
    return seq;
}

std::string openexp_detail(const std::vector<Component>& components) {
    std::string out;
    for (const auto& comp : components) {
        auto append = [&out](std::string_view piece) {
            std::string norm = normalize_space(piece);
            if (norm.empty()) return;
            if (!out.empty()) out += ' ';
            out += norm;
        };
        append(comp.role);
        for (const auto& [key, value] : comp.args) {
            if (key != kOpenExpTextKey) append(key);
            append(value);
        }
    }
    return out;
}

std::string_view leading_verb(std::string_view segment) {
    segment = trim(segment);
    std::size_t end = 0;
    while (end < segment.size() && !is_space(segment[end])) ++end;
    return segment.substr(0, end);
}

}  // namespace

std::string_view to_string(Dialect d) {
    return d == Dialect::kChemTrans ? "chemtrans" : "openexp";
}

Dialect dialect_from_string(std::string_view name) {
    std::string lower = to_lower(name);
    if (lower == "chemtrans") return Dialect::kChemTrans;
    if (lower == "openexp") return Dialect::kOpenExp;
    throw InvalidArgument("unknown dialect '" + std::string(name) + "'");
}

ActionType::ActionType(std::string_view name, Dialect dialect)
    : name_(dialect == Dialect::kChemTrans ? to_lower(name) : to_upper(name)),
      dialect_(dialect),
      known_(is_known_type(name_, dialect)) {}

const std::vector<std::string>& vocabulary(Dialect dialect) {
    return dialect == Dialect::kChemTrans ? kChemTransTypes : kOpenExpTypes;
}

bool is_known_type(std::string_view name, Dialect dialect) {
    std::string norm = dialect == Dialect::kChemTrans ? to_lower(name) : to_upper(name);
    const auto& vocab = vocabulary(dialect);
    return std::find(vocab.begin(), vocab.end(), norm) != vocab.end();
}

std::string normalize_space(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending = false;
    for (char c : text) {
        if (is_space(c)) {
            pending = !out.empty();
            continue;
        }
        if (pending) out += ' ';
        pending = false;
        out += c;
    }
    return out;
}

ActionSequence parse(std::string_view text, Dialect dialect) {
    if (dialect == Dialect::kOpenExp) return parse_openexp(text);
    return ChemTransParser(text).run();
}

std::string serialize_components(const std::vector<Component>& components, Dialect dialect) {
    if (dialect == Dialect::kOpenExp) return openexp_detail(components);
    std::string out;
    for (std::size_t i = 0; i < components.size(); ++i) {
        const auto& comp = components[i];
        if (i > 0) out += " & ";
        if (!comp.role.empty()) out += comp.role + ": ";
        out += "( ";
        for (const auto& [key, value] : comp.args) {
            out += key;
            out += ':';
            if (!value.empty()) out += ' ' + value;
            out += " & ";
        }
        out += ')';
    }
    return out;
}

std::string serialize_action(const Action& action, Dialect dialect) {
    std::string detail = serialize_components(action.components, dialect);
    std::string out;
    if (dialect == Dialect::kChemTrans) {
        out = "[ " + action.type.name() + " ]";
    } else {
        out = action.type.name();
    }
    if (!detail.empty()) out += ' ' + detail;
    return out;
}

std::string serialize(const ActionSequence& seq) {
    const std::string_view sep = seq.dialect == Dialect::kChemTrans ? " " : " ; ";
    std::string out;
    for (std::size_t i = 0; i < seq.actions.size(); ++i) {
        if (i > 0) out += sep;
        out += serialize_action(seq.actions[i], seq.dialect);
    }
    return out;
}

ActionSequence canonicalize(const ActionSequence& seq) {
    ActionSequence out;
    out.dialect = seq.dialect;
    out.source_text = seq.source_text;
    out.action_offsets = seq.action_offsets;
    out.actions.reserve(seq.actions.size());
    for (const auto& action : seq.actions) {
        Action canon;
        canon.type = ActionType(normalize_space(action.type.name()), seq.dialect);
        if (seq.dialect == Dialect::kOpenExp) {
            std::string detail = openexp_detail(action.components);
            if (!detail.empty()) {
                canon.components.push_back(
                    Component{"", {{std::string(kOpenExpTextKey), std::move(detail)}}});
            }
        } else {
            for (const auto& comp : action.components) {
                Component c;
                c.role = normalize_space(comp.role);
                for (const auto& [key, value] : comp.args) {
                    c.args.emplace_back(normalize_space(key), normalize_space(value));
                }
                canon.components.push_back(std::move(c));
            }
        }
        out.actions.push_back(std::move(canon));
    }
    return out;
}

std::string canonicalize_text(std::string_view text, Dialect dialect) {
    try {
        return serialize(parse(text, dialect));
    } catch (const ParseError&) {
        return normalize_space(text);
    } catch (const EmptyInput&) {
        return std::string();
    }
}

ValidityReport check_validity(std::string_view text, Dialect dialect) {
    ValidityReport report;
    try {
        ActionSequence seq = parse(text, dialect);
        for (std::size_t i = 0; i < seq.actions.size(); ++i) {
            const auto& type = seq.actions[i].type;
            if (!type.known()) {
                report.errors.push_back(
                    {seq.action_offsets[i], "unknown action type '" + type.name() + "'"});
            }
        }
    } catch (const ParseError& e) {
        report.errors.push_back({std::min(e.offset(), text.size()), "expected " + e.expected()});
    } catch (const EmptyInput& e) {
        report.errors.push_back({0, e.what()});
    }
    report.is_valid = report.errors.empty();
    return report;
}

std::string strip_yield(std::string_view text) {
    std::vector<std::string_view> kept;
    bool removed = false;
    std::size_t start = 0;
    while (true) {
        std::size_t end = text.find(';', start);
        std::string_view segment =
            text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
        if (to_upper(leading_verb(segment)) == "YIELD") {
            removed = true;
        } else {
            kept.push_back(segment);
        }
        if (end == std::string_view::npos) break;
        start = end + 1;
    }
    if (!removed) return std::string(text);

    std::string out;
    for (std::size_t i = 0; i < kept.size(); ++i) {
        if (i > 0) out += ';';
        out += kept[i];
    }
    std::string_view trimmed = trim(out);
    while (!trimmed.empty() && trimmed.back() == ';') trimmed = trim(trimmed.substr(0, trimmed.size() - 1));
    return std::string(trimmed);
}

std::string detokenize_openexp(std::string_view text,
                               const std::map<std::string, std::string>& table) {
    static const std::regex kPlaceholder(R"(\$-?\d+\$|@-?\d+@)");
    std::string stripped = strip_yield(text);

    std::string out;
    auto begin = std::sregex_iterator(stripped.begin(), stripped.end(), kPlaceholder);
    std::size_t last = 0;
    for (auto it = begin; it != std::sregex_iterator(); ++it) {
        const std::string token = it->str();
        auto found = table.find(token);
        if (found == table.end()) throw UnmappedToken(token);
        out.append(stripped, last, static_cast<std::size_t>(it->position()) - last);
        out += found->second;
        last = static_cast<std::size_t>(it->position() + it->length());
    }
    out.append(stripped, last, std::string::npos);
    return out;
}

}  // namespace actionkit
