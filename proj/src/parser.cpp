#include "dimabsa/parser.hpp"

#include <cmath>

#include "dimabsa/errors.hpp"
#include "dimabsa/util.hpp"

namespace dimabsa {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

// Index one past the bracket closing s[open], or npos. Tracks JSON string
// state so brackets inside string literals do not count. Only brackets of
// the same kind as s[open] affect the depth; mismatched nesting is left
// for the JSON parser to reject.
size_t find_balanced_end(std::string_view s, size_t open) {
    const char oc = s[open];
    const char cc = (oc == '[') ? ']' : '}';
    int depth = 0;
    bool in_str = false;
    bool esc = false;
    for (size_t i = open; i < s.size(); ++i) {
        const char c = s[i];
        if (in_str) {
            if (esc) {
                esc = false;
            } else if (c == '\\') {
                esc = true;
            } else if (c == '"') {
                in_str = false;
            }
            continue;
        }
        if (c == '"') {
            in_str = true;
        } else if (c == oc) {
            ++depth;
        } else if (c == cc) {
            if (--depth == 0) return i + 1;
        }
    }
    return std::string_view::npos;
}

const json* find_key_ci(const json& obj, std::string_view name) {
    if (auto it = obj.find(name); it != obj.end()) return &*it;
    const std::string upper = upper_copy(name);
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (upper_copy(it.key()) == upper) return &*it;
    }
    return nullptr;
}

std::optional<std::string> get_span(const json& obj, std::string_view name) {
    const json* v = find_key_ci(obj, name);
    if (v == nullptr || !v->is_string()) return std::nullopt;
    return trim_copy(v->get<std::string>());
}

std::optional<double> get_va(const json& obj, std::string_view name) {
    const json* v = find_key_ci(obj, name);
    if (v == nullptr) return std::nullopt;
    if (v->is_number()) {
        const double d = v->get<double>();
        if (!std::isfinite(d)) return std::nullopt;
        return d;
    }
    if (v->is_string()) return parse_decimal(v->get<std::string>());
    return std::nullopt;
}

// Converts one JSON object into a tuple, or records why it cannot be.
void parse_element(const json& elem, TaskKind task, ParseReport& report) {
    if (!elem.is_object()) {
        report.rejected.push_back({elem.dump(), RejectReason::NotAnObject});
        return;
    }
    const auto aspect = get_span(elem, "aspect");
    const auto opinion = get_span(elem, "opinion");
    std::optional<std::string> category;
    if (task == TaskKind::Quadruplet) {
        category = get_span(elem, "category");
    }
    if (!aspect || !opinion ||
        (task == TaskKind::Quadruplet && !category)) {
        report.rejected.push_back({elem.dump(), RejectReason::MissingField});
        return;
    }
    const json* vraw = find_key_ci(elem, "valence");
    const json* araw = find_key_ci(elem, "arousal");
    if (vraw == nullptr || araw == nullptr) {
        report.rejected.push_back({elem.dump(), RejectReason::MissingField});
        return;
    }
    const auto valence = get_va(elem, "valence");
    const auto arousal = get_va(elem, "arousal");
    if (!valence || !arousal) {
        report.rejected.push_back({elem.dump(), RejectReason::BadNumber});
        return;
    }
    report.tuples.push_back(SentimentTuple{*aspect, category, *opinion,
                                           VAPair{*valence, *arousal}});
}

// True when `arr` is worth treating as the model's tuple array: empty, or
// containing at least one object element.
bool acceptable_array(const json& arr) {
    if (arr.empty()) return true;
    for (const auto& e : arr) {
        if (e.is_object()) return true;
    }
    return false;
}

// The first top-level array of objects in `s`, parsed, or a discarded
// value when none exists.
json extract_first_array(std::string_view s) {
    json whole = json::parse(trim_copy(s), nullptr, false);
    if (!whole.is_discarded() && whole.is_array() && acceptable_array(whole)) {
        return whole;
    }
    for (size_t i = s.find('['); i != std::string_view::npos; i = s.find('[', i + 1)) {
        const size_t end = find_balanced_end(s, i);
        if (end == std::string_view::npos) continue;
        json cand = json::parse(s.substr(i, end - i), nullptr, false);
        if (!cand.is_discarded() && cand.is_array() && acceptable_array(cand)) {
            return cand;
        }
    }
    return json(json::value_t::discarded);
}

// Last-resort recovery: walk the text for balanced top-level {...}
// regions and parse each on its own. An opening brace that never closes
// produces one `truncated` rejection covering the tail.
void salvage_objects(std::string_view s, TaskKind task, ParseReport& report) {
    size_t i = s.find('{');
    while (i != std::string_view::npos) {
        const size_t end = find_balanced_end(s, i);
        if (end == std::string_view::npos) {
            report.rejected.push_back(
                {trim_copy(s.substr(i)), RejectReason::Truncated});
            return;
        }
        json cand = json::parse(s.substr(i, end - i), nullptr, false);
        if (cand.is_discarded()) {
            report.rejected.push_back(
                {std::string(s.substr(i, end - i)), RejectReason::NotAnObject});
        } else {
            parse_element(cand, task, report);
        }
        i = s.find('{', end);
    }
}

}  // namespace

std::string to_string(RejectReason reason) {
    switch (reason) {
        case RejectReason::MissingField: return "missing-field";
        case RejectReason::BadNumber: return "bad-number";
        case RejectReason::NotAnObject: return "not-an-object";
        case RejectReason::Truncated: return "truncated";
    }
    throw ContractError("unknown RejectReason value");
}

ParseReport parse_generation(std::string_view text, TaskKind task) {
    const std::string s = utf8_sanitize(text);
    ParseReport report;
    const json arr = extract_first_array(s);
    if (!arr.is_discarded()) {
        for (const auto& elem : arr) {
            parse_element(elem, task, report);
        }
        return report;
    }
    salvage_objects(s, task, report);
    return report;
}

ordered_json tuples_to_json(const std::vector<SentimentTuple>& tuples, TaskKind task) {
    ordered_json arr = ordered_json::array();
    for (const auto& t : tuples) {
        require_shape(t, task);
        ordered_json obj;
        obj["aspect"] = t.aspect;
        if (task == TaskKind::Quadruplet) obj["category"] = *t.category;
        obj["opinion"] = t.opinion;
        obj["valence"] = format_fixed2(t.va.valence);
        obj["arousal"] = format_fixed2(t.va.arousal);
        arr.push_back(std::move(obj));
    }
    return arr;
}

std::vector<SentimentTuple> tuples_from_json(const json& j, TaskKind task) {
    if (!j.is_array()) {
        throw DataError("tuple payload must be a JSON array, got " +
                        std::string(j.type_name()));
    }
    std::vector<SentimentTuple> out;
    out.reserve(j.size());
    for (const auto& elem : j) {
        if (!elem.is_object()) {
            throw DataError("tuple entry must be a JSON object, got " + elem.dump());
        }
        SentimentTuple t;
        const auto read_string = [&](const char* key) {
            const auto it = elem.find(key);
            if (it == elem.end() || !it->is_string()) {
                throw DataError(std::string("tuple entry missing string field '") +
                                key + "': " + elem.dump());
            }
            return it->get<std::string>();
        };
        const auto read_va = [&](const char* key) {
            const auto it = elem.find(key);
            if (it == elem.end()) {
                throw DataError(std::string("tuple entry missing field '") + key +
                                "': " + elem.dump());
            }
            std::optional<double> v;
            if (it->is_number()) {
                v = it->get<double>();
            } else if (it->is_string()) {
                v = parse_decimal(it->get<std::string>());
            }
            if (!v || !std::isfinite(*v)) {
                throw DataError(std::string("tuple field '") + key +
                                "' is not a finite decimal: " + elem.dump());
            }
            return *v;
        };
        t.aspect = read_string("aspect");
        if (task == TaskKind::Quadruplet) t.category = read_string("category");
        t.opinion = read_string("opinion");
        t.va.valence = read_va("valence");
        t.va.arousal = read_va("arousal");
        out.push_back(std::move(t));
    }
    return out;
}

std::string serialize_tuples(const std::vector<SentimentTuple>& tuples, TaskKind task) {
    return tuples_to_json(tuples, task).dump();
}

}  // namespace dimabsa
