#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dimabsa/core.hpp"

namespace dimabsa {

// Why a candidate fragment of model output was not turned into a tuple.
enum class RejectReason {
    MissingField,  // required field absent or of the wrong type
    BadNumber,     // valence / arousal not parseable as a finite decimal
    NotAnObject,   // array element or salvaged region is not a JSON object
    Truncated,     // opening brace never closed before end of output
};

std::string to_string(RejectReason reason);

struct RejectedFragment {
    std::string fragment;
    RejectReason reason;
};

// Outcome of parsing one raw generation. `tuples` hold everything that was
// recovered; `rejected` records what was dropped and why.
struct ParseReport {
    std::vector<SentimentTuple> tuples;
    std::vector<RejectedFragment> rejected;

    bool fully_parsed() const { return rejected.empty(); }
};

// Total function from arbitrary model output to a ParseReport; never
// throws on malformed input. Strategy: sanitize to valid UTF-8, read the
// first top-level JSON array of objects if one exists, otherwise salvage
// every balanced top-level {...} region individually. Recovered spans are
// trimmed; VA values are kept at full precision and are not range-checked
// here (the validator clamps).
ParseReport parse_generation(std::string_view text, TaskKind task);

// Canonical JSON form: an array of flat objects with keys
// aspect / (category) / opinion / valence / arousal, VA rendered as
// two-decimal strings. Raises ContractError on a tuple whose shape does
// not match `task`.
nlohmann::ordered_json tuples_to_json(const std::vector<SentimentTuple>& tuples,
                                      TaskKind task);

// Strict inverse of tuples_to_json for data this toolkit wrote itself.
// Raises DataError on any deviation from the canonical shape. Unknown
// extra fields are ignored.
std::vector<SentimentTuple> tuples_from_json(const nlohmann::json& j, TaskKind task);

// tuples_to_json rendered as a compact single-line string.
std::string serialize_tuples(const std::vector<SentimentTuple>& tuples, TaskKind task);

}  // namespace dimabsa
