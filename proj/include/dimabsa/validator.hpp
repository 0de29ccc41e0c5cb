#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "dimabsa/core.hpp"

namespace dimabsa {

// Closed set of category labels for one language/domain slice. Labels are
// stored uppercased; membership tests fold case the same way.
struct CategoryWhitelist {
    std::set<std::string> labels;

    bool contains(std::string_view label) const;
};

struct ValidationOptions {
    // When true, the literal span "NULL" marks an implicit aspect or
    // opinion and is exempt from the source-text presence check.
    bool allow_null_placeholder = true;
};

// VA coordinates clamped into [1, 9]. Non-finite coordinates become the
// scale midpoint 5.0.
SentimentTuple clamp_va(SentimentTuple t);

// Keeps tuples whose trimmed aspect and opinion spans both occur verbatim
// (case-sensitively) in `review_text`.
std::vector<SentimentTuple> filter_spans(std::vector<SentimentTuple> tuples,
                                         std::string_view review_text,
                                         const ValidationOptions& opts = {});

// Keeps tuples whose category is on the whitelist. Tuples must be
// quadruplet-shaped; raises ContractError otherwise.
std::vector<SentimentTuple> filter_categories(std::vector<SentimentTuple> tuples,
                                              const CategoryWhitelist& whitelist);

// Whitelist built from every category present in the gold annotations of
// `train`. Instances without gold contribute nothing.
CategoryWhitelist build_category_whitelist(const std::vector<ReviewInstance>& train);

// Full validation for one generation, applied in a fixed order: clamp VA,
// ground spans in the review text, check categories (quadruplets only),
// then drop exact categorical-key duplicates keeping the first
// occurrence. `whitelist` may be null for triplets and must not be for
// quadruplets.
PredictionRun validate_run(std::vector<SentimentTuple> tuples,
                           std::string_view review_text, TaskKind task,
                           const CategoryWhitelist* whitelist = nullptr,
                           const ValidationOptions& opts = {});

// One uppercased label per line, sorted. Round trips with load_whitelist.
void save_whitelist(const CategoryWhitelist& whitelist,
                    const std::filesystem::path& path);
CategoryWhitelist load_whitelist(const std::filesystem::path& path);

}  // namespace dimabsa
