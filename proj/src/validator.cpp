#include "dimabsa/validator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "dimabsa/errors.hpp"
#include "dimabsa/util.hpp"

namespace dimabsa {

namespace {

double clamp_coord(double v) {
    if (!std::isfinite(v)) return 0.5 * (kVAMin + kVAMax);
    return std::clamp(v, kVAMin, kVAMax);
}

bool span_ok(const std::string& span, std::string_view text,
             const ValidationOptions& opts) {
    const std::string s = trim_copy(span);
    if (s.empty()) return false;
    if (opts.allow_null_placeholder && s == "NULL") return true;
    return text.find(s) != std::string_view::npos;
}

}  // namespace

bool CategoryWhitelist::contains(std::string_view label) const {
    return labels.count(upper_copy(trim_copy(label))) > 0;
}

SentimentTuple clamp_va(SentimentTuple t) {
    t.va.valence = clamp_coord(t.va.valence);
    t.va.arousal = clamp_coord(t.va.arousal);
    return t;
}

std::vector<SentimentTuple> filter_spans(std::vector<SentimentTuple> tuples,
                                         std::string_view review_text,
                                         const ValidationOptions& opts) {
    std::erase_if(tuples, [&](const SentimentTuple& t) {
        return !span_ok(t.aspect, review_text, opts) ||
               !span_ok(t.opinion, review_text, opts);
    });
    return tuples;
}

std::vector<SentimentTuple> filter_categories(std::vector<SentimentTuple> tuples,
                                              const CategoryWhitelist& whitelist) {
    for (const auto& t : tuples) {
        require_shape(t, TaskKind::Quadruplet);
    }
    std::erase_if(tuples, [&](const SentimentTuple& t) {
        return !whitelist.contains(*t.category);
    });
    return tuples;
}

CategoryWhitelist build_category_whitelist(const std::vector<ReviewInstance>& train) {
    CategoryWhitelist wl;
    for (const auto& inst : train) {
        if (!inst.gold) continue;
        for (const auto& t : *inst.gold) {
            if (t.category) {
                wl.labels.insert(upper_copy(trim_copy(*t.category)));
            }
        }
    }
    return wl;
}

PredictionRun validate_run(std::vector<SentimentTuple> tuples,
                           std::string_view review_text, TaskKind task,
                           const CategoryWhitelist* whitelist,
                           const ValidationOptions& opts) {
    for (auto& t : tuples) {
        require_shape(t, task);
        t = clamp_va(std::move(t));
    }
    tuples = filter_spans(std::move(tuples), review_text, opts);
    if (task == TaskKind::Quadruplet) {
        if (whitelist == nullptr) {
            throw ConfigError(
                "quadruplet validation requires a category whitelist");
        }
        tuples = filter_categories(std::move(tuples), *whitelist);
    }
    // Duplicate keys keep their first occurrence; later repeats are noise.
    std::set<CategoricalKey> seen;
    std::vector<SentimentTuple> unique;
    unique.reserve(tuples.size());
    for (auto& t : tuples) {
        if (seen.insert(tuple_key(t, task)).second) {
            unique.push_back(std::move(t));
        }
    }
    return PredictionRun{std::move(unique)};
}

void save_whitelist(const CategoryWhitelist& whitelist,
                    const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot open whitelist file for writing: " + path.string());
    }
    for (const auto& label : whitelist.labels) {
        out << label << '\n';
    }
}

CategoryWhitelist load_whitelist(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open whitelist file: " + path.string());
    }
    CategoryWhitelist wl;
    std::string line;
    while (std::getline(in, line)) {
        const std::string label = upper_copy(trim_copy(line));
        if (!label.empty()) wl.labels.insert(label);
    }
    return wl;
}

}  // namespace dimabsa
