#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "dimabsa/core.hpp"
#include "dimabsa/dataset.hpp"
#include "dimabsa/inference.hpp"
#include "dimabsa/metrics.hpp"
#include "dimabsa/stats/tests.hpp"

namespace dimabsa {

// One experiment grid: every (k, seed) cell of one task/language/domain
// slice, sharing a dataset, an endpoint and a response cache.
struct ExperimentConfig {
    TaskKind task = TaskKind::Triplet;
    std::string language = "eng";
    std::string domain = "restaurant";
    std::vector<int> ks = {1, 5, 10, 15};
    std::vector<int> seeds = {0, 1, 2, 3, 4};
    int threshold_override = 0;      // 0: strict majority of available runs
    std::uint64_t seed_stride = 1000;  // request seed = seed * stride + run
    bool strict = false;             // abort instead of dropping failed runs
    double alpha = 0.05;
    std::filesystem::path dataset_path;
    std::filesystem::path out_dir = "out";
    std::filesystem::path template_path;   // empty: built-in English template
    std::filesystem::path whitelist_path;  // empty: categories from the dataset gold
    EndpointConfig endpoint;               // cache_dir empty: {out_dir}/cache
    SamplingParams sampling;
};

// ConfigError on anything inconsistent: empty or duplicate k/seed lists,
// k < 1, alpha outside (0,1), a seed stride smaller than the largest k
// (which would alias request seeds across experiment seeds), a threshold
// override no k can satisfy, or a missing dataset path.
void validate_config(const ExperimentConfig& config);

// {out_dir}/{task}/{language}-{domain}
std::filesystem::path condition_dir(const ExperimentConfig& config);
// {out_dir}/{task}/{language}-{domain}/k{K}/seed{S}
std::filesystem::path cell_dir(const ExperimentConfig& config, int k, int seed);

// "baseline" for k = 1, otherwise "{k} views".
std::string condition_label(int k);

struct InferStats {
    long network_calls = 0;  // HTTP requests sent (0 on a fully warm cache)
    int failed_runs = 0;     // generations still failed after retries
    int cells = 0;
};

// Samples every cell (seeds outer, k ascending so each request cache
// entry is reused by every larger k) and persists generations.jsonl plus
// validated, contiguously renumbered runs.jsonl per cell.
InferStats cmd_infer(const ExperimentConfig& config, std::ostream& log);

// Majority-votes each cell's runs into predictions.jsonl and the
// support.json vote ledger. Instances whose available run count fell
// below k use a majority of what survived, with a logged warning.
void cmd_aggregate(const ExperimentConfig& config, std::ostream& log);

// Scores each cell's predictions against the dataset gold into
// eval.json and eval.txt.
void cmd_evaluate(const ExperimentConfig& config, std::ostream& log);

// Collects per-seed cF1 into the condition score table, runs normality /
// omnibus / pairwise testing, and writes scores.json, significance.json,
// significance.txt and the annotated condition summary table.
stats::SignificanceReport cmd_stats(const ExperimentConfig& config, std::ostream& log);

// The four stages in order. Statistics run only when the grid has at
// least two conditions and three seeds; otherwise they are skipped with
// a note.
InferStats cmd_run(const ExperimentConfig& config, std::ostream& log);

// Scores a user-supplied predictions/gold pair outside any grid and
// writes eval.json + eval.txt under out_dir.
EvalReport evaluate_files(const std::filesystem::path& predictions_path,
                          const std::filesystem::path& gold_path, TaskKind task,
                          const std::filesystem::path& out_dir, std::ostream& log);

// Per-condition mean scores as {cPrec, cRec, cF1} in [0, 1].
using ConditionMeans = std::array<double, 3>;

// Percent table in the shared-task reporting style: one row per
// condition, two-decimal percents, and significance symbols per row —
// '*' against the first condition, '†' against the second, '‡' against
// the third, repeated by level.
std::string render_condition_summary(const std::vector<std::string>& conditions,
                                     const std::vector<ConditionMeans>& means,
                                     const stats::SignificanceReport& report);

}  // namespace dimabsa
