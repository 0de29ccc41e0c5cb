#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "dimabsa/consensus.hpp"
#include "dimabsa/core.hpp"
#include "dimabsa/metrics.hpp"
#include "dimabsa/stats/tests.hpp"

namespace dimabsa {

struct Dataset {
    TaskKind task = TaskKind::Triplet;
    std::vector<ReviewInstance> instances;  // file order
};

// Reads a JSONL dataset, one review per line:
//   {"ID": "...", "Text": "...", "Tuples": [...]}
// "ID" may be a string or an integer; "Tuples" is optional (unannotated
// data). Each gold tuple carries "Aspect", "Opinion", a "Category" for
// the quadruplet task only, and "VA" either as a packed "6.92#7.13"
// string or as an object {"Valence": .., "Arousal": ..}. Blank lines are
// skipped. Any malformed line raises DataError with its line number;
// non-fatal observations are appended to `warnings` when given.
Dataset load_dataset(const std::filesystem::path& path, TaskKind task,
                     std::vector<std::string>* warnings = nullptr);

void save_dataset(const Dataset& dataset, const std::filesystem::path& path);

// Gold tuples keyed by instance id. DataError when an instance has no
// gold annotation (evaluation needs every instance labelled).
std::map<std::string, std::vector<SentimentTuple>> gold_by_id(const Dataset& dataset);

// One raw model generation. `text` is the unparsed completion; when
// `ok` is false the sampling attempt failed and `error` says why.
struct StoredGeneration {
    int run = 0;
    std::string text;
    bool ok = true;
    std::string error;
};

// Keyed by instance id; runs in ascending run order.
using GenerationsFile = std::map<std::string, std::vector<StoredGeneration>>;

// JSONL {"ID","Run","Text","OK"[,"Error"]}, sorted by id then run, so a
// rerun over identical inputs reproduces the file byte for byte.
void save_generations(const GenerationsFile& generations, const std::filesystem::path& path);
GenerationsFile load_generations(const std::filesystem::path& path);

// Validated per-run tuples, JSONL {"ID","Run","Tuples"}. Each instance's
// run indices must be exactly 0..m-1 (failed runs are renumbered away
// before saving); a gap on load means lost lines and raises DataError.
using RunsFile = std::map<std::string, std::vector<PredictionRun>>;

void save_runs(const RunsFile& runs, TaskKind task, const std::filesystem::path& path);
RunsFile load_runs(const std::filesystem::path& path, TaskKind task);

// Final consensus predictions, JSONL {"ID","Tuples"}.
using PredictionsFile = std::map<std::string, std::vector<SentimentTuple>>;

void save_predictions(const PredictionsFile& predictions, TaskKind task,
                      const std::filesystem::path& path);
PredictionsFile load_predictions(const std::filesystem::path& path, TaskKind task);

// Vote ledger per instance: every categorical key seen in any run, its
// vote count, and whether it met the threshold. One JSON object.
void save_support(const std::map<std::string, ConsensusResult>& support,
                  const std::filesystem::path& path);

// Full evaluation report as JSON (corpus scores, per-instance detail,
// tuple-level matching) plus a small plain-text rendering.
void save_eval_report(const EvalReport& report, const std::filesystem::path& json_path);
std::string render_eval_table(const EvalReport& report);

// Reads back only the corpus-level fields of a stored report; the
// per-instance detail is left empty.
EvalReport load_eval_report_summary(const std::filesystem::path& json_path);

void save_significance_report(const stats::SignificanceReport& report,
                              const std::filesystem::path& json_path);
std::string render_significance_table(const stats::SignificanceReport& report);

}  // namespace dimabsa
