#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "dimabsa/core.hpp"

namespace dimabsa {

// Continuous true-positive weight for a prediction-gold pair whose
// categorical keys already agree: 1 minus the squared VA distance as a
// fraction of the largest distance the scale allows. 1.0 for exact VA
// agreement, 0.0 for opposite corners of the scale.
// Raises ContractError when the keys differ.
double ctp(const SentimentTuple& pred, const SentimentTuple& gold, TaskKind task);

// One matched prediction-gold pair within an instance.
struct MatchedPair {
    std::size_t pred_index = 0;
    std::size_t gold_index = 0;
    double ctp = 0.0;
};

// One-to-one assignment between an instance's predictions and golds.
// Pairs only form within equal categorical keys.
struct MatchAssignment {
    std::vector<MatchedPair> pairs;
    std::vector<std::size_t> unmatched_pred;
    std::vector<std::size_t> unmatched_gold;
};

// Builds the assignment for one instance. Within each categorical key,
// predictions and golds are paired one-to-one so as to maximize the total
// ctp: exhaustively when the key group has at most kExhaustiveLimit
// members on its larger side, greedily by nearest VA otherwise.
// Deterministic for fixed input order.
MatchAssignment match_instance(std::span<const SentimentTuple> pred,
                               std::span<const SentimentTuple> gold, TaskKind task);

inline constexpr std::size_t kExhaustiveLimit = 6;

struct InstanceEval {
    std::string id;
    std::size_t n_pred = 0;
    std::size_t n_gold = 0;
    double sum_ctp = 0.0;
    MatchAssignment assignment;
};

// Corpus-level continuous scores. Sums run over all instances:
//   precision = sum_ctp / n_pred   (0 when there are no predictions)
//   recall    = sum_ctp / n_gold   (0 when there are no golds)
//   f1        = harmonic mean      (0 when both are 0)
struct EvalReport {
    double c_prec = 0.0;
    double c_rec = 0.0;
    double c_f1 = 0.0;
    std::size_t n_pred = 0;
    std::size_t n_gold = 0;
    double sum_ctp = 0.0;
    std::vector<InstanceEval> instances;  // ordered by id
};

// Scores predictions against golds. The two maps must cover the same
// instance ids; raises DataError naming the offenders otherwise.
EvalReport evaluate_instances(
    const std::map<std::string, std::vector<SentimentTuple>>& pred,
    const std::map<std::string, std::vector<SentimentTuple>>& gold, TaskKind task);

}  // namespace dimabsa
