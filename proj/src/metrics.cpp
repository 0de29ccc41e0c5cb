#include "dimabsa/metrics.hpp"

#include <algorithm>
#include <limits>

#include "dimabsa/errors.hpp"

namespace dimabsa {

namespace {

// Indices of `tuples` grouped by categorical key, preserving input order
// within each group.
std::map<CategoricalKey, std::vector<std::size_t>> group_by_key(
    std::span<const SentimentTuple> tuples, TaskKind task) {
    std::map<CategoricalKey, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < tuples.size(); ++i) {
        groups[tuple_key(tuples[i], task)].push_back(i);
    }
    return groups;
}

// Exhaustive search over injective assignments of the smaller side into
// the larger, maximizing total ctp. Group sizes are capped by
// kExhaustiveLimit so the factorial blowup stays trivial.
void match_exhaustive(std::span<const SentimentTuple> pred,
                      std::span<const SentimentTuple> gold,
                      const std::vector<std::size_t>& pi,
                      const std::vector<std::size_t>& gi, TaskKind task,
                      MatchAssignment& out) {
    const std::size_t np = pi.size();
    const std::size_t ng = gi.size();
    std::vector<double> weight(np * ng);
    for (std::size_t a = 0; a < np; ++a) {
        for (std::size_t b = 0; b < ng; ++b) {
            weight[a * ng + b] = ctp(pred[pi[a]], gold[gi[b]], task);
        }
    }

    std::vector<int> best_pick;      // best_pick[a] = gold slot for pred slot a, -1 none
    double best_total = -1.0;
    std::vector<int> pick(np, -1);
    std::vector<bool> used(ng, false);
    const std::size_t depth_max = np;

    // Depth-first over pred slots; every pred is assigned when np <= ng,
    // otherwise exactly ng preds get a partner. First maximal assignment
    // found wins ties, which keeps the result deterministic.
    auto dfs = [&](auto&& self, std::size_t a, std::size_t assigned,
                   double total) -> void {
        if (a == depth_max) {
            const std::size_t want = std::min(np, ng);
            if (assigned == want && total > best_total) {
                best_total = total;
                best_pick.assign(pick.begin(), pick.end());
            }
            return;
        }
        const std::size_t remaining = depth_max - a - 1;
        for (std::size_t b = 0; b < ng; ++b) {
            if (used[b]) continue;
            used[b] = true;
            pick[a] = static_cast<int>(b);
            self(self, a + 1, assigned + 1, total + weight[a * ng + b]);
            used[b] = false;
            pick[a] = -1;
        }
        // Leaving this pred unmatched is only allowed when enough slots
        // remain to still pair min(np, ng) tuples.
        if (assigned + remaining >= std::min(np, ng)) {
            self(self, a + 1, assigned, total);
        }
    };
    dfs(dfs, 0, 0, 0.0);

    for (std::size_t a = 0; a < np; ++a) {
        const int b = best_pick.empty() ? -1 : best_pick[a];
        if (b >= 0) {
            out.pairs.push_back({pi[a], gi[static_cast<std::size_t>(b)],
                                 weight[a * ng + static_cast<std::size_t>(b)]});
        } else {
            out.unmatched_pred.push_back(pi[a]);
        }
    }
    std::vector<bool> gold_taken(ng, false);
    for (std::size_t a = 0; a < np; ++a) {
        if (!best_pick.empty() && best_pick[a] >= 0) {
            gold_taken[static_cast<std::size_t>(best_pick[a])] = true;
        }
    }
    for (std::size_t b = 0; b < ng; ++b) {
        if (!gold_taken[b]) out.unmatched_gold.push_back(gi[b]);
    }
}

// Greedy fallback for oversized groups: repeatedly pair the closest
// remaining prediction and gold in VA space. Ties break on the lower
// (pred, gold) index pair.
void match_greedy(std::span<const SentimentTuple> pred,
                  std::span<const SentimentTuple> gold,
                  const std::vector<std::size_t>& pi,
                  const std::vector<std::size_t>& gi, TaskKind task,
                  MatchAssignment& out) {
    const std::size_t np = pi.size();
    const std::size_t ng = gi.size();
    std::vector<bool> p_used(np, false), g_used(ng, false);
    const std::size_t rounds = std::min(np, ng);
    for (std::size_t r = 0; r < rounds; ++r) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t ba = np, bb = ng;
        for (std::size_t a = 0; a < np; ++a) {
            if (p_used[a]) continue;
            for (std::size_t b = 0; b < ng; ++b) {
                if (g_used[b]) continue;
                const double d = va_sq_distance(pred[pi[a]].va, gold[gi[b]].va);
                if (d < best) {
                    best = d;
                    ba = a;
                    bb = b;
                }
            }
        }
        p_used[ba] = true;
        g_used[bb] = true;
        out.pairs.push_back({pi[ba], gi[bb], ctp(pred[pi[ba]], gold[gi[bb]], task)});
    }
    for (std::size_t a = 0; a < np; ++a) {
        if (!p_used[a]) out.unmatched_pred.push_back(pi[a]);
    }
    for (std::size_t b = 0; b < ng; ++b) {
        if (!g_used[b]) out.unmatched_gold.push_back(gi[b]);
    }
}

}  // namespace

double ctp(const SentimentTuple& pred, const SentimentTuple& gold, TaskKind task) {
    if (tuple_key(pred, task) != tuple_key(gold, task)) {
        throw ContractError("ctp of tuples with different categorical keys");
    }
    return 1.0 - va_sq_distance(pred.va, gold.va) / kMaxSqDistance;
}

MatchAssignment match_instance(std::span<const SentimentTuple> pred,
                               std::span<const SentimentTuple> gold, TaskKind task) {
    MatchAssignment out;
    auto pred_groups = group_by_key(pred, task);
    auto gold_groups = group_by_key(gold, task);

    for (const auto& [key, pi] : pred_groups) {
        const auto git = gold_groups.find(key);
        if (git == gold_groups.end()) {
            out.unmatched_pred.insert(out.unmatched_pred.end(), pi.begin(), pi.end());
            continue;
        }
        const auto& gi = git->second;
        if (std::max(pi.size(), gi.size()) <= kExhaustiveLimit) {
            match_exhaustive(pred, gold, pi, gi, task, out);
        } else {
            match_greedy(pred, gold, pi, gi, task, out);
        }
    }
    for (const auto& [key, gi] : gold_groups) {
        if (pred_groups.find(key) == pred_groups.end()) {
            out.unmatched_gold.insert(out.unmatched_gold.end(), gi.begin(), gi.end());
        }
    }
    std::sort(out.pairs.begin(), out.pairs.end(),
              [](const MatchedPair& a, const MatchedPair& b) {
                  return a.pred_index < b.pred_index;
              });
    std::sort(out.unmatched_pred.begin(), out.unmatched_pred.end());
    std::sort(out.unmatched_gold.begin(), out.unmatched_gold.end());
    return out;
}

EvalReport evaluate_instances(
    const std::map<std::string, std::vector<SentimentTuple>>& pred,
    const std::map<std::string, std::vector<SentimentTuple>>& gold, TaskKind task) {
    std::string missing;
    for (const auto& [id, ignored] : pred) {
        if (gold.find(id) == gold.end()) missing += " pred-only:" + id;
    }
    for (const auto& [id, ignored] : gold) {
        if (pred.find(id) == pred.end()) missing += " gold-only:" + id;
    }
    if (!missing.empty()) {
        throw DataError("instance id mismatch between predictions and gold:" + missing);
    }

    EvalReport report;
    for (const auto& [id, gold_tuples] : gold) {
        const auto& pred_tuples = pred.at(id);
        InstanceEval inst;
        inst.id = id;
        inst.n_pred = pred_tuples.size();
        inst.n_gold = gold_tuples.size();
        inst.assignment = match_instance(pred_tuples, gold_tuples, task);
        for (const auto& pair : inst.assignment.pairs) {
            inst.sum_ctp += pair.ctp;
        }
        report.n_pred += inst.n_pred;
        report.n_gold += inst.n_gold;
        report.sum_ctp += inst.sum_ctp;
        report.instances.push_back(std::move(inst));
    }
    report.c_prec = report.n_pred > 0 ? report.sum_ctp / report.n_pred : 0.0;
    report.c_rec = report.n_gold > 0 ? report.sum_ctp / report.n_gold : 0.0;
    report.c_f1 = (report.c_prec + report.c_rec) > 0.0
                      ? 2.0 * report.c_prec * report.c_rec /
                            (report.c_prec + report.c_rec)
                      : 0.0;
    return report;
}

}  // namespace dimabsa
