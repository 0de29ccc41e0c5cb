#include "dimabsa/consensus.hpp"

#include <algorithm>
#include <set>

#include "dimabsa/errors.hpp"

namespace dimabsa {

int default_threshold(int k) {
    if (k < 1) throw DomainError("k must be at least 1, got " + std::to_string(k));
    return k / 2 + 1;
}

ConsensusResult aggregate(const std::vector<PredictionRun>& runs, int threshold,
                          TaskKind task) {
    const int k = static_cast<int>(runs.size());
    if (k < 1) throw DomainError("aggregate needs at least one run");
    if (threshold < 1 || threshold > k) {
        throw DomainError("threshold " + std::to_string(threshold) +
                          " outside [1, " + std::to_string(k) + "]");
    }

    struct Tally {
        int votes = 0;
        double valence_sum = 0.0;
        double arousal_sum = 0.0;
        const SentimentTuple* first = nullptr;
        int first_order = 0;
    };
    std::map<CategoricalKey, Tally> tallies;
    int order = 0;

    for (const auto& run : runs) {
        std::set<CategoricalKey> seen_this_run;
        for (const auto& t : run.tuples) {
            CategoricalKey key = tuple_key(t, task);
            if (!seen_this_run.insert(key).second) continue;  // one vote per run
            Tally& tally = tallies[std::move(key)];
            if (tally.first == nullptr) {
                tally.first = &t;
                tally.first_order = order;
            }
            tally.votes += 1;
            tally.valence_sum += t.va.valence;
            tally.arousal_sum += t.va.arousal;
            ++order;
        }
    }

    ConsensusResult result;
    result.k = k;
    result.threshold = threshold;

    std::vector<std::pair<int, const Tally*>> winners;
    for (const auto& [key, tally] : tallies) {
        result.support.emplace(key, tally.votes);
        if (tally.votes >= threshold) {
            winners.emplace_back(tally.first_order, &tally);
        }
    }
    std::sort(winners.begin(), winners.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [ignored, tally] : winners) {
        SentimentTuple t = *tally->first;
        t.va.valence = tally->valence_sum / tally->votes;
        t.va.arousal = tally->arousal_sum / tally->votes;
        result.tuples.push_back(std::move(t));
    }
    return result;
}

}  // namespace dimabsa
