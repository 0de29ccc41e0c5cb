#pragma once

#include <map>
#include <vector>

#include "dimabsa/core.hpp"

namespace dimabsa {

// Consensus over k stochastic runs for one instance.
struct ConsensusResult {
    // Surviving tuples, ordered by first appearance across runs (run
    // order, then position within the run).
    std::vector<SentimentTuple> tuples;
    // Vote count per categorical key, for every key seen in any run.
    std::map<CategoricalKey, int> support;
    int k = 0;
    int threshold = 0;
};

// Strict majority: more than half of k runs must agree. floor(k/2) + 1,
// so 1 for k=1, 3 for k=5, 6 for k=10, 8 for k=15.
int default_threshold(int k);

// Majority vote over categorical keys. A key voted for at most once per
// run (runs are deduplicated upstream, and repeats within a run are
// counted once here regardless). Keys reaching `threshold` survive; their
// VA is the arithmetic mean, at full precision, over every run that
// contains the key. The representative spans come from the key's first
// appearance. Raises DomainError when runs is empty or threshold < 1 or
// threshold > k.
ConsensusResult aggregate(const std::vector<PredictionRun>& runs, int threshold,
                          TaskKind task);

inline ConsensusResult aggregate(const std::vector<PredictionRun>& runs,
                                 TaskKind task) {
    return aggregate(runs, default_threshold(static_cast<int>(runs.size())), task);
}

}  // namespace dimabsa
