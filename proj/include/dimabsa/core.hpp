#pragma once

#include <compare>
#include <optional>
#include <string>
#include <vector>

namespace dimabsa {

// Which tuple shape an experiment works with. Triplets carry
// (aspect, opinion, valence-arousal); quadruplets add a category label.
enum class TaskKind {
    Triplet,
    Quadruplet,
};

std::string to_string(TaskKind task);

// Accepts "dimaste" / "triplet" and "dimasqp" / "quad" / "quadruplet",
// case-insensitively. Anything else raises ConfigError.
TaskKind task_from_string(const std::string& name);

// Valence-arousal coordinates on the 1..9 scale. Stored at full double
// precision; rounding to two decimals happens only at serialization.
struct VAPair {
    double valence = 0.0;
    double arousal = 0.0;

    auto operator<=>(const VAPair&) const = default;
};

inline constexpr double kVAMin = 1.0;
inline constexpr double kVAMax = 9.0;

// Largest possible squared VA distance on the 1..9 grid: 8^2 + 8^2.
inline constexpr double kMaxSqDistance = 128.0;

// One extracted sentiment tuple. `category` is engaged exactly when the
// owning task is Quadruplet.
struct SentimentTuple {
    std::string aspect;
    std::optional<std::string> category;
    std::string opinion;
    VAPair va;

    auto operator<=>(const SentimentTuple&) const = default;
};

// One review sentence, optionally with gold annotations.
struct ReviewInstance {
    std::string id;
    std::string text;
    std::optional<std::vector<SentimentTuple>> gold;
};

// The tuples that survived validation for one stochastic generation.
// `run` is the original sampling index; it stays stable even when failed
// generations are dropped, so stored runs remain traceable.
struct PredictionRun {
    std::vector<SentimentTuple> tuples;
    int run = 0;
};

// Identity of a tuple for voting and matching: the categorical fields
// only, never the VA values. Aspect and opinion spans are compared
// case-sensitively after trimming; category labels case-insensitively.
struct CategoricalKey {
    std::vector<std::string> parts;

    auto operator<=>(const CategoricalKey&) const = default;
};

// Key of `t` under `task`. Raises ContractError when the tuple shape does
// not match the task (category present for Triplet or absent for
// Quadruplet).
CategoricalKey tuple_key(const SentimentTuple& t, TaskKind task);

// Squared Euclidean distance between two VA points. Symmetric, zero iff
// equal, bounded by kMaxSqDistance on the valid scale.
double va_sq_distance(const VAPair& p, const VAPair& g);

// Raises ContractError unless the tuple's shape matches the task.
void require_shape(const SentimentTuple& t, TaskKind task);

}  // namespace dimabsa
