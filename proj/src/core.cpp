#include "dimabsa/core.hpp"

#include <algorithm>

#include "dimabsa/errors.hpp"
#include "dimabsa/util.hpp"

namespace dimabsa {

std::string to_string(TaskKind task) {
    switch (task) {
        case TaskKind::Triplet: return "dimaste";
        case TaskKind::Quadruplet: return "dimasqp";
    }
    throw ContractError("unknown TaskKind value");
}

TaskKind task_from_string(const std::string& name) {
    const std::string n = upper_copy(trim_copy(name));
    if (n == "DIMASTE" || n == "TRIPLET" || n == "ASTE") return TaskKind::Triplet;
    if (n == "DIMASQP" || n == "QUAD" || n == "QUADRUPLET" || n == "ASQP") {
        return TaskKind::Quadruplet;
    }
    throw ConfigError("unknown task name: '" + name + "' (expected dimaste or dimasqp)");
}

void require_shape(const SentimentTuple& t, TaskKind task) {
    if (task == TaskKind::Triplet && t.category.has_value()) {
        throw ContractError("triplet tuple must not carry a category (aspect '" +
                            t.aspect + "')");
    }
    if (task == TaskKind::Quadruplet && !t.category.has_value()) {
        throw ContractError("quadruplet tuple is missing its category (aspect '" +
                            t.aspect + "')");
    }
}

CategoricalKey tuple_key(const SentimentTuple& t, TaskKind task) {
    require_shape(t, task);
    CategoricalKey key;
    key.parts.push_back(trim_copy(t.aspect));
    if (task == TaskKind::Quadruplet) {
        key.parts.push_back(upper_copy(trim_copy(*t.category)));
    }
    key.parts.push_back(trim_copy(t.opinion));
    return key;
}

double va_sq_distance(const VAPair& p, const VAPair& g) {
    const double dv = p.valence - g.valence;
    const double da = p.arousal - g.arousal;
    return dv * dv + da * da;
}

}  // namespace dimabsa
