#include "dimabsa/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <utility>

#include <json.hpp>

#include "dimabsa/errors.hpp"
#include "dimabsa/parser.hpp"
#include "dimabsa/util.hpp"

namespace dimabsa {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// Splits on '\n', keeping 1-based line numbers for error reporting.
// Blank (whitespace-only) lines are skipped.
std::vector<std::pair<int, std::string>> jsonl_lines(const std::string& text) {
    std::vector<std::pair<int, std::string>> out;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        const auto end = (nl == std::string::npos) ? text.size() : nl;
        ++line_no;
        std::string line = text.substr(pos, end - pos);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!trim_copy(line).empty()) out.emplace_back(line_no, std::move(line));
        if (nl == std::string::npos) break;
        pos = nl + 1;
    }
    return out;
}

json parse_line(const std::string& line, int line_no) {
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw DataError("invalid JSON", line_no);
    if (!j.is_object()) throw DataError("expected a JSON object", line_no);
    return j;
}

std::string get_id(const json& j, int line_no) {
    if (!j.contains("ID")) throw DataError("missing \"ID\"", line_no);
    const auto& v = j.at("ID");
    if (v.is_string()) {
        auto id = v.get<std::string>();
        if (trim_copy(id).empty()) throw DataError("empty \"ID\"", line_no);
        return id;
    }
    if (v.is_number_integer() || v.is_number_unsigned())
        return std::to_string(v.get<long long>());
    throw DataError("\"ID\" must be a string or integer", line_no);
}

std::string get_string(const json& j, const char* key, int line_no) {
    if (!j.contains(key))
        throw DataError(std::string("missing \"") + key + "\"", line_no);
    const auto& v = j.at(key);
    if (!v.is_string())
        throw DataError(std::string("\"") + key + "\" must be a string", line_no);
    return v.get<std::string>();
}

int get_run_index(const json& j, int line_no) {
    if (!j.contains("Run")) throw DataError("missing \"Run\"", line_no);
    const auto& v = j.at("Run");
    if (!v.is_number_integer() && !v.is_number_unsigned())
        throw DataError("\"Run\" must be an integer", line_no);
    const auto run = v.get<long long>();
    if (run < 0 || run > 1'000'000) throw DataError("\"Run\" out of range", line_no);
    return static_cast<int>(run);
}

double gold_va_component(const json& v, const char* what, int line_no) {
    double value = 0.0;
    if (v.is_number()) {
        value = v.get<double>();
    } else if (v.is_string()) {
        const auto parsed = parse_decimal(v.get<std::string>());
        if (!parsed) throw DataError(std::string("unparsable ") + what, line_no);
        value = *parsed;
    } else {
        throw DataError(std::string(what) + " must be a number or numeric string", line_no);
    }
    if (!std::isfinite(value) || value < kVAMin || value > kVAMax)
        throw DataError(std::string(what) + " outside the 1..9 scale", line_no);
    return value;
}

// Gold VA arrives either packed ("6.92#7.13") or as an object with
// explicit Valence / Arousal members.
VAPair gold_va(const json& tuple, int line_no) {
    if (!tuple.contains("VA")) {
        if (tuple.contains("Valence") && tuple.contains("Arousal"))
            return {gold_va_component(tuple.at("Valence"), "Valence", line_no),
                    gold_va_component(tuple.at("Arousal"), "Arousal", line_no)};
        throw DataError("missing \"VA\"", line_no);
    }
    const auto& va = tuple.at("VA");
    if (va.is_object()) {
        if (!va.contains("Valence") || !va.contains("Arousal"))
            throw DataError("\"VA\" object needs Valence and Arousal", line_no);
        return {gold_va_component(va.at("Valence"), "Valence", line_no),
                gold_va_component(va.at("Arousal"), "Arousal", line_no)};
    }
    if (!va.is_string()) throw DataError("\"VA\" must be a string or object", line_no);
    const auto packed = va.get<std::string>();
    const auto hash = packed.find('#');
    if (hash == std::string::npos || packed.find('#', hash + 1) != std::string::npos)
        throw DataError("\"VA\" must look like \"6.92#7.13\"", line_no);
    const auto v = parse_decimal(packed.substr(0, hash));
    const auto a = parse_decimal(packed.substr(hash + 1));
    if (!v || !a) throw DataError("unparsable \"VA\" value", line_no);
    VAPair out{*v, *a};
    if (out.valence < kVAMin || out.valence > kVAMax || out.arousal < kVAMin ||
        out.arousal > kVAMax)
        throw DataError("\"VA\" outside the 1..9 scale", line_no);
    return out;
}

SentimentTuple gold_tuple(const json& t, TaskKind task, int line_no) {
    if (!t.is_object()) throw DataError("gold tuple must be an object", line_no);
    SentimentTuple tuple;
    tuple.aspect = trim_copy(get_string(t, "Aspect", line_no));
    tuple.opinion = trim_copy(get_string(t, "Opinion", line_no));
    if (tuple.aspect.empty()) throw DataError("empty \"Aspect\"", line_no);
    if (tuple.opinion.empty()) throw DataError("empty \"Opinion\"", line_no);
    if (task == TaskKind::Quadruplet) {
        auto category = trim_copy(get_string(t, "Category", line_no));
        if (category.empty()) throw DataError("empty \"Category\"", line_no);
        tuple.category = std::move(category);
    } else if (t.contains("Category")) {
        // A category on triplet-task gold almost always means the wrong
        // task was selected; fail loudly instead of dropping data.
        throw DataError("gold tuple has \"Category\" but the task is triplets", line_no);
    }
    tuple.va = gold_va(t, line_no);
    return tuple;
}

std::string pack_va(const VAPair& va) {
    return format_fixed2(va.valence) + "#" + format_fixed2(va.arousal);
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& path, TaskKind task,
                     std::vector<std::string>* warnings) {
    Dataset dataset;
    dataset.task = task;
    const auto text = read_file(path);
    std::set<std::string> seen;
    for (const auto& [line_no, line] : jsonl_lines(text)) {
        const json j = parse_line(line, line_no);
        ReviewInstance instance;
        instance.id = get_id(j, line_no);
        if (!seen.insert(instance.id).second)
            throw DataError("duplicate ID \"" + instance.id + "\"", line_no);
        instance.text = utf8_sanitize(get_string(j, "Text", line_no));
        if (j.contains("Tuples")) {
            const auto& tuples = j.at("Tuples");
            if (!tuples.is_array())
                throw DataError("\"Tuples\" must be an array", line_no);
            instance.gold.emplace();
            for (const auto& t : tuples)
                instance.gold->push_back(gold_tuple(t, task, line_no));
        }
        dataset.instances.push_back(std::move(instance));
    }
    if (dataset.instances.empty() && warnings)
        warnings->push_back("dataset " + path.string() + " has no instances");
    return dataset;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
    std::string out;
    for (const auto& instance : dataset.instances) {
        ordered_json row;
        row["ID"] = instance.id;
        row["Text"] = instance.text;
        if (instance.gold) {
            ordered_json tuples = ordered_json::array();
            for (const auto& t : *instance.gold) {
                ordered_json obj;
                obj["Aspect"] = t.aspect;
                if (dataset.task == TaskKind::Quadruplet)
                    obj["Category"] = t.category.value_or("");
                obj["Opinion"] = t.opinion;
                obj["VA"] = pack_va(t.va);
                tuples.push_back(std::move(obj));
            }
            row["Tuples"] = std::move(tuples);
        }
        out += row.dump();
        out += '\n';
    }
    write_file_atomic(path, out);
}

std::map<std::string, std::vector<SentimentTuple>> gold_by_id(const Dataset& dataset) {
    std::map<std::string, std::vector<SentimentTuple>> out;
    for (const auto& instance : dataset.instances) {
        if (!instance.gold)
            throw DataError("instance \"" + instance.id + "\" has no gold tuples");
        out[instance.id] = *instance.gold;
    }
    return out;
}

void save_generations(const GenerationsFile& generations, const std::filesystem::path& path) {
    std::string out;
    for (const auto& [id, runs] : generations) {
        auto sorted = runs;
        std::sort(sorted.begin(), sorted.end(),
                  [](const auto& a, const auto& b) { return a.run < b.run; });
        for (const auto& gen : sorted) {
            ordered_json row;
            row["ID"] = id;
            row["Run"] = gen.run;
            row["Text"] = gen.text;
            row["OK"] = gen.ok;
            if (!gen.ok) row["Error"] = gen.error;
            out += row.dump();
            out += '\n';
        }
    }
    write_file_atomic(path, out);
}

GenerationsFile load_generations(const std::filesystem::path& path) {
    GenerationsFile out;
    std::set<std::pair<std::string, int>> seen;
    for (const auto& [line_no, line] : jsonl_lines(read_file(path))) {
        const json j = parse_line(line, line_no);
        const auto id = get_id(j, line_no);
        StoredGeneration gen;
        gen.run = get_run_index(j, line_no);
        if (!seen.insert({id, gen.run}).second)
            throw DataError("duplicate generation for ID \"" + id + "\" run " +
                                std::to_string(gen.run),
                            line_no);
        gen.text = get_string(j, "Text", line_no);
        if (j.contains("OK")) {
            if (!j.at("OK").is_boolean())
                throw DataError("\"OK\" must be a boolean", line_no);
            gen.ok = j.at("OK").get<bool>();
        }
        if (!gen.ok && j.contains("Error")) gen.error = get_string(j, "Error", line_no);
        out[id].push_back(std::move(gen));
    }
    for (auto& [id, runs] : out)
        std::sort(runs.begin(), runs.end(),
                  [](const auto& a, const auto& b) { return a.run < b.run; });
    return out;
}

void save_runs(const RunsFile& runs, TaskKind task, const std::filesystem::path& path) {
    std::string out;
    for (const auto& [id, instance_runs] : runs) {
        auto sorted = instance_runs;
        std::sort(sorted.begin(), sorted.end(),
                  [](const auto& a, const auto& b) { return a.run < b.run; });
        for (const auto& run : sorted) {
            ordered_json row;
            row["ID"] = id;
            row["Run"] = run.run;
            row["Tuples"] = tuples_to_json(run.tuples, task);
            out += row.dump();
            out += '\n';
        }
    }
    write_file_atomic(path, out);
}

RunsFile load_runs(const std::filesystem::path& path, TaskKind task) {
    RunsFile out;
    std::set<std::pair<std::string, int>> seen;
    for (const auto& [line_no, line] : jsonl_lines(read_file(path))) {
        const json j = parse_line(line, line_no);
        const auto id = get_id(j, line_no);
        PredictionRun run;
        run.run = get_run_index(j, line_no);
        if (!seen.insert({id, run.run}).second)
            throw DataError("duplicate run for ID \"" + id + "\" run " +
                                std::to_string(run.run),
                            line_no);
        if (!j.contains("Tuples")) throw DataError("missing \"Tuples\"", line_no);
        try {
            run.tuples = tuples_from_json(j.at("Tuples"), task);
        } catch (const DataError& e) {
            throw DataError(std::string("bad \"Tuples\": ") + e.what(), line_no);
        }
        out[id].push_back(std::move(run));
    }
    for (auto& [id, instance_runs] : out) {
        std::sort(instance_runs.begin(), instance_runs.end(),
                  [](const auto& a, const auto& b) { return a.run < b.run; });
        // Stored runs are renumbered contiguously when failures are
        // dropped, so a gap means the file lost lines.
        for (std::size_t i = 0; i < instance_runs.size(); ++i) {
            if (instance_runs[i].run != static_cast<int>(i))
                throw DataError("run index gap for ID \"" + id + "\": expected run " +
                                std::to_string(i) + ", found run " +
                                std::to_string(instance_runs[i].run));
        }
    }
    return out;
}

void save_predictions(const PredictionsFile& predictions, TaskKind task,
                      const std::filesystem::path& path) {
    std::string out;
    for (const auto& [id, tuples] : predictions) {
        ordered_json row;
        row["ID"] = id;
        row["Tuples"] = tuples_to_json(tuples, task);
        out += row.dump();
        out += '\n';
    }
    write_file_atomic(path, out);
}

PredictionsFile load_predictions(const std::filesystem::path& path, TaskKind task) {
    PredictionsFile out;
    for (const auto& [line_no, line] : jsonl_lines(read_file(path))) {
        const json j = parse_line(line, line_no);
        auto id = get_id(j, line_no);
        if (out.count(id)) throw DataError("duplicate ID \"" + id + "\"", line_no);
        if (!j.contains("Tuples")) throw DataError("missing \"Tuples\"", line_no);
        try {
            out[std::move(id)] = tuples_from_json(j.at("Tuples"), task);
        } catch (const DataError& e) {
            throw DataError(std::string("bad \"Tuples\": ") + e.what(), line_no);
        }
    }
    return out;
}

void save_support(const std::map<std::string, ConsensusResult>& support,
                  const std::filesystem::path& path) {
    ordered_json root;
    for (const auto& [id, result] : support) {
        ordered_json entry;
        entry["k"] = result.k;
        entry["threshold"] = result.threshold;
        ordered_json votes = ordered_json::array();
        for (const auto& [key, count] : result.support) {
            ordered_json vote;
            vote["key"] = key.parts;
            vote["votes"] = count;
            vote["kept"] = count >= result.threshold;
            votes.push_back(std::move(vote));
        }
        entry["votes"] = std::move(votes);
        root[id] = std::move(entry);
    }
    write_file_atomic(path, root.dump(2) + "\n");
}

void save_eval_report(const EvalReport& report, const std::filesystem::path& json_path) {
    ordered_json root;
    root["n_instances"] = report.instances.size();
    root["n_pred"] = report.n_pred;
    root["n_gold"] = report.n_gold;
    root["sum_ctp"] = report.sum_ctp;
    root["c_prec"] = report.c_prec;
    root["c_rec"] = report.c_rec;
    root["c_f1"] = report.c_f1;
    ordered_json percent;
    percent["c_prec"] = format_fixed2(100.0 * report.c_prec);
    percent["c_rec"] = format_fixed2(100.0 * report.c_rec);
    percent["c_f1"] = format_fixed2(100.0 * report.c_f1);
    root["percent"] = std::move(percent);
    ordered_json instances = ordered_json::array();
    for (const auto& inst : report.instances) {
        ordered_json entry;
        entry["id"] = inst.id;
        entry["n_pred"] = inst.n_pred;
        entry["n_gold"] = inst.n_gold;
        entry["sum_ctp"] = inst.sum_ctp;
        ordered_json pairs = ordered_json::array();
        for (const auto& pair : inst.assignment.pairs) {
            ordered_json p;
            p["pred"] = pair.pred_index;
            p["gold"] = pair.gold_index;
            p["ctp"] = pair.ctp;
            pairs.push_back(std::move(p));
        }
        entry["pairs"] = std::move(pairs);
        entry["unmatched_pred"] = inst.assignment.unmatched_pred;
        entry["unmatched_gold"] = inst.assignment.unmatched_gold;
        instances.push_back(std::move(entry));
    }
    root["instances"] = std::move(instances);
    write_file_atomic(json_path, root.dump(2) + "\n");
}

EvalReport load_eval_report_summary(const std::filesystem::path& json_path) {
    json root = json::parse(read_file(json_path), nullptr, false);
    if (root.is_discarded() || !root.is_object())
        throw DataError("not a JSON report: " + json_path.string());
    EvalReport report;
    try {
        report.n_pred = root.at("n_pred").get<std::size_t>();
        report.n_gold = root.at("n_gold").get<std::size_t>();
        report.sum_ctp = root.at("sum_ctp").get<double>();
        report.c_prec = root.at("c_prec").get<double>();
        report.c_rec = root.at("c_rec").get<double>();
        report.c_f1 = root.at("c_f1").get<double>();
    } catch (const json::exception& e) {
        throw DataError("malformed report " + json_path.string() + ": " + e.what());
    }
    return report;
}

std::string render_eval_table(const EvalReport& report) {
    char buf[128];
    std::string out = "corpus evaluation\n";
    const auto row_count = [&](const char* label, std::size_t value) {
        std::snprintf(buf, sizeof(buf), "  %-10s %zu\n", label, value);
        out += buf;
    };
    const bool empty = report.n_pred == 0 && report.n_gold == 0;
    const auto row_score = [&](const char* label, double value) {
        if (empty) {
            std::snprintf(buf, sizeof(buf), "  %-10s n/a\n", label);
        } else {
            std::snprintf(buf, sizeof(buf), "  %-10s %.6f  = %s%%\n", label, value,
                          format_fixed2(100.0 * value).c_str());
        }
        out += buf;
    };
    row_count("instances", report.instances.size());
    row_count("n_pred", report.n_pred);
    row_count("n_gold", report.n_gold);
    std::snprintf(buf, sizeof(buf), "  %-10s %.6f\n", "sum cTP", report.sum_ctp);
    out += buf;
    row_score("cPrec", report.c_prec);
    row_score("cRec", report.c_rec);
    row_score("cF1", report.c_f1);
    return out;
}

namespace {

// Short symbol for a test's statistic in the text rendering.
const char* statistic_symbol(const std::string& test) {
    if (test == "t") return "t";
    if (test == "mann-whitney") return "U";
    if (test == "anova") return "F";
    if (test == "kruskal-wallis") return "H";
    return "s";
}

}  // namespace

void save_significance_report(const stats::SignificanceReport& report,
                              const std::filesystem::path& json_path) {
    ordered_json root;
    root["alpha"] = report.alpha;
    root["conditions"] = report.conditions;
    ordered_json normality = ordered_json::array();
    for (const auto& entry : report.normality) {
        ordered_json row;
        row["condition"] = entry.condition;
        row["W"] = entry.w;
        row["p"] = entry.p;
        row["normal"] = entry.normal;
        row["degenerate"] = entry.degenerate;
        normality.push_back(std::move(row));
    }
    root["normality"] = std::move(normality);
    root["all_normal"] = report.all_normal;
    ordered_json omnibus;
    omnibus["test"] = report.omnibus_test;
    omnibus["statistic"] = report.omnibus_statistic;
    omnibus["p"] = report.omnibus_p;
    omnibus["pairwise_done"] = report.pairwise_done;
    root["omnibus"] = std::move(omnibus);
    ordered_json pairwise = ordered_json::array();
    for (const auto& pair : report.pairwise) {
        ordered_json row;
        row["a"] = report.conditions.at(pair.first);
        row["b"] = report.conditions.at(pair.second);
        row["test"] = pair.test;
        row["statistic"] = pair.statistic;
        row["p"] = pair.p_raw;
        row["p_holm"] = pair.p_adjusted;
        row["level"] = pair.level;
        row["stars"] = std::string(static_cast<std::size_t>(pair.level), '*');
        pairwise.push_back(std::move(row));
    }
    root["pairwise"] = std::move(pairwise);
    write_file_atomic(json_path, root.dump(2) + "\n");
}

std::string render_significance_table(const stats::SignificanceReport& report) {
    char buf[256];
    std::string out;
    std::snprintf(buf, sizeof(buf), "significance report (alpha = %g)\n", report.alpha);
    out += buf;

    std::size_t name_width = 9;
    for (const auto& c : report.conditions) name_width = std::max(name_width, c.size());
    std::size_t pair_width = 12;
    for (const auto& pair : report.pairwise) {
        const auto label = report.conditions.at(pair.first) + " vs " +
                           report.conditions.at(pair.second);
        pair_width = std::max(pair_width, label.size());
    }

    out += "\nnormality (Shapiro-Wilk, normal iff p >= alpha)\n";
    for (const auto& entry : report.normality) {
        if (entry.degenerate) {
            std::snprintf(buf, sizeof(buf), "  %-*s %-26s  non-normal\n",
                          static_cast<int>(name_width), entry.condition.c_str(),
                          "constant sample");
        } else {
            std::snprintf(buf, sizeof(buf), "  %-*s W = %.6f  p = %.6f  %s\n",
                          static_cast<int>(name_width), entry.condition.c_str(), entry.w,
                          entry.p, entry.normal ? "normal" : "non-normal");
        }
        out += buf;
    }

    std::snprintf(buf, sizeof(buf), "\nomnibus %s: %s = %.6f, p = %.6f -> %s\n",
                  report.omnibus_test.c_str(), statistic_symbol(report.omnibus_test),
                  report.omnibus_statistic, report.omnibus_p,
                  report.pairwise_done ? "pairwise comparisons follow"
                                       : "stop, conditions are not distinguishable");
    out += buf;

    if (!report.pairwise_done) {
        out += "\npairwise: n/a (omnibus gate closed)\n";
        return out;
    }

    out += "\npairwise (Holm-adjusted as one family)\n";
    for (const auto& pair : report.pairwise) {
        const auto label = report.conditions.at(pair.first) + " vs " +
                           report.conditions.at(pair.second);
        const std::string stars(static_cast<std::size_t>(pair.level), '*');
        std::snprintf(buf, sizeof(buf),
                      "  %-*s %-12s %s = %11.6f  p = %.6f  adj = %.6f  %s\n",
                      static_cast<int>(pair_width), label.c_str(), pair.test.c_str(),
                      statistic_symbol(pair.test), pair.statistic, pair.p_raw,
                      pair.p_adjusted, stars.c_str());
        out += buf;
    }
    return out;
}

}  // namespace dimabsa
