#include "dimabsa/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <ostream>
#include <set>
#include <utility>

#include <json.hpp>

#include "dimabsa/consensus.hpp"
#include "dimabsa/errors.hpp"
#include "dimabsa/parser.hpp"
#include "dimabsa/util.hpp"
#include "dimabsa/validator.hpp"

namespace dimabsa {

using nlohmann::ordered_json;

namespace {

std::vector<int> sorted_unique(std::vector<int> values) {
    std::sort(values.begin(), values.end());
    return values;
}

std::filesystem::path resolved_cache_dir(const ExperimentConfig& config) {
    return config.endpoint.cache_dir.empty() ? config.out_dir / "cache"
                                             : config.endpoint.cache_dir;
}

Dataset load_config_dataset(const ExperimentConfig& config, std::ostream& log) {
    std::vector<std::string> warnings;
    auto dataset = load_dataset(config.dataset_path, config.task, &warnings);
    for (const auto& w : warnings) log << "warning: " << w << "\n";
    return dataset;
}

std::string load_template(const ExperimentConfig& config) {
    if (config.template_path.empty()) return default_template(config.task);
    return read_file(config.template_path);
}

// The category whitelist for quadruplet validation, from the explicit
// file when given, otherwise from the dataset's own gold annotations.
CategoryWhitelist resolve_whitelist(const ExperimentConfig& config,
                                    const Dataset& dataset) {
    CategoryWhitelist whitelist;
    if (!config.whitelist_path.empty()) {
        whitelist = load_whitelist(config.whitelist_path);
    } else {
        whitelist = build_category_whitelist(dataset.instances);
    }
    if (whitelist.labels.empty())
        throw ConfigError(
            "quadruplet validation needs category labels: annotate the dataset "
            "or pass a whitelist file");
    return whitelist;
}

std::string cell_name(int k, int seed) {
    return "k" + std::to_string(k) + "/seed" + std::to_string(seed);
}

}  // namespace

void validate_config(const ExperimentConfig& config) {
    if (config.ks.empty()) throw ConfigError("no k values configured");
    for (const int k : config.ks)
        if (k < 1) throw ConfigError("k must be >= 1, got " + std::to_string(k));
    if (std::set<int>(config.ks.begin(), config.ks.end()).size() != config.ks.size())
        throw ConfigError("duplicate k values");
    if (config.seeds.empty()) throw ConfigError("no seeds configured");
    if (std::set<int>(config.seeds.begin(), config.seeds.end()).size() !=
        config.seeds.size())
        throw ConfigError("duplicate seeds");
    for (const int seed : config.seeds)
        if (seed < 0) throw ConfigError("seeds must be >= 0");
    const int k_max = *std::max_element(config.ks.begin(), config.ks.end());
    if (config.seed_stride < static_cast<std::uint64_t>(k_max))
        throw ConfigError("seed_stride " + std::to_string(config.seed_stride) +
                          " is smaller than the largest k (" + std::to_string(k_max) +
                          "); request seeds would collide across experiment seeds");
    if (config.threshold_override < 0)
        throw ConfigError("threshold override must be >= 0");
    const int k_min = *std::min_element(config.ks.begin(), config.ks.end());
    if (config.threshold_override > k_min)
        throw ConfigError("threshold override " +
                          std::to_string(config.threshold_override) +
                          " exceeds the smallest k (" + std::to_string(k_min) + ")");
    if (!(config.alpha > 0.0 && config.alpha < 1.0))
        throw ConfigError("alpha must be inside (0, 1)");
    if (config.dataset_path.empty()) throw ConfigError("no dataset path configured");
    if (config.language.empty() || config.domain.empty())
        throw ConfigError("language and domain tags must be non-empty");
}

std::filesystem::path condition_dir(const ExperimentConfig& config) {
    return config.out_dir / to_string(config.task) /
           (config.language + "-" + config.domain);
}

std::filesystem::path cell_dir(const ExperimentConfig& config, int k, int seed) {
    return condition_dir(config) / ("k" + std::to_string(k)) /
           ("seed" + std::to_string(seed));
}

std::string condition_label(int k) {
    return k == 1 ? "baseline" : std::to_string(k) + " views";
}

InferStats cmd_infer(const ExperimentConfig& config, std::ostream& log) {
    validate_config(config);
    const auto dataset = load_config_dataset(config, log);
    const auto tmpl = load_template(config);

    CategoryWhitelist whitelist;
    const CategoryWhitelist* whitelist_ptr = nullptr;
    if (config.task == TaskKind::Quadruplet) {
        whitelist = resolve_whitelist(config, dataset);
        whitelist_ptr = &whitelist;
    }

    std::vector<std::pair<std::string, std::string>> prompts;
    std::map<std::string, const ReviewInstance*> by_id;
    prompts.reserve(dataset.instances.size());
    for (const auto& instance : dataset.instances) {
        prompts.emplace_back(instance.id, build_prompt(tmpl, instance, config.task));
        by_id[instance.id] = &instance;
    }

    auto endpoint = config.endpoint;
    endpoint.cache_dir = resolved_cache_dir(config);
    InferenceClient client(endpoint);

    InferStats stats;
    // Seeds outer, k ascending: runs 0..k-1 of a larger k share request
    // seeds with every smaller k, so each completion is fetched once per
    // experiment seed and replayed from the cache afterwards.
    for (const int seed : sorted_unique(config.seeds)) {
        for (const int k : sorted_unique(config.ks)) {
            const auto dir = cell_dir(config, k, seed);
            const std::uint64_t base_seed =
                static_cast<std::uint64_t>(seed) * config.seed_stride;

            std::map<std::string, std::vector<Generation>> batch;
            try {
                batch = client.sample_batch(prompts, k, base_seed, config.sampling);
            } catch (const EndpointUnreachableError& e) {
                // Persist whatever the cache provided before giving up,
                // so the next attempt starts from the same place.
                GenerationsFile partial;
                for (const auto& [id, gens] : e.partial)
                    for (const auto& g : gens)
                        partial[id].push_back({g.run, g.text, g.ok, g.error});
                if (!partial.empty())
                    save_generations(partial, dir / "generations.jsonl");
                throw;
            }

            GenerationsFile generations;
            RunsFile runs;
            int cell_failures = 0;
            for (const auto& [id, gens] : batch) {
                int surviving = 0;
                for (const auto& g : gens) {
                    generations[id].push_back({g.run, g.text, g.ok, g.error});
                    if (!g.ok) {
                        ++cell_failures;
                        log << "warning: " << cell_name(k, seed) << " instance " << id
                            << " run " << g.run << " failed: " << g.error << "\n";
                        continue;
                    }
                    const auto parsed = parse_generation(g.text, config.task);
                    auto run = validate_run(parsed.tuples, by_id.at(id)->text,
                                            config.task, whitelist_ptr);
                    run.run = surviving++;
                    runs[id].push_back(std::move(run));
                }
                if (surviving < k)
                    log << "warning: " << cell_name(k, seed) << " instance " << id
                        << " has " << surviving << " of " << k
                        << " runs; consensus will use a majority of " << surviving
                        << "\n";
            }
            save_generations(generations, dir / "generations.jsonl");
            if (config.strict && cell_failures > 0)
                throw TransportError("strict mode: " + std::to_string(cell_failures) +
                                     " failed generation(s) in cell " +
                                     cell_name(k, seed));
            save_runs(runs, config.task, dir / "runs.jsonl");
            stats.failed_runs += cell_failures;
            ++stats.cells;
            log << "infer " << cell_name(k, seed) << ": " << dataset.instances.size()
                << " instances, k=" << k << "\n";
        }
    }
    stats.network_calls = client.network_calls();
    log << "network calls: " << stats.network_calls << "\n";
    return stats;
}

void cmd_aggregate(const ExperimentConfig& config, std::ostream& log) {
    validate_config(config);
    const auto dataset = load_config_dataset(config, log);
    for (const int seed : sorted_unique(config.seeds)) {
        for (const int k : sorted_unique(config.ks)) {
            const auto dir = cell_dir(config, k, seed);
            const auto runs = load_runs(dir / "runs.jsonl", config.task);
            PredictionsFile predictions;
            std::map<std::string, ConsensusResult> support;
            for (const auto& instance : dataset.instances) {
                const auto it = runs.find(instance.id);
                const int available =
                    it == runs.end() ? 0 : static_cast<int>(it->second.size());
                if (available == 0) {
                    log << "warning: " << cell_name(k, seed) << " instance "
                        << instance.id << " has no usable runs; predicting nothing\n";
                    predictions[instance.id] = {};
                    support[instance.id] = ConsensusResult{};
                    continue;
                }
                const int threshold = config.threshold_override > 0
                                          ? config.threshold_override
                                          : default_threshold(available);
                auto result = aggregate(it->second, threshold, config.task);
                predictions[instance.id] = result.tuples;
                support[instance.id] = std::move(result);
            }
            save_predictions(predictions, config.task, dir / "predictions.jsonl");
            save_support(support, dir / "support.json");
            log << "aggregate " << cell_name(k, seed) << ": "
                << predictions.size() << " instances\n";
        }
    }
}

void cmd_evaluate(const ExperimentConfig& config, std::ostream& log) {
    validate_config(config);
    const auto dataset = load_config_dataset(config, log);
    const auto gold = gold_by_id(dataset);
    for (const int seed : sorted_unique(config.seeds)) {
        for (const int k : sorted_unique(config.ks)) {
            const auto dir = cell_dir(config, k, seed);
            const auto predictions =
                load_predictions(dir / "predictions.jsonl", config.task);
            const auto report = evaluate_instances(predictions, gold, config.task);
            save_eval_report(report, dir / "eval.json");
            write_file_atomic(dir / "eval.txt", render_eval_table(report));
            log << "evaluate " << cell_name(k, seed) << ": cF1 = "
                << format_fixed2(100.0 * report.c_f1) << "%\n";
        }
    }
}

stats::SignificanceReport cmd_stats(const ExperimentConfig& config, std::ostream& log) {
    validate_config(config);
    const auto ks = sorted_unique(config.ks);
    const auto seeds = sorted_unique(config.seeds);
    if (ks.size() < 2)
        throw ConfigError("statistics need at least two conditions (k values)");
    if (seeds.size() < 3)
        throw ConfigError("statistics need at least three seeds per condition");

    stats::ScoreTable table;
    std::vector<ConditionMeans> means;
    for (const int k : ks) {
        table.conditions.push_back(condition_label(k));
        std::vector<double> scores;
        ConditionMeans mean{0.0, 0.0, 0.0};
        for (const int seed : seeds) {
            const auto path = cell_dir(config, k, seed) / "eval.json";
            if (!std::filesystem::exists(path))
                throw DataError("missing evaluation report " + path.string() +
                                " (run evaluate first)");
            const auto report = load_eval_report_summary(path);
            scores.push_back(report.c_f1);
            mean[0] += report.c_prec;
            mean[1] += report.c_rec;
            mean[2] += report.c_f1;
        }
        for (auto& m : mean) m /= static_cast<double>(seeds.size());
        table.scores.push_back(std::move(scores));
        means.push_back(mean);
    }

    const auto report = stats::significance_pipeline(table, config.alpha);

    const auto dir = condition_dir(config);
    ordered_json scores_json;
    scores_json["conditions"] = table.conditions;
    scores_json["scores"] = table.scores;
    write_file_atomic(dir / "scores.json", scores_json.dump(2) + "\n");
    save_significance_report(report, dir / "significance.json");
    write_file_atomic(dir / "significance.txt", render_significance_table(report));
    const auto summary = render_condition_summary(table.conditions, means, report);
    write_file_atomic(dir / "summary.txt", summary);
    log << summary;
    return report;
}

InferStats cmd_run(const ExperimentConfig& config, std::ostream& log) {
    const auto stats = cmd_infer(config, log);
    cmd_aggregate(config, log);
    cmd_evaluate(config, log);
    if (config.ks.size() >= 2 && config.seeds.size() >= 3) {
        cmd_stats(config, log);
    } else {
        log << "stats skipped: needs >= 2 conditions and >= 3 seeds\n";
    }
    return stats;
}

EvalReport evaluate_files(const std::filesystem::path& predictions_path,
                          const std::filesystem::path& gold_path, TaskKind task,
                          const std::filesystem::path& out_dir, std::ostream& log) {
    const auto predictions = load_predictions(predictions_path, task);
    std::vector<std::string> warnings;
    const auto dataset = load_dataset(gold_path, task, &warnings);
    for (const auto& w : warnings) log << "warning: " << w << "\n";
    const auto report = evaluate_instances(predictions, gold_by_id(dataset), task);
    save_eval_report(report, out_dir / "eval.json");
    const auto table = render_eval_table(report);
    write_file_atomic(out_dir / "eval.txt", table);
    log << table;
    return report;
}

std::string render_condition_summary(const std::vector<std::string>& conditions,
                                     const std::vector<ConditionMeans>& means,
                                     const stats::SignificanceReport& report) {
    if (conditions.size() != means.size())
        throw ContractError("condition and mean counts differ");
    static const char* kSymbols[3] = {"*", "†", "‡"};

    std::size_t width = 9;
    for (const auto& c : conditions) width = std::max(width, c.size());

    char buf[160];
    std::string out;
    std::snprintf(buf, sizeof(buf), "%-*s  %7s  %7s  %7s  %s\n",
                  static_cast<int>(width), "condition", "cPrec", "cRec", "cF1",
                  "significance");
    out += buf;
    for (std::size_t i = 0; i < conditions.size(); ++i) {
        std::string marks;
        if (report.pairwise_done) {
            for (std::size_t ref = 0; ref < 3 && ref < i; ++ref) {
                for (const auto& pair : report.pairwise) {
                    if (pair.first == ref && pair.second == i && pair.level > 0) {
                        if (!marks.empty()) marks += ' ';
                        marks += stats::significance_marks(pair.level, kSymbols[ref]);
                    }
                }
            }
        }
        std::snprintf(buf, sizeof(buf), "%-*s  %7s  %7s  %7s  %s\n",
                      static_cast<int>(width), conditions[i].c_str(),
                      format_fixed2(100.0 * means[i][0]).c_str(),
                      format_fixed2(100.0 * means[i][1]).c_str(),
                      format_fixed2(100.0 * means[i][2]).c_str(), marks.c_str());
        out += buf;
    }
    if (!report.pairwise_done) {
        out += "significance: n/a (omnibus p >= alpha)\n";
        return out;
    }
    out += "significance vs ";
    for (std::size_t ref = 0; ref < 3 && ref < conditions.size(); ++ref) {
        if (ref > 0) out += ", ";
        out += conditions[ref];
        out += ": ";
        out += kSymbols[ref];
    }
    out += " (repeated for adjusted p < 0.05 / 0.01 / 0.001)\n";
    return out;
}

}  // namespace dimabsa
