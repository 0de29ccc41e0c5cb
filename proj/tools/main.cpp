// Command line front end for the aspect sentiment pipeline.
//
// Subcommands are bare verbs (infer, aggregate, evaluate, stats, run)
// sharing one option set on the main app; options may be written before
// or after the verb, or supplied with --config as a flat key=value
// file. Every stage writes its outputs under the experiment directory;
// re-running a stage with the same inputs rewrites byte-identical
// files.

#include <cstdlib>
#include <iostream>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "dimabsa/errors.hpp"
#include "dimabsa/mock_endpoint.hpp"
#include "dimabsa/pipeline.hpp"

namespace {

// Exit codes: 0 success, 2 configuration or usage error, 3 data error
// (malformed or missing input files), 4 transport error (endpoint
// unreachable or strict-mode generation failure), 5 internal contract
// violation, 1 anything else.
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitTransport = 4;
constexpr int kExitContract = 5;

struct CliOptions {
    dimabsa::ExperimentConfig config;
    std::string task_name = "dimaste";
    std::string api_key_env;
    std::string mock_fixture;
    // evaluate-only direct mode
    std::string predictions_path;
    std::string gold_path;
};

void add_options(CLI::App& app, CliOptions& opt) {
    app.set_config("--config", "", "Read options from a key=value config file");
    app.add_option("--task", opt.task_name,
                   "Task: dimaste (triplets) or dimasqp (quadruplets)")
        ->capture_default_str()
        ->group("Experiment");
    app.add_option("--language", opt.config.language,
                   "Language tag for the output layout")
        ->capture_default_str()
        ->group("Experiment");
    app.add_option("--domain", opt.config.domain, "Domain tag for the output layout")
        ->capture_default_str()
        ->group("Experiment");
    app.add_option("--dataset", opt.config.dataset_path,
                   "Dataset file (JSON lines, one review per line)")
        ->group("Experiment");
    app.add_option("--out", opt.config.out_dir, "Experiment output directory")
        ->capture_default_str()
        ->group("Experiment");
    app.add_option("--k", opt.config.ks, "Generation counts, e.g. --k 1,5,10,15")
        ->delimiter(',')
        ->group("Experiment");
    app.add_option("--seeds", opt.config.seeds,
                   "Experiment seeds, e.g. --seeds 0,1,2,3,4")
        ->delimiter(',')
        ->group("Experiment");
    app.add_option("--threshold", opt.config.threshold_override,
                   "Override the majority vote threshold (0 = strict majority)")
        ->group("Experiment");
    app.add_option("--seed-stride", opt.config.seed_stride,
                   "Request seed spacing between experiment seeds")
        ->capture_default_str()
        ->group("Experiment");
    app.add_option("--alpha", opt.config.alpha, "Significance level")
        ->capture_default_str()
        ->group("Experiment");

    app.add_flag("--strict", opt.config.strict,
                 "Abort on any failed generation instead of degrading")
        ->group("Endpoint");
    app.add_option("--endpoint", opt.config.endpoint.base_url,
                   "Completions endpoint base URL")
        ->capture_default_str()
        ->group("Endpoint");
    app.add_option("--api-key-env", opt.api_key_env,
                   "Environment variable holding the API key")
        ->group("Endpoint");
    app.add_option("--model", opt.config.endpoint.model,
                   "Model name sent to the endpoint")
        ->capture_default_str()
        ->group("Endpoint");
    app.add_option("--temperature", opt.config.sampling.temperature,
                   "Sampling temperature")
        ->capture_default_str()
        ->group("Endpoint");
    app.add_option("--max-tokens", opt.config.sampling.max_output_tokens,
                   "Completion token budget")
        ->capture_default_str()
        ->group("Endpoint");
    app.add_option("--max-in-flight", opt.config.endpoint.max_in_flight,
                   "Concurrent request limit")
        ->capture_default_str()
        ->group("Endpoint");
    app.add_option("--cache-dir", opt.config.endpoint.cache_dir,
                   "Completion cache directory (default: <out>/cache)")
        ->group("Endpoint");
    app.add_option("--template", opt.config.template_path,
                   "Prompt template file with {{text}} and friends")
        ->group("Endpoint");
    app.add_option("--whitelist", opt.config.whitelist_path,
                   "Category whitelist file (quadruplet task)")
        ->group("Endpoint");
    app.add_option("--retries", opt.config.endpoint.max_retries,
                   "Retry attempts per request")
        ->capture_default_str()
        ->group("Endpoint");
    app.add_option("--timeout", opt.config.endpoint.timeout_seconds,
                   "Per-request timeout in seconds")
        ->capture_default_str()
        ->group("Endpoint");
    app.add_option("--mock-endpoint", opt.mock_fixture,
                   "Serve completions from a fixture file instead of a real endpoint")
        ->group("Endpoint");

    app.add_option("--predictions", opt.predictions_path,
                   "evaluate: score this predictions file directly")
        ->group("Direct scoring");
    app.add_option("--gold", opt.gold_path,
                   "evaluate: gold dataset for --predictions")
        ->group("Direct scoring");
}

// The mock server must outlive the command that talks to it.
std::unique_ptr<dimabsa::MockEndpoint> apply_late_options(CliOptions& opt,
                                                          bool needs_endpoint) {
    opt.config.task = dimabsa::task_from_string(opt.task_name);
    if (!opt.api_key_env.empty()) {
        const char* value = std::getenv(opt.api_key_env.c_str());
        if (value == nullptr || *value == '\0')
            throw dimabsa::ConfigError("environment variable " + opt.api_key_env +
                                       " is not set");
        opt.config.endpoint.api_key = value;
    }
    if (!needs_endpoint || opt.mock_fixture.empty()) return nullptr;
    auto mock = std::make_unique<dimabsa::MockEndpoint>(
        std::filesystem::path(opt.mock_fixture));
    opt.config.endpoint.base_url = mock->base_url();
    return mock;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Aspect sentiment triplets and quadruplets by repeated sampling "
                 "and majority consensus"};
    app.require_subcommand(1);

    CliOptions opt;
    add_options(app, opt);

    auto* infer = app.add_subcommand("infer", "Sample k generations per review");
    auto* aggregate =
        app.add_subcommand("aggregate", "Majority consensus over sampled runs");
    auto* evaluate = app.add_subcommand("evaluate", "Score predictions against gold");
    auto* stats = app.add_subcommand(
        "stats", "Compare conditions across seeds with significance tests");
    auto* run = app.add_subcommand("run", "Full pipeline: infer, aggregate, "
                                          "evaluate, stats");
    for (auto* verb : {infer, aggregate, evaluate, stats, run}) verb->fallthrough();

    try {
        app.parse(argc, argv);
        auto mock = apply_late_options(opt, infer->parsed() || run->parsed());

        if (infer->parsed()) {
            dimabsa::cmd_infer(opt.config, std::cout);
        } else if (aggregate->parsed()) {
            dimabsa::cmd_aggregate(opt.config, std::cout);
        } else if (evaluate->parsed()) {
            if (!opt.predictions_path.empty() || !opt.gold_path.empty()) {
                if (opt.predictions_path.empty() || opt.gold_path.empty())
                    throw dimabsa::ConfigError(
                        "--predictions and --gold must be given together");
                dimabsa::evaluate_files(opt.predictions_path, opt.gold_path,
                                        opt.config.task, opt.config.out_dir,
                                        std::cout);
            } else {
                dimabsa::cmd_evaluate(opt.config, std::cout);
            }
        } else if (stats->parsed()) {
            dimabsa::cmd_stats(opt.config, std::cout);
        } else if (run->parsed()) {
            dimabsa::cmd_run(opt.config, std::cout);
        }
        return 0;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    } catch (const dimabsa::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const dimabsa::DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const dimabsa::TransportError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitTransport;
    } catch (const dimabsa::DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitContract;
    } catch (const dimabsa::ContractError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitContract;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
