#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dimabsa/core.hpp"
#include "dimabsa/errors.hpp"

namespace dimabsa {

// ------------------------------------------------------------------
// Prompt templating. Templates are plain text with {{slot}} holes; the
// builder fills the slots a task needs: a description of the sentiment
// elements, an explanation of the valence/arousal scale, the required
// output format, and the review text itself.

// Replaces every {{slot}} with its value. A slot without a value, or a
// "{{" that never closes, raises TemplateError. Deterministic.
std::string fill_template(std::string_view tmpl,
                          const std::map<std::string, std::string>& slots);

// Canned English building blocks for the default prompt.
std::string element_descriptions(TaskKind task);
std::string va_scale_description();
std::string output_format_block(TaskKind task);

// English instruction template using the {{elements}}, {{scale}},
// {{format}} and {{text}} slots. Translations are user-supplied files
// with the same placeholders.
std::string default_template(TaskKind task);

// Fills a template for one review. The template must contain {{text}}
// (an extraction prompt without the input is never meaningful); the
// other known slots are optional, unknown slots raise TemplateError.
std::string build_prompt(std::string_view tmpl, const ReviewInstance& instance,
                         TaskKind task);

// ------------------------------------------------------------------
// Endpoint client.

struct EndpointConfig {
    std::string base_url = "http://127.0.0.1:8000";
    std::string completions_path = "/v1/chat/completions";
    std::string api_key;                 // empty: no Authorization header
    std::string model = "local-model";
    int max_in_flight = 8;               // concurrent requests across one batch
    std::filesystem::path cache_dir;     // empty: caching disabled
    int timeout_seconds = 120;
    int max_retries = 3;                 // attempts per request = 1 + max_retries
    int backoff_initial_ms = 200;        // doubles per retry
    int backoff_max_ms = 5000;
};

struct SamplingParams {
    double temperature = 0.8;
    int max_output_tokens = 512;
};

// One stochastic completion attempt. `text` is the completion content
// exactly as the endpoint produced it, unmodified; parsing and span
// checks happen downstream.
struct Generation {
    std::string id;          // instance id ("" for bare sample_k)
    int run = 0;
    std::uint64_t seed = 0;
    std::string text;
    bool ok = false;
    std::string error;
    bool cache_hit = false;
    double latency_ms = 0.0;
};

// Raised when every request of a batch died at the connection level and
// nothing was produced; cache hits gathered before the failure ride
// along so the caller can persist them.
struct EndpointUnreachableError : TransportError {
    EndpointUnreachableError(const std::string& what,
                             std::map<std::string, std::vector<Generation>> partial_results)
        : TransportError(what), partial(std::move(partial_results)) {}
    std::map<std::string, std::vector<Generation>> partial;
};

// Hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

// Content address of one completion request; the cache file name.
std::string cache_digest(const std::string& model, double temperature,
                         std::uint64_t seed, int max_output_tokens,
                         std::string_view prompt);

// OpenAI-compatible chat/completions client with bounded concurrency
// and a content-addressed on-disk response cache.
class InferenceClient {
public:
    explicit InferenceClient(EndpointConfig config);

    // k generations for one prompt, seeded base_seed + run index, in run
    // order. ConfigError when k < 1.
    std::vector<Generation> sample_k(const std::string& prompt, int k,
                                     std::uint64_t base_seed, const SamplingParams& params);

    // All (instance, run) requests of one batch, issued concurrently up
    // to max_in_flight, delivered in run order per instance regardless
    // of completion order. `prompts` pairs instance ids with prompt
    // text. Individual failures come back with ok=false; the batch only
    // throws (EndpointUnreachableError) when no request produced
    // anything and the endpoint never answered at all.
    std::map<std::string, std::vector<Generation>> sample_batch(
        const std::vector<std::pair<std::string, std::string>>& prompts, int k,
        std::uint64_t base_seed, const SamplingParams& params);

    // HTTP requests actually sent, retries included; cache hits send none.
    long network_calls() const noexcept;

    const EndpointConfig& config() const noexcept { return config_; }

private:
    EndpointConfig config_;
    std::atomic<long> network_calls_{0};
};

}  // namespace dimabsa
