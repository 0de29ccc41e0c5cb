#include "dimabsa/inference.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <thread>

#include <httplib.h>
#include <json.hpp>
#include <openssl/evp.h>

#include "dimabsa/util.hpp"

namespace dimabsa {

using nlohmann::json;
using nlohmann::ordered_json;

// ------------------------------------------------------------------
// Templating.

std::string fill_template(std::string_view tmpl,
                          const std::map<std::string, std::string>& slots) {
    std::string out;
    out.reserve(tmpl.size());
    std::size_t pos = 0;
    while (pos < tmpl.size()) {
        const auto open = tmpl.find("{{", pos);
        if (open == std::string_view::npos) {
            out.append(tmpl.substr(pos));
            break;
        }
        out.append(tmpl.substr(pos, open - pos));
        const auto close = tmpl.find("}}", open + 2);
        if (close == std::string_view::npos)
            throw TemplateError("unterminated {{ in template");
        const std::string name(trim_copy(tmpl.substr(open + 2, close - open - 2)));
        const auto it = slots.find(name);
        if (it == slots.end())
            throw TemplateError("unresolved template slot {{" + name + "}}");
        out.append(it->second);
        pos = close + 2;
    }
    return out;
}

std::string element_descriptions(TaskKind task) {
    std::string out =
        "You will analyze a review sentence for the following sentiment elements:\n"
        "- Aspect term: the exact text span of the entity or feature being evaluated. "
        "Use \"NULL\" when the aspect is only implied by the sentence.\n";
    if (task == TaskKind::Quadruplet) {
        out +=
            "- Aspect category: the predefined category label the aspect belongs to, "
            "written as ENTITY#ATTRIBUTE (for example FOOD#QUALITY).\n";
    }
    out +=
        "- Opinion term: the exact text span expressing the evaluation of the aspect.\n"
        "- Valence: how positive or negative the expressed sentiment is.\n"
        "- Arousal: how calm or excited the expressed sentiment is.";
    return out;
}

std::string va_scale_description() {
    return
        "Valence and arousal are decimal numbers from 1.00 to 9.00. For valence, "
        "1.00 is maximally negative, 5.00 is neutral and 9.00 is maximally "
        "positive. For arousal, 1.00 is completely calm, 5.00 is medium and 9.00 "
        "is highly excited. Report both with two decimals.";
}

std::string output_format_block(TaskKind task) {
    if (task == TaskKind::Quadruplet) {
        return
            "Answer with a JSON array only, no other text. Each element is an "
            "object of the form {\"aspect\": \"...\", \"category\": \"...\", "
            "\"opinion\": \"...\", \"valence\": \"...\", \"arousal\": \"...\"}. "
            "Aspect and opinion must be copied verbatim from the sentence. Output "
            "[] when the sentence expresses no aspect-level sentiment.";
    }
    return
        "Answer with a JSON array only, no other text. Each element is an object "
        "of the form {\"aspect\": \"...\", \"opinion\": \"...\", \"valence\": "
        "\"...\", \"arousal\": \"...\"}. Aspect and opinion must be copied "
        "verbatim from the sentence. Output [] when the sentence expresses no "
        "aspect-level sentiment.";
}

std::string default_template(TaskKind task) {
    (void)task;  // the task-specific parts live in the slot values
    return
        "{{elements}}\n"
        "\n"
        "{{scale}}\n"
        "\n"
        "{{format}}\n"
        "\n"
        "Sentence: {{text}}";
}

std::string build_prompt(std::string_view tmpl, const ReviewInstance& instance,
                         TaskKind task) {
    if (tmpl.find("{{text}}") == std::string_view::npos)
        throw TemplateError("template has no {{text}} slot");
    return fill_template(tmpl, {
                                   {"elements", element_descriptions(task)},
                                   {"scale", va_scale_description()},
                                   {"format", output_format_block(task)},
                                   {"text", instance.text},
                               });
}

// ------------------------------------------------------------------
// Cache addressing.

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

std::string cache_digest(const std::string& model, double temperature,
                         std::uint64_t seed, int max_output_tokens,
                         std::string_view prompt) {
    char temp[32];
    std::snprintf(temp, sizeof(temp), "%.17g", temperature);
    std::string material = model;
    material += '\n';
    material += temp;
    material += '\n';
    material += std::to_string(seed);
    material += '\n';
    material += std::to_string(max_output_tokens);
    material += '\n';
    material += prompt;
    return sha256_hex(material);
}

// ------------------------------------------------------------------
// Client.

namespace {

struct RequestUnit {
    std::size_t index = 0;  // position in the flat result vector
    const std::string* id = nullptr;
    const std::string* prompt = nullptr;
    int run = 0;
    std::uint64_t seed = 0;
};

std::filesystem::path cache_path(const EndpointConfig& config, const SamplingParams& params,
                                 std::uint64_t seed, const std::string& prompt) {
    return config.cache_dir / (cache_digest(config.model, params.temperature, seed,
                                            params.max_output_tokens, prompt) +
                               ".json");
}

// A hit must contain a string "text"; anything unreadable counts as a
// miss and gets refetched and rewritten.
bool try_cache_read(const std::filesystem::path& path, std::string* text) {
    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) return false;
    std::string raw;
    try {
        raw = read_file(path);
    } catch (const DataError&) {
        return false;
    }
    json j = json::parse(raw, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("text") ||
        !j.at("text").is_string())
        return false;
    *text = j.at("text").get<std::string>();
    return true;
}

void cache_write(const std::filesystem::path& path, const EndpointConfig& config,
                 const SamplingParams& params, std::uint64_t seed,
                 const std::string& prompt, const std::string& text) {
    ordered_json j;
    j["model"] = config.model;
    j["temperature"] = params.temperature;
    j["seed"] = seed;
    j["max_output_tokens"] = params.max_output_tokens;
    j["prompt_sha256"] = sha256_hex(prompt);
    j["text"] = text;
    write_file_atomic(path, j.dump(2) + "\n");
}

std::string request_body(const EndpointConfig& config, const SamplingParams& params,
                         std::uint64_t seed, const std::string& prompt) {
    ordered_json body;
    body["model"] = config.model;
    body["messages"] = ordered_json::array(
        {ordered_json{{"role", "user"}, {"content", prompt}}});
    body["temperature"] = params.temperature;
    body["max_tokens"] = params.max_output_tokens;
    body["seed"] = seed;
    return body.dump();
}

// Pulls choices[0].message.content out of a chat-completion response.
bool extract_content(const std::string& body, std::string* out, std::string* error) {
    json j = json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        *error = "endpoint returned a non-JSON body";
        return false;
    }
    if (!j.contains("choices") || !j.at("choices").is_array() ||
        j.at("choices").empty()) {
        *error = "completion response has no choices";
        return false;
    }
    const auto& first = j.at("choices").at(0);
    if (!first.is_object() || !first.contains("message") ||
        !first.at("message").is_object() || !first.at("message").contains("content") ||
        !first.at("message").at("content").is_string()) {
        *error = "completion response has no message content";
        return false;
    }
    *out = first.at("message").at("content").get<std::string>();
    return true;
}

bool retryable_status(int status) {
    return status == 429 || (status >= 500 && status < 600);
}

}  // namespace

InferenceClient::InferenceClient(EndpointConfig config) : config_(std::move(config)) {
    if (config_.base_url.empty()) throw ConfigError("endpoint base_url is empty");
    if (config_.max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");
    if (config_.max_retries < 0) throw ConfigError("max_retries must be >= 0");
}

long InferenceClient::network_calls() const noexcept {
    return network_calls_.load(std::memory_order_relaxed);
}

std::vector<Generation> InferenceClient::sample_k(const std::string& prompt, int k,
                                                  std::uint64_t base_seed,
                                                  const SamplingParams& params) {
    auto batch = sample_batch({{std::string(), prompt}}, k, base_seed, params);
    return std::move(batch.begin()->second);
}

std::map<std::string, std::vector<Generation>> InferenceClient::sample_batch(
    const std::vector<std::pair<std::string, std::string>>& prompts, int k,
    std::uint64_t base_seed, const SamplingParams& params) {
    if (k < 1) throw ConfigError("k must be >= 1");
    if (params.temperature < 0.0) throw ConfigError("temperature must be >= 0");
    if (params.max_output_tokens < 1) throw ConfigError("max_output_tokens must be >= 1");

    std::vector<RequestUnit> units;
    units.reserve(prompts.size() * static_cast<std::size_t>(k));
    for (const auto& [id, prompt] : prompts) {
        for (int run = 0; run < k; ++run) {
            RequestUnit unit;
            unit.index = units.size();
            unit.id = &id;
            unit.prompt = &prompt;
            unit.run = run;
            unit.seed = base_seed + static_cast<std::uint64_t>(run);
            units.push_back(unit);
        }
    }

    std::vector<Generation> results(units.size());
    std::atomic<std::size_t> next{0};
    std::atomic<bool> endpoint_answered{false};
    std::atomic<bool> sent_any{false};
    const bool use_cache = !config_.cache_dir.empty();

    auto process = [&](httplib::Client& client, const RequestUnit& unit) {
        Generation gen;
        gen.id = *unit.id;
        gen.run = unit.run;
        gen.seed = unit.seed;

        std::filesystem::path cached;
        if (use_cache) {
            cached = cache_path(config_, params, unit.seed, *unit.prompt);
            std::string text;
            if (try_cache_read(cached, &text)) {
                gen.text = std::move(text);
                gen.ok = true;
                gen.cache_hit = true;
                results[unit.index] = std::move(gen);
                return;
            }
        }

        sent_any.store(true, std::memory_order_relaxed);
        const auto body = request_body(config_, params, unit.seed, *unit.prompt);
        httplib::Headers headers;
        if (!config_.api_key.empty())
            headers.emplace("Authorization", "Bearer " + config_.api_key);

        const auto start = std::chrono::steady_clock::now();
        std::string last_error = "no attempt made";
        for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
            if (attempt > 0) {
                long delay = static_cast<long>(config_.backoff_initial_ms)
                             << (attempt - 1);
                delay = std::min<long>(delay, config_.backoff_max_ms);
                std::this_thread::sleep_for(std::chrono::milliseconds(delay));
            }
            network_calls_.fetch_add(1, std::memory_order_relaxed);
            auto res = client.Post(config_.completions_path, headers, body,
                                   "application/json");
            if (!res) {
                last_error = "connection error: " + httplib::to_string(res.error());
                continue;
            }
            endpoint_answered.store(true, std::memory_order_relaxed);
            if (res->status == 200) {
                std::string content;
                std::string parse_error;
                if (extract_content(res->body, &content, &parse_error)) {
                    gen.text = std::move(content);
                    gen.ok = true;
                    if (use_cache)
                        cache_write(cached, config_, params, unit.seed, *unit.prompt,
                                    gen.text);
                } else {
                    gen.error = parse_error;
                }
                break;
            }
            last_error = "HTTP " + std::to_string(res->status);
            if (!retryable_status(res->status)) {
                gen.error = last_error;
                break;
            }
        }
        if (!gen.ok && gen.error.empty()) gen.error = last_error;
        gen.latency_ms = std::chrono::duration<double, std::milli>(
                             std::chrono::steady_clock::now() - start)
                             .count();
        results[unit.index] = std::move(gen);
    };

    const int workers = static_cast<int>(std::min<std::size_t>(
        static_cast<std::size_t>(config_.max_in_flight), std::max<std::size_t>(units.size(), 1)));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            // One connection per worker; the worker count is the
            // in-flight bound.
            httplib::Client client(config_.base_url);
            client.set_connection_timeout(config_.timeout_seconds, 0);
            client.set_read_timeout(config_.timeout_seconds, 0);
            client.set_write_timeout(config_.timeout_seconds, 0);
            while (true) {
                const auto i = next.fetch_add(1, std::memory_order_relaxed);
                if (i >= units.size()) break;
                process(client, units[i]);
            }
        });
    }
    for (auto& t : pool) t.join();

    std::map<std::string, std::vector<Generation>> out;
    for (auto& gen : results) out[gen.id].push_back(std::move(gen));

    const bool any_ok = std::any_of(out.begin(), out.end(), [](const auto& entry) {
        return std::any_of(entry.second.begin(), entry.second.end(),
                           [](const Generation& g) { return g.ok; });
    });
    if (!any_ok && sent_any.load() && !endpoint_answered.load()) {
        std::string detail = "endpoint " + config_.base_url + " unreachable";
        for (const auto& gen : results) {
            if (!gen.ok && !gen.error.empty()) {
                detail += " (" + gen.error + ")";
                break;
            }
        }
        throw EndpointUnreachableError(detail, std::move(out));
    }
    return out;
}

}  // namespace dimabsa
