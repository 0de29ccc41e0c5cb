#include "dimabsa/mock_endpoint.hpp"

#include <atomic>
#include <chrono>
#include <cstdint>
#include <thread>
#include <vector>

#include <httplib.h>

#include "dimabsa/errors.hpp"
#include "dimabsa/util.hpp"

namespace dimabsa {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr const char* kFailureMagic = "__HTTP_500__";

struct ScriptEntry {
    std::string match;
    std::vector<std::string> responses;
};

std::vector<std::string> read_responses(const json& j, const char* where) {
    if (!j.is_array() || j.empty())
        throw ConfigError(std::string("mock fixture: ") + where +
                          " must be a non-empty array of strings");
    std::vector<std::string> out;
    for (const auto& item : j) {
        if (!item.is_string())
            throw ConfigError(std::string("mock fixture: ") + where +
                              " must contain only strings");
        out.push_back(item.get<std::string>());
    }
    return out;
}

}  // namespace

struct MockEndpoint::Impl {
    std::vector<std::string> fallback;
    std::vector<ScriptEntry> script;
    int delay_ms = 0;

    httplib::Server server;
    std::thread listener;
    int port = 0;

    std::atomic<long> requests{0};
    std::atomic<int> in_flight{0};
    std::atomic<int> peak{0};

    void configure(json fixture) {
        if (!fixture.is_object())
            throw ConfigError("mock fixture must be a JSON object");
        if (fixture.contains("default"))
            fallback = read_responses(fixture.at("default"), "\"default\"");
        if (fixture.contains("instances")) {
            const auto& instances = fixture.at("instances");
            if (!instances.is_array())
                throw ConfigError("mock fixture: \"instances\" must be an array");
            for (const auto& inst : instances) {
                if (!inst.is_object() || !inst.contains("match") ||
                    !inst.at("match").is_string() || !inst.contains("responses"))
                    throw ConfigError(
                        "mock fixture: each instance needs \"match\" and \"responses\"");
                ScriptEntry entry;
                entry.match = inst.at("match").get<std::string>();
                entry.responses = read_responses(inst.at("responses"), "\"responses\"");
                script.push_back(std::move(entry));
            }
        }
        if (fallback.empty() && script.empty())
            throw ConfigError("mock fixture scripts no responses at all");
    }

    const std::vector<std::string>* select(const std::string& prompt) const {
        for (const auto& entry : script)
            if (prompt.find(entry.match) != std::string::npos) return &entry.responses;
        return fallback.empty() ? nullptr : &fallback;
    }

    void handle(const httplib::Request& req, httplib::Response& res) {
        requests.fetch_add(1, std::memory_order_relaxed);
        const int now = in_flight.fetch_add(1, std::memory_order_relaxed) + 1;
        int seen = peak.load(std::memory_order_relaxed);
        while (now > seen &&
               !peak.compare_exchange_weak(seen, now, std::memory_order_relaxed)) {
        }
        if (delay_ms > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));

        const auto respond_error = [&](int status, const std::string& message) {
            ordered_json err;
            err["error"] = ordered_json{{"message", message}, {"type", "mock_error"}};
            res.status = status;
            res.set_content(err.dump(), "application/json");
        };

        json body = json::parse(req.body, nullptr, false);
        if (body.is_discarded() || !body.is_object() || !body.contains("messages") ||
            !body.at("messages").is_array() || body.at("messages").empty()) {
            respond_error(400, "malformed chat completion request");
            in_flight.fetch_sub(1, std::memory_order_relaxed);
            return;
        }
        std::string prompt;
        for (const auto& message : body.at("messages")) {
            if (message.is_object() && message.contains("content") &&
                message.at("content").is_string())
                prompt += message.at("content").get<std::string>();
        }
        std::uint64_t seed = 0;
        if (body.contains("seed") && body.at("seed").is_number())
            seed = body.at("seed").get<std::uint64_t>();
        const std::string model = (body.contains("model") && body.at("model").is_string())
                                      ? body.at("model").get<std::string>()
                                      : "mock-model";

        const auto* responses = select(prompt);
        if (responses == nullptr) {
            respond_error(404, "no scripted response matches the prompt");
            in_flight.fetch_sub(1, std::memory_order_relaxed);
            return;
        }
        const auto& text = (*responses)[seed % responses->size()];
        if (text == kFailureMagic) {
            respond_error(500, "scripted failure");
            in_flight.fetch_sub(1, std::memory_order_relaxed);
            return;
        }

        ordered_json reply;
        reply["id"] = "chatcmpl-mock";
        reply["object"] = "chat.completion";
        reply["created"] = 0;
        reply["model"] = model;
        reply["choices"] = ordered_json::array({ordered_json{
            {"index", 0},
            {"message", ordered_json{{"role", "assistant"}, {"content", text}}},
            {"finish_reason", "stop"},
        }});
        reply["usage"] = ordered_json{
            {"prompt_tokens", 0}, {"completion_tokens", 0}, {"total_tokens", 0}};
        res.set_content(reply.dump(), "application/json");
        in_flight.fetch_sub(1, std::memory_order_relaxed);
    }

    void start() {
        server.Post("/v1/chat/completions",
                    [this](const httplib::Request& req, httplib::Response& res) {
                        handle(req, res);
                    });
        port = server.bind_to_any_port("127.0.0.1");
        if (port <= 0) throw ConfigError("mock endpoint could not bind a port");
        listener = std::thread([this] { server.listen_after_bind(); });
        // bind_to_any_port already reserved the socket; wait for the
        // accept loop so the first client cannot race it.
        for (int i = 0; i < 500 && !server.is_running(); ++i)
            std::this_thread::sleep_for(std::chrono::milliseconds(2));
        if (!server.is_running())
            throw ConfigError("mock endpoint failed to start listening");
    }

    void stop() {
        server.stop();
        if (listener.joinable()) listener.join();
    }
};

MockEndpoint::MockEndpoint(json fixture, int delay_ms) : impl_(new Impl) {
    impl_->delay_ms = delay_ms;
    impl_->configure(std::move(fixture));
    impl_->start();
}

MockEndpoint::MockEndpoint(const std::filesystem::path& fixture_file, int delay_ms)
    : impl_(new Impl) {
    impl_->delay_ms = delay_ms;
    json fixture = json::parse(read_file(fixture_file), nullptr, false);
    if (fixture.is_discarded())
        throw ConfigError("mock fixture is not valid JSON: " + fixture_file.string());
    impl_->configure(std::move(fixture));
    impl_->start();
}

MockEndpoint::~MockEndpoint() {
    if (impl_) impl_->stop();
}

std::string MockEndpoint::base_url() const {
    return "http://127.0.0.1:" + std::to_string(impl_->port);
}

int MockEndpoint::port() const { return impl_->port; }

long MockEndpoint::request_count() const {
    return impl_->requests.load(std::memory_order_relaxed);
}

int MockEndpoint::max_concurrent_seen() const {
    return impl_->peak.load(std::memory_order_relaxed);
}

}  // namespace dimabsa
