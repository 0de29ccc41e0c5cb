#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include <json.hpp>

namespace dimabsa {

// In-process OpenAI-compatible chat/completions server for hermetic
// tests and offline runs. Completions are scripted by a fixture:
//
//   {
//     "default": ["fallback completion", ...],
//     "instances": [
//       {"match": "substring of the prompt", "responses": ["...", ...]}
//     ]
//   }
//
// The first instance whose "match" occurs in the request's user message
// wins, otherwise "default" applies. The returned completion is
// responses[seed % len], so seeded requests are reproducible and
// distinct seeds can disagree on purpose. The magic response value
// "__HTTP_500__" makes the server answer that request with HTTP 500.
class MockEndpoint {
public:
    // delay_ms stalls each request inside the handler, which makes
    // concurrent arrivals observable via max_concurrent_seen().
    explicit MockEndpoint(nlohmann::json fixture, int delay_ms = 0);
    explicit MockEndpoint(const std::filesystem::path& fixture_file, int delay_ms = 0);
    ~MockEndpoint();

    MockEndpoint(const MockEndpoint&) = delete;
    MockEndpoint& operator=(const MockEndpoint&) = delete;

    std::string base_url() const;  // http://127.0.0.1:{port}
    int port() const;

    long request_count() const;       // completions requests handled
    int max_concurrent_seen() const;  // peak simultaneous handlers

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace dimabsa
