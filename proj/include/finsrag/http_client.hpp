#pragma once
// Minimal JSON-over-HTTP POST with retries, shared by the remote forecaster
// and the remote embedder. Plain http only.

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

namespace finsrag {

struct HttpEndpoint {
    std::string host;
    int port = 80;
    std::string path;        // leading slash
    std::string auth_header; // optional; header name, e.g. "Authorization"
    std::string auth_value;  // resolved from the environment at config time
    double timeout_sec = 30.0;
    int max_retries = 3;     // attempts beyond the first
    int backoff_ms = 250;    // doubled after each failed attempt
};

// Accepts http://host[:port][/path]; anything else (https included) throws.
HttpEndpoint parse_endpoint(const std::string& url);

// POSTs `body` as application/json and parses the response body as JSON.
// Connection errors and non-2xx statuses are retried with exponential
// backoff; exhausting the budget throws with the last failure.
nlohmann::ordered_json post_json(const HttpEndpoint& ep, const nlohmann::ordered_json& body);

}  // namespace finsrag
