#include "finsrag/http_client.hpp"

#include <charconv>
#include <chrono>
#include <stdexcept>
#include <thread>

#include <httplib.h>

namespace finsrag {

HttpEndpoint parse_endpoint(const std::string& url) {
    const std::string scheme = "http://";
    if (url.rfind(scheme, 0) != 0) {
        if (url.rfind("https://", 0) == 0)
            throw std::invalid_argument("endpoint '" + url + "': https is not supported, use http");
        throw std::invalid_argument("endpoint '" + url + "': expected http://host[:port][/path]");
    }
    HttpEndpoint ep;
    std::string rest = url.substr(scheme.size());
    size_t slash = rest.find('/');
    std::string authority = rest.substr(0, slash);
    ep.path = slash == std::string::npos ? "/" : rest.substr(slash);
    size_t colon = authority.find(':');
    if (colon == std::string::npos) {
        ep.host = authority;
    } else {
        ep.host = authority.substr(0, colon);
        std::string port_text = authority.substr(colon + 1);
        auto [p, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), ep.port);
        if (ec != std::errc() || p != port_text.data() + port_text.size() || ep.port <= 0 ||
            ep.port > 65535)
            throw std::invalid_argument("endpoint '" + url + "': bad port '" + port_text + "'");
    }
    if (ep.host.empty()) throw std::invalid_argument("endpoint '" + url + "': empty host");
    return ep;
}

nlohmann::ordered_json post_json(const HttpEndpoint& ep, const nlohmann::ordered_json& body) {
    httplib::Client client(ep.host, ep.port);
    client.set_connection_timeout(std::chrono::duration<double>(ep.timeout_sec));
    client.set_read_timeout(std::chrono::duration<double>(ep.timeout_sec));
    httplib::Headers headers;
    if (!ep.auth_header.empty()) headers.emplace(ep.auth_header, ep.auth_value);

    std::string payload = body.dump();
    std::string last_error;
    for (int attempt = 0; attempt <= ep.max_retries; ++attempt) {
        if (attempt > 0) {
            auto delay = std::chrono::milliseconds(ep.backoff_ms) * (1ll << (attempt - 1));
            std::this_thread::sleep_for(delay);
        }
        auto res = client.Post(ep.path, headers, payload, "application/json");
        if (!res) {
            last_error = "connection failure (" + httplib::to_string(res.error()) + ")";
            continue;
        }
        if (res->status < 200 || res->status >= 300) {
            last_error = "http status " + std::to_string(res->status);
            continue;
        }
        try {
            return nlohmann::ordered_json::parse(res->body);
        } catch (const std::exception& e) {
            // A malformed body is not transient; fail without burning retries.
            throw std::runtime_error("endpoint " + ep.host + ep.path +
                                     ": unparseable response body: " + e.what());
        }
    }
    throw std::runtime_error("endpoint " + ep.host + ep.path + ": " + last_error + " after " +
                             std::to_string(ep.max_retries + 1) + " attempts");
}

}  // namespace finsrag
