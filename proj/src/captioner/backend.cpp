#include "xnav/captioner/backend.hpp"

#include <httplib.h>

#include <chrono>
#include <cstdlib>

namespace xnav {

void BackendConfig::validate() const {
  if (kind == BackendKind::mock) return;
  if (endpoint.empty()) throw ConfigError("remote backend requires an endpoint");
  if (!(timeout_s > 0.0)) throw ConfigError("remote backend requires a positive timeout");
  if (retry < 1) throw ConfigError("retry must be at least 1");
}

std::string BackendConfig::api_key() const {
  if (api_key_env.empty()) return {};
  const char* v = std::getenv(api_key_env.c_str());
  if (!v || !*v) throw ConfigError("environment variable " + api_key_env + " is not set");
  return v;
}

std::string BackendConfig::id() const { return kind == BackendKind::mock ? "mock" : "remote:" + endpoint; }

nlohmann::json post_json(const BackendConfig& cfg, const std::string& path, const nlohmann::json& body,
                         double* first_byte_s) {
  cfg.validate();
  const std::string key = cfg.api_key();
  httplib::Client cli(cfg.endpoint);
  const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::duration<double>(cfg.timeout_s));
  cli.set_connection_timeout(timeout);
  cli.set_read_timeout(timeout);
  cli.set_write_timeout(timeout);
  httplib::Headers headers;
  if (!key.empty()) headers.emplace("Authorization", "Bearer " + key);
  const std::string payload = body.dump();

  std::string last_error = "no attempt made";
  for (int attempt = 1; attempt <= cfg.retry; ++attempt) {
    const auto start = std::chrono::steady_clock::now();
    auto headers_at = start;
    httplib::Request req;
    req.method = "POST";
    req.path = path;
    req.headers = headers;
    req.body = payload;
    req.set_header("Content-Type", "application/json");
    req.response_handler = [&](const httplib::Response&) {
      headers_at = std::chrono::steady_clock::now();
      return true;
    };
    auto res = cli.send(req);
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) throw ProtocolError(path + ": HTTP " + std::to_string(res->status));
    if (first_byte_s) *first_byte_s = std::chrono::duration<double>(headers_at - start).count();
    try {
      return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error& e) {
      throw ProtocolError(path + ": malformed JSON response: " + e.what());
    }
  }
  throw BackendUnavailable(cfg.endpoint + path + " unavailable after " + std::to_string(cfg.retry) +
                           " attempt(s): " + last_error);
}

}  // namespace xnav
