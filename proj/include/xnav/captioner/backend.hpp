#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "xnav/core/error.hpp"

namespace xnav {

/// Remote service could not be reached within the retry budget.
class BackendUnavailable : public Error {
 public:
  using Error::Error;
};

/// Remote service answered with something we cannot use.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

enum class BackendKind { mock, remote };

struct BackendConfig {
  BackendKind kind{BackendKind::mock};
  std::string endpoint;  // base URL, e.g. http://127.0.0.1:8080
  double timeout_s{10.0};
  int retry{3};  // max attempts
  std::string api_key_env;

  /// Throws ConfigError for remote configs without endpoint or timeout.
  void validate() const;
  /// Bearer token from the configured environment variable; empty when no
  /// variable is configured. Throws ConfigError when it is configured but
  /// unset.
  std::string api_key() const;
  std::string id() const;
};

/// POSTs a JSON body to endpoint + path with bearer auth, retrying on
/// connection failures and 5xx answers. Returns the parsed JSON response.
/// `first_byte_s` receives the time to the response headers of the
/// successful attempt.
nlohmann::json post_json(const BackendConfig& cfg, const std::string& path, const nlohmann::json& body,
                         double* first_byte_s = nullptr);

}  // namespace xnav
