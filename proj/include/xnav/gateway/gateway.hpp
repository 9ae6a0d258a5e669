#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "xnav/runner/runner.hpp"

namespace xnav::gateway {

/// Result of one inbound teleoperation message.
struct CommandEffect {
  Inbound input;
  std::optional<VelocityCommand> forwarded;  // clamped cmd, for "cmd"
  bool clamped{false};
};

/// Validates an inbound message and hands it to the runner. Throws
/// ParseError for malformed or unknown messages.
CommandEffect handle_command(Runner& runner, const nlohmann::json& msg);

/// WireEvent JSON for a bus message, or nullopt for topics not bridged.
std::optional<nlohmann::ordered_json> wire_event(const Bus::Message& m);

struct GatewayConfig {
  std::string address{"127.0.0.1"};
  std::uint16_t port{0};  // 0 picks a free port
  std::string token;       // required as ?token= when non-empty
  double max_frame_rate{5.0};
  std::optional<std::filesystem::path> static_dir;
  std::function<double()> wall_clock;  // seconds; defaults to steady_clock
};

/// WebSocket bridge at /ws: each client gets a snapshot, then every bridged
/// bus message as a WireEvent. Inbound JSON goes through handle_command;
/// bad input produces an "error" event for that client only.
class Gateway {
 public:
  /// Binds immediately; throws Error when the port is taken.
  Gateway(Runner& runner, GatewayConfig config);
  ~Gateway();

  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  std::uint16_t port() const;
  std::size_t clients() const;
  /// Wire events sent to clients so far, by type (after throttling).
  std::size_t broadcast_count(const std::string& type) const;

  void stop();

  struct Impl;

 private:
  std::shared_ptr<Impl> impl_;
};

}  // namespace xnav::gateway
