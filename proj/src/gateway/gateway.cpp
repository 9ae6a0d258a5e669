#include "xnav/gateway/gateway.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <deque>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast.hpp>
#include <boost/beast/websocket.hpp>

#include "xnav/core/base64.hpp"
#include "xnav/saliency/png.hpp"

namespace xnav::gateway {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr int kWireVersion = 1;

double r6(double v) { return std::round(v * 1e6) / 1e6; }

std::string png_base64(int w, int h, std::vector<std::uint8_t> rgb) {
  RgbImage img{w, h, std::move(rgb), {}};
  const auto bytes = encode_png(img);
  return base64_encode(bytes);
}

ordered_json zone_json(const sim::SocialZone& z) {
  return {{"kind", z.kind == sim::ZoneKind::personal_disc ? "personal_disc" : "group_interaction"},
          {"a", {r6(z.a.x), r6(z.a.y)}},
          {"b", {r6(z.b.x), r6(z.b.y)}},
          {"radius", r6(z.radius)},
          {"members", z.member_ids}};
}

ordered_json state_body(const StateMsg& s) {
  ordered_json humans = ordered_json::array();
  for (const auto& h : s.humans) {
    ordered_json hj{{"id", h.id},
                    {"x", r6(h.pose.x)},
                    {"y", r6(h.pose.y)},
                    {"psi", r6(h.pose.psi)},
                    {"activity", std::string(to_string(h.activity))}};
    hj["group"] = h.group_id ? json(*h.group_id) : json(nullptr);
    humans.push_back(std::move(hj));
  }
  ordered_json path = ordered_json::array();
  for (const auto& p : s.plan_path) path.push_back({r6(p.x), r6(p.y)});
  return {{"robot",
           {{"x", r6(s.robot.q.x)},
            {"y", r6(s.robot.q.y)},
            {"psi", r6(s.robot.q.psi)},
            {"vx", r6(s.robot.v.vx)},
            {"vy", r6(s.robot.v.vy)},
            {"psidot", r6(s.robot.v.psidot)},
            {"speed", r6(s.robot.v.speed())}}},
          {"humans", std::move(humans)},
          {"plan", {{"id", s.plan_id}, {"path", std::move(path)}}},
          {"explain", s.explain}};
}

struct BodyVisitor {
  std::optional<std::pair<std::string, ordered_json>> operator()(const StateMsg& s) const {
    return std::pair{std::string("state"), state_body(s)};
  }
  std::optional<std::pair<std::string, ordered_json>> operator()(const Frame& f) const {
    ordered_json ann = ordered_json::array();
    for (const auto& a : f.annotations) {
      ordered_json aj{{"kind", a.kind == Annotation::Kind::human ? "human" : "obstacle"},
                      {"id", a.id},
                      {"distance", r6(a.distance)}};
      if (a.kind == Annotation::Kind::human) aj["activity"] = std::string(to_string(a.activity));
      ann.push_back(std::move(aj));
    }
    return std::pair{std::string("frame"), ordered_json{{"frame_seq", f.seq},
                                                        {"width", f.width},
                                                        {"height", f.height},
                                                        {"setting", f.setting},
                                                        {"annotations", std::move(ann)},
                                                        {"png", png_base64(f.width, f.height, f.to_rgb8())}}};
  }
  std::optional<std::pair<std::string, ordered_json>> operator()(const HeatmapMsg& h) const {
    ordered_json body{{"frame_seq", h.frame_seq},
                      {"focus_percentage", r6(h.heatmap.summary.focus_percentage)},
                      {"region", std::string(to_string(h.heatmap.summary.region))},
                      {"class", h.heatmap.summary.class_name},
                      {"summary", h.heatmap.summary.text}};
    if (h.frame) body["png"] = png_base64(h.frame->width, h.frame->height, overlay_rgb8(*h.frame, h.heatmap));
    return std::pair{std::string("heatmap"), std::move(body)};
  }
  std::optional<std::pair<std::string, ordered_json>> operator()(const Explanation& e) const {
    ordered_json body{{"seq", e.seq},
                      {"text", e.text},
                      {"caption_seq", e.caption_seq},
                      {"heatmap_seq", e.heatmap_seq},
                      {"latency_s", r6(e.latency_s)},
                      {"backend_id", e.backend_id}};
    return std::pair{std::string("explanation"), std::move(body)};
  }
  std::optional<std::pair<std::string, ordered_json>> operator()(const ConflictMsg& c) const {
    ordered_json zones = ordered_json::array();
    for (const auto& z : c.zones) zones.push_back(zone_json(z));
    return std::pair{std::string("conflict"),
                     ordered_json{{"margin", r6(c.margin)}, {"plan_id", c.plan_id}, {"zones", std::move(zones)}}};
  }
  std::optional<std::pair<std::string, ordered_json>> operator()(const sim::RunMetrics& m) const {
    return std::pair{std::string("metrics"), ordered_json(metrics_to_json(m))};
  }
  std::optional<std::pair<std::string, ordered_json>> operator()(const EpsilonMsg& e) const {
    return std::pair{std::string("epsilon"), ordered_json{{"value", r6(e.value)}, {"enabled", e.enabled}}};
  }
  std::optional<std::pair<std::string, ordered_json>> operator()(const Caption&) const { return std::nullopt; }
  std::optional<std::pair<std::string, ordered_json>> operator()(const VelocityCommand&) const {
    return std::nullopt;
  }
};

ordered_json envelope(const std::string& type, std::uint64_t seq, double stamp, ordered_json body) {
  return {{"type", type}, {"v", kWireVersion}, {"seq", seq}, {"stamp", r6(stamp)}, {"body", std::move(body)}};
}

const std::vector<std::string_view> kBridged{topics::kState,       topics::kCameraImage, topics::kHeatmapSummary,
                                             topics::kExplanation, topics::kConflict,    topics::kMetrics,
                                             topics::kEpsilon};

std::string query_param(const std::string& target, const std::string& key) {
  const auto q = target.find('?');
  if (q == std::string::npos) return {};
  std::istringstream in(target.substr(q + 1));
  std::string pair;
  while (std::getline(in, pair, '&')) {
    const auto eq = pair.find('=');
    if (pair.substr(0, eq) == key) return eq == std::string::npos ? std::string{} : pair.substr(eq + 1);
  }
  return {};
}

std::string_view mime_type(const std::filesystem::path& p) {
  const auto ext = p.extension().string();
  if (ext == ".html") return "text/html";
  if (ext == ".js") return "application/javascript";
  if (ext == ".css") return "text/css";
  if (ext == ".json") return "application/json";
  if (ext == ".png") return "image/png";
  if (ext == ".svg") return "image/svg+xml";
  return "application/octet-stream";
}

}  // namespace

CommandEffect handle_command(Runner& runner, const json& msg) {
  CommandEffect effect{inbound_from_json(msg), std::nullopt, false};
  if (const auto* c = std::get_if<CmdIn>(&effect.input)) {
    const double v_max = runner.scenario().constants.v_max;
    effect.forwarded = sim::clamp_command(c->cmd, v_max);
    effect.clamped = c->cmd.speed() > v_max + 1e-12;
  }
  runner.submit(effect.input);
  return effect;
}

std::optional<ordered_json> wire_event(const Bus::Message& m) {
  if (!m.payload) return std::nullopt;
  auto typed = std::visit(BodyVisitor{}, *m.payload);
  if (!typed) return std::nullopt;
  return envelope(typed->first, m.seq, m.stamp, std::move(typed->second));
}

// ---------------------------------------------------------------------------

class WsSession;

struct Gateway::Impl {
  Impl(Runner& r, GatewayConfig c) : runner(r), cfg(std::move(c)), acceptor(ioc) {
    if (!cfg.wall_clock) {
      const auto t0 = std::chrono::steady_clock::now();
      cfg.wall_clock = [t0] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      };
    }
    if (!(cfg.max_frame_rate > 0.0)) throw ConfigError("max_frame_rate must be positive");
    try {
      const tcp::endpoint ep(net::ip::make_address(cfg.address), cfg.port);
      acceptor.open(ep.protocol());
      acceptor.set_option(net::socket_base::reuse_address(true));
      acceptor.bind(ep);
      acceptor.listen(net::socket_base::max_listen_connections);
    } catch (const boost::system::system_error& e) {
      throw Error("cannot listen on " + cfg.address + ":" + std::to_string(cfg.port) + ": " + e.what());
    }
    bound_port = acceptor.local_endpoint().port();
    for (auto topic : kBridged)
      subs.push_back(runner.bus().subscribe(topic, 64, [this](const Bus::Message& m) { on_bus(m); }));
  }

  void start() {
    do_accept();
    io_thread = std::thread([this] { ioc.run(); });
  }

  void stop() {
    if (stopped.exchange(true)) return;
    subs.clear();
    ioc.stop();
    if (io_thread.joinable()) io_thread.join();
  }

  void do_accept();
  void on_bus(const Bus::Message& m);
  std::shared_ptr<const std::string> snapshot_text();

  Runner& runner;
  GatewayConfig cfg;
  net::io_context ioc;
  tcp::acceptor acceptor;
  std::uint16_t bound_port{0};
  std::thread io_thread;
  std::atomic<bool> stopped{false};
  std::vector<std::shared_ptr<Bus::Subscription>> subs;

  // runner thread
  std::map<std::string, double> last_sent;

  // io thread
  std::set<WsSession*> sessions;
  std::optional<ordered_json> last_state;

  std::atomic<std::size_t> client_count{0};
  mutable std::mutex count_mu;
  std::map<std::string, std::size_t> counts;
};

class WsSession : public std::enable_shared_from_this<WsSession> {
 public:
  WsSession(tcp::socket socket, Gateway::Impl* gw) : ws_(std::move(socket)), gw_(gw) {}

  void run(http::request<http::string_body> req) {
    beast::get_lowest_layer(ws_).expires_never();
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) { self->on_accept(ec); });
  }

  void send(std::shared_ptr<const std::string> text) {
    queue_.push_back(std::move(text));
    if (queue_.size() == 1) do_write();
  }

  void send_event(const std::string& type, const std::string& message) {
    ordered_json body{{"message", message}};
    const double stamp = gw_->runner.snapshot().value("stamp", 0.0);
    send(std::make_shared<const std::string>(envelope(type, ++local_seq_[type], stamp, std::move(body)).dump()));
  }

 private:
  void on_accept(beast::error_code ec) {
    if (ec) return;
    ws_.text(true);
    send(gw_->snapshot_text());
    gw_->sessions.insert(this);
    ++gw_->client_count;
    joined_ = true;
    do_read();
  }

  void do_read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
  }

  void on_read(beast::error_code ec) {
    if (ec) {
      leave();
      return;
    }
    const std::string text = beast::buffers_to_string(buffer_.data());
    buffer_.consume(buffer_.size());
    try {
      const json msg = json::parse(text);
      const CommandEffect eff = handle_command(gw_->runner, msg);
      if (eff.clamped) send_event("warning", "command clamped to v_max");
    } catch (const json::exception& e) {
      send_event("error", std::string("malformed message: ") + e.what());
    } catch (const Error& e) {
      send_event("error", e.what());
    }
    do_read();
  }

  void do_write() {
    ws_.async_write(net::buffer(*queue_.front()),
                    [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_write(ec); });
  }

  void on_write(beast::error_code ec) {
    if (ec) {
      queue_.clear();
      leave();
      return;
    }
    queue_.pop_front();
    if (!queue_.empty()) do_write();
  }

  void leave() {
    if (!joined_) return;
    joined_ = false;
    gw_->sessions.erase(this);
    --gw_->client_count;
  }

  websocket::stream<beast::tcp_stream> ws_;
  Gateway::Impl* gw_;
  beast::flat_buffer buffer_;
  std::deque<std::shared_ptr<const std::string>> queue_;
  std::map<std::string, std::uint64_t> local_seq_;
  bool joined_{false};
};

class HttpSession : public std::enable_shared_from_this<HttpSession> {
 public:
  HttpSession(tcp::socket socket, Gateway::Impl* gw) : stream_(std::move(socket)), gw_(gw) {}

  void run() {
    stream_.expires_after(std::chrono::seconds(30));
    http::async_read(stream_, buffer_, req_,
                     [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
  }

 private:
  void on_read(beast::error_code ec) {
    if (ec) return;
    const std::string target(req_.target());
    const std::string path = target.substr(0, target.find('?'));
    if (websocket::is_upgrade(req_)) {
      if (path != "/ws") return respond(http::status::not_found, "not found\n", "text/plain");
      if (!gw_->cfg.token.empty() && query_param(target, "token") != gw_->cfg.token)
        return respond(http::status::unauthorized, "bad token\n", "text/plain");
      std::make_shared<WsSession>(stream_.release_socket(), gw_)->run(std::move(req_));
      return;
    }
    if (req_.method() == http::verb::get && gw_->cfg.static_dir && path.find("..") == std::string::npos) {
      std::filesystem::path file = *gw_->cfg.static_dir / (path == "/" ? "index.html" : path.substr(1));
      std::ifstream in(file, std::ios::binary);
      if (in) {
        std::ostringstream ss;
        ss << in.rdbuf();
        return respond(http::status::ok, ss.str(), mime_type(file));
      }
    }
    respond(http::status::not_found, "not found\n", "text/plain");
  }

  void respond(http::status status, std::string body, std::string_view mime) {
    auto res = std::make_shared<http::response<http::string_body>>(status, req_.version());
    res->set(http::field::content_type, std::string(mime));
    res->body() = std::move(body);
    res->keep_alive(false);
    res->prepare_payload();
    http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code, std::size_t) {
      beast::error_code ignored;
      self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
    });
  }

  beast::tcp_stream stream_;
  Gateway::Impl* gw_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> req_;
};

void Gateway::Impl::do_accept() {
  acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
    if (ec) return;
    std::make_shared<HttpSession>(std::move(socket), this)->run();
    do_accept();
  });
}

void Gateway::Impl::on_bus(const Bus::Message& m) {
  const bool throttled = m.topic == topics::kCameraImage || m.topic == topics::kHeatmapSummary;
  if (throttled) {
    const double now = cfg.wall_clock();
    auto it = last_sent.find(m.topic);
    if (it != last_sent.end() && now - it->second < 1.0 / cfg.max_frame_rate - 1e-9) return;
    last_sent[m.topic] = now;
  }
  auto ev = wire_event(m);
  if (!ev) return;
  std::string type = (*ev)["type"].get<std::string>();
  auto text = std::make_shared<const std::string>(ev->dump());
  std::optional<ordered_json> state;
  if (type == "state") state = std::move(*ev);  // kept for late joiners
  {
    std::lock_guard lock(count_mu);
    ++counts[type];
  }
  net::post(ioc, [this, text = std::move(text), state = std::move(state)]() mutable {
    if (state) last_state = std::move(state);
    for (WsSession* s : sessions) s->send(text);
  });
}

std::shared_ptr<const std::string> Gateway::Impl::snapshot_text() {
  ordered_json ev;
  if (last_state) {
    ev = *last_state;
  } else {
    const json snap = runner.snapshot();
    ev = envelope("state", 0, snap.value("stamp", 0.0), ordered_json(snap));
  }
  ev["snapshot"] = true;
  ev["body"]["run_id"] = runner.run_id();
  ev["body"]["mode"] = std::string(to_string(runner.options().mode));
  ev["body"]["scenario"] = scenario_to_json(runner.scenario());
  return std::make_shared<const std::string>(ev.dump());
}

// ---------------------------------------------------------------------------

Gateway::Gateway(Runner& runner, GatewayConfig config) : impl_(std::make_shared<Impl>(runner, std::move(config))) {
  impl_->start();
}

Gateway::~Gateway() { stop(); }

std::uint16_t Gateway::port() const { return impl_->bound_port; }

std::size_t Gateway::clients() const { return impl_->client_count.load(); }

std::size_t Gateway::broadcast_count(const std::string& type) const {
  std::lock_guard lock(impl_->count_mu);
  auto it = impl_->counts.find(type);
  return it == impl_->counts.end() ? 0 : it->second;
}

void Gateway::stop() { impl_->stop(); }

}  // namespace xnav::gateway
