#include <gtest/gtest.h>

#include <httplib.h>

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "xnav/captioner/captioner.hpp"
#include "xnav/core/base64.hpp"
#include "xnav/core/rng.hpp"
#include "xnav/saliency/png.hpp"
#include "test_server.hpp"

using namespace xnav;

namespace {

std::vector<Annotation> annotate(int conversing, int idle, int walking, int obstacles) {
  std::vector<Annotation> out;
  int id = 1;
  auto add = [&](int n, Activity a) {
    for (int i = 0; i < n; ++i) {
      Annotation x;
      x.id = id++;
      x.activity = a;
      out.push_back(x);
    }
  };
  add(walking, Activity::walking);  // deliberately not alphabetical
  add(conversing, Activity::conversing);
  add(idle, Activity::idle);
  for (int i = 0; i < obstacles; ++i) {
    Annotation o;
    o.kind = Annotation::Kind::obstacle;
    o.id = i;
    out.push_back(o);
  }
  return out;
}

Frame small_frame(std::uint64_t seq) {
  Frame f;
  f.width = f.height = 8;
  f.pixels.assign(8 * 8 * 3, 0.5f);
  f.seq = seq;
  f.stamp = 1.5;
  f.setting = "hallway";
  return f;
}

BackendConfig remote(int port, int retry = 2, double timeout = 2.0) {
  BackendConfig c;
  c.kind = BackendKind::remote;
  c.endpoint = "http://127.0.0.1:" + std::to_string(port);
  c.retry = retry;
  c.timeout_s = timeout;
  return c;
}

}  // namespace

TEST(MockCaption, GoldenTemplateTable) {
  std::ifstream in(std::string(XNAV_GOLDEN_DIR) + "/mock_captions.tsv");
  ASSERT_TRUE(in) << "missing golden table";
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    int c, i, w, o;
    std::string setting, expected;
    ss >> c >> i >> w >> o >> setting;
    std::getline(ss >> std::ws, expected);
    EXPECT_EQ(mock_caption_text(annotate(c, i, w, o), setting), expected) << line;
    ++rows;
  }
  EXPECT_GE(rows, 10);
}

TEST(MockCaption, FrameCaptionIsDeterministic) {
  Frame f = small_frame(4);
  f.annotations = annotate(2, 0, 0, 0);
  BackendConfig mock;
  Caption a = caption(f, mock), b = caption(f, mock);
  EXPECT_EQ(a.text, "two people having a conversation in a hallway.");
  EXPECT_EQ(a.text, b.text);
  EXPECT_EQ(a.source_seq, 4u);
  EXPECT_EQ(a.backend_id, "mock");
  EXPECT_GE(a.latency_s, 0.0);
  f.annotations.clear();
  EXPECT_EQ(caption(f, mock).text, "an empty corridor.");
}

TEST(Sanitize, Examples) {
  EXPECT_EQ(sanitize("A dog. Another dog."), "a dog.");
  EXPECT_EQ(sanitize("  hello world  "), "hello world.");
  EXPECT_THROW(sanitize(""), ValidationError);
  EXPECT_THROW(sanitize("   \n"), ValidationError);
  EXPECT_EQ(sanitize("Robot sees 3.5 m of space!"), "robot sees 3.5 m of space.");
}

TEST(Sanitize, Idempotent) {
  const std::string alphabet = "Ab .!?x  Yz\t3";
  for (std::uint64_t seed = 1; seed <= 300; ++seed) {
    Rng rng(seed);
    std::string s;
    const std::size_t n = 1 + rng.index(30);
    for (std::size_t i = 0; i < n; ++i) s += alphabet[rng.index(alphabet.size())];
    std::string once;
    try {
      once = sanitize(s);
    } catch (const ValidationError&) {
      continue;
    }
    EXPECT_EQ(sanitize(once), once) << "input '" << s << "'";
    EXPECT_EQ(once.back(), '.');
  }
}

TEST(RemoteCaption, SanitizesResponseAndSendsImage) {
  test::Server srv;
  std::string auth;
  int width = 0;
  std::size_t png_bytes = 0;
  srv.http.Post("/v1/caption", [&](const httplib::Request& req, httplib::Response& res) {
    auth = req.get_header_value("Authorization");
    auto j = nlohmann::json::parse(req.body);
    width = j.at("width");
    png_bytes = base64_decode(j.at("image_b64").get<std::string>()).size();
    res.set_content(R"({"caption":"Two People chatting. They look busy."})", "application/json");
  });
  srv.start();
  ::setenv("XNAV_TEST_CAPTION_KEY", "sekrit", 1);
  BackendConfig cfg = remote(srv.port);
  cfg.api_key_env = "XNAV_TEST_CAPTION_KEY";
  Caption c = caption(small_frame(9), cfg);
  EXPECT_EQ(c.text, "two People chatting.");  // only the first word is lowercased
  EXPECT_EQ(auth, "Bearer sekrit");
  EXPECT_EQ(width, 8);
  EXPECT_GT(png_bytes, 8u);
  EXPECT_EQ(c.source_seq, 9u);
}

TEST(RemoteCaption, RetriesThenUnavailable) {
  test::Server srv;
  std::atomic<int> hits{0};
  srv.http.Post("/v1/caption", [&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 503;
  });
  srv.start();
  EXPECT_THROW(caption(small_frame(1), remote(srv.port, 3)), BackendUnavailable);
  EXPECT_EQ(hits.load(), 3);
}

TEST(RemoteCaption, UnreachableEndpoint) {
  const int port = test::unused_port();
  EXPECT_THROW(caption(small_frame(1), remote(port, 2, 0.5)), BackendUnavailable);
}

TEST(RemoteCaption, MalformedResponseIsProtocolError) {
  test::Server srv;
  srv.http.Post("/v1/caption", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"text":"wrong key"})", "application/json");
  });
  srv.http.Post("/v1/broken", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content("not json", "text/plain");
  });
  srv.start();
  EXPECT_THROW(caption(small_frame(1), remote(srv.port)), ProtocolError);
  EXPECT_THROW(post_json(remote(srv.port), "/v1/broken", {}), ProtocolError);
}

TEST(BackendConfig, Validation) {
  BackendConfig c;
  c.kind = BackendKind::remote;
  EXPECT_THROW(c.validate(), ConfigError);
  c.endpoint = "http://127.0.0.1:1";
  c.timeout_s = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c.timeout_s = 1.0;
  EXPECT_NO_THROW(c.validate());
  c.api_key_env = "XNAV_TEST_DEFINITELY_UNSET";
  ::unsetenv("XNAV_TEST_DEFINITELY_UNSET");
  EXPECT_THROW(c.api_key(), ConfigError);
  BackendConfig mock;
  EXPECT_NO_THROW(mock.validate());
}
