#include <gtest/gtest.h>

#include <string>
#include <atomic>
#include <thread>
#include <variant>

#include "xnav/bus/topic_bus.hpp"
#include "xnav/core/rng.hpp"

using namespace xnav;
using Bus = bus::TopicBus<std::string>;

TEST(BusAdvertise, AcceptsCanonicalNames) {
  Bus b;
  EXPECT_EQ(b.advertise("camera/image_raw").topic(), "camera/image_raw");
  EXPECT_EQ(b.advertise("blip/caption").topic(), "blip/caption");
  EXPECT_NO_THROW(b.advertise("camera/image_raw"));  // idempotent
}

TEST(BusAdvertise, RejectsInvalidCharset) {
  Bus b;
  EXPECT_THROW(b.advertise("Camera/Image Raw"), bus::BusError);
  EXPECT_THROW(b.advertise(""), bus::BusError);
}

TEST(BusPublish, DeliversFifo) {
  Bus b;
  auto h = b.advertise("blip/caption");
  auto sub = b.subscribe("blip/caption", 8);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(b.publish(h, "m" + std::to_string(i), 0.0), i + 1u);
  for (std::uint64_t seq = 1; seq <= 3; ++seq) {
    auto m = sub->try_pop();
    ASSERT_TRUE(m);
    EXPECT_EQ(m->seq, seq);
  }
  EXPECT_FALSE(sub->try_pop());
}

TEST(BusPublish, SeqAdvancesWithoutSubscribers) {
  Bus b;
  auto h = b.advertise("nav/state");
  EXPECT_EQ(b.publish(h, "a", 0.0), 1u);
  EXPECT_EQ(b.publish(h, "b", 0.0), 2u);
  auto late = b.subscribe("nav/state", 4);
  EXPECT_EQ(b.publish(h, "c", 0.0), 3u);
  EXPECT_EQ(late->try_pop()->seq, 3u);
}

TEST(BusPublish, FansOutIdenticalStreams) {
  Bus b;
  auto h = b.advertise("heatmap/summary");
  auto s1 = b.subscribe("heatmap/summary", 8);
  auto s2 = b.subscribe("heatmap/summary", 8);
  for (int i = 0; i < 5; ++i) b.publish(h, std::to_string(i), 0.1 * i);
  for (int i = 0; i < 5; ++i) {
    auto a = s1->try_pop();
    auto c = s2->try_pop();
    ASSERT_TRUE(a && c);
    EXPECT_EQ(a->seq, c->seq);
    EXPECT_EQ(*a->payload, *c->payload);
  }
}

TEST(BusSubscribe, KeepLatestDropsOldest) {
  Bus b;
  auto h = b.advertise("camera/image_raw");
  auto sub = b.subscribe("camera/image_raw", 1);
  b.publish(h, "A", 0.0);
  b.publish(h, "B", 0.0);
  auto m = sub->try_pop();
  ASSERT_TRUE(m);
  EXPECT_EQ(*m->payload, "B");
  EXPECT_EQ(sub->dropped(), 1u);
  EXPECT_FALSE(sub->try_pop());
}

TEST(BusSubscribe, NoReplayOfEarlierMessages) {
  Bus b;
  auto h = b.advertise("camera/image_raw");
  b.publish(h, "A", 0.0);
  auto sub = b.subscribe("camera/image_raw", 8);
  EXPECT_FALSE(sub->try_pop());
  EXPECT_THROW(b.subscribe("camera/image_raw", 0), bus::BusError);
}

TEST(BusPublish, FailsAfterShutdownAndOnDecreasingStamp) {
  Bus b;
  auto h = b.advertise("nav/cmd");
  b.publish(h, "x", 1.0);
  EXPECT_THROW(b.publish(h, "y", 0.5), bus::BusError);
  b.shutdown();
  EXPECT_THROW(b.publish(h, "z", 2.0), bus::BusError);
}

TEST(BusProperties, FifoNoDuplicatesAndDropAccounting) {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    Rng rng(seed);
    Bus b;
    auto h = b.advertise("t/x");
    const std::size_t depth = 1 + rng.index(6);
    auto sub = b.subscribe("t/x", depth);
    std::uint64_t published = 0;
    std::uint64_t last_seq = 0;
    std::uint64_t received = 0;
    for (int op = 0; op < 300; ++op) {
      if (rng.uniform() < 0.6) {
        b.publish(h, "p", 0.0);
        ++published;
      } else if (auto m = sub->try_pop()) {
        ASSERT_GT(m->seq, last_seq);
        last_seq = m->seq;
        ++received;
      }
    }
    while (auto m = sub->try_pop()) {
      ASSERT_GT(m->seq, last_seq);
      last_seq = m->seq;
      ++received;
    }
    EXPECT_EQ(sub->offered(), published);
    EXPECT_EQ(sub->delivered(), received);
    EXPECT_EQ(published, sub->delivered() + sub->dropped());
  }
}

TEST(BusCallbacks, SpinRunsInGlobalPublishOrder) {
  Bus b;
  auto cam = b.advertise("camera/image_raw");
  auto cap = b.advertise("blip/caption");
  std::vector<std::string> seen;
  auto s1 = b.subscribe("camera/image_raw", 8, [&](const Bus::Message& m) {
    seen.push_back("cam:" + *m.payload);
    b.publish(cap, "caption of " + *m.payload, m.stamp);
  });
  auto s2 = b.subscribe("blip/caption", 8, [&](const Bus::Message& m) { seen.push_back("cap:" + *m.payload); });
  b.publish(cam, "f1", 0.0);
  b.publish(cam, "f2", 0.0);
  EXPECT_TRUE(seen.empty());
  EXPECT_EQ(b.spin_some(), 4u);
  const std::vector<std::string> expected{"cam:f1", "cam:f2", "cap:caption of f1", "cap:caption of f2"};
  EXPECT_EQ(seen, expected);
}

TEST(BusCallbacks, ExecutorDeliversAcrossThreads) {
  Bus b;
  auto h = b.advertise("nav/cmd");
  std::atomic<int> count{0};
  auto sub = b.subscribe("nav/cmd", 64, [&](const Bus::Message&) { ++count; });
  {
    bus::BusExecutor<std::string> exec(b);
    std::thread producer([&] {
      for (int i = 0; i < 50; ++i) b.publish(h, "c", 0.0);
    });
    producer.join();
    for (int i = 0; i < 200 && count < 50; ++i) std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  EXPECT_EQ(count.load(), 50);
}

TEST(BusSubscribe, PopForWakesOnPublish) {
  Bus b;
  auto h = b.advertise("llm/explanation");
  auto sub = b.subscribe("llm/explanation", 2);
  std::thread producer([&] {
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    b.publish(h, "e", 0.0);
  });
  auto m = sub->pop_for(std::chrono::seconds(2));
  producer.join();
  ASSERT_TRUE(m);
  EXPECT_EQ(*m->payload, "e");
  EXPECT_GE(m->wall_stamp, 0.0);
}
