#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "xnav/bus/topics.hpp"
#include "xnav/core/error.hpp"

namespace xnav::bus {

class BusError : public Error {
 public:
  using Error::Error;
};

/// In-process topic bus with keep-latest subscriber queues.
///
/// Publishing fans a message out to every subscription of the topic under a
/// single lock, so all subscribers observe the same per-topic order. When a
/// subscriber's queue is full the oldest queued message is dropped.
///
/// Callback subscriptions are not invoked on the publisher's thread; they run
/// when someone calls spin_some(), in global publish order. A test or a
/// batch run spins on its own thread (deterministic mode); BusExecutor spins
/// on a background thread.
template <class Payload>
class TopicBus {
 public:
  using WallClock = std::function<double()>;

  struct Message {
    std::string topic;
    std::uint64_t seq{0};
    double stamp{0.0};
    double wall_stamp{0.0};
    std::uint64_t order{0};  // global publish order across topics
    std::shared_ptr<const Payload> payload;
  };

  using Callback = std::function<void(const Message&)>;

  class Handle {
   public:
    const std::string& topic() const { return topic_; }

   private:
    friend class TopicBus;
    explicit Handle(std::string t) : topic_(std::move(t)) {}
    std::string topic_;
  };

  class Subscription {
   public:
    Subscription(std::string topic, std::size_t depth, Callback cb)
        : topic_(std::move(topic)), depth_(depth), callback_(std::move(cb)) {}

    const std::string& topic() const { return topic_; }

    std::optional<Message> try_pop() {
      std::lock_guard lock(mu_);
      return pop_locked();
    }

    template <class Rep, class Period>
    std::optional<Message> pop_for(std::chrono::duration<Rep, Period> timeout) {
      std::unique_lock lock(mu_);
      cv_.wait_for(lock, timeout, [&] { return !queue_.empty() || closed_; });
      return pop_locked();
    }

    std::size_t pending() const {
      std::lock_guard lock(mu_);
      return queue_.size();
    }
    std::uint64_t offered() const {
      std::lock_guard lock(mu_);
      return offered_;
    }
    std::uint64_t delivered() const {
      std::lock_guard lock(mu_);
      return delivered_;
    }
    std::uint64_t dropped() const {
      std::lock_guard lock(mu_);
      return dropped_;
    }

   private:
    friend class TopicBus;

    void push(const Message& m) {
      {
        std::lock_guard lock(mu_);
        ++offered_;
        if (queue_.size() >= depth_) {
          queue_.pop_front();
          ++dropped_;
        }
        queue_.push_back(m);
      }
      cv_.notify_one();
    }

    std::optional<std::uint64_t> front_order() const {
      std::lock_guard lock(mu_);
      if (queue_.empty()) return std::nullopt;
      return queue_.front().order;
    }

    void close() {
      {
        std::lock_guard lock(mu_);
        closed_ = true;
      }
      cv_.notify_all();
    }

    std::optional<Message> pop_locked() {
      if (queue_.empty()) return std::nullopt;
      Message m = std::move(queue_.front());
      queue_.pop_front();
      ++delivered_;
      return m;
    }

    std::string topic_;
    std::size_t depth_;
    Callback callback_;
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::deque<Message> queue_;
    std::uint64_t offered_{0};
    std::uint64_t delivered_{0};
    std::uint64_t dropped_{0};
    bool closed_{false};
  };

  TopicBus() : TopicBus(steady_seconds()) {}
  explicit TopicBus(WallClock wall) : wall_(std::move(wall)) {}

  TopicBus(const TopicBus&) = delete;
  TopicBus& operator=(const TopicBus&) = delete;

  /// Idempotent. Throws BusError for names outside ^[a-z0-9_/]+$.
  Handle advertise(std::string_view topic) {
    if (!topics::valid_topic_name(topic))
      throw BusError("invalid topic name '" + std::string(topic) + "'");
    std::lock_guard lock(mu_);
    topics_.try_emplace(std::string(topic));
    return Handle(std::string(topic));
  }

  /// Returns the per-topic sequence number (starting at 1).
  std::uint64_t publish(const Handle& h, Payload payload, double stamp) {
    auto shared = std::make_shared<const Payload>(std::move(payload));
    std::lock_guard lock(mu_);
    if (shut_down_) throw BusError("bus is shut down");
    TopicState& ts = topics_.at(h.topic());
    if (stamp < ts.last_stamp) throw BusError("stamp decreased on topic " + h.topic());
    ts.last_stamp = stamp;
    Message m{h.topic(), ++ts.seq, stamp, wall_(), ++order_, std::move(shared)};
    for (auto& weak : ts.subscribers)
      if (auto sub = weak.lock()) sub->push(m);
    std::erase_if(ts.subscribers, [](const auto& w) { return w.expired(); });
    cv_.notify_all();
    return m.seq;
  }

  std::shared_ptr<Subscription> subscribe(std::string_view topic, std::size_t depth,
                                          Callback cb = {}) {
    if (depth < 1) throw BusError("queue depth must be >= 1");
    if (!topics::valid_topic_name(topic))
      throw BusError("invalid topic name '" + std::string(topic) + "'");
    auto sub = std::make_shared<Subscription>(std::string(topic), depth, std::move(cb));
    std::lock_guard lock(mu_);
    topics_[std::string(topic)].subscribers.push_back(sub);
    if (sub->callback_) callback_subs_.push_back(sub);
    return sub;
  }

  /// Runs pending callbacks, oldest publish first, including messages
  /// published by the callbacks themselves, until no callback work remains.
  /// Returns the number of callbacks invoked.
  std::size_t spin_some() {
    std::lock_guard spin_lock(spin_mu_);
    std::size_t invoked = 0;
    for (;;) {
      std::shared_ptr<Subscription> best;
      std::uint64_t best_order = 0;
      {
        std::lock_guard lock(mu_);
        std::erase_if(callback_subs_, [](const auto& w) { return w.expired(); });
        for (auto& weak : callback_subs_) {
          auto sub = weak.lock();
          if (!sub) continue;
          auto o = sub->front_order();
          if (o && (!best || *o < best_order)) {
            best = sub;
            best_order = *o;
          }
        }
      }
      if (!best) return invoked;
      if (auto m = best->try_pop()) {
        best->callback_(*m);
        ++invoked;
      }
    }
  }

  /// Blocks until callback work may be available or the timeout elapses.
  void wait_for_work(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mu_);
    cv_.wait_for(lock, timeout, [&] {
      if (shut_down_) return true;
      for (auto& weak : callback_subs_)
        if (auto sub = weak.lock(); sub && sub->pending() > 0) return true;
      return false;
    });
  }

  void shutdown() {
    std::vector<std::shared_ptr<Subscription>> subs;
    {
      std::lock_guard lock(mu_);
      shut_down_ = true;
      for (auto& [name, ts] : topics_)
        for (auto& weak : ts.subscribers)
          if (auto s = weak.lock()) subs.push_back(s);
    }
    for (auto& s : subs) s->close();
    cv_.notify_all();
  }

  bool is_shut_down() const {
    std::lock_guard lock(mu_);
    return shut_down_;
  }

 private:
  struct TopicState {
    std::uint64_t seq{0};
    double last_stamp{-std::numeric_limits<double>::infinity()};
    std::vector<std::weak_ptr<Subscription>> subscribers;
  };

  static WallClock steady_seconds() {
    const auto origin = std::chrono::steady_clock::now();
    return [origin] {
      return std::chrono::duration<double>(std::chrono::steady_clock::now() - origin).count();
    };
  }

  WallClock wall_;
  mutable std::mutex mu_;
  std::mutex spin_mu_;
  std::condition_variable cv_;
  std::map<std::string, TopicState, std::less<>> topics_;
  std::vector<std::weak_ptr<Subscription>> callback_subs_;
  std::uint64_t order_{0};
  bool shut_down_{false};
};

/// Runs a bus's callbacks on a background thread until destroyed.
template <class Payload>
class BusExecutor {
 public:
  explicit BusExecutor(TopicBus<Payload>& bus)
      : bus_(bus), thread_([this](std::stop_token st) {
          while (!st.stop_requested()) {
            bus_.spin_some();
            bus_.wait_for_work(std::chrono::milliseconds(20));
          }
          bus_.spin_some();
        }) {}

  ~BusExecutor() {
    thread_.request_stop();
    thread_.join();
  }

  BusExecutor(const BusExecutor&) = delete;
  BusExecutor& operator=(const BusExecutor&) = delete;

 private:
  TopicBus<Payload>& bus_;
  std::jthread thread_;
};

}  // namespace xnav::bus
