#pragma once

#include <chrono>
#include <mutex>
#include <thread>

namespace xnav {

/// Seconds since an arbitrary origin.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual double now() const = 0;
  virtual void sleep_for(double seconds) = 0;
};

class SteadyClock final : public Clock {
 public:
  SteadyClock() : origin_(std::chrono::steady_clock::now()) {}
  double now() const override {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - origin_).count();
  }
  void sleep_for(double seconds) override {
    if (seconds > 0) std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
  }

 private:
  std::chrono::steady_clock::time_point origin_;
};

/// Manually advanced clock; sleep_for advances it instantly.
class VirtualClock final : public Clock {
 public:
  explicit VirtualClock(double start = 0.0) : now_(start) {}
  double now() const override {
    std::lock_guard lock(mu_);
    return now_;
  }
  void sleep_for(double seconds) override {
    std::lock_guard lock(mu_);
    if (seconds > 0) now_ += seconds;
  }
  void set(double t) {
    std::lock_guard lock(mu_);
    now_ = t;
  }

 private:
  mutable std::mutex mu_;
  double now_;
};

}  // namespace xnav
