#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>

namespace vc {

// Milliseconds since an arbitrary epoch. Scheduler logic never reads a
// clock itself; callers pass `now` explicitly.
using TimestampMs = std::int64_t;
using DurationMs = std::int64_t;

class Clock {
 public:
  virtual ~Clock() = default;
  virtual TimestampMs now() const = 0;
};

class SystemClock final : public Clock {
 public:
  TimestampMs now() const override {
    using namespace std::chrono;
    return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
  }
};

// Settable clock for simulated-time tests.
class ManualClock final : public Clock {
 public:
  explicit ManualClock(TimestampMs start = 0) : now_(start) {}
  TimestampMs now() const override { return now_.load(); }
  void set(TimestampMs t) { now_.store(t); }
  void advance(DurationMs d) { now_.fetch_add(d); }

 private:
  std::atomic<TimestampMs> now_;
};

}  // namespace vc
