#pragma once

#include <filesystem>
#include <optional>

#include "vc/util/time.hpp"

namespace vc::sched {

struct SchedulerConfig {
  DurationMs redistribution_timeout = 300'000;
  DurationMs min_redistribution_interval = 10'000;
  std::optional<std::filesystem::path> persistence_path;
  // Unset: errored tickets are retried forever.
  std::optional<std::size_t> max_errors;

  // Both durations must be positive. The timeout is not required to exceed
  // the interval: a ticket is never handed out again before the interval
  // has elapsed, so the effective spacing is max(timeout, interval).
  void validate() const;
};

}  // namespace vc::sched
