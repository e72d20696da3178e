#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "vc/coordinator/coordinator.hpp"
#include "vc/framework/framework.hpp"
#include "vc/worker/worker.hpp"

namespace vc::fw {

struct LocalClusterConfig {
  std::size_t workers = 2;  // in-process worker threads; 0 waits for external ones
  sched::SchedulerConfig scheduler;
  std::string bind_address = "127.0.0.1";
  std::uint16_t port = 0;
  DurationMs no_ticket_retry_ms = 20;
  std::size_t worker_cache_bytes = 1u << 30;
};

// A coordinator with an in-memory resource store and a set of worker
// threads, all in this process.
class LocalCluster {
 public:
  LocalCluster(LocalClusterConfig cfg, std::shared_ptr<const worker::TaskRegistry> registry);
  ~LocalCluster();
  LocalCluster(const LocalCluster&) = delete;
  LocalCluster& operator=(const LocalCluster&) = delete;

  coord::Coordinator& coordinator() { return *coordinator_; }
  sched::SchedulerService& service() { return *service_; }
  const std::shared_ptr<sched::SchedulerService>& service_ptr() const { return service_; }
  Runtime& runtime() { return runtime_; }
  const worker::TaskRegistry& registry() const { return *registry_; }

  void put_resource(const std::string& name, std::string bytes);

  // Waits until `count` workers hold a session; false on timeout.
  bool wait_for_clients(std::size_t count, std::chrono::milliseconds timeout);

  std::vector<worker::WorkerStats> worker_stats() const;
  void stop_workers();

 private:
  LocalClusterConfig cfg_;
  std::filesystem::path root_;
  std::shared_ptr<const worker::TaskRegistry> registry_;
  std::shared_ptr<sched::SchedulerService> service_;
  std::unique_ptr<coord::Coordinator> coordinator_;
  Runtime runtime_;
  std::vector<std::unique_ptr<worker::Worker>> workers_;
  std::vector<std::jthread> threads_;
};

}  // namespace vc::fw
