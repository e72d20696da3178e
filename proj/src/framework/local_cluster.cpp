#include "vc/framework/local_cluster.hpp"

#include <random>

namespace vc::fw {

namespace {

std::filesystem::path make_root() {
  std::random_device rd;
  auto p = std::filesystem::temp_directory_path() / ("vc-cluster-" + std::to_string(rd()) + std::to_string(rd()));
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

LocalCluster::LocalCluster(LocalClusterConfig cfg, std::shared_ptr<const worker::TaskRegistry> registry)
    : cfg_(std::move(cfg)),
      root_(make_root()),
      registry_(std::move(registry)),
      service_(std::make_shared<sched::SchedulerService>(sched::Scheduler::open(cfg_.scheduler),
                                                         std::make_shared<SystemClock>())),
      runtime_(service_, registry_) {
  coord::CoordinatorConfig cc;
  cc.bind_address = cfg_.bind_address;
  cc.port = cfg_.port;
  cc.resource_root = root_;
  cc.no_ticket_retry_ms = cfg_.no_ticket_retry_ms;
  coordinator_ = std::make_unique<coord::Coordinator>(cc, service_);
  coordinator_->start();
  for (std::size_t i = 0; i < cfg_.workers; ++i) {
    worker::WorkerConfig wc;
    wc.endpoint = coordinator_->ws_url();
    wc.cache_bytes = cfg_.worker_cache_bytes;
    wc.initial_backoff_ms = 20;
    wc.max_backoff_ms = 500;
    wc.user_agent = "vc-local-worker";
    workers_.push_back(std::make_unique<worker::Worker>(wc, registry_));
    threads_.emplace_back([w = workers_.back().get()](std::stop_token st) { w->run(st); });
  }
}

LocalCluster::~LocalCluster() {
  stop_workers();
  coordinator_->stop();
  std::error_code ec;
  std::filesystem::remove_all(root_, ec);
}

void LocalCluster::put_resource(const std::string& name, std::string bytes) {
  coordinator_->resources().put(name, std::move(bytes));
}

bool LocalCluster::wait_for_clients(std::size_t count, std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (coordinator_->session_ids().size() < count) {
    if (std::chrono::steady_clock::now() >= deadline) return false;
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  return true;
}

std::vector<worker::WorkerStats> LocalCluster::worker_stats() const {
  std::vector<worker::WorkerStats> out;
  for (const auto& w : workers_) out.push_back(w->stats());
  return out;
}

void LocalCluster::stop_workers() {
  for (auto& t : threads_) t.request_stop();
  threads_.clear();
}

}  // namespace vc::fw
