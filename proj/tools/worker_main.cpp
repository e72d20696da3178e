// Native worker: runs every built-in task against a coordinator.

#include <CLI11.hpp>
#include <unistd.h>

#include <iostream>
#include <thread>

#include "common.hpp"
#include "vc/bench/knn.hpp"
#include "vc/dist/trainer.hpp"
#include "vc/framework/framework.hpp"
#include "vc/worker/worker.hpp"

namespace {

std::shared_ptr<vc::worker::TaskRegistry> full_registry(std::size_t nn_chunk) {
  auto r = std::make_shared<vc::worker::TaskRegistry>();
  vc::fw::register_builtin_tasks(*r);
  vc::dist::register_disttrain_tasks(*r);
  r->add(vc::bench::nn1_task(nn_chunk));
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vc worker"};
  vc::worker::WorkerConfig cfg;
  std::size_t cache_mb = 256, nn_chunk = 10;
  bool restart = false;
  app.add_option("--endpoint", cfg.endpoint, "coordinator WebSocket URL");
  app.add_option("--cache-mb", cache_mb, "resource cache capacity in MiB");
  app.add_option("--user-agent", cfg.user_agent);
  app.add_option("--nn-chunk", nn_chunk, "chunking of the nn1_chunk task (must match the coordinator side)");
  app.add_flag("--restart-on-error", restart, "re-exec the process after reporting a task error");
  CLI11_PARSE(app, argc, argv);

  cfg.cache_bytes = cache_mb << 20;
  if (restart) {
    cfg.on_task_error = [argv] {
      std::cerr << "worker: task error reported, restarting\n";
      ::execv("/proc/self/exe", argv);
      std::perror("execv");
    };
  }
  try {
    vc::worker::Worker worker(cfg, full_registry(nn_chunk));
    vc::tools::install_signal_handlers();
    std::jthread runner([&](std::stop_token st) {
      const auto reason = worker.run(st);
      if (reason == vc::worker::ExitReason::stop_command) vc::tools::g_interrupted = true;
    });
    while (!vc::tools::g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    runner.request_stop();
    runner.join();
    const auto s = worker.stats();
    std::cout << "processed " << s.processed << ", errors " << s.errors << ", refusals " << s.refusals << '\n';
  } catch (const std::exception& e) {
    std::cerr << "worker: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
