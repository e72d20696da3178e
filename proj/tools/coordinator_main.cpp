// Stand-alone coordinator: serves tickets, resources and the console.

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <chrono>
#include <iostream>
#include <thread>

#include "common.hpp"
#include "vc/coordinator/coordinator.hpp"

int main(int argc, char** argv) {
  CLI::App app{"vc coordinator"};
  std::string bind = "127.0.0.1:8080";
  std::string resource_root = ".";
  std::string journal;
  std::string static_root;
  std::string admin_token;
  double timeout_s = 300, interval_s = 10;
  app.add_option("--bind", bind, "host:port to listen on");
  app.add_option("--resource-root", resource_root, "directory served under /resource/");
  app.add_option("--journal", journal, "append-only ticket journal; replayed on start");
  app.add_option("--timeout", timeout_s, "seconds before a distributed ticket is handed out again");
  app.add_option("--redist-interval", interval_s, "minimum seconds between two hand-outs of one ticket");
  app.add_option("--admin-token", admin_token, "token required by POST /console");
  app.add_option("--static-root", static_root, "directory served at / (worker.html)");
  CLI11_PARSE(app, argc, argv);

  try {
    vc::sched::SchedulerConfig sc;
    sc.redistribution_timeout = static_cast<vc::DurationMs>(timeout_s * 1000);
    sc.min_redistribution_interval = static_cast<vc::DurationMs>(interval_s * 1000);
    if (!journal.empty()) sc.persistence_path = journal;
    sc.validate();
    auto service = std::make_shared<vc::sched::SchedulerService>(vc::sched::Scheduler::open(sc),
                                                                 std::make_shared<vc::SystemClock>());
    vc::coord::CoordinatorConfig cc;
    std::tie(cc.bind_address, cc.port) = vc::tools::parse_bind(bind);
    cc.resource_root = resource_root;
    if (!static_root.empty()) cc.static_root = static_root;
    if (!admin_token.empty()) cc.admin_token = admin_token;
    vc::coord::Coordinator coord(cc, service);
    vc::tools::install_signal_handlers();
    coord.start();
    std::cout << coord.ws_url() << std::endl;
    while (!vc::tools::g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    spdlog::info("shutting down");
    coord.stop();
  } catch (const std::exception& e) {
    std::cerr << "coordinator: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
