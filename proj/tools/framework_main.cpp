// framework run-prime: the prime list project on a co-located coordinator.

#include <CLI11.hpp>

#include <iostream>

#include "common.hpp"
#include "vc/framework/local_cluster.hpp"

int main(int argc, char** argv) {
  CLI::App app{"vc framework"};
  app.require_subcommand(1);
  auto* prime = app.add_subcommand("run-prime", "list primes up to --max through the workers");
  std::uint64_t max = 10000;
  std::size_t local = 0, expected = 1;
  std::string bind = "127.0.0.1:8080";
  double timeout_s = 0;
  prime->add_option("--max", max, "largest candidate");
  prime->add_option("--bind", bind, "host:port for workers to connect to");
  prime->add_option("--local-workers", local, "worker threads started in this process");
  prime->add_option("--clients-expected", expected, "workers to wait for before submitting");
  prime->add_option("--timeout", timeout_s, "seconds to wait for results (0 waits forever)");
  CLI11_PARSE(app, argc, argv);

  try {
    auto catalog = std::make_shared<vc::worker::TaskRegistry>();
    vc::fw::register_builtin_tasks(*catalog);
    vc::fw::LocalClusterConfig cc;
    cc.workers = local;
    std::tie(cc.bind_address, cc.port) = vc::tools::parse_bind(bind);
    vc::fw::LocalCluster cluster(cc, catalog);
    std::cerr << "waiting for " << std::max(expected, local) << " workers on " << cluster.coordinator().ws_url()
              << '\n';
    cluster.wait_for_clients(std::max(expected, local), std::chrono::hours(24));
    std::optional<std::chrono::milliseconds> timeout;
    if (timeout_s > 0) timeout = std::chrono::milliseconds(static_cast<long>(timeout_s * 1000));
    vc::fw::PrimeListMakerProject project(max, timeout);
    project.run(cluster.runtime());
    for (auto p : project.primes()) std::cout << p << " is a prime number.\n";
  } catch (const std::exception& e) {
    std::cerr << "framework: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
