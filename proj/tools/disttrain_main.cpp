// disttrain serve: coordinator plus FC server; conv rounds go to workers.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "common.hpp"
#include "vc/bench/harness.hpp"
#include "vc/nn/model_file.hpp"

int main(int argc, char** argv) {
  CLI::App app{"vc disttrain"};
  app.require_subcommand(1);
  auto* serve = app.add_subcommand("serve", "train the reference CNN with workers computing the conv layers");
  vc::dist::DistConfig cfg;
  std::size_t local = 0;
  std::string bind = "127.0.0.1:8080", dataset = "synthetic-cifar10", out, model_out;
  serve->add_option("--clients-expected", cfg.clients, "workers per round (k)");
  serve->add_option("--batches", cfg.batches, "mini-batches to train (N)");
  serve->add_option("--agg-period", cfg.agg_period, "mini-batches per worker per round (m)");
  serve->add_option("--staleness", cfg.staleness, "rounds a gradient set may lag (s)");
  serve->add_option("--seed", cfg.model.seed);
  serve->add_option("--bind", bind, "host:port for workers");
  serve->add_option("--local-workers", local, "worker threads started in this process");
  serve->add_option("--dataset", dataset, "CIFAR-10 directory or synthetic-cifar10");
  serve->add_option("--out", out, "metrics CSV (default stdout)");
  serve->add_option("--model-out", model_out, "trained model file");
  CLI11_PARSE(app, argc, argv);

  try {
    const auto train = vc::bench::open_dataset(dataset, "train");
    auto registry = std::make_shared<vc::worker::TaskRegistry>();
    vc::dist::register_disttrain_tasks(*registry);
    vc::fw::LocalClusterConfig cc;
    cc.workers = local;
    std::tie(cc.bind_address, cc.port) = vc::tools::parse_bind(bind);
    vc::fw::LocalCluster cluster(cc, registry);
    std::cerr << "waiting for " << cfg.clients << " workers on " << cluster.coordinator().ws_url() << '\n';
    cfg.starvation_timeout = std::chrono::hours(1);
    const auto r = vc::dist::run_distributed_training(cfg, train, cluster);
    std::cerr << "conv " << r.conv_batches_per_min() << " batches/min, fc " << r.fc_updates_per_min()
              << " updates/min, " << r.bytes.per_batch() << " wire bytes/batch, " << r.discarded_rounds
              << " discarded rounds\n";
    if (out.empty()) {
      vc::bench::write_rounds_csv(r.rounds, std::cout);
    } else {
      std::ofstream f(out);
      vc::bench::write_rounds_csv(r.rounds, f);
    }
    if (!model_out.empty()) std::ofstream(model_out) << vc::nn::serialize_model(r.model);
  } catch (const std::exception& e) {
    std::cerr << "disttrain: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
