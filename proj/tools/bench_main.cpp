// bench 1nn | train | dist

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "vc/bench/harness.hpp"

namespace {

std::vector<std::size_t> parse_clients(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) out.push_back(std::stoul(item));
  if (out.empty()) throw std::invalid_argument("empty --clients list");
  return out;
}

void emit(const std::string& path, const std::function<void(std::ostream&)>& write) {
  if (path.empty() || path == "-") {
    write(std::cout);
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  write(out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vc bench"};
  app.require_subcommand(1);
  std::string clients = "1,2,4", dataset, out;

  auto* nn1 = app.add_subcommand("1nn", "distributed 1-nearest-neighbour classification");
  std::size_t train_count = 10000, test_count = 1000, chunk = 10;
  nn1->add_option("--clients", clients, "comma-separated worker counts");
  nn1->add_option("--dataset", dataset, "MNIST directory, or synthetic-mnist")->default_val("synthetic-mnist");
  nn1->add_option("--train-count", train_count);
  nn1->add_option("--test-count", test_count);
  nn1->add_option("--chunk", chunk, "test images per ticket");
  nn1->add_option("--out", out, "report CSV (default stdout)");

  auto* train = app.add_subcommand("train", "stand-alone CNN training throughput and error curve");
  std::size_t batches = 2000, eval_every = 100, throughput_batches = 20;
  train->add_option("--dataset", dataset, "CIFAR-10 directory, or synthetic-cifar10")->default_val("synthetic-cifar10");
  train->add_option("--batches", batches, "mini-batches of 50");
  train->add_option("--eval-every", eval_every);
  train->add_option("--throughput-batches", throughput_batches, "batches per repeatability run");
  train->add_option("--out", out, "error-curve CSV (default stdout)");

  auto* dist = app.add_subcommand("dist", "hybrid distributed training speed per client count");
  std::size_t agg_period = 1, staleness = 2;
  std::string rounds_out;
  dist->add_option("--clients", clients, "comma-separated worker counts");
  dist->add_option("--dataset", dataset)->default_val("synthetic-cifar10");
  dist->add_option("--batches", batches, "mini-batches per client count")->default_val(200);
  dist->add_option("--agg-period", agg_period);
  dist->add_option("--staleness", staleness);
  dist->add_option("--rounds-out", rounds_out, "per-round metrics CSV for the largest client count");
  dist->add_option("--out", out, "speedup table CSV (default stdout)");
  CLI11_PARSE(app, argc, argv);

  try {
    if (*nn1) {
      const auto tr = vc::bench::open_dataset(dataset, "train", train_count).head(train_count);
      const auto te = vc::bench::open_dataset(dataset, "test", test_count).head(test_count);
      vc::bench::OneNnConfig cfg;
      cfg.clients = parse_clients(clients);
      cfg.chunk = chunk;
      const auto r = vc::bench::bench_1nn(tr, te, cfg);
      std::cerr << "1-NN " << r.test_count << " test x " << r.train_count << " train, sequential "
                << r.sequential_s << " s, accuracy " << r.sequential_accuracy << '\n';
      for (const auto& row : r.rows)
        std::cerr << "  k=" << row.clients << "  " << row.elapsed_s << " s  ratio " << row.ratio
                  << (row.matches_sequential ? "  identical to sequential" : "  MISMATCH") << '\n';
      emit(out, [&](std::ostream& o) { vc::bench::write_csv(r, o); });
    } else if (*train) {
      const auto tr = vc::bench::open_dataset(dataset, "train");
      const auto te = vc::bench::open_dataset(dataset, "test");
      vc::bench::TrainBenchConfig cfg;
      cfg.max_batches = batches;
      cfg.eval_every = eval_every;
      const double first = vc::bench::batches_per_min(cfg.model, tr, throughput_batches);
      const double second = vc::bench::batches_per_min(cfg.model, tr, throughput_batches);
      const auto r = vc::bench::bench_train(tr, te, cfg);
      vc::bench::print_shape_audit(r, std::cerr);
      std::cerr << "throughput " << first << " / " << second << " batches/min (repeat ratio " << second / first
                << "); reference figures: ConvNetJS 17.55, Sukiyaki 545.39\n";
      emit(out, [&](std::ostream& o) { vc::bench::write_csv(r, o); });
    } else {
      const auto tr = vc::bench::open_dataset(dataset, "train");
      vc::bench::DistBenchConfig cfg;
      cfg.clients = parse_clients(clients);
      cfg.batches = batches;
      cfg.agg_period = agg_period;
      cfg.staleness = staleness;
      const auto r = vc::bench::bench_distributed_training(tr, cfg);
      std::cerr << "stand-alone " << r.standalone_batches_per_min << " batches/min\n";
      for (const auto& row : r.rows)
        std::cerr << "  k=" << row.clients << "  conv " << row.conv_batches_per_min << "/min (x" << row.conv_speedup
                  << ")  fc " << row.fc_updates_per_min << "/min (x"
                  << row.fc_updates_per_min / r.standalone_batches_per_min << " of stand-alone)  loss "
                  << row.first_loss << " -> " << row.last_loss << "  " << row.wire_bytes_per_batch
                  << " wire bytes/batch\n";
      emit(out, [&](std::ostream& o) { vc::bench::write_csv(r, o); });
      if (!rounds_out.empty())
        emit(rounds_out, [&](std::ostream& o) { vc::bench::write_rounds_csv(r.rounds.back(), o); });
    }
  } catch (const std::exception& e) {
    std::cerr << "bench: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
