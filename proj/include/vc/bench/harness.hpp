#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "vc/bench/dataset.hpp"
#include "vc/bench/knn.hpp"
#include "vc/dist/trainer.hpp"

namespace vc::bench {

// ---- 1-NN ----

struct OneNnConfig {
  std::vector<std::size_t> clients{1, 2, 4};
  std::size_t chunk = 10;  // test images per ticket
  std::chrono::milliseconds timeout{600000};
};

struct OneNnRow {
  std::size_t clients = 0;
  double elapsed_s = 0;
  double ratio = 0;  // elapsed(k) / elapsed(1)
  double accuracy = 0;
  bool matches_sequential = false;
  double images_per_s_per_client = 0;
};

struct OneNnReport {
  std::size_t train_count = 0;
  std::size_t test_count = 0;
  double sequential_s = 0;
  double sequential_accuracy = 0;
  std::vector<OneNnRow> rows;

  const OneNnRow* row(std::size_t clients) const;
};

// Distributes every test image of `test` as chunked tickets over k local
// workers for each k in cfg.clients, and checks each run against the
// in-process classifier. Ratios are relative to the first entry with k = 1
// (or the smallest k when 1 is absent).
OneNnReport bench_1nn(const Dataset& train, const Dataset& test, const OneNnConfig& cfg);
void write_csv(const OneNnReport& r, std::ostream& out);

// ---- stand-alone training ----

struct TrainBenchConfig {
  dist::ModelConfig model;
  std::size_t max_batches = 2000;
  std::optional<double> stop_below_error;  // stop at the first evaluation under this test error
  std::size_t eval_every = 100;
  std::size_t eval_count = 500;  // test images per evaluation
};

struct TrainPoint {
  std::size_t batch = 0;  // batches trained so far
  double elapsed_s = 0;   // training time only
  double loss = 0;        // mean training loss since the previous point
  double train_error = 0;
  double test_error = 0;
};

struct TrainReport {
  std::vector<nn::Shape> shapes;  // shape audit, input first
  std::vector<std::string> layer_names;
  std::vector<TrainPoint> curve;
  std::size_t batches = 0;
  double elapsed_s = 0;
  std::optional<std::size_t> reached_at;  // first batch count meeting stop_below_error

  double batches_per_min() const { return elapsed_s > 0 ? batches * 60.0 / elapsed_s : 0; }
};

TrainReport bench_train(const Dataset& train, const Dataset& test, const TrainBenchConfig& cfg);
double test_error(const nn::Network<float>& net, const Dataset& test, std::size_t count);
// Stand-alone throughput over `batches` mini-batches.
double batches_per_min(const dist::ModelConfig& model, const Dataset& train, std::size_t batches);
void write_csv(const TrainReport& r, std::ostream& out);
void print_shape_audit(const TrainReport& r, std::ostream& out);

// ---- distributed training ----

struct DistBenchConfig {
  dist::ModelConfig model;
  std::vector<std::size_t> clients{1, 2, 4};
  std::size_t batches = 200;
  std::size_t agg_period = 1;
  std::size_t staleness = 2;
  std::size_t standalone_batches = 100;
};

struct DistRow {
  std::size_t clients = 0;
  double elapsed_s = 0;
  double conv_batches_per_min = 0;
  double fc_updates_per_min = 0;
  double conv_speedup = 0;  // vs k = 1
  double first_loss = 0;    // mean over the first tenth of rounds
  double last_loss = 0;     // mean over the last tenth of rounds
  double wire_bytes_per_batch = 0;
  std::size_t discarded_rounds = 0;
};

struct DistReport {
  double standalone_batches_per_min = 0;
  std::vector<DistRow> rows;
  std::vector<std::vector<dist::RoundMetrics>> rounds;  // per row

  const DistRow* row(std::size_t clients) const;
  // conv throughput at k = 1 over the stand-alone trainer
  double baseline_ratio() const;
};

DistReport bench_distributed_training(const Dataset& train, const DistBenchConfig& cfg);
void write_csv(const DistReport& r, std::ostream& out);
// round, wallclock, conv_batches_per_min, fc_updates_per_min, loss
void write_rounds_csv(std::span<const dist::RoundMetrics> rounds, std::ostream& out);

}  // namespace vc::bench
