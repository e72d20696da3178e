#include "vc/bench/harness.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>

#include "vc/framework/local_cluster.hpp"

namespace vc::bench {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

double accuracy_of(const std::vector<Neighbor>& got, const Dataset& test) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < got.size(); ++i) correct += got[i].label == test.labels[i];
  return got.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(got.size());
}

double mean_loss(std::span<const dist::RoundMetrics> rounds) {
  double s = 0;
  for (const auto& r : rounds) s += r.loss;
  return rounds.empty() ? 0.0 : s / static_cast<double>(rounds.size());
}

}  // namespace

const OneNnRow* OneNnReport::row(std::size_t clients) const {
  for (const auto& r : rows)
    if (r.clients == clients) return &r;
  return nullptr;
}

OneNnReport bench_1nn(const Dataset& train, const Dataset& test, const OneNnConfig& cfg) {
  if (cfg.clients.empty()) throw std::invalid_argument("no client counts given");
  if (train.sample_shape != test.sample_shape) throw std::invalid_argument("train and test shapes differ");
  OneNnReport report;
  report.train_count = train.size();
  report.test_count = test.size();

  std::vector<std::size_t> all(test.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const auto t0 = Clock::now();
  const auto sequential = classify(train, test, all);
  report.sequential_s = seconds_since(t0);
  report.sequential_accuracy = accuracy_of(sequential, test);

  const std::string train_bytes = encode_dataset(train), test_bytes = encode_dataset(test);
  std::vector<Json> inputs;
  for (auto i : all) inputs.push_back(Json(i));
  auto registry = std::make_shared<worker::TaskRegistry>();
  registry->add(nn1_task(cfg.chunk));

  auto clients = cfg.clients;
  std::sort(clients.begin(), clients.end());
  for (auto k : clients) {
    fw::LocalClusterConfig cc;
    cc.workers = k;
    fw::LocalCluster cluster(cc, registry);
    cluster.put_resource(kNnTrainResource, train_bytes);
    cluster.put_resource(kNnTestResource, test_bytes);
    if (!cluster.wait_for_clients(k, std::chrono::seconds(30))) throw std::runtime_error("workers did not connect");
    auto task = cluster.runtime().create_task("bench-1nn", kNnTask);
    const auto start = Clock::now();
    task.calculate(inputs);
    const auto results = task.block(cfg.timeout);
    OneNnRow row;
    row.clients = k;
    row.elapsed_s = seconds_since(start);
    std::vector<Neighbor> got;
    for (const auto& r : results) got.push_back(neighbor_from_json(r));
    row.matches_sequential = got == sequential;
    row.accuracy = accuracy_of(got, test);
    row.images_per_s_per_client = static_cast<double>(test.size()) / row.elapsed_s / static_cast<double>(k);
    report.rows.push_back(row);
  }
  const double base = report.rows.front().elapsed_s;
  for (auto& r : report.rows) r.ratio = r.elapsed_s / base;
  return report;
}

void write_csv(const OneNnReport& r, std::ostream& out) {
  out << "clients,elapsed_s,ratio,accuracy,matches_sequential,images_per_s_per_client\n";
  out << "0," << r.sequential_s << ",," << r.sequential_accuracy << ",1,\n";
  for (const auto& row : r.rows)
    out << row.clients << ',' << row.elapsed_s << ',' << row.ratio << ',' << row.accuracy << ','
        << (row.matches_sequential ? 1 : 0) << ',' << row.images_per_s_per_client << '\n';
}

double test_error(const nn::Network<float>& net, const Dataset& test, std::size_t count) {
  count = std::min(count, test.size());
  if (count == 0) throw std::invalid_argument("no test images");
  std::size_t wrong = 0;
  for (std::size_t first = 0; first < count; first += 100) {
    std::vector<std::size_t> idx(std::min<std::size_t>(100, count - first));
    std::iota(idx.begin(), idx.end(), first);
    const auto pred = nn::predict(net, test.batch(idx));
    for (std::size_t i = 0; i < idx.size(); ++i) wrong += pred[i] != test.labels[idx[i]];
  }
  return static_cast<double>(wrong) / static_cast<double>(count);
}

TrainReport bench_train(const Dataset& train, const Dataset& test, const TrainBenchConfig& cfg) {
  if (cfg.eval_every == 0) throw std::invalid_argument("eval_every must be positive");
  TrainReport report;
  report.shapes = nn::shape_audit(cfg.model.input_shape, cfg.model.layers);
  for (const auto& l : cfg.model.layers) report.layer_names.push_back(nn::layer_kind(l));
  dist::StandaloneTrainer trainer(cfg.model);
  double loss_sum = 0;
  std::size_t correct = 0, seen = 0;
  double train_time = 0;
  for (std::size_t b = 0; b < cfg.max_batches; ++b) {
    const auto t0 = Clock::now();
    const auto step = trainer.step(train, b);
    train_time += seconds_since(t0);
    loss_sum += step.loss;
    correct += step.correct;
    seen += cfg.model.batch_size;
    report.batches = b + 1;
    if (report.batches % cfg.eval_every == 0 || report.batches == cfg.max_batches) {
      TrainPoint p;
      p.batch = report.batches;
      p.elapsed_s = train_time;
      p.loss = loss_sum / static_cast<double>(seen / cfg.model.batch_size);
      p.train_error = 1.0 - static_cast<double>(correct) / static_cast<double>(seen);
      p.test_error = test_error(trainer.network(), test, cfg.eval_count);
      report.curve.push_back(p);
      loss_sum = 0;
      correct = seen = 0;
      if (cfg.stop_below_error && p.test_error < *cfg.stop_below_error) {
        report.reached_at = p.batch;
        break;
      }
    }
  }
  report.elapsed_s = train_time;
  return report;
}

double batches_per_min(const dist::ModelConfig& model, const Dataset& train, std::size_t batches) {
  dist::StandaloneTrainer trainer(model);
  const auto t0 = Clock::now();
  for (std::size_t b = 0; b < batches; ++b) trainer.step(train, b);
  return static_cast<double>(batches) * 60.0 / seconds_since(t0);
}

void write_csv(const TrainReport& r, std::ostream& out) {
  out << "batch,elapsed_s,loss,train_error,test_error\n";
  for (const auto& p : r.curve)
    out << p.batch << ',' << p.elapsed_s << ',' << p.loss << ',' << p.train_error << ',' << p.test_error << '\n';
}

void print_shape_audit(const TrainReport& r, std::ostream& out) {
  out << "input " << nn::to_string(r.shapes.front()) << '\n';
  for (std::size_t i = 0; i < r.layer_names.size(); ++i)
    out << "  " << i << ' ' << r.layer_names[i] << " -> " << nn::to_string(r.shapes[i + 1]) << '\n';
}

const DistRow* DistReport::row(std::size_t clients) const {
  for (const auto& r : rows)
    if (r.clients == clients) return &r;
  return nullptr;
}

double DistReport::baseline_ratio() const {
  const auto* one = row(1);
  return one && standalone_batches_per_min > 0 ? one->conv_batches_per_min / standalone_batches_per_min : 0;
}

DistReport bench_distributed_training(const Dataset& train, const DistBenchConfig& cfg) {
  DistReport report;
  report.standalone_batches_per_min = batches_per_min(cfg.model, train, cfg.standalone_batches);
  for (auto k : cfg.clients) {
    dist::DistConfig dc;
    dc.model = cfg.model;
    dc.clients = k;
    dc.batches = cfg.batches;
    dc.agg_period = cfg.agg_period;
    dc.staleness = cfg.staleness;
    dc.run_id = "bench-k" + std::to_string(k);
    const auto r = dist::run_distributed_training(dc, train);
    DistRow row;
    row.clients = k;
    row.elapsed_s = r.elapsed_s;
    row.conv_batches_per_min = r.conv_batches_per_min();
    row.fc_updates_per_min = r.fc_updates_per_min();
    const std::size_t tenth = std::max<std::size_t>(1, r.rounds.size() / 10);
    row.first_loss = mean_loss(std::span(r.rounds).first(tenth));
    row.last_loss = mean_loss(std::span(r.rounds).last(tenth));
    row.wire_bytes_per_batch = r.bytes.per_batch();
    row.discarded_rounds = r.discarded_rounds;
    report.rows.push_back(row);
    report.rounds.push_back(r.rounds);
  }
  const auto* one = report.row(1);
  for (auto& row : report.rows)
    row.conv_speedup = one && one->conv_batches_per_min > 0 ? row.conv_batches_per_min / one->conv_batches_per_min : 0;
  return report;
}

void write_csv(const DistReport& r, std::ostream& out) {
  out << "clients,elapsed_s,conv_batches_per_min,fc_updates_per_min,conv_speedup,first_loss,last_loss,"
         "wire_bytes_per_batch,discarded_rounds\n";
  out << "standalone,," << r.standalone_batches_per_min << ",,,,,,\n";
  for (const auto& row : r.rows)
    out << row.clients << ',' << row.elapsed_s << ',' << row.conv_batches_per_min << ',' << row.fc_updates_per_min
        << ',' << row.conv_speedup << ',' << row.first_loss << ',' << row.last_loss << ','
        << row.wire_bytes_per_batch << ',' << row.discarded_rounds << '\n';
}

void write_rounds_csv(std::span<const dist::RoundMetrics> rounds, std::ostream& out) {
  out << "round,wallclock,conv_batches_per_min,fc_updates_per_min,loss\n";
  for (const auto& m : rounds)
    out << m.round << ',' << m.wallclock_s << ',' << m.conv_batches_per_min << ',' << m.fc_updates_per_min << ','
        << m.loss << '\n';
}

}  // namespace vc::bench
