#include "vc/bench/knn.hpp"

#include <limits>

namespace vc::bench {

namespace {

std::uint64_t squared_l2(const std::uint8_t* a, const std::uint8_t* b, std::size_t n) {
  std::uint32_t acc = 0;  // 255^2 * n fits for n < 66,000
  for (std::size_t i = 0; i < n; ++i) {
    const int d = static_cast<int>(a[i]) - static_cast<int>(b[i]);
    acc += static_cast<std::uint32_t>(d * d);
  }
  return acc;
}

struct NnState {
  std::shared_ptr<const Dataset> train;
  std::shared_ptr<const Dataset> test;
};

}  // namespace

Neighbor nearest_neighbor(const Dataset& train, std::span<const std::uint8_t> query) {
  const std::size_t n = train.sample_bytes();
  if (query.size() != n) throw std::invalid_argument("query does not match the training sample size");
  if (n >= 66000) throw std::invalid_argument("samples too large for 32-bit distance accumulation");
  if (train.size() == 0) throw std::invalid_argument("empty training set");
  Neighbor best{0, 0, std::numeric_limits<std::uint64_t>::max()};
  const std::uint8_t* base = train.pixels.data();
  for (std::size_t i = 0; i < train.size(); ++i) {
    const auto d = squared_l2(base + i * n, query.data(), n);
    if (d < best.distance) best = {i, train.labels[i], d};
  }
  return best;
}

std::vector<Neighbor> classify(const Dataset& train, const Dataset& test, std::span<const std::size_t> test_indices) {
  std::vector<Neighbor> out;
  out.reserve(test_indices.size());
  for (auto i : test_indices) {
    if (i >= test.size()) throw std::out_of_range("test index out of range");
    out.push_back(nearest_neighbor(train, test.sample(i)));
  }
  return out;
}

Json to_json(const Neighbor& n) { return Json{{"index", n.index}, {"label", n.label}, {"distance", n.distance}}; }

Neighbor neighbor_from_json(const Json& j) {
  return {j.at("index").get<std::size_t>(), j.at("label").get<int>(), j.at("distance").get<std::uint64_t>()};
}

worker::TaskImpl nn1_task(std::size_t chunking) {
  return {kNnTask, "1", {kNnTrainResource, kNnTestResource}, chunking, [](const Json& args, worker::TaskContext& ctx) {
            NnState local;
            NnState* st = ctx.state ? ctx.state->find<NnState>(kNnTask) : nullptr;
            if (!st) st = ctx.state ? &ctx.state->emplace(kNnTask, NnState{}) : &local;
            if (!st->train) st->train = std::make_shared<const Dataset>(decode_dataset(*ctx.fetch(kNnTrainResource)));
            if (!st->test) st->test = std::make_shared<const Dataset>(decode_dataset(*ctx.fetch(kNnTestResource)));
            const auto one = [&](const Json& a) {
              const auto i = a.get<std::size_t>();
              if (i >= st->test->size()) throw worker::TaskFailure("test index out of range");
              return to_json(nearest_neighbor(*st->train, st->test->sample(i)));
            };
            if (!args.is_array()) return one(args);
            Json out = Json::array();
            for (const auto& a : args) out.push_back(one(a));
            return out;
          }};
}

}  // namespace vc::bench
