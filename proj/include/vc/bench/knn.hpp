#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vc/bench/dataset.hpp"
#include "vc/util/json.hpp"
#include "vc/worker/task.hpp"

namespace vc::bench {

struct Neighbor {
  std::size_t index = 0;  // into the training set
  int label = 0;
  std::uint64_t distance = 0;  // squared L2 over raw 8-bit pixels

  bool operator==(const Neighbor&) const = default;
};

// Exact integer distances; the lowest training index wins ties.
Neighbor nearest_neighbor(const Dataset& train, std::span<const std::uint8_t> query);
std::vector<Neighbor> classify(const Dataset& train, const Dataset& test, std::span<const std::size_t> test_indices);

Json to_json(const Neighbor& n);
Neighbor neighbor_from_json(const Json& j);

inline constexpr const char* kNnTask = "nn1_chunk";
inline constexpr const char* kNnTrainResource = "bench/1nn/train.vcds";
inline constexpr const char* kNnTestResource = "bench/1nn/test.vcds";

// Input: test-set index. Output: {"index", "label", "distance"} of the nearest
// training sample.
worker::TaskImpl nn1_task(std::size_t chunking);

}  // namespace vc::bench
