#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "vc/nn/tensor.hpp"

namespace vc::bench {

enum class DatasetErrorKind { io, bad_magic, truncated, count_mismatch, malformed };

class DatasetError : public std::runtime_error {
 public:
  DatasetError(DatasetErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  DatasetErrorKind kind() const { return kind_; }

 private:
  DatasetErrorKind kind_;
};

// Images stored as raw 8-bit pixels, sample-major, CHW within a sample.
struct Dataset {
  std::string name;   // mnist, cifar10 or synthetic
  std::string split;  // train or test
  nn::Shape sample_shape;
  std::vector<std::uint8_t> pixels;
  std::vector<int> labels;
  std::string source;  // file path or "seed=<n>"

  std::size_t size() const { return labels.size(); }
  std::size_t sample_bytes() const { return static_cast<std::size_t>(nn::numel(sample_shape)); }
  std::span<const std::uint8_t> sample(std::size_t i) const {
    return std::span(pixels).subspan(i * sample_bytes(), sample_bytes());
  }

  // [n, C, H, W] with pixels scaled to [0, 1].
  nn::Tensor<float> batch(std::span<const std::size_t> indices) const;
  std::vector<int> batch_labels(std::span<const std::size_t> indices) const;

  // First `count` samples as a new dataset.
  Dataset head(std::size_t count) const;
};

inline constexpr std::uint32_t kIdxImagesMagic = 2051;
inline constexpr std::uint32_t kIdxLabelsMagic = 2049;
inline constexpr std::size_t kCifarRecordBytes = 3073;

// IDX pair from the published MNIST layout. The counts in the two headers
// must agree and match the file lengths.
Dataset read_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

// dir holds train-images-idx3-ubyte / train-labels-idx1-ubyte (60,000) and
// t10k-images-idx3-ubyte / t10k-labels-idx1-ubyte (10,000).
Dataset load_mnist(const std::filesystem::path& dir, std::string_view split = "train");

// Records of 1 label byte and 3072 pixel bytes.
Dataset read_cifar10_batch(const std::filesystem::path& file);

// dir holds data_batch_1.bin .. data_batch_5.bin (50,000) and
// test_batch.bin (10,000).
Dataset load_cifar10(const std::filesystem::path& dir, std::string_view split = "train");

struct SyntheticConfig {
  nn::Shape sample_shape{3, 32, 32};
  int classes = 10;
  std::uint64_t seed = 1;
  double noise = 0.3;  // per-pixel standard deviation on the [0, 1] scale
  int grid = 4;        // prototype resolution before upsampling
};

// Seeded Gaussian blobs around one smooth prototype image per class. The
// prototypes depend only on the seed, so train and test splits share them.
Dataset make_synthetic(const SyntheticConfig& cfg, std::size_t count, std::string_view split = "train");

// Indices of mini-batch `b` under a per-epoch shuffle of 0..n-1; the
// remainder of each epoch is dropped.
std::vector<std::size_t> batch_indices(std::size_t n, std::size_t batch, std::uint64_t seed, std::size_t b);

// Compact binary form used when a dataset is shipped as a resource.
std::string encode_dataset(const Dataset& d);
Dataset decode_dataset(std::string_view bytes);

// "synthetic-mnist", "synthetic-cifar10", or a directory holding either
// published layout.
Dataset open_dataset(const std::string& spec, std::string_view split, std::size_t synthetic_count = 0);

}  // namespace vc::bench
