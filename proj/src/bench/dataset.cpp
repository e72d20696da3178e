#include "vc/bench/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "vc/util/bytes.hpp"

namespace vc::bench {

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError(DatasetErrorKind::io, "cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void require_count(const Dataset& d, std::size_t expected, const std::string& what) {
  if (d.size() != expected)
    throw DatasetError(DatasetErrorKind::count_mismatch,
                       what + ": expected " + std::to_string(expected) + " samples, found " + std::to_string(d.size()));
}

std::uint32_t header(std::string_view bytes, std::size_t offset, const fs::path& path) {
  if (bytes.size() < offset + 4) throw DatasetError(DatasetErrorKind::truncated, path.string() + ": truncated header");
  return read_be_u32(bytes, offset);
}

void append(Dataset& into, Dataset&& part) {
  into.pixels.insert(into.pixels.end(), part.pixels.begin(), part.pixels.end());
  into.labels.insert(into.labels.end(), part.labels.begin(), part.labels.end());
}

}  // namespace

nn::Tensor<float> Dataset::batch(std::span<const std::size_t> indices) const {
  nn::Shape shape{static_cast<nn::Index>(indices.size())};
  shape.insert(shape.end(), sample_shape.begin(), sample_shape.end());
  nn::Tensor<float> out(shape);
  const std::size_t n = sample_bytes();
  float* dst = out.data();
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= size()) throw std::out_of_range("sample index out of range");
    const std::uint8_t* src = pixels.data() + indices[k] * n;
    for (std::size_t i = 0; i < n; ++i) *dst++ = static_cast<float>(src[i]) / 255.0f;
  }
  return out;
}

std::vector<int> Dataset::batch_labels(std::span<const std::size_t> indices) const {
  std::vector<int> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(labels.at(i));
  return out;
}

Dataset Dataset::head(std::size_t count) const {
  Dataset out = *this;
  count = std::min(count, size());
  out.labels.resize(count);
  out.pixels.resize(count * sample_bytes());
  return out;
}

Dataset read_idx(const fs::path& images, const fs::path& labels) {
  const std::string img = read_file(images);
  const std::string lab = read_file(labels);
  if (header(img, 0, images) != kIdxImagesMagic)
    throw DatasetError(DatasetErrorKind::bad_magic, images.string() + ": not an IDX image file");
  if (header(lab, 0, labels) != kIdxLabelsMagic)
    throw DatasetError(DatasetErrorKind::bad_magic, labels.string() + ": not an IDX label file");
  const std::size_t n = header(img, 4, images);
  const std::size_t rows = header(img, 8, images);
  const std::size_t cols = header(img, 12, images);
  if (header(lab, 4, labels) != n)
    throw DatasetError(DatasetErrorKind::count_mismatch, "image and label files disagree on sample count");
  if (img.size() < 16 + n * rows * cols)
    throw DatasetError(DatasetErrorKind::truncated, images.string() + ": truncated");
  if (lab.size() < 8 + n) throw DatasetError(DatasetErrorKind::truncated, labels.string() + ": truncated");
  if (img.size() != 16 + n * rows * cols || lab.size() != 8 + n)
    throw DatasetError(DatasetErrorKind::malformed, "trailing bytes after IDX payload");
  Dataset d;
  d.name = "mnist";
  d.sample_shape = {1, static_cast<nn::Index>(rows), static_cast<nn::Index>(cols)};
  d.pixels.assign(img.begin() + 16, img.end());
  d.labels.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<unsigned char>(lab[8 + i]);
    if (label > 9) throw DatasetError(DatasetErrorKind::malformed, "label out of range at " + std::to_string(i));
    d.labels.push_back(label);
  }
  d.source = images.string();
  return d;
}

Dataset load_mnist(const fs::path& dir, std::string_view split) {
  const bool train = split == "train";
  if (!train && split != "test") throw std::invalid_argument("split must be train or test");
  const std::string prefix = train ? "train" : "t10k";
  Dataset d = read_idx(dir / (prefix + "-images-idx3-ubyte"), dir / (prefix + "-labels-idx1-ubyte"));
  if (d.sample_shape != nn::Shape{1, 28, 28})
    throw DatasetError(DatasetErrorKind::malformed, "MNIST images must be 28x28");
  require_count(d, train ? 60000 : 10000, "MNIST " + std::string(split));
  d.split = split;
  return d;
}

Dataset read_cifar10_batch(const fs::path& file) {
  const std::string bytes = read_file(file);
  if (bytes.empty() || bytes.size() % kCifarRecordBytes != 0)
    throw DatasetError(DatasetErrorKind::truncated,
                       file.string() + ": size is not a whole number of " + std::to_string(kCifarRecordBytes) +
                           "-byte records");
  const std::size_t n = bytes.size() / kCifarRecordBytes;
  Dataset d;
  d.name = "cifar10";
  d.sample_shape = {3, 32, 32};
  d.pixels.reserve(n * 3072);
  d.labels.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const char* rec = bytes.data() + i * kCifarRecordBytes;
    const int label = static_cast<unsigned char>(rec[0]);
    if (label > 9) throw DatasetError(DatasetErrorKind::malformed, file.string() + ": label out of range");
    d.labels.push_back(label);
    d.pixels.insert(d.pixels.end(), rec + 1, rec + kCifarRecordBytes);
  }
  d.source = file.string();
  return d;
}

Dataset load_cifar10(const fs::path& dir, std::string_view split) {
  const bool train = split == "train";
  if (!train && split != "test") throw std::invalid_argument("split must be train or test");
  std::vector<fs::path> files;
  if (train)
    for (int i = 1; i <= 5; ++i) files.push_back(dir / ("data_batch_" + std::to_string(i) + ".bin"));
  else
    files.push_back(dir / "test_batch.bin");
  Dataset d;
  for (const auto& f : files) {
    Dataset part = read_cifar10_batch(f);
    require_count(part, 10000, f.string());
    if (d.labels.empty()) {
      d = std::move(part);
    } else {
      append(d, std::move(part));
    }
  }
  d.split = split;
  d.source = dir.string();
  return d;
}

Dataset make_synthetic(const SyntheticConfig& cfg, std::size_t count, std::string_view split) {
  if (cfg.sample_shape.size() != 3 || cfg.classes < 2 || cfg.grid < 1)
    throw std::invalid_argument("invalid synthetic dataset config");
  const auto c = static_cast<std::size_t>(cfg.sample_shape[0]);
  const auto h = static_cast<std::size_t>(cfg.sample_shape[1]);
  const auto w = static_cast<std::size_t>(cfg.sample_shape[2]);
  const std::size_t g = static_cast<std::size_t>(cfg.grid);
  const std::size_t n_pix = c * h * w;

  std::mt19937_64 proto_rng(cfg.seed);
  std::uniform_real_distribution<double> level(0.1, 0.9);
  std::vector<std::vector<double>> prototypes(static_cast<std::size_t>(cfg.classes), std::vector<double>(n_pix));
  for (auto& proto : prototypes) {
    std::vector<double> coarse(c * g * g);
    for (auto& v : coarse) v = level(proto_rng);
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
          // bilinear upsampling of the coarse grid
          const double fy = (static_cast<double>(y) + 0.5) * static_cast<double>(g) / static_cast<double>(h) - 0.5;
          const double fx = (static_cast<double>(x) + 0.5) * static_cast<double>(g) / static_cast<double>(w) - 0.5;
          const double cy = std::clamp(fy, 0.0, static_cast<double>(g - 1));
          const double cx = std::clamp(fx, 0.0, static_cast<double>(g - 1));
          const std::size_t y0 = static_cast<std::size_t>(cy), x0 = static_cast<std::size_t>(cx);
          const std::size_t y1 = std::min(y0 + 1, g - 1), x1 = std::min(x0 + 1, g - 1);
          const double ty = cy - static_cast<double>(y0), tx = cx - static_cast<double>(x0);
          const auto at = [&](std::size_t yy, std::size_t xx) { return coarse[(ch * g + yy) * g + xx]; };
          proto[(ch * h + y) * w + x] = (1 - ty) * ((1 - tx) * at(y0, x0) + tx * at(y0, x1)) +
                                        ty * ((1 - tx) * at(y1, x0) + tx * at(y1, x1));
        }
  }

  std::seed_seq seq{cfg.seed, static_cast<std::uint64_t>(split == "train" ? 1 : 2)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> noise(0.0, cfg.noise);
  std::uniform_int_distribution<int> pick(0, cfg.classes - 1);
  Dataset d;
  d.name = "synthetic";
  d.split = split;
  d.sample_shape = cfg.sample_shape;
  d.pixels.resize(count * n_pix);
  d.labels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const int label = pick(rng);
    d.labels[i] = label;
    const auto& proto = prototypes[static_cast<std::size_t>(label)];
    for (std::size_t p = 0; p < n_pix; ++p) {
      const double v = std::clamp(proto[p] + noise(rng), 0.0, 1.0);
      d.pixels[i * n_pix + p] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
  }
  d.source = "seed=" + std::to_string(cfg.seed);
  return d;
}

std::vector<std::size_t> batch_indices(std::size_t n, std::size_t batch, std::uint64_t seed, std::size_t b) {
  if (batch == 0 || n < batch) throw std::invalid_argument("dataset smaller than one batch");
  const std::size_t per_epoch = n / batch;
  const std::size_t epoch = b / per_epoch;
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::seed_seq seq{seed, static_cast<std::uint64_t>(epoch)};
  std::mt19937_64 rng(seq);
  std::shuffle(perm.begin(), perm.end(), rng);
  const auto first = perm.begin() + static_cast<std::ptrdiff_t>((b % per_epoch) * batch);
  return std::vector<std::size_t>(first, first + static_cast<std::ptrdiff_t>(batch));
}

namespace {
constexpr std::string_view kMagic = "VCDS";

std::string_view take(std::string_view bytes, std::size_t& pos, std::size_t n) {
  if (bytes.size() < pos + n) throw DatasetError(DatasetErrorKind::truncated, "encoded dataset is truncated");
  auto out = bytes.substr(pos, n);
  pos += n;
  return out;
}

std::uint32_t take_u32(std::string_view bytes, std::size_t& pos) {
  take(bytes, pos, 4);
  return read_be_u32(bytes, pos - 4);
}

void put_string(std::string& out, const std::string& s) {
  append_be_u32(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}
}  // namespace

// magic, name, split, source, rank, dims, count, labels (1 byte each), pixels
std::string encode_dataset(const Dataset& d) {
  std::string out(kMagic);
  put_string(out, d.name);
  put_string(out, d.split);
  put_string(out, d.source);
  append_be_u32(out, static_cast<std::uint32_t>(d.sample_shape.size()));
  for (auto dim : d.sample_shape) append_be_u32(out, static_cast<std::uint32_t>(dim));
  append_be_u32(out, static_cast<std::uint32_t>(d.size()));
  for (int l : d.labels) out.push_back(static_cast<char>(l));
  out.append(reinterpret_cast<const char*>(d.pixels.data()), d.pixels.size());
  return out;
}

Dataset decode_dataset(std::string_view bytes) {
  std::size_t pos = 0;
  if (take(bytes, pos, 4) != kMagic) throw DatasetError(DatasetErrorKind::bad_magic, "not an encoded dataset");
  Dataset d;
  const auto str = [&] {
    const auto n = take_u32(bytes, pos);
    return std::string(take(bytes, pos, n));
  };
  d.name = str();
  d.split = str();
  d.source = str();
  const auto rank = take_u32(bytes, pos);
  if (rank > 8) throw DatasetError(DatasetErrorKind::malformed, "implausible sample rank");
  for (std::uint32_t i = 0; i < rank; ++i) d.sample_shape.push_back(take_u32(bytes, pos));
  const std::size_t n = take_u32(bytes, pos);
  const auto labels = take(bytes, pos, n);
  for (char c : labels) d.labels.push_back(static_cast<unsigned char>(c));
  const auto pix = take(bytes, pos, n * d.sample_bytes());
  if (pos != bytes.size()) throw DatasetError(DatasetErrorKind::malformed, "trailing bytes after encoded dataset");
  d.pixels.assign(pix.begin(), pix.end());
  return d;
}

Dataset open_dataset(const std::string& spec, std::string_view split, std::size_t synthetic_count) {
  if (spec == "synthetic-mnist" || spec == "synthetic-cifar10") {
    SyntheticConfig cfg;
    if (spec == "synthetic-mnist") cfg.sample_shape = {1, 28, 28};
    const std::size_t n = synthetic_count ? synthetic_count : (split == "train" ? 10000 : 1000);
    return make_synthetic(cfg, n, split);
  }
  const fs::path dir(spec);
  if (fs::exists(dir / "train-images-idx3-ubyte") || fs::exists(dir / "t10k-images-idx3-ubyte"))
    return load_mnist(dir, split);
  if (fs::exists(dir / "data_batch_1.bin") || fs::exists(dir / "test_batch.bin")) return load_cifar10(dir, split);
  throw DatasetError(DatasetErrorKind::io, "no MNIST or CIFAR-10 files under " + spec);
}

}  // namespace vc::bench
