#include "i8t/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "i8t/rng.hpp"

namespace i8t {

Tensor Dataset::gather(const std::vector<int64_t>& indices) const {
  const int64_t numel = sample_shape.numel();
  std::vector<int64_t> dims = {static_cast<int64_t>(indices.size())};
  for (int64_t d : sample_shape.dims()) dims.push_back(d);
  Tensor out(Shape(dims));
  for (size_t b = 0; b < indices.size(); ++b) {
    if (indices[b] < 0 || indices[b] >= size()) throw std::out_of_range("Dataset::gather");
    std::copy_n(data.begin() + indices[b] * numel, numel, out.data() + static_cast<int64_t>(b) * numel);
  }
  return out;
}

std::vector<int32_t> Dataset::gather_labels(const std::vector<int64_t>& indices) const {
  std::vector<int32_t> out(indices.size());
  for (size_t b = 0; b < indices.size(); ++b) out[b] = labels[static_cast<size_t>(indices[b])];
  return out;
}

namespace {

constexpr int64_t kCifarRecordBytes = 3073;
constexpr int64_t kCifarRecordsPerFile = 10000;
constexpr double kCifarMean[3] = {0.4914, 0.4822, 0.4465};
constexpr double kCifarStd[3] = {0.2470, 0.2435, 0.2616};

void load_cifar_file(const std::string& path, Dataset& ds, int64_t limit) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open CIFAR-10 file: " + path);
  f.seekg(0, std::ios::end);
  const int64_t bytes = static_cast<int64_t>(f.tellg());
  if (bytes != kCifarRecordBytes * kCifarRecordsPerFile)
    throw std::runtime_error("CIFAR-10 file has unexpected size: " + path);
  f.seekg(0);
  std::vector<unsigned char> record(kCifarRecordBytes);
  for (int64_t r = 0; r < kCifarRecordsPerFile; ++r) {
    if (limit >= 0 && ds.size() >= limit) return;
    f.read(reinterpret_cast<char*>(record.data()), kCifarRecordBytes);
    if (!f) throw std::runtime_error("short read in CIFAR-10 file: " + path);
    if (record[0] > 9) throw std::runtime_error("CIFAR-10 label out of range in " + path);
    ds.labels.push_back(static_cast<int32_t>(record[0]));
    for (int c = 0; c < 3; ++c)
      for (int p = 0; p < 1024; ++p) {
        const double v = record[1 + c * 1024 + p] / 255.0;
        ds.data.push_back(static_cast<float>((v - kCifarMean[c]) / kCifarStd[c]));
      }
  }
}

}  // namespace

bool cifar10_available(const std::string& dir) {
  namespace fs = std::filesystem;
  if (dir.empty()) return false;
  for (int i = 1; i <= 5; ++i)
    if (!fs::exists(fs::path(dir) / ("data_batch_" + std::to_string(i) + ".bin"))) return false;
  return fs::exists(fs::path(dir) / "test_batch.bin");
}

Dataset load_cifar10(const std::string& dir, bool train, int64_t limit) {
  Dataset ds;
  ds.sample_shape = Shape{3, 32, 32};
  ds.num_classes = 10;
  namespace fs = std::filesystem;
  if (train) {
    for (int i = 1; i <= 5 && (limit < 0 || ds.size() < limit); ++i)
      load_cifar_file((fs::path(dir) / ("data_batch_" + std::to_string(i) + ".bin")).string(), ds, limit);
  } else {
    load_cifar_file((fs::path(dir) / "test_batch.bin").string(), ds, limit);
  }
  return ds;
}

Dataset make_blobs(const BlobsSpec& spec) {
  if (spec.classes < 2 || spec.n < spec.classes || spec.dim < 1)
    throw std::invalid_argument("make_blobs: bad spec");
  Dataset ds;
  ds.num_classes = spec.classes;
  const bool image_shaped = (spec.dim == 3 * 32 * 32);
  ds.sample_shape = image_shaped ? Shape{3, 32, 32} : Shape{1, 1, spec.dim};

  InitRng rng(spec.seed * 0x9e3779b97f4a7c15ull + 12345);
  // class templates
  std::vector<std::vector<float>> templates(static_cast<size_t>(spec.classes));
  for (int k = 0; k < spec.classes; ++k) {
    std::vector<float>& t = templates[static_cast<size_t>(k)];
    t.resize(static_cast<size_t>(spec.dim));
    for (auto& v : t) v = static_cast<float>(rng.next_gaussian());
    if (image_shaped) {
      // two passes of 3x3 box blur per channel, then renormalize to unit std
      std::vector<float> tmp(t.size());
      for (int pass = 0; pass < 2; ++pass) {
        for (int c = 0; c < 3; ++c)
          for (int i = 0; i < 32; ++i)
            for (int j = 0; j < 32; ++j) {
              double acc = 0.0;
              int cnt = 0;
              for (int di = -1; di <= 1; ++di)
                for (int dj = -1; dj <= 1; ++dj) {
                  int ii = i + di, jj = j + dj;
                  if (ii < 0 || ii > 31 || jj < 0 || jj > 31) continue;
                  acc += t[static_cast<size_t>(c * 1024 + ii * 32 + jj)];
                  ++cnt;
                }
              tmp[static_cast<size_t>(c * 1024 + i * 32 + j)] = static_cast<float>(acc / cnt);
            }
        t = tmp;
      }
      double sq = 0.0;
      for (float v : t) sq += static_cast<double>(v) * v;
      const double scale = 1.0 / std::max(std::sqrt(sq / static_cast<double>(spec.dim)), 1e-9);
      for (auto& v : t) v = static_cast<float>(v * scale);
    }
  }
  ds.data.reserve(static_cast<size_t>(spec.n * spec.dim));
  ds.labels.reserve(static_cast<size_t>(spec.n));
  for (int64_t i = 0; i < spec.n; ++i) {
    const int k = static_cast<int>(i % spec.classes);
    ds.labels.push_back(k);
    const std::vector<float>& t = templates[static_cast<size_t>(k)];
    for (int64_t d = 0; d < spec.dim; ++d)
      ds.data.push_back(t[static_cast<size_t>(d)] +
                        static_cast<float>(rng.next_gaussian() * spec.noise));
  }
  return ds;
}

}  // namespace i8t
