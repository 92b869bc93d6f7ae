#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "i8t/tensor.hpp"

namespace i8t {

struct Dataset {
  Shape sample_shape;  // (C,H,W)
  int num_classes = 10;
  std::vector<float> data;  // size() * sample numel, row-major per sample
  std::vector<int32_t> labels;

  int64_t size() const { return static_cast<int64_t>(labels.size()); }
  Tensor gather(const std::vector<int64_t>& indices) const;  // (B,C,H,W)
  std::vector<int32_t> gather_labels(const std::vector<int64_t>& indices) const;
};

// CIFAR-10 binary format: records of 1 label byte + 3072 pixel bytes
// (row-major R,G,B planes), 10000 records per file. Training files are
// data_batch_1..5.bin, test file test_batch.bin. Pixels are normalized with
// the usual per-channel statistics. limit < 0 loads everything.
Dataset load_cifar10(const std::string& dir, bool train, int64_t limit = -1);

// True when the directory holds the expected binary files.
bool cifar10_available(const std::string& dir);

struct BlobsSpec {
  int classes = 10;
  int64_t dim = 3 * 32 * 32;  // 3072 produces (3,32,32) samples, else (1,1,dim)
  int64_t n = 1000;
  uint64_t seed = 0;
  double noise = 1.0;
};

// Class-conditional Gaussian data: per-class template plus iid noise. Image
// shaped templates are low-pass filtered so convolutions have structure to
// exploit. Deterministic given the spec.
Dataset make_blobs(const BlobsSpec& spec);

}  // namespace i8t
