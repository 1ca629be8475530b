#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bwn/rng.hpp"
#include "bwn/tensor.hpp"

namespace bwn {

/// An immutable, normalized classification dataset. Images are flattened
/// row-major [n, dim] with pixel values in [0, 1].
struct Dataset {
  Tensor<float> images;
  std::vector<int> labels;
  std::string split;  // train / val / test

  std::size_t size() const { return labels.size(); }
  std::size_t input_dim() const { return images.rank() == 2 ? images.dim(1) : 0; }
};

struct DataBundle {
  const Dataset* train = nullptr;
  const Dataset* val = nullptr;
  const Dataset* test = nullptr;
};

struct MnistData {
  Dataset train, val, test;

  DataBundle bundle() const { return {&train, &val, &test}; }
};

/// Loads the canonical MNIST IDX files (optionally .gz) from `dir` and
/// applies the deterministic split: validation is the last 5,000 images of
/// the 60,000-image training file in file order, training the first 55,000.
/// Pixels are normalized by 1/255; nothing else.
MnistData load_mnist(const std::string& dir);

/// The split rule alone, for any 60,000-example (images, labels) pair in
/// file order.
void split_train_val(const Dataset& full, Dataset& train, Dataset& val);

/// Deterministic epoch shuffle: a uniform permutation of [0, n) drawn from
/// (seed, epoch).
std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed, std::size_t epoch);

struct Batch {
  Tensor<float> x;
  std::vector<int> y;
  std::size_t size() const { return y.size(); }
};

/// Epoch-seeded shuffled batches; the final short batch is included. Same
/// (seed, epoch) yields the identical batch sequence.
class BatchStream {
public:
  BatchStream(const Dataset& data, std::size_t batch_size, std::uint64_t seed, std::size_t epoch);

  bool next(Batch& out);
  std::size_t batch_count() const;

private:
  const Dataset& data_;
  std::size_t batch_size_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

/// Gathers the given example indices into a batch.
Batch gather(const Dataset& data, const std::vector<std::size_t>& idx, std::size_t begin,
             std::size_t count);

/// Small deterministic gaussian-blob classification set for toy-scale runs.
Dataset make_synthetic(std::size_t n, std::size_t input_dim, std::size_t classes,
                       std::uint64_t seed, const std::string& split_tag);

}  // namespace bwn
