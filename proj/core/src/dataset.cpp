#include "bwn/dataset.hpp"

#include <filesystem>

#include "bwn/errors.hpp"
#include "bwn/idx.hpp"

namespace bwn {

namespace {

constexpr std::size_t kMnistTrain = 55000;
constexpr std::size_t kMnistVal = 5000;
constexpr std::size_t kMnistTest = 10000;

std::string find_variant(const std::string& dir, const std::string& stem) {
  namespace fs = std::filesystem;
  for (const char* suffix : {"", ".gz"}) {
    const std::string p = dir + "/" + stem + suffix;
    if (fs::exists(p)) return p;
  }
  throw data_error("MNIST file not found: " + dir + "/" + stem + "[.gz]");
}

Dataset dataset_from_idx(const IdxData& images, const IdxData& labels, std::string split) {
  if (images.dims.size() != 3)
    throw data_error("expected [n,rows,cols] image file, got " +
                     std::to_string(images.dims.size()) + " dims");
  if (labels.dims.size() != 1 || labels.dims[0] != images.dims[0])
    throw data_error("label file does not match image file");
  const std::size_t n = images.dims[0];
  const std::size_t dim = images.dims[1] * images.dims[2];
  Dataset out;
  out.split = std::move(split);
  out.images = Tensor<float>({n, dim});
  for (std::size_t i = 0; i < n * dim; ++i)
    out.images[i] = static_cast<float>(images.payload[i]) / 255.0f;
  out.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.labels[i] = labels.payload[i];
  return out;
}

Dataset slice(const Dataset& src, std::size_t begin, std::size_t count, std::string split) {
  const std::size_t dim = src.input_dim();
  Dataset out;
  out.split = std::move(split);
  out.images = Tensor<float>({count, dim});
  std::copy(src.images.data.begin() + begin * dim, src.images.data.begin() + (begin + count) * dim,
            out.images.data.begin());
  out.labels.assign(src.labels.begin() + begin, src.labels.begin() + begin + count);
  return out;
}

}  // namespace

void split_train_val(const Dataset& full, Dataset& train, Dataset& val) {
  if (full.size() != kMnistTrain + kMnistVal)
    throw config_error("split: expected " + std::to_string(kMnistTrain + kMnistVal) +
                       " examples in file order, got " + std::to_string(full.size()));
  train = slice(full, 0, kMnistTrain, "train");
  val = slice(full, kMnistTrain, kMnistVal, "val");
}

MnistData load_mnist(const std::string& dir) {
  const IdxData train_images = load_idx_file(find_variant(dir, "train-images-idx3-ubyte"));
  const IdxData train_labels = load_idx_file(find_variant(dir, "train-labels-idx1-ubyte"));
  const IdxData test_images = load_idx_file(find_variant(dir, "t10k-images-idx3-ubyte"));
  const IdxData test_labels = load_idx_file(find_variant(dir, "t10k-labels-idx1-ubyte"));
  const Dataset full = dataset_from_idx(train_images, train_labels, "train");
  MnistData out;
  split_train_val(full, out.train, out.val);
  out.test = dataset_from_idx(test_images, test_labels, "test");
  if (out.test.size() != kMnistTest)
    throw data_error("expected " + std::to_string(kMnistTest) + " test examples, got " +
                     std::to_string(out.test.size()));
  return out;
}

std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng = Rng::for_epoch(seed, epoch);
  rng.shuffle(order.begin(), order.end());
  return order;
}

Batch gather(const Dataset& data, const std::vector<std::size_t>& idx, std::size_t begin,
             std::size_t count) {
  const std::size_t dim = data.input_dim();
  Batch b;
  b.x = Tensor<float>({count, dim});
  b.y.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t src = idx[begin + i];
    std::copy(data.images.data.begin() + src * dim, data.images.data.begin() + (src + 1) * dim,
              b.x.data.begin() + i * dim);
    b.y[i] = data.labels[src];
  }
  return b;
}

BatchStream::BatchStream(const Dataset& data, std::size_t batch_size, std::uint64_t seed,
                         std::size_t epoch)
    : data_(data), batch_size_(batch_size) {
  if (batch_size == 0) throw config_error("batch size must be at least 1");
  order_ = epoch_permutation(data.size(), seed, epoch);
}

std::size_t BatchStream::batch_count() const {
  return (order_.size() + batch_size_ - 1) / batch_size_;
}

bool BatchStream::next(Batch& out) {
  if (pos_ >= order_.size()) return false;
  const std::size_t count = std::min(batch_size_, order_.size() - pos_);
  out = gather(data_, order_, pos_, count);
  pos_ += count;
  return true;
}

Dataset make_synthetic(std::size_t n, std::size_t input_dim, std::size_t classes,
                       std::uint64_t seed, const std::string& split_tag) {
  if (classes < 2) throw config_error("synthetic dataset needs at least 2 classes");
  Rng rng(seed);
  std::vector<std::vector<double>> centers(classes, std::vector<double>(input_dim));
  for (auto& c : centers)
    for (auto& v : c) v = rng.gaussian() * 1.5;
  Dataset out;
  out.split = split_tag;
  out.images = Tensor<float>({n, input_dim});
  out.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t cls = i % classes;  // balanced labels
    out.labels[i] = static_cast<int>(cls);
    for (std::size_t d = 0; d < input_dim; ++d)
      out.images.at2(i, d) = static_cast<float>(centers[cls][d] + rng.gaussian() * 0.6);
  }
  return out;
}

}  // namespace bwn
