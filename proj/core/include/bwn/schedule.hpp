#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bwn/binarize.hpp"
#include "bwn/dataset.hpp"
#include "bwn/network.hpp"
#include "bwn/optimizer.hpp"

namespace bwn {

enum class OrderKind { forward, reverse, random, explicit_order };

/// Layer binarization orders are permutations of 1..L (1-based layer
/// numbers, input side first).
std::vector<std::size_t> make_order(OrderKind kind, std::size_t layer_count,
                                    std::uint64_t seed = 0,
                                    const std::vector<std::size_t>* explicit_order = nullptr);

/// Validates that `order` is a permutation of 1..L.
void validate_order(const std::vector<std::size_t>& order, std::size_t layer_count);

std::string order_to_string(const std::vector<std::size_t>& order);

struct LrMilestone {
  std::size_t epoch = 0;
  double factor = 1.0;
};

/// lr0 times the product of the factors of every milestone whose epoch is
/// <= `epoch` (a milestone applies starting at its own epoch).
double lr_at(std::size_t epoch, double lr0, const std::vector<LrMilestone>& milestones);

/// One training run of the iterative schedule.
struct TrainPlan {
  std::vector<std::size_t> order;        // permutation of 1..L
  std::size_t epochs_per_layer = 0;      // epochs trained after each flag flip
  std::size_t total_epochs = 0;          // overall epoch budget
  double lr0 = 1e-3;
  std::vector<LrMilestone> lr_milestones;
  OptimizerConfig optimizer;
  std::size_t batch_size = 100;
  std::uint64_t seed = 1;
  /// false realizes the float baseline: flags are never set. The binary
  /// baseline is epochs_per_layer = 0 (all flags set before the first
  /// epoch).
  bool binarize = true;

  void validate(std::size_t layer_count) const;
};

/// Per-epoch measurements; the unit of all reporting.
struct MetricsRecord {
  std::size_t epoch = 0;
  double train_error = 0;
  double val_error = 0;
  double test_error = 0;
  BinarizationState state;
  double lr = 0;
  double wall_time_sec = 0;
};

struct Checkpoint {
  Network<float> net;
  BinarizationState state;
  std::size_t epoch = 0;
  double val_error = 1.0;
  double test_error = 1.0;
};

struct RunResult {
  Network<float> net;
  std::vector<MetricsRecord> records;
  std::optional<Checkpoint> best;
  bool aborted = false;
  std::string abort_reason;
};

/// Misclassification rate of the effective (state-applied) network on a
/// dataset, batch norm in eval mode.
double evaluate_error(Network<float>& net, const BinarizationState& state, const Dataset& data,
                      std::size_t eval_batch = 500);

/// One epoch of training under a fixed binarization state: for every batch,
/// re-binarize flagged layers from the shadows, forward, backward (gradients
/// flow through the effective weights and are routed straight through to the
/// shadows), optimizer step. Returns the fraction of training examples
/// misclassified by the forward passes of this epoch, or nullopt when a
/// non-finite loss aborted the epoch.
std::optional<double> train_one_epoch(Network<float>& net, Optimizer<float>& opt,
                                      const BinarizationState& state, const Dataset& train,
                                      std::size_t batch_size, std::uint64_t seed,
                                      std::size_t epoch, double lr);

/// Algorithm: start from no binarized layers; every `epochs_per_layer`
/// epochs flip the next layer of `plan.order` (at the start of that epoch),
/// then keep training fully binarized until `total_epochs`, applying the lr
/// milestones. Appends one MetricsRecord per epoch and tracks the best
/// checkpoint by validation error over eligible epochs (fully binarized
/// ones, or every epoch for the float baseline).
RunResult run_iterative(const TrainPlan& plan, Network<float> net, const DataBundle& data);

/// Index of the record with minimal validation error; when restricted, only
/// epochs whose snapshot has every layer binarized are eligible. Ties break
/// to the earliest epoch.
std::size_t select_best(const std::vector<MetricsRecord>& records,
                        bool restrict_to_fully_binarized);

}  // namespace bwn
