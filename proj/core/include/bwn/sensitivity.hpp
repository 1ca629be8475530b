#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bwn/dataset.hpp"
#include "bwn/network.hpp"
#include "bwn/schedule.hpp"

namespace bwn {

/// Outcome of one probe: a model trained with exactly this layer binarized.
struct ProbeResult {
  std::size_t layer = 0;  // 1-based
  double best_val_error = 1.0;
  double best_lr = 0;
  std::uint64_t seed = 0;
  bool failed = false;  // every grid point diverged
};

/// Per-layer probe errors plus the derived binarization orders.
struct SensitivityReport {
  std::vector<ProbeResult> probes;  // sorted by layer, exactly L entries
  std::vector<std::size_t> ascending_order;
  std::vector<std::size_t> descending_order;
};

/// Which epoch's validation error a probe reports: the best over all probe
/// epochs (default) or the final epoch's.
enum class ProbeMetric { best_epoch, last_epoch };

struct ProbeOptions {
  std::size_t epochs = 1;  // pre-training epoch budget per probe
  std::vector<double> lr_grid = {3e-4, 1e-3, 3e-3};
  OptimizerConfig optimizer;
  std::size_t batch_size = 100;
  ProbeMetric metric = ProbeMetric::best_epoch;
};

/// Trains a fresh network per grid point with BinarizationState =
/// onehot(layer) held fixed for every epoch, and returns the (error, lr)
/// winning the grid. A probe whose every grid point diverges is marked
/// failed with error 1.0.
ProbeResult run_probe(const std::vector<LayerSpec>& spec, std::size_t layer,
                      const ProbeOptions& options, std::uint64_t seed, const DataBundle& data);

/// Sorts probes into the ascending order (lowest error binarized first; ties
/// break to the lower layer index) and its reverse.
SensitivityReport build_report(std::vector<ProbeResult> probes);

/// Column-oriented text format: one CSV row per layer, derived orders in
/// trailing comment lines.
std::string report_to_text(const SensitivityReport& report);
SensitivityReport report_from_text(const std::string& text);
void save_report(const SensitivityReport& report, const std::string& path);
SensitivityReport load_report(const std::string& path);

}  // namespace bwn
