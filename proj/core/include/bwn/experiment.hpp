#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bwn/network.hpp"
#include "bwn/schedule.hpp"
#include "bwn/sensitivity.hpp"

namespace bwn {

enum class CaseKind {
  float_baseline,
  binary_baseline,
  forward,
  reverse,
  random_order,
  explicit_order,
  ascending,
  descending,
};

const char* case_name(CaseKind c);
CaseKind case_from_name(const std::string& name);

/// Declarative description of one experiment. Absent fields take the
/// standard defaults for the named network.
struct ExperimentConfig {
  std::string network;  // "300-100-10", "784-784-10", or "INxH1-H2-...-OUT"
  CaseKind experiment_case = CaseKind::float_baseline;
  std::vector<std::size_t> explicit_order;  // case explicit
  std::string sensitivity_report;           // case ascending/descending: report path

  std::size_t epochs_per_layer = 0;
  std::size_t total_epochs = 0;
  std::size_t pretrain_epochs = 0;  // probe epoch budget
  std::vector<double> lr_grid;
  std::vector<LrMilestone> lr_milestones;
  std::string optimizer = "adam";
  double sgd_momentum = 0.9;
  double sgd_weight_decay = 1e-4;
  std::size_t batch_size = 0;
  std::vector<std::uint64_t> seeds;
  std::uint64_t order_seed = 12345;  // seeds the random-order shuffle
  std::string probe_metric = "best";  // or "last"
  // empty: every probe shares seeds.front(); else one entry per layer
  std::vector<std::uint64_t> probe_seeds;

  // data
  std::string dataset = "mnist";  // or "synthetic"
  std::uint64_t synthetic_seed = 9;
  std::size_t synthetic_train = 512, synthetic_val = 128, synthetic_test = 128;

  std::string data_dir;    // IDX file directory (mnist)
  std::string output_dir;  // run directory root
  std::size_t workers = 0;  // 0: hardware concurrency
  std::size_t search_cap = 24;  // max permutations for search-orders

  bool operator==(const ExperimentConfig&) const = default;
};

/// JSON round trip; parse(serialize(parse(x))) == parse(x).
ExperimentConfig config_from_json(const std::string& text);
std::string config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::string& path);
void save_config(const ExperimentConfig& cfg, const std::string& path);

/// Layer sizes for a network name: the two standard MNIST nets, or the
/// generic "INxH1-H2-...-OUT" form ("300-100-10" is shorthand for
/// "784x300-100-10").
std::vector<LayerSpec> network_from_name(const std::string& name);
std::size_t network_input_dim(const std::string& name);
std::size_t network_class_count(const std::string& name);

/// Stable fingerprint over the trajectory-determining fields of a
/// (config, case, order, seed) combination; run directories are keyed by it
/// so finished work is never recomputed against a changed config.
std::uint64_t run_fingerprint(const ExperimentConfig& cfg, const std::string& order_str,
                              std::uint64_t seed);

// ---------------------------------------------------------------------------
// Run storage
// ---------------------------------------------------------------------------

struct RunSummary {
  std::string case_label;
  std::string order;
  std::uint64_t seed = 0;
  std::string network;
  double chosen_lr = 0;
  std::size_t best_epoch = 0;
  double best_val_error = 1.0;
  double test_error = 1.0;
  std::string status;  // "ok" or "failed: ..."
  std::uint64_t fingerprint = 0;
  double wall_time_sec = 0;
  std::map<std::string, double> lr_val_errors;  // per grid point
};

/// `<out>/<case>/<order>/<seed>/` (order "-" for the baselines).
std::string run_dir(const std::string& out_root, const std::string& case_label,
                    const std::string& order_str, std::uint64_t seed);

void write_metrics_csv(const std::vector<MetricsRecord>& records, const std::string& path);
std::vector<MetricsRecord> read_metrics_csv(const std::string& path);

void write_summary(const RunSummary& s, const std::string& path);
std::optional<RunSummary> read_summary(const std::string& path);

void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// ---------------------------------------------------------------------------
// Commands (exit code 0 only if all requested runs completed)
// ---------------------------------------------------------------------------

int cmd_train(const ExperimentConfig& cfg);
int cmd_sensitivity(const ExperimentConfig& cfg);
int cmd_search_orders(const ExperimentConfig& cfg);

struct ReportRequest {
  std::string runs_root;             // required
  std::string compare_root;          // optional: bigger-network runs
  std::vector<std::string> cases;    // empty: every case found
  std::string output_dir;            // where report.csv / curves go; empty: print only
};

struct CaseAggregate {
  std::string case_label;
  std::size_t seed_count = 0;
  double mean_test_error = 0;
  double std_test_error = 0;
  std::vector<double> curve_mean;  // per-epoch mean test error
  std::vector<double> curve_std;
};

struct ReportResult {
  std::vector<CaseAggregate> primary;
  std::vector<CaseAggregate> compare;
  // case -> primary mean - compare mean
  std::map<std::string, double> improvement;
};

ReportResult aggregate_report(const ReportRequest& req);
int cmd_report(const ReportRequest& req);

/// Runs jobs on a fixed-size pool; rethrows nothing, returns the number of
/// jobs that threw (each failure is reported to stderr).
std::size_t run_jobs(std::vector<std::function<void()>> jobs, std::size_t workers);

}  // namespace bwn
