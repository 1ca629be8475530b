#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

#include "bwn/errors.hpp"
#include "bwn/experiment.hpp"

namespace bwn {

namespace fs = std::filesystem;

std::size_t run_jobs(std::vector<std::function<void()>> jobs, std::size_t workers) {
  if (workers == 0) workers = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  workers = std::min(workers, jobs.size());
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> failures{0};
  std::mutex log_mutex;
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      try {
        jobs[i]();
      } catch (const std::exception& e) {
        failures.fetch_add(1);
        std::lock_guard<std::mutex> lock(log_mutex);
        std::fprintf(stderr, "job %zu failed: %s\n", i, e.what());
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t i = 0; i + 1 < workers; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return failures.load();
}

namespace {

struct LoadedData {
  MnistData mnist;
  Dataset syn_train, syn_val, syn_test;
  DataBundle bundle;
};

std::string resolve_data_dir(const ExperimentConfig& cfg) {
  if (!cfg.data_dir.empty()) return cfg.data_dir;
  if (const char* env = std::getenv("BWN_DATA_DIR")) return env;
  throw config_error("no MNIST directory: set data_dir in the config, pass --data-dir, or "
                     "export BWN_DATA_DIR");
}

LoadedData load_data(const ExperimentConfig& cfg) {
  LoadedData d;
  if (cfg.dataset == "mnist") {
    d.mnist = load_mnist(resolve_data_dir(cfg));
    d.bundle = d.mnist.bundle();
  } else {
    const std::size_t dim = network_input_dim(cfg.network);
    const std::size_t classes = network_class_count(cfg.network);
    d.syn_train = make_synthetic(cfg.synthetic_train, dim, classes, cfg.synthetic_seed, "train");
    d.syn_val = make_synthetic(cfg.synthetic_val, dim, classes, cfg.synthetic_seed + 1, "val");
    d.syn_test = make_synthetic(cfg.synthetic_test, dim, classes, cfg.synthetic_seed + 2, "test");
    d.bundle = {&d.syn_train, &d.syn_val, &d.syn_test};
  }
  return d;
}

std::vector<std::size_t> resolve_order(const ExperimentConfig& cfg, std::size_t layer_count) {
  switch (cfg.experiment_case) {
    case CaseKind::float_baseline:
    case CaseKind::binary_baseline:
      return make_order(OrderKind::forward, layer_count);  // placeholder, flags decide
    case CaseKind::forward: return make_order(OrderKind::forward, layer_count);
    case CaseKind::reverse: return make_order(OrderKind::reverse, layer_count);
    case CaseKind::random_order:
      return make_order(OrderKind::random, layer_count, cfg.order_seed);
    case CaseKind::explicit_order:
      return make_order(OrderKind::explicit_order, layer_count, 0, &cfg.explicit_order);
    case CaseKind::ascending:
    case CaseKind::descending: {
      const SensitivityReport report = load_report(cfg.sensitivity_report);
      const auto& order = cfg.experiment_case == CaseKind::ascending ? report.ascending_order
                                                                     : report.descending_order;
      validate_order(order, layer_count);
      return order;
    }
  }
  throw config_error("unhandled case");
}

std::string order_label(const ExperimentConfig& cfg, const std::vector<std::size_t>& order) {
  if (cfg.experiment_case == CaseKind::float_baseline ||
      cfg.experiment_case == CaseKind::binary_baseline)
    return "-";
  return order_to_string(order);
}

TrainPlan plan_for(const ExperimentConfig& cfg, const std::vector<std::size_t>& order,
                   std::uint64_t seed, double lr) {
  TrainPlan plan;
  plan.order = order;
  plan.binarize = cfg.experiment_case != CaseKind::float_baseline;
  plan.epochs_per_layer =
      cfg.experiment_case == CaseKind::binary_baseline ? 0 : cfg.epochs_per_layer;
  plan.total_epochs = cfg.total_epochs;
  plan.lr0 = lr;
  plan.lr_milestones = cfg.lr_milestones;
  plan.optimizer.kind = optimizer_kind_from_name(cfg.optimizer);
  plan.optimizer.momentum = cfg.sgd_momentum;
  plan.optimizer.weight_decay = cfg.sgd_weight_decay;
  plan.batch_size = cfg.batch_size;
  plan.seed = seed;
  return plan;
}

std::string format_lr(double lr) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", lr);
  return buf;
}

/// Trains every grid learning rate for one seed, selects by best validation
/// error among eligible epochs, and persists metrics, summary, checkpoint.
/// Skips work whose summary already matches the fingerprint.
void run_one_seed(const ExperimentConfig& cfg, const std::vector<std::size_t>& order,
                  std::uint64_t seed, const DataBundle& data) {
  const std::string label = order_label(cfg, order);
  const std::string dir = run_dir(cfg.output_dir, case_name(cfg.experiment_case), label, seed);
  const std::uint64_t fingerprint = run_fingerprint(cfg, label, seed);
  const std::string summary_path = dir + "/summary.json";
  if (auto existing = read_summary(summary_path);
      existing && existing->fingerprint == fingerprint && existing->status == "ok")
    return;  // already computed under this exact configuration
  fs::create_directories(dir);

  const auto start = std::chrono::steady_clock::now();
  RunSummary summary;
  summary.case_label = case_name(cfg.experiment_case);
  summary.order = label;
  summary.seed = seed;
  summary.network = cfg.network;
  summary.fingerprint = fingerprint;

  bool have_choice = false;
  RunResult chosen;
  double chosen_lr = 0;
  std::string failure;

  for (double lr : cfg.lr_grid) {
    const TrainPlan plan = plan_for(cfg, order, seed, lr);
    Network<float> net(network_from_name(cfg.network));
    Rng rng(seed);
    net.init_params(rng);
    RunResult result = run_iterative(plan, std::move(net), data);
    const std::string lr_dir = dir + "/lr_" + format_lr(lr);
    fs::create_directories(lr_dir);
    write_metrics_csv(result.records, lr_dir + "/metrics.csv");
    if (result.aborted || !result.best) {
      summary.lr_val_errors[format_lr(lr)] = 1.0;
      failure = result.aborted ? result.abort_reason : "no eligible epoch";
      continue;
    }
    summary.lr_val_errors[format_lr(lr)] = result.best->val_error;
    if (!have_choice || result.best->val_error < chosen.best->val_error) {
      chosen = std::move(result);
      chosen_lr = lr;
      have_choice = true;
    }
  }

  summary.wall_time_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!have_choice) {
    summary.status = "failed: " + (failure.empty() ? std::string("no runs completed") : failure);
    write_summary(summary, summary_path);
    throw data_error("run " + dir + " " + summary.status);
  }
  summary.status = "ok";
  summary.chosen_lr = chosen_lr;
  summary.best_epoch = chosen.best->epoch;
  summary.best_val_error = chosen.best->val_error;
  summary.test_error = chosen.best->test_error;
  write_metrics_csv(chosen.records, dir + "/metrics.csv");
  save_checkpoint(*chosen.best, dir + "/checkpoint.bin");
  write_summary(summary, summary_path);
}

}  // namespace

int cmd_train(const ExperimentConfig& cfg) {
  if (cfg.output_dir.empty()) throw config_error("train: output_dir is required");
  const LoadedData data = load_data(cfg);
  Network<float> probe_net(network_from_name(cfg.network));
  const std::size_t layer_count = probe_net.weight_layer_count();
  const std::vector<std::size_t> order = resolve_order(cfg, layer_count);

  std::vector<std::function<void()>> jobs;
  for (std::uint64_t seed : cfg.seeds)
    jobs.push_back([&cfg, order, seed, &data]() { run_one_seed(cfg, order, seed, data.bundle); });
  const std::size_t failures = run_jobs(std::move(jobs), cfg.workers);

  // aggregate over completed seeds
  double sum = 0;
  std::size_t done = 0;
  for (std::uint64_t seed : cfg.seeds) {
    const std::string dir =
        run_dir(cfg.output_dir, case_name(cfg.experiment_case), order_label(cfg, order), seed);
    if (auto s = read_summary(dir + "/summary.json"); s && s->status == "ok") {
      sum += s->test_error;
      ++done;
    }
  }
  if (done > 0)
    std::printf("%s/%s: %zu/%zu seeds complete, mean test error %.4f\n",
                case_name(cfg.experiment_case), order_label(cfg, order).c_str(), done,
                cfg.seeds.size(), sum / static_cast<double>(done));
  return failures == 0 ? 0 : 1;
}

int cmd_sensitivity(const ExperimentConfig& cfg) {
  if (cfg.output_dir.empty()) throw config_error("sensitivity: output_dir is required");
  if (cfg.pretrain_epochs == 0)
    throw config_error("sensitivity: pretrain_epochs must be at least 1");
  const LoadedData data = load_data(cfg);
  const std::vector<LayerSpec> spec = network_from_name(cfg.network);
  const std::size_t layer_count = Network<float>(spec).weight_layer_count();

  ProbeOptions options;
  options.epochs = cfg.pretrain_epochs;
  options.lr_grid = cfg.lr_grid;
  options.optimizer.kind = optimizer_kind_from_name(cfg.optimizer);
  options.optimizer.momentum = cfg.sgd_momentum;
  options.optimizer.weight_decay = cfg.sgd_weight_decay;
  options.batch_size = cfg.batch_size;
  options.metric = cfg.probe_metric == "last" ? ProbeMetric::last_epoch : ProbeMetric::best_epoch;

  // one shared seed across probes isolates the layer effect from init
  // noise; a full probe_seeds list switches to per-probe seeds
  if (!cfg.probe_seeds.empty() && cfg.probe_seeds.size() != layer_count)
    throw config_error("sensitivity: probe_seeds must have one entry per layer (" +
                       std::to_string(layer_count) + ")");
  auto probe_seed = [&](std::size_t layer) {
    return cfg.probe_seeds.empty() ? cfg.seeds.front() : cfg.probe_seeds[layer - 1];
  };

  std::vector<ProbeResult> probes(layer_count);
  std::vector<std::function<void()>> jobs;
  for (std::size_t layer = 1; layer <= layer_count; ++layer)
    jobs.push_back([&, layer]() {
      probes[layer - 1] = run_probe(spec, layer, options, probe_seed(layer), data.bundle);
    });
  const std::size_t failures = run_jobs(std::move(jobs), cfg.workers);
  if (failures != 0) return 1;

  const SensitivityReport report = build_report(std::move(probes));
  fs::create_directories(cfg.output_dir);
  const std::string path = cfg.output_dir + "/sensitivity_report.csv";
  save_report(report, path);
  std::printf("wrote %s (ascending %s, descending %s)\n", path.c_str(),
              order_to_string(report.ascending_order).c_str(),
              order_to_string(report.descending_order).c_str());
  return 0;
}

int cmd_search_orders(const ExperimentConfig& cfg) {
  if (cfg.output_dir.empty()) throw config_error("search-orders: output_dir is required");
  const LoadedData data = load_data(cfg);
  Network<float> probe_net(network_from_name(cfg.network));
  const std::size_t layer_count = probe_net.weight_layer_count();

  std::size_t order_count = 1;
  for (std::size_t i = 2; i <= layer_count; ++i) order_count *= i;
  if (order_count > cfg.search_cap)
    throw config_error("search-orders: " + std::to_string(layer_count) + " layers give " +
                       std::to_string(order_count) + " orders, over the cap of " +
                       std::to_string(cfg.search_cap) + "; refusing");

  // lexicographic enumeration of all L! permutations
  std::vector<std::vector<std::size_t>> orders;
  std::vector<std::size_t> perm(layer_count);
  for (std::size_t i = 0; i < layer_count; ++i) perm[i] = i + 1;
  do {
    orders.push_back(perm);
  } while (std::next_permutation(perm.begin(), perm.end()));

  ExperimentConfig run_cfg = cfg;
  run_cfg.experiment_case = CaseKind::explicit_order;

  std::vector<std::function<void()>> jobs;
  for (const auto& order : orders)
    for (std::uint64_t seed : cfg.seeds)
      jobs.push_back([&run_cfg, order, seed, &data]() {
        run_one_seed(run_cfg, order, seed, data.bundle);
      });
  const std::size_t failures = run_jobs(std::move(jobs), cfg.workers);

  // ranking table
  struct Row {
    std::string order;
    double mean = 0, stdev = 0;
    std::size_t n = 0;
  };
  std::vector<Row> rows;
  for (const auto& order : orders) {
    Row row;
    row.order = order_to_string(order);
    std::vector<double> errors;
    for (std::uint64_t seed : cfg.seeds) {
      const std::string dir = run_dir(cfg.output_dir, "explicit", row.order, seed);
      if (auto s = read_summary(dir + "/summary.json"); s && s->status == "ok")
        errors.push_back(s->test_error);
    }
    row.n = errors.size();
    if (!errors.empty()) {
      for (double e : errors) row.mean += e;
      row.mean /= static_cast<double>(errors.size());
      if (errors.size() > 1) {
        double acc = 0;
        for (double e : errors) acc += (e - row.mean) * (e - row.mean);
        row.stdev = std::sqrt(acc / static_cast<double>(errors.size() - 1));
      }
    }
    rows.push_back(row);
  }
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    return a.mean < b.mean || (a.mean == b.mean && a.order < b.order);
  });

  fs::create_directories(cfg.output_dir);
  const std::string table_path = cfg.output_dir + "/search_orders.csv";
  std::ofstream out(table_path, std::ios::binary);
  out << "order,mean_test_error,std_test_error,seeds\n";
  for (const Row& r : rows) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%zu\n", r.order.c_str(), r.mean, r.stdev, r.n);
    out << buf;
    std::printf("order %s: mean test error %.4f (std %.4f, %zu seeds)\n", r.order.c_str(), r.mean,
                r.stdev, r.n);
  }
  return failures == 0 ? 0 : 1;
}

}  // namespace bwn
