#include "bwn/sensitivity.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "bwn/errors.hpp"

namespace bwn {

ProbeResult run_probe(const std::vector<LayerSpec>& spec, std::size_t layer,
                      const ProbeOptions& options, std::uint64_t seed, const DataBundle& data) {
  if (options.epochs < 1) throw config_error("probe: epoch budget must be at least 1");
  if (options.lr_grid.empty()) throw config_error("probe: learning-rate grid is empty");

  ProbeResult result;
  result.layer = layer;
  result.seed = seed;

  bool any_converged = false;
  for (double lr : options.lr_grid) {
    Network<float> net(spec);
    Rng rng(seed);
    net.init_params(rng);
    const std::size_t layer_count = net.weight_layer_count();
    if (layer < 1 || layer > layer_count)
      throw config_error("probe: layer " + std::to_string(layer) + " out of range 1.." +
                         std::to_string(layer_count));
    const BinarizationState state = BinarizationState::onehot(layer_count, layer);
    Optimizer<float> opt(options.optimizer, net);

    double grid_error = 1.0;
    bool diverged = false;
    for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
      std::optional<double> train_error = train_one_epoch(
          net, opt, state, *data.train, options.batch_size, seed, epoch, lr);
      if (!train_error) {
        diverged = true;
        break;
      }
      const double val_error = evaluate_error(net, state, *data.val);
      if (options.metric == ProbeMetric::best_epoch)
        grid_error = std::min(grid_error, val_error);
      else
        grid_error = val_error;  // last epoch wins
    }
    if (diverged) continue;
    // earlier grid entries win ties
    if (!any_converged || grid_error < result.best_val_error) {
      result.best_val_error = grid_error;
      result.best_lr = lr;
    }
    any_converged = true;
  }
  if (!any_converged) {
    result.failed = true;
    result.best_val_error = 1.0;
    result.best_lr = 0;
  }
  return result;
}

SensitivityReport build_report(std::vector<ProbeResult> probes) {
  if (probes.empty()) throw config_error("build_report: no probe results");
  std::sort(probes.begin(), probes.end(),
            [](const ProbeResult& a, const ProbeResult& b) { return a.layer < b.layer; });
  for (std::size_t i = 0; i < probes.size(); ++i)
    if (probes[i].layer != i + 1)
      throw config_error("build_report: missing probe for layer " + std::to_string(i + 1));

  SensitivityReport report;
  report.probes = std::move(probes);
  report.ascending_order.resize(report.probes.size());
  std::iota(report.ascending_order.begin(), report.ascending_order.end(), std::size_t{1});
  std::stable_sort(report.ascending_order.begin(), report.ascending_order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return report.probes[a - 1].best_val_error <
                            report.probes[b - 1].best_val_error;
                   });
  report.descending_order.assign(report.ascending_order.rbegin(),
                                 report.ascending_order.rend());
  return report;
}

std::string report_to_text(const SensitivityReport& report) {
  std::ostringstream out;
  out << "layer,best_val_error,best_lr,probe_seed,failed\n";
  char buf[128];
  for (const ProbeResult& p : report.probes) {
    std::snprintf(buf, sizeof buf, "%zu,%.6f,%g,%llu,%d\n", p.layer, p.best_val_error, p.best_lr,
                  static_cast<unsigned long long>(p.seed), p.failed ? 1 : 0);
    out << buf;
  }
  out << "# ascending: " << order_to_string(report.ascending_order) << "\n";
  out << "# descending: " << order_to_string(report.descending_order) << "\n";
  return out.str();
}

SensitivityReport report_from_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<ProbeResult> probes;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line.rfind("layer,", 0) != 0)
        throw config_error("sensitivity report: missing header line");
      header_seen = true;
      continue;
    }
    ProbeResult p;
    unsigned long long layer = 0, seed = 0;
    int failed = 0;
    if (std::sscanf(line.c_str(), "%llu,%lf,%lf,%llu,%d", &layer, &p.best_val_error, &p.best_lr,
                    &seed, &failed) != 5)
      throw config_error("sensitivity report: malformed row: " + line);
    p.layer = static_cast<std::size_t>(layer);
    p.seed = seed;
    p.failed = failed != 0;
    probes.push_back(p);
  }
  // derived orders are recomputed, not trusted from the file
  return build_report(std::move(probes));
}

void save_report(const SensitivityReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot write sensitivity report: " + path);
  out << report_to_text(report);
}

SensitivityReport load_report(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot read sensitivity report: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return report_from_text(ss.str());
}

}  // namespace bwn
