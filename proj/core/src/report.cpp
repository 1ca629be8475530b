#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include "bwn/errors.hpp"
#include "bwn/experiment.hpp"

namespace bwn {

namespace fs = std::filesystem;

namespace {

struct CaseRuns {
  std::vector<RunSummary> summaries;
  std::vector<std::vector<MetricsRecord>> curves;
};

/// Walks `<root>/<case>/<order>/<seed>/summary.json`.
std::map<std::string, CaseRuns> collect_runs(const std::string& root,
                                             const std::vector<std::string>& cases) {
  std::map<std::string, CaseRuns> found;
  if (!fs::exists(root)) return found;
  for (const auto& case_entry : fs::directory_iterator(root)) {
    if (!case_entry.is_directory()) continue;
    const std::string case_label = case_entry.path().filename().string();
    if (!cases.empty() && std::find(cases.begin(), cases.end(), case_label) == cases.end())
      continue;
    for (const auto& order_entry : fs::directory_iterator(case_entry.path())) {
      if (!order_entry.is_directory()) continue;
      for (const auto& seed_entry : fs::directory_iterator(order_entry.path())) {
        if (!seed_entry.is_directory()) continue;
        const std::string dir = seed_entry.path().string();
        auto summary = read_summary(dir + "/summary.json");
        if (!summary || summary->status != "ok") continue;
        CaseRuns& runs = found[case_label];
        runs.summaries.push_back(*summary);
        if (fs::exists(dir + "/metrics.csv"))
          runs.curves.push_back(read_metrics_csv(dir + "/metrics.csv"));
      }
    }
  }
  return found;
}

CaseAggregate aggregate_case(const std::string& label, const CaseRuns& runs) {
  CaseAggregate agg;
  agg.case_label = label;
  agg.seed_count = runs.summaries.size();
  for (const RunSummary& s : runs.summaries) agg.mean_test_error += s.test_error;
  agg.mean_test_error /= static_cast<double>(agg.seed_count);
  if (agg.seed_count > 1) {
    double acc = 0;
    for (const RunSummary& s : runs.summaries) {
      const double d = s.test_error - agg.mean_test_error;
      acc += d * d;
    }
    agg.std_test_error = std::sqrt(acc / static_cast<double>(agg.seed_count - 1));
  }
  // per-epoch mean/std across runs, up to the shortest curve
  std::size_t epochs = SIZE_MAX;
  for (const auto& c : runs.curves) epochs = std::min(epochs, c.size());
  if (!runs.curves.empty() && epochs != SIZE_MAX && epochs > 0) {
    agg.curve_mean.assign(epochs, 0.0);
    agg.curve_std.assign(epochs, 0.0);
    const double n = static_cast<double>(runs.curves.size());
    for (std::size_t e = 0; e < epochs; ++e) {
      for (const auto& c : runs.curves) agg.curve_mean[e] += c[e].test_error;
      agg.curve_mean[e] /= n;
      if (runs.curves.size() > 1) {
        double acc = 0;
        for (const auto& c : runs.curves) {
          const double d = c[e].test_error - agg.curve_mean[e];
          acc += d * d;
        }
        agg.curve_std[e] = std::sqrt(acc / (n - 1.0));
      }
    }
  }
  return agg;
}

}  // namespace

ReportResult aggregate_report(const ReportRequest& req) {
  ReportResult result;
  const auto primary = collect_runs(req.runs_root, req.cases);
  if (primary.empty())
    throw data_error("report: no completed runs under " + req.runs_root);
  for (const auto& [label, runs] : primary)
    result.primary.push_back(aggregate_case(label, runs));
  if (!req.compare_root.empty()) {
    const auto compare = collect_runs(req.compare_root, req.cases);
    for (const auto& [label, runs] : compare)
      result.compare.push_back(aggregate_case(label, runs));
    // improvement of the compare (bigger) network over the primary one
    for (const CaseAggregate& a : result.primary)
      for (const CaseAggregate& b : result.compare)
        if (a.case_label == b.case_label)
          result.improvement[a.case_label] = a.mean_test_error - b.mean_test_error;
  }
  if (!req.cases.empty())
    for (const std::string& c : req.cases)
      if (!primary.count(c)) std::fprintf(stderr, "warning: case '%s' has no runs, omitted\n", c.c_str());
  return result;
}

int cmd_report(const ReportRequest& req) {
  const ReportResult result = aggregate_report(req);
  std::printf("%-12s %8s %10s %10s\n", "case", "seeds", "mean_err", "std_err");
  for (const CaseAggregate& a : result.primary)
    std::printf("%-12s %8zu %10.4f %10.4f\n", a.case_label.c_str(), a.seed_count,
                a.mean_test_error, a.std_test_error);
  if (!result.compare.empty()) {
    std::printf("compare root:\n");
    for (const CaseAggregate& a : result.compare)
      std::printf("%-12s %8zu %10.4f %10.4f\n", a.case_label.c_str(), a.seed_count,
                  a.mean_test_error, a.std_test_error);
    std::printf("improvement (primary - compare):\n");
    for (const auto& [label, delta] : result.improvement)
      std::printf("%-12s %10.4f\n", label.c_str(), delta);
  }

  if (!req.output_dir.empty()) {
    fs::create_directories(req.output_dir);
    std::ofstream out(req.output_dir + "/report.csv", std::ios::binary);
    out << "case,seeds,mean_test_error,std_test_error,improvement\n";
    char buf[160];
    for (const CaseAggregate& a : result.primary) {
      const auto it = result.improvement.find(a.case_label);
      if (it != result.improvement.end())
        std::snprintf(buf, sizeof buf, "%s,%zu,%.6f,%.6f,%.6f\n", a.case_label.c_str(),
                      a.seed_count, a.mean_test_error, a.std_test_error, it->second);
      else
        std::snprintf(buf, sizeof buf, "%s,%zu,%.6f,%.6f,\n", a.case_label.c_str(), a.seed_count,
                      a.mean_test_error, a.std_test_error);
      out << buf;
    }
    for (const CaseAggregate& a : result.primary) {
      if (a.curve_mean.empty()) continue;
      std::ofstream curve(req.output_dir + "/curve_" + a.case_label + ".csv", std::ios::binary);
      curve << "epoch,mean_test_error,std_test_error\n";
      for (std::size_t e = 0; e < a.curve_mean.size(); ++e) {
        std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f\n", e + 1, a.curve_mean[e], a.curve_std[e]);
        curve << buf;
      }
    }
  }
  return 0;
}

}  // namespace bwn
