#include <json.hpp>
#include <fstream>
#include <sstream>

#include "bwn/errors.hpp"
#include "bwn/experiment.hpp"

namespace bwn {

using json = nlohmann::ordered_json;

const char* case_name(CaseKind c) {
  switch (c) {
    case CaseKind::float_baseline: return "float";
    case CaseKind::binary_baseline: return "binary";
    case CaseKind::forward: return "forward";
    case CaseKind::reverse: return "reverse";
    case CaseKind::random_order: return "random";
    case CaseKind::explicit_order: return "explicit";
    case CaseKind::ascending: return "ascending";
    case CaseKind::descending: return "descending";
  }
  return "?";
}

CaseKind case_from_name(const std::string& name) {
  for (CaseKind c : {CaseKind::float_baseline, CaseKind::binary_baseline, CaseKind::forward,
                     CaseKind::reverse, CaseKind::random_order, CaseKind::explicit_order,
                     CaseKind::ascending, CaseKind::descending})
    if (name == case_name(c)) return c;
  throw config_error("unknown case '" + name +
                     "' (expected float|binary|forward|reverse|random|explicit|ascending|"
                     "descending)");
}

namespace {

std::vector<std::size_t> parse_sizes(const std::string& s, char sep) {
  std::vector<std::size_t> sizes;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, sep)) {
    if (tok.empty()) throw config_error("bad network spec: '" + s + "'");
    std::size_t pos = 0;
    const unsigned long v = std::stoul(tok, &pos);
    if (pos != tok.size() || v == 0) throw config_error("bad network spec: '" + s + "'");
    sizes.push_back(v);
  }
  if (sizes.empty()) throw config_error("bad network spec: '" + s + "'");
  return sizes;
}

struct NetShape {
  std::size_t input_dim;
  std::vector<std::size_t> layer_sizes;
};

NetShape parse_network_name(const std::string& name) {
  const auto x = name.find('x');
  if (x == std::string::npos) {
    // shorthand for a 784-input MNIST classifier, e.g. "300-100-10"
    return {784, parse_sizes(name, '-')};
  }
  const std::size_t input = parse_sizes(name.substr(0, x), '-').at(0);
  return {input, parse_sizes(name.substr(x + 1), '-')};
}

}  // namespace

std::vector<LayerSpec> network_from_name(const std::string& name) {
  const NetShape shape = parse_network_name(name);
  return mlp_spec(shape.input_dim, shape.layer_sizes);
}

std::size_t network_input_dim(const std::string& name) {
  return parse_network_name(name).input_dim;
}

std::size_t network_class_count(const std::string& name) {
  return parse_network_name(name).layer_sizes.back();
}

namespace {

bool is_table_network(const std::string& name) {
  return name == "300-100-10" || name == "784-784-10";
}

/// Standard settings for the two reference MNIST networks.
void apply_defaults(ExperimentConfig& cfg) {
  if (is_table_network(cfg.network)) {
    if (cfg.batch_size == 0) cfg.batch_size = 100;
    if (cfg.epochs_per_layer == 0 && cfg.experiment_case != CaseKind::binary_baseline)
      cfg.epochs_per_layer = 150;
    if (cfg.total_epochs == 0) cfg.total_epochs = 450;
    if (cfg.pretrain_epochs == 0) cfg.pretrain_epochs = 150;
  }
  if (cfg.batch_size == 0) cfg.batch_size = 100;
  if (cfg.total_epochs == 0) cfg.total_epochs = 1;
  if (cfg.lr_grid.empty()) cfg.lr_grid = {3e-4, 1e-3, 3e-3};
  if (cfg.seeds.empty()) cfg.seeds = {1, 2, 3, 4, 5};
}

}  // namespace

ExperimentConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw config_error(std::string("config: not valid JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  try {
    cfg.network = j.at("network").get<std::string>();
    cfg.experiment_case = case_from_name(j.value("case", "float"));
    if (j.contains("explicit_order"))
      cfg.explicit_order = j["explicit_order"].get<std::vector<std::size_t>>();
    cfg.sensitivity_report = j.value("sensitivity_report", "");
    cfg.epochs_per_layer = j.value("epochs_per_layer", std::size_t{0});
    cfg.total_epochs = j.value("total_epochs", std::size_t{0});
    cfg.pretrain_epochs = j.value("pretrain_epochs", std::size_t{0});
    if (j.contains("lr_grid")) cfg.lr_grid = j["lr_grid"].get<std::vector<double>>();
    if (j.contains("lr_milestones"))
      for (const auto& m : j["lr_milestones"])
        cfg.lr_milestones.push_back({m.at(0).get<std::size_t>(), m.at(1).get<double>()});
    cfg.optimizer = j.value("optimizer", "adam");
    cfg.sgd_momentum = j.value("sgd_momentum", 0.9);
    cfg.sgd_weight_decay = j.value("sgd_weight_decay", 1e-4);
    cfg.batch_size = j.value("batch_size", std::size_t{0});
    if (j.contains("seeds")) cfg.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    cfg.order_seed = j.value("order_seed", std::uint64_t{12345});
    cfg.probe_metric = j.value("probe_metric", "best");
    if (j.contains("probe_seeds"))
      cfg.probe_seeds = j["probe_seeds"].get<std::vector<std::uint64_t>>();
    cfg.dataset = j.value("dataset", "mnist");
    cfg.synthetic_seed = j.value("synthetic_seed", std::uint64_t{9});
    cfg.synthetic_train = j.value("synthetic_train", std::size_t{512});
    cfg.synthetic_val = j.value("synthetic_val", std::size_t{128});
    cfg.synthetic_test = j.value("synthetic_test", std::size_t{128});
    cfg.data_dir = j.value("data_dir", "");
    cfg.output_dir = j.value("output_dir", "");
    cfg.workers = j.value("workers", std::size_t{0});
    cfg.search_cap = j.value("search_cap", std::size_t{24});
  } catch (const json::exception& e) {
    throw config_error(std::string("config: ") + e.what());
  }
  if (cfg.probe_metric != "best" && cfg.probe_metric != "last")
    throw config_error("config: probe_metric must be 'best' or 'last'");
  if (cfg.dataset != "mnist" && cfg.dataset != "synthetic")
    throw config_error("config: dataset must be 'mnist' or 'synthetic'");
  optimizer_kind_from_name(cfg.optimizer);  // validates
  if (cfg.experiment_case == CaseKind::explicit_order && cfg.explicit_order.empty())
    throw config_error("config: case 'explicit' requires explicit_order");
  if ((cfg.experiment_case == CaseKind::ascending ||
       cfg.experiment_case == CaseKind::descending) &&
      cfg.sensitivity_report.empty())
    throw config_error("config: case '" + std::string(case_name(cfg.experiment_case)) +
                       "' requires sensitivity_report");
  apply_defaults(cfg);
  return cfg;
}

std::string config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["network"] = cfg.network;
  j["case"] = case_name(cfg.experiment_case);
  if (!cfg.explicit_order.empty()) j["explicit_order"] = cfg.explicit_order;
  if (!cfg.sensitivity_report.empty()) j["sensitivity_report"] = cfg.sensitivity_report;
  j["epochs_per_layer"] = cfg.epochs_per_layer;
  j["total_epochs"] = cfg.total_epochs;
  j["pretrain_epochs"] = cfg.pretrain_epochs;
  j["lr_grid"] = cfg.lr_grid;
  if (!cfg.lr_milestones.empty()) {
    json ms = json::array();
    for (const LrMilestone& m : cfg.lr_milestones) ms.push_back({m.epoch, m.factor});
    j["lr_milestones"] = ms;
  }
  j["optimizer"] = cfg.optimizer;
  j["sgd_momentum"] = cfg.sgd_momentum;
  j["sgd_weight_decay"] = cfg.sgd_weight_decay;
  j["batch_size"] = cfg.batch_size;
  j["seeds"] = cfg.seeds;
  j["order_seed"] = cfg.order_seed;
  j["probe_metric"] = cfg.probe_metric;
  if (!cfg.probe_seeds.empty()) j["probe_seeds"] = cfg.probe_seeds;
  j["dataset"] = cfg.dataset;
  if (cfg.dataset == "synthetic") {
    j["synthetic_seed"] = cfg.synthetic_seed;
    j["synthetic_train"] = cfg.synthetic_train;
    j["synthetic_val"] = cfg.synthetic_val;
    j["synthetic_test"] = cfg.synthetic_test;
  }
  j["data_dir"] = cfg.data_dir;
  j["output_dir"] = cfg.output_dir;
  j["workers"] = cfg.workers;
  j["search_cap"] = cfg.search_cap;
  return j.dump(2) + "\n";
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error("cannot read config: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

void save_config(const ExperimentConfig& cfg, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw config_error("cannot write config: " + path);
  out << config_to_json(cfg);
}

namespace {

void fnv_mix(std::uint64_t& h, const std::string& s) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  h ^= 0xff;
  h *= 1099511628211ULL;
}

}  // namespace

std::uint64_t run_fingerprint(const ExperimentConfig& cfg, const std::string& order_str,
                              std::uint64_t seed) {
  std::uint64_t h = 14695981039346656037ULL;
  std::ostringstream key;
  key << cfg.network << '|' << case_name(cfg.experiment_case) << '|' << order_str << '|' << seed
      << '|' << cfg.epochs_per_layer << '|' << cfg.total_epochs << '|';
  for (double lr : cfg.lr_grid) key << lr << ',';
  key << '|';
  for (const LrMilestone& m : cfg.lr_milestones) key << m.epoch << ':' << m.factor << ',';
  key << '|' << cfg.optimizer << '|' << cfg.sgd_momentum << '|' << cfg.sgd_weight_decay << '|'
      << cfg.batch_size << '|' << cfg.dataset;
  if (cfg.dataset == "synthetic")
    key << '|' << cfg.synthetic_seed << '|' << cfg.synthetic_train << '|' << cfg.synthetic_val
        << '|' << cfg.synthetic_test;
  fnv_mix(h, key.str());
  return h;
}

}  // namespace bwn
