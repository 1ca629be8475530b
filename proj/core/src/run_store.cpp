#include <json.hpp>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bwn/errors.hpp"
#include "bwn/experiment.hpp"

namespace bwn {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string run_dir(const std::string& out_root, const std::string& case_label,
                    const std::string& order_str, std::uint64_t seed) {
  return out_root + "/" + case_label + "/" + (order_str.empty() ? "-" : order_str) + "/" +
         std::to_string(seed);
}

void write_metrics_csv(const std::vector<MetricsRecord>& records, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot write metrics file: " + path);
  out << "epoch,train_error,val_error,test_error,lr,binarized_layers\n";
  char buf[256];
  for (const MetricsRecord& r : records) {
    std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f,%.6f,%g,%s\n", r.epoch, r.train_error,
                  r.val_error, r.test_error, r.lr, r.state.bitstring().c_str());
    out << buf;
  }
}

std::vector<MetricsRecord> read_metrics_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot read metrics file: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "epoch,train_error,val_error,test_error,lr,binarized_layers")
    throw data_error("metrics file has unexpected header: " + path);
  std::vector<MetricsRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    MetricsRecord r;
    char bits[128] = {0};
    unsigned long long epoch = 0;
    if (std::sscanf(line.c_str(), "%llu,%lf,%lf,%lf,%lf,%127s", &epoch, &r.train_error,
                    &r.val_error, &r.test_error, &r.lr, bits) != 6)
      throw data_error("malformed metrics row in " + path + ": " + line);
    r.epoch = static_cast<std::size_t>(epoch);
    r.state = BinarizationState(std::strlen(bits));
    for (std::size_t i = 0; bits[i]; ++i) r.state.flags[i] = bits[i] == '1' ? 1 : 0;
    records.push_back(std::move(r));
  }
  return records;
}

void write_summary(const RunSummary& s, const std::string& path) {
  json j;
  j["case"] = s.case_label;
  j["order"] = s.order;
  j["seed"] = s.seed;
  j["network"] = s.network;
  j["chosen_lr"] = s.chosen_lr;
  j["best_epoch"] = s.best_epoch;
  j["best_val_error"] = s.best_val_error;
  j["test_error"] = s.test_error;
  j["status"] = s.status;
  j["fingerprint"] = s.fingerprint;
  j["wall_time_sec"] = s.wall_time_sec;
  j["lr_val_errors"] = s.lr_val_errors;
  // write-then-rename so a summary only ever exists complete
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw data_error("cannot write summary: " + tmp);
    out << j.dump(2) << "\n";
  }
  fs::rename(tmp, path);
}

std::optional<RunSummary> read_summary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  json j;
  try {
    in >> j;
    RunSummary s;
    s.case_label = j.at("case").get<std::string>();
    s.order = j.at("order").get<std::string>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.network = j.value("network", "");
    s.chosen_lr = j.at("chosen_lr").get<double>();
    s.best_epoch = j.at("best_epoch").get<std::size_t>();
    s.best_val_error = j.at("best_val_error").get<double>();
    s.test_error = j.at("test_error").get<double>();
    s.status = j.at("status").get<std::string>();
    s.fingerprint = j.at("fingerprint").get<std::uint64_t>();
    s.wall_time_sec = j.value("wall_time_sec", 0.0);
    if (j.contains("lr_val_errors"))
      s.lr_val_errors = j["lr_val_errors"].get<std::map<std::string, double>>();
    return s;
  } catch (const json::exception&) {
    return std::nullopt;  // treat unreadable summaries as absent
  }
}

// ---------------------------------------------------------------------------
// Checkpoint format: "BWCK" | u32 version | layer specs | state | errors |
// parameter tensors (f32). Self-contained: the spec list is embedded.
// ---------------------------------------------------------------------------

namespace {

void put_u32(std::ofstream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), 4);
}
void put_u64(std::ofstream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), 8);
}
void put_f64(std::ofstream& out, double v) {
  out.write(reinterpret_cast<const char*>(&v), 8);
}
std::uint32_t get_u32(std::ifstream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  return v;
}
std::uint64_t get_u64(std::ifstream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 8);
  return v;
}
double get_f64(std::ifstream& in) {
  double v = 0;
  in.read(reinterpret_cast<char*>(&v), 8);
  return v;
}

void put_tensor(std::ofstream& out, const Tensor<float>& t) {
  put_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape) put_u64(out, d);
  out.write(reinterpret_cast<const char*>(t.ptr()), static_cast<std::streamsize>(t.size() * 4));
}

Tensor<float> get_tensor(std::ifstream& in) {
  const std::uint32_t rank = get_u32(in);
  std::vector<std::size_t> shape(rank);
  for (auto& d : shape) d = static_cast<std::size_t>(get_u64(in));
  Tensor<float> t(shape);
  in.read(reinterpret_cast<char*>(t.ptr()), static_cast<std::streamsize>(t.size() * 4));
  return t;
}

constexpr std::uint32_t kCheckpointMagic = 0x4b435742;  // "BWCK" little-endian
constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot write checkpoint: " + path);
  put_u32(out, kCheckpointMagic);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(ck.net.spec.size()));
  for (const LayerSpec& l : ck.net.spec) {
    put_u32(out, static_cast<std::uint32_t>(l.kind));
    for (std::size_t v : {l.in, l.out, l.in_ch, l.out_ch, l.kernel, l.stride, l.pad, l.features})
      put_u64(out, v);
  }
  put_u32(out, static_cast<std::uint32_t>(ck.state.layer_count()));
  for (auto f : ck.state.flags) out.put(f ? 1 : 0);
  put_u64(out, ck.epoch);
  put_f64(out, ck.val_error);
  put_f64(out, ck.test_error);
  for (const auto& p : ck.net.params) {
    put_tensor(out, p.w);
    put_tensor(out, p.b);
    put_tensor(out, p.running_mean);
    put_tensor(out, p.running_var);
  }
  if (!out) throw data_error("short write on checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot read checkpoint: " + path);
  if (get_u32(in) != kCheckpointMagic) throw data_error("not a checkpoint file: " + path);
  if (get_u32(in) != kCheckpointVersion) throw data_error("unsupported checkpoint version: " + path);
  const std::uint32_t layers = get_u32(in);
  std::vector<LayerSpec> spec(layers);
  for (LayerSpec& l : spec) {
    l.kind = static_cast<LayerKind>(get_u32(in));
    for (std::size_t* v : {&l.in, &l.out, &l.in_ch, &l.out_ch, &l.kernel, &l.stride, &l.pad,
                           &l.features})
      *v = static_cast<std::size_t>(get_u64(in));
  }
  Checkpoint ck;
  ck.net = Network<float>(spec);
  const std::uint32_t flag_count = get_u32(in);
  ck.state = BinarizationState(flag_count);
  for (std::uint32_t i = 0; i < flag_count; ++i) ck.state.flags[i] = in.get() ? 1 : 0;
  ck.epoch = static_cast<std::size_t>(get_u64(in));
  ck.val_error = get_f64(in);
  ck.test_error = get_f64(in);
  for (auto& p : ck.net.params) {
    p.w = get_tensor(in);
    p.b = get_tensor(in);
    p.running_mean = get_tensor(in);
    p.running_var = get_tensor(in);
  }
  if (!in) throw data_error("truncated checkpoint: " + path);
  return ck;
}

}  // namespace bwn
