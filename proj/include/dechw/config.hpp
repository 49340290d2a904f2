#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dechw/errors.hpp"

namespace dechw {

enum class Strategy { kDecHetero, kDecHW };

inline std::string to_string(Strategy s) {
  return s == Strategy::kDecHW ? "dechw" : "dechetero";
}

// "Never stop exchanging Hessians" sentinel for theta.
inline constexpr long long kThetaInf = std::numeric_limits<long long>::max();

// Full declarative description of one run. Field defaults follow the paper's
// training configuration (5 local epochs, batch 100, lr 0.001, momentum 0.5,
// beta 1) with desk-scale topology/data sizes.
struct ExperimentConfig {
  // [topology]
  std::string topology_model = "erdos-renyi";  // or "edge-list"
  int nodes = 8;
  double edge_probability = 0.3;
  std::uint64_t topology_seed = 1;
  std::string edge_list_path;

  // [data]
  std::string data_source = "synthetic";  // or "idx"
  int classes = 4;
  int samples_per_class = 100;
  int test_samples_per_class = 25;
  int input_dim = 16;
  double class_separation = 3.0;
  std::uint64_t data_seed = 1;
  std::string train_images, train_labels, test_images, test_labels;

  // [partition]
  double alpha = 0.5;
  std::uint64_t partition_seed = 1;
  int min_samples_per_node = 1;

  // [model]
  std::string architecture = "mlp";
  std::vector<int> hidden = {16};

  // [train]
  int rounds = 10;  // T
  int epochs = 5;   // E
  int batch_size = 100;
  double learning_rate = 0.001;
  double momentum = 0.5;

  // [aggregation]
  Strategy strategy = Strategy::kDecHW;
  double beta = 1.0;
  long long theta = kThetaInf;
  bool no_accumulation = false;
  int sample_budget = 512;

  // [run]
  std::uint64_t master_seed = 1;
  bool homogeneous_init = false;
  int eval_every = 1;
  int last_k_window = 10;
  long long tracked_param_index = -1;  // -1 disables weight tracking

  // [output]
  std::string output_dir = "out";

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

inline const std::vector<std::pair<std::string, std::vector<std::string>>>& config_schema() {
  static const std::vector<std::pair<std::string, std::vector<std::string>>> schema = {
      {"topology", {"model", "nodes", "p", "seed", "edge_list"}},
      {"data",
       {"source", "classes", "samples_per_class", "test_samples_per_class", "input_dim",
        "class_separation", "seed", "train_images", "train_labels", "test_images", "test_labels"}},
      {"partition", {"alpha", "seed", "min_samples_per_node"}},
      {"model", {"architecture", "hidden"}},
      {"train", {"rounds", "epochs", "batch_size", "learning_rate", "momentum"}},
      {"aggregation", {"strategy", "beta", "theta", "no_accumulation", "sample_budget"}},
      {"run",
       {"master_seed", "init", "eval_every", "last_k_window", "tracked_param_index"}},
      {"output", {"dir"}},
  };
  return schema;
}

inline std::string suggest_key(const std::string& bad) {
  std::string best;
  std::size_t best_d = 3;  // only suggest close matches
  for (const auto& [section, keys] : config_schema()) {
    for (const auto& k : keys) {
      std::string full = section + "." + k;
      std::size_t d = edit_distance(bad, full);
      std::size_t dk = edit_distance(bad.substr(bad.find('.') + 1), k);
      d = std::min(d, dk);
      if (d < best_d) {
        best_d = d;
        best = full;
      }
    }
  }
  return best;
}

inline long long parse_ll(const std::string& key, const std::string& v) {
  long long out{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ConfigError(key + ": expected integer, got '" + v + "'");
  return out;
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ConfigError(key + ": expected unsigned integer, got '" + v + "'");
  return out;
}

inline int parse_int(const std::string& key, const std::string& v) {
  long long x = parse_ll(key, v);
  if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
    throw ConfigError(key + ": value out of int range: " + v);
  return static_cast<int>(x);
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected number, got '" + v + "'");
  }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

inline std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  if (trim(v).empty()) return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_int(key, trim(item)));
  return out;
}

inline std::string format_double(double d) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), d);
  return std::string(buf, p);
}

}  // namespace detail

// Raw key/value view of an INI document: full-line comments (# or ;), one
// "key = value" per line under a [section] heading.
using RawConfig = std::map<std::string, std::string>;  // "section.key" -> value

inline RawConfig parse_raw_config(const std::string& text) {
  RawConfig raw;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": unclosed section");
      section = detail::trim(t.substr(1, t.size() - 2));
      if (section.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty section name");
      continue;
    }
    auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value', got '" + t + "'");
    if (section.empty())
      throw ConfigError("line " + std::to_string(lineno) + ": key outside any [section]");
    std::string key = detail::trim(t.substr(0, eq));
    std::string value = detail::trim(t.substr(eq + 1));
    std::string full = section + "." + key;
    if (raw.count(full)) throw ConfigError("duplicate key " + full);
    raw[full] = value;
  }
  return raw;
}

// "section.key=value" command-line override, applied before validation.
inline void apply_override(RawConfig& raw, const std::string& spec) {
  auto eq = spec.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + spec + "' lacks '='");
  std::string key = detail::trim(spec.substr(0, eq));
  if (key.find('.') == std::string::npos)
    throw ConfigError("override key '" + key + "' must be section.key");
  raw[key] = detail::trim(spec.substr(eq + 1));
}

inline void validate_config(const ExperimentConfig& c) {
  auto fail = [](const std::string& key, const std::string& why) {
    throw ConfigError(key + ": " + why);
  };
  if (c.topology_model != "erdos-renyi" && c.topology_model != "edge-list")
    fail("topology.model", "must be erdos-renyi or edge-list (got '" + c.topology_model + "')");
  if (c.nodes < 1) fail("topology.nodes", "must be >= 1");
  if (c.edge_probability < 0.0 || c.edge_probability > 1.0)
    fail("topology.p", "must lie in [0,1] (got " + detail::format_double(c.edge_probability) + ")");
  if (c.topology_model == "edge-list" && c.edge_list_path.empty())
    fail("topology.edge_list", "required when topology.model = edge-list");

  if (c.data_source != "synthetic" && c.data_source != "idx")
    fail("data.source", "must be synthetic or idx (got '" + c.data_source + "')");
  if (c.data_source == "synthetic") {
    if (c.classes < 2) fail("data.classes", "must be >= 2");
    if (c.samples_per_class < 1) fail("data.samples_per_class", "must be >= 1");
    if (c.test_samples_per_class < 1) fail("data.test_samples_per_class", "must be >= 1");
    if (c.input_dim < 1) fail("data.input_dim", "must be >= 1");
    if (c.class_separation < 0.0) fail("data.class_separation", "must be >= 0");
  } else {
    if (c.train_images.empty() || c.train_labels.empty())
      fail("data.train_images", "idx source needs train_images and train_labels");
    if (c.test_images.empty() || c.test_labels.empty())
      fail("data.test_images", "idx source needs test_images and test_labels");
  }

  if (!(c.alpha > 0.0))
    fail("partition.alpha", "must be positive (got " + detail::format_double(c.alpha) + ")");
  if (c.min_samples_per_node < 0) fail("partition.min_samples_per_node", "must be >= 0");

  if (c.architecture != "mlp" && c.architecture != "cnn-mnist" && c.architecture != "cnn-fashion" &&
      c.architecture != "cnn-cifar")
    fail("model.architecture", "unsupported architecture '" + c.architecture + "'");
  for (int h : c.hidden)
    if (h < 1) fail("model.hidden", "hidden widths must be >= 1");

  if (c.rounds < 1) fail("train.rounds", "must be >= 1");
  if (c.epochs < 0) fail("train.epochs", "must be >= 0");
  if (c.batch_size < 1) fail("train.batch_size", "must be >= 1");
  if (!(c.learning_rate > 0.0)) fail("train.learning_rate", "must be positive");
  if (c.momentum < 0.0 || c.momentum >= 1.0) fail("train.momentum", "must lie in [0,1)");

  if (c.beta < 0.0 || c.beta > 1.0) fail("aggregation.beta", "must lie in [0,1]");
  if (c.theta < 0) fail("aggregation.theta", "must be >= 0 or inf");
  if (c.sample_budget < 1) fail("aggregation.sample_budget", "must be >= 1");

  if (c.eval_every < 1) fail("run.eval_every", "must be >= 1");
  if (c.last_k_window < 1) fail("run.last_k_window", "must be >= 1");
  if (c.tracked_param_index < -1) fail("run.tracked_param_index", "must be >= -1");
  if (c.output_dir.empty()) fail("output.dir", "must not be empty");
}

inline ExperimentConfig config_from_raw(const RawConfig& raw) {
  using namespace detail;
  // Reject unknown keys first, with a suggestion when one is close.
  for (const auto& [full, _] : raw) {
    auto dot = full.find('.');
    std::string section = full.substr(0, dot);
    std::string key = full.substr(dot + 1);
    bool known = false;
    for (const auto& [sec, keys] : config_schema()) {
      if (sec != section) continue;
      known = std::find(keys.begin(), keys.end(), key) != keys.end();
      break;
    }
    if (!known) {
      std::string hint = suggest_key(full);
      throw ConfigError("unknown key " + full + (hint.empty() ? "" : "; did you mean '" + hint + "'?"));
    }
  }

  ExperimentConfig c;
  auto get = [&](const char* full) -> const std::string* {
    auto it = raw.find(full);
    return it == raw.end() ? nullptr : &it->second;
  };

  if (auto v = get("topology.model")) c.topology_model = *v;
  if (auto v = get("topology.nodes")) c.nodes = parse_int("topology.nodes", *v);
  if (auto v = get("topology.p")) c.edge_probability = parse_double("topology.p", *v);
  if (auto v = get("topology.seed")) c.topology_seed = parse_u64("topology.seed", *v);
  if (auto v = get("topology.edge_list")) c.edge_list_path = *v;

  if (auto v = get("data.source")) c.data_source = *v;
  if (auto v = get("data.classes")) c.classes = parse_int("data.classes", *v);
  if (auto v = get("data.samples_per_class"))
    c.samples_per_class = parse_int("data.samples_per_class", *v);
  if (auto v = get("data.test_samples_per_class"))
    c.test_samples_per_class = parse_int("data.test_samples_per_class", *v);
  if (auto v = get("data.input_dim")) c.input_dim = parse_int("data.input_dim", *v);
  if (auto v = get("data.class_separation"))
    c.class_separation = parse_double("data.class_separation", *v);
  if (auto v = get("data.seed")) c.data_seed = parse_u64("data.seed", *v);
  if (auto v = get("data.train_images")) c.train_images = *v;
  if (auto v = get("data.train_labels")) c.train_labels = *v;
  if (auto v = get("data.test_images")) c.test_images = *v;
  if (auto v = get("data.test_labels")) c.test_labels = *v;

  if (auto v = get("partition.alpha")) c.alpha = parse_double("partition.alpha", *v);
  if (auto v = get("partition.seed")) c.partition_seed = parse_u64("partition.seed", *v);
  if (auto v = get("partition.min_samples_per_node"))
    c.min_samples_per_node = parse_int("partition.min_samples_per_node", *v);

  if (auto v = get("model.architecture")) c.architecture = *v;
  if (auto v = get("model.hidden")) c.hidden = parse_int_list("model.hidden", *v);

  if (auto v = get("train.rounds")) c.rounds = parse_int("train.rounds", *v);
  if (auto v = get("train.epochs")) c.epochs = parse_int("train.epochs", *v);
  if (auto v = get("train.batch_size")) c.batch_size = parse_int("train.batch_size", *v);
  if (auto v = get("train.learning_rate"))
    c.learning_rate = parse_double("train.learning_rate", *v);
  if (auto v = get("train.momentum")) c.momentum = parse_double("train.momentum", *v);

  if (auto v = get("aggregation.strategy")) {
    if (*v == "dechw")
      c.strategy = Strategy::kDecHW;
    else if (*v == "dechetero")
      c.strategy = Strategy::kDecHetero;
    else
      throw ConfigError("aggregation.strategy: must be dechw or dechetero (got '" + *v + "')");
  }
  if (auto v = get("aggregation.beta")) c.beta = parse_double("aggregation.beta", *v);
  if (auto v = get("aggregation.theta"))
    c.theta = (*v == "inf") ? kThetaInf : parse_ll("aggregation.theta", *v);
  if (auto v = get("aggregation.no_accumulation"))
    c.no_accumulation = parse_bool("aggregation.no_accumulation", *v);
  if (auto v = get("aggregation.sample_budget"))
    c.sample_budget = parse_int("aggregation.sample_budget", *v);

  if (auto v = get("run.master_seed")) c.master_seed = parse_u64("run.master_seed", *v);
  if (auto v = get("run.init")) {
    if (*v == "heterogeneous")
      c.homogeneous_init = false;
    else if (*v == "homogeneous")
      c.homogeneous_init = true;
    else
      throw ConfigError("run.init: must be heterogeneous or homogeneous (got '" + *v + "')");
  }
  if (auto v = get("run.eval_every")) c.eval_every = parse_int("run.eval_every", *v);
  if (auto v = get("run.last_k_window")) c.last_k_window = parse_int("run.last_k_window", *v);
  if (auto v = get("run.tracked_param_index"))
    c.tracked_param_index = parse_ll("run.tracked_param_index", *v);

  if (auto v = get("output.dir")) c.output_dir = *v;

  validate_config(c);
  return c;
}

inline ExperimentConfig parse_config_text(const std::string& text,
                                          const std::vector<std::string>& overrides = {}) {
  RawConfig raw = parse_raw_config(text);
  for (const auto& o : overrides) apply_override(raw, o);
  return config_from_raw(raw);
}

inline ExperimentConfig parse_config(const std::string& path,
                                     const std::vector<std::string>& overrides = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), overrides);
}

// Canonical text form; parse_config_text(emit_config(c)) == c.
inline std::string emit_config(const ExperimentConfig& c) {
  using detail::format_double;
  std::ostringstream out;
  out << "[topology]\n";
  out << "model = " << c.topology_model << "\n";
  out << "nodes = " << c.nodes << "\n";
  out << "p = " << format_double(c.edge_probability) << "\n";
  out << "seed = " << c.topology_seed << "\n";
  if (!c.edge_list_path.empty()) out << "edge_list = " << c.edge_list_path << "\n";

  out << "\n[data]\n";
  out << "source = " << c.data_source << "\n";
  out << "classes = " << c.classes << "\n";
  out << "samples_per_class = " << c.samples_per_class << "\n";
  out << "test_samples_per_class = " << c.test_samples_per_class << "\n";
  out << "input_dim = " << c.input_dim << "\n";
  out << "class_separation = " << format_double(c.class_separation) << "\n";
  out << "seed = " << c.data_seed << "\n";
  if (!c.train_images.empty()) out << "train_images = " << c.train_images << "\n";
  if (!c.train_labels.empty()) out << "train_labels = " << c.train_labels << "\n";
  if (!c.test_images.empty()) out << "test_images = " << c.test_images << "\n";
  if (!c.test_labels.empty()) out << "test_labels = " << c.test_labels << "\n";

  out << "\n[partition]\n";
  out << "alpha = " << format_double(c.alpha) << "\n";
  out << "seed = " << c.partition_seed << "\n";
  out << "min_samples_per_node = " << c.min_samples_per_node << "\n";

  out << "\n[model]\n";
  out << "architecture = " << c.architecture << "\n";
  out << "hidden = ";
  for (std::size_t i = 0; i < c.hidden.size(); ++i)
    out << (i ? "," : "") << c.hidden[i];
  out << "\n";

  out << "\n[train]\n";
  out << "rounds = " << c.rounds << "\n";
  out << "epochs = " << c.epochs << "\n";
  out << "batch_size = " << c.batch_size << "\n";
  out << "learning_rate = " << format_double(c.learning_rate) << "\n";
  out << "momentum = " << format_double(c.momentum) << "\n";

  out << "\n[aggregation]\n";
  out << "strategy = " << to_string(c.strategy) << "\n";
  out << "beta = " << format_double(c.beta) << "\n";
  out << "theta = ";
  if (c.theta == kThetaInf)
    out << "inf\n";
  else
    out << c.theta << "\n";
  out << "no_accumulation = " << (c.no_accumulation ? "true" : "false") << "\n";
  out << "sample_budget = " << c.sample_budget << "\n";

  out << "\n[run]\n";
  out << "master_seed = " << c.master_seed << "\n";
  out << "init = " << (c.homogeneous_init ? "homogeneous" : "heterogeneous") << "\n";
  out << "eval_every = " << c.eval_every << "\n";
  out << "last_k_window = " << c.last_k_window << "\n";
  out << "tracked_param_index = " << c.tracked_param_index << "\n";

  out << "\n[output]\n";
  out << "dir = " << c.output_dir << "\n";
  return out.str();
}

}  // namespace dechw
