#include "osvos/cli.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "osvos/error.hpp"

namespace osvos::cli {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::optional<double> to_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  std::size_t used = 0;
  try {
    const double v = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

template <typename Int>
std::optional<Int> to_int(const std::string& s) {
  Int v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<std::vector<int>> to_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto v = to_int<int>(trim(item));
    if (!v) return std::nullopt;
    out.push_back(*v);
  }
  if (out.empty()) return std::nullopt;
  return out;
}

std::optional<bool> to_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  return std::nullopt;
}

// Setter returns an error message for a malformed value, empty on success.
using Setter = std::function<std::string(RunConfig&, const std::string&)>;

Setter real(double protocol::ExperimentConfig::*member) {
  return [member](RunConfig& c, const std::string& v) -> std::string {
    const auto d = to_double(v);
    if (!d) return "expected a number, got '" + v + "'";
    c.experiment.*member = *d;
    return {};
  };
}

Setter real(std::function<double&(RunConfig&)> field) {
  return [field](RunConfig& c, const std::string& v) -> std::string {
    const auto d = to_double(v);
    if (!d) return "expected a number, got '" + v + "'";
    field(c) = *d;
    return {};
  };
}

Setter integer(std::function<int&(RunConfig&)> field) {
  return [field](RunConfig& c, const std::string& v) -> std::string {
    const auto i = to_int<int>(v);
    if (!i) return "expected an integer, got '" + v + "'";
    field(c) = *i;
    return {};
  };
}

void add_train_keys(std::map<std::string, Setter>& keys, const std::string& section,
                    nnet::TrainConfig protocol::ExperimentConfig::*stage) {
  auto tc = [stage](RunConfig& c) -> nnet::TrainConfig& { return c.experiment.*stage; };
  keys[section + ".learning_rate"] = real([tc](RunConfig& c) -> double& { return tc(c).learning_rate; });
  keys[section + ".momentum"] = real([tc](RunConfig& c) -> double& { return tc(c).momentum; });
  keys[section + ".iterations"] = integer([tc](RunConfig& c) -> int& { return tc(c).iterations; });
  keys[section + ".fixed_pos_weight"] = real([tc](RunConfig& c) -> double& { return tc(c).loss.fixed_pos_weight; });
  keys[section + ".contour_weight"] = real([tc](RunConfig& c) -> double& { return tc(c).loss.contour_weight; });
  keys[section + ".pos_weight"] = [tc](RunConfig& c, const std::string& v) -> std::string {
    if (v == "balanced") {
      tc(c).loss.mode = nnet::PosWeightMode::balanced;
    } else if (v == "fixed") {
      tc(c).loss.mode = nnet::PosWeightMode::fixed;
    } else {
      return "expected 'balanced' or 'fixed', got '" + v + "'";
    }
    return {};
  };
}

std::map<std::string, Setter> key_table(const std::filesystem::path& base_dir) {
  std::map<std::string, Setter> k;
  auto path_of = [base_dir](const std::string& v) {
    std::filesystem::path p(v);
    return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
  };
  k["data.root"] = [path_of](RunConfig& c, const std::string& v) -> std::string {
    if (v.empty()) return "expected a path";
    c.dataset_root = path_of(v);
    return {};
  };
  k["data.n_train"] = integer([](RunConfig& c) -> int& { return c.experiment.n_train; });
  k["data.n_val"] = integer([](RunConfig& c) -> int& { return c.experiment.n_val; });
  k["data.frame_size"] = integer([](RunConfig& c) -> int& { return c.experiment.frame_size; });
  k["data.num_frames"] = integer([](RunConfig& c) -> int& { return c.experiment.num_frames; });
  k["run.seed"] = [](RunConfig& c, const std::string& v) -> std::string {
    const auto s = to_int<std::uint64_t>(v);
    if (!s) return "expected a non-negative integer, got '" + v + "'";
    c.experiment.seed = *s;
    return {};
  };
  k["run.workers"] = integer([](RunConfig& c) -> int& { return c.experiment.workers; });
  k["run.out"] = [path_of](RunConfig& c, const std::string& v) -> std::string {
    if (v.empty()) return "expected a path";
    c.out = path_of(v);
    return {};
  };
  k["arch.widths"] = [](RunConfig& c, const std::string& v) -> std::string {
    const auto w = to_int_list(v);
    if (!w) return "expected a comma-separated list of integers, got '" + v + "'";
    c.experiment.arch.widths = *w;
    return {};
  };
  add_train_keys(k, "parent", &protocol::ExperimentConfig::parent);
  add_train_keys(k, "oneshot", &protocol::ExperimentConfig::oneshot);
  k["snap.contour_threshold"] = real([](RunConfig& c) -> double& { return c.experiment.pipeline.contour_threshold; });
  k["snap.majority"] = real([](RunConfig& c) -> double& { return c.experiment.pipeline.majority; });
  k["eval.tau"] = real([](RunConfig& c) -> double& { return c.experiment.pipeline.tau; });
  k["eval.contour_tolerance"] = real([](RunConfig& c) -> double& { return c.experiment.pipeline.contour_tolerance; });
  k["eval.error_distance"] = real([](RunConfig& c) -> double& { return c.experiment.pipeline.error_distance; });
  k["experiments.budget_fraction"] = real(&protocol::ExperimentConfig::budget_fraction);
  k["experiments.refine_max_n"] = integer([](RunConfig& c) -> int& { return c.experiment.refine_max_n; });
  k["experiments.refine_all"] = [](RunConfig& c, const std::string& v) -> std::string {
    const auto b = to_bool(v);
    if (!b) return "expected true or false, got '" + v + "'";
    c.experiment.refine_all = *b;
    return {};
  };
  k["experiments.timing_grid"] = [](RunConfig& c, const std::string& v) -> std::string {
    const auto g = to_int_list(v);
    if (!g) return "expected a comma-separated list of integers, got '" + v + "'";
    c.experiment.timing_grid = *g;
    return {};
  };
  return k;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

std::vector<std::string> check_config(const RunConfig& config) {
  std::vector<std::string> errors;
  const auto& e = config.experiment;
  auto range = [&](const std::string& key, double v, double lo, double hi, bool hi_open) {
    const bool ok = v >= lo && (hi_open ? v < hi : v <= hi);
    if (!ok) {
      errors.push_back(key + " = " + fmt(v) + " is outside the legal range [" + fmt(lo) + ", " + fmt(hi) +
                       (hi_open ? ")" : "]"));
    }
  };
  auto positive = [&](const std::string& key, double v) {
    if (!(v > 0.0)) errors.push_back(key + " = " + fmt(v) + " must be > 0");
  };
  auto at_least = [&](const std::string& key, long long v, long long lo) {
    if (v < lo) errors.push_back(key + " = " + std::to_string(v) + " must be >= " + std::to_string(lo));
  };

  if (config.dataset_root && !std::filesystem::is_directory(*config.dataset_root)) {
    errors.push_back("data.root: dataset directory '" + config.dataset_root->string() + "' does not exist");
  }
  at_least("data.n_train", e.n_train, 1);
  at_least("data.n_val", e.n_val, 1);
  at_least("data.num_frames", e.num_frames, 4);
  at_least("data.frame_size", e.frame_size, 16);
  at_least("run.workers", e.workers, 1);

  bool widths_ok = !e.arch.widths.empty() && e.arch.widths.size() <= 5;
  for (int w : e.arch.widths) widths_ok = widths_ok && w >= 1;
  if (!widths_ok) errors.push_back("arch.widths: expected 1 to 5 positive stage widths");
  if (widths_ok && e.frame_size >= 16 && e.frame_size % e.arch.divisor() != 0) {
    errors.push_back("data.frame_size = " + std::to_string(e.frame_size) + " must be a multiple of " +
                     std::to_string(e.arch.divisor()) + " for this architecture");
  }

  for (const auto& [name, t] : {std::pair<std::string, const nnet::TrainConfig&>{"parent", e.parent},
                                std::pair<std::string, const nnet::TrainConfig&>{"oneshot", e.oneshot}}) {
    positive(name + ".learning_rate", t.learning_rate);
    range(name + ".momentum", t.momentum, 0.0, 1.0, true);
    at_least(name + ".iterations", t.iterations, 0);
    if (t.loss.mode == nnet::PosWeightMode::fixed) positive(name + ".fixed_pos_weight", t.loss.fixed_pos_weight);
    if (!(t.loss.contour_weight >= 0.0)) {
      errors.push_back(name + ".contour_weight = " + fmt(t.loss.contour_weight) + " must be >= 0");
    }
  }

  if (!(e.pipeline.contour_threshold > 0.0 && e.pipeline.contour_threshold < 1.0)) {
    errors.push_back("snap.contour_threshold = " + fmt(e.pipeline.contour_threshold) +
                     " is outside the legal range (0, 1)");
  }
  if (!(e.pipeline.majority > 0.0 && e.pipeline.majority <= 1.0)) {
    errors.push_back("snap.majority = " + fmt(e.pipeline.majority) + " is outside the legal range (0, 1]");
  }
  range("eval.tau", e.pipeline.tau, 0.0, 1.0, false);
  positive("eval.error_distance", e.pipeline.error_distance);
  if (!(e.budget_fraction > 0.0 && e.budget_fraction <= 1.0)) {
    errors.push_back("experiments.budget_fraction = " + fmt(e.budget_fraction) + " is outside the legal range (0, 1]");
  }
  at_least("experiments.refine_max_n", e.refine_max_n, 0);
  if (e.refine_max_n >= e.num_frames) {
    errors.push_back("experiments.refine_max_n = " + std::to_string(e.refine_max_n) + " must be below data.num_frames");
  }
  if (e.timing_grid.empty()) errors.push_back("experiments.timing_grid: expected at least one iteration count");
  for (int it : e.timing_grid) at_least("experiments.timing_grid entry", it, 0);
  return errors;
}

ConfigResult parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  const auto keys = key_table(base_dir);
  static const std::set<std::string> sections = {"data", "run", "arch", "parent", "oneshot", "snap", "eval", "experiments"};

  RunConfig config;
  ConfigResult res;
  std::set<std::string> seen;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const auto hash = raw.find_first_of("#;");
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(lineno) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') {
        res.errors.push_back(where + "unterminated section header '" + line + "'");
        continue;
      }
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      if (!sections.count(section)) res.errors.push_back(where + "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      res.errors.push_back(where + "expected 'key = value', got '" + line + "'");
      continue;
    }
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (section.empty()) {
      res.errors.push_back(where + "key '" + key + "' appears before any [section]");
      continue;
    }
    if (!sections.count(section)) continue;  // already reported
    const std::string full = section + "." + key;
    const auto it = keys.find(full);
    if (it == keys.end()) {
      res.errors.push_back(where + "unknown key '" + key + "' in [" + section + "]");
      continue;
    }
    if (!seen.insert(full).second) {
      res.errors.push_back(where + full + " is set more than once");
      continue;
    }
    const std::string problem = it->second(config, value);
    if (!problem.empty()) res.errors.push_back(where + full + ": " + problem);
  }

  for (auto& e : check_config(config)) res.errors.push_back(std::move(e));
  if (res.errors.empty()) res.config = std::move(config);
  return res;
}

ConfigResult validate_config(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read config file '" + path.string() + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

nlohmann::ordered_json to_json(const RunConfig& config) {
  nlohmann::ordered_json j;
  j["dataset_root"] = config.dataset_root ? nlohmann::ordered_json(config.dataset_root->generic_string())
                                          : nlohmann::ordered_json(nullptr);
  j["workers"] = config.experiment.workers;
  j["experiment"] = protocol::config_json(config.experiment);
  return j;
}

}  // namespace osvos::cli
