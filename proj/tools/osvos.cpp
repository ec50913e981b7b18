// Command-line entry point. Every subcommand writes only below --out and
// leaves a JSON run log (<subcommand>.run.json) there.
//
// Exit codes: 0 ok, 1 other failure, 2 usage error, 3 invalid config,
// 4 missing or unreadable input files.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "osvos/analysis.hpp"
#include "osvos/cli.hpp"
#include "osvos/error.hpp"
#include "osvos/maskcore.hpp"
#include "osvos/metrics.hpp"
#include "osvos/nnet.hpp"
#include "osvos/protocol.hpp"
#include "osvos/rng.hpp"
#include "osvos/snap.hpp"
#include "osvos/synthvid.hpp"
#include "osvos/version.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace osvos;

namespace {

constexpr int kExitOther = 1;
constexpr int kExitUsage = 2;
constexpr int kExitConfig = 3;
constexpr int kExitMissing = 4;

class ConfigError : public Error {
 public:
  ConfigError(std::vector<std::string> errors) : Error("invalid configuration"), errors(std::move(errors)) {}
  std::vector<std::string> errors;
};

// Flags shared by every subcommand.
struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> workers;
  std::optional<int> iters;
  std::string data;
};

void add_common(CLI::App* sub, Common& c, bool with_data) {
  sub->add_option("--config", c.config, "key = value config file");
  sub->add_option("--seed", c.seed, "master seed (overrides run.seed)");
  sub->add_option("--out", c.out, "output directory; nothing is written outside it")->required();
  sub->add_option("--workers", c.workers, "worker threads (results do not depend on it)");
  sub->add_option("--iters", c.iters, "iteration count for the stage this command trains");
  if (with_data) sub->add_option("--data", c.data, "dataset root (overrides data.root)");
}

// Config file (or defaults) plus flag overrides, validated as a whole.
cli::RunConfig resolve(const Common& c) {
  cli::RunConfig rc;
  if (!c.config.empty()) {
    auto parsed = cli::validate_config(c.config);
    if (!parsed.errors.empty()) throw ConfigError(parsed.errors);
    rc = *parsed.config;
  }
  if (!c.data.empty()) rc.dataset_root = fs::path(c.data);
  if (c.seed) rc.experiment.seed = *c.seed;
  if (c.workers) rc.experiment.workers = *c.workers;
  rc.out = c.out;
  auto errors = cli::check_config(rc);
  if (c.iters && *c.iters < 0) errors.push_back("--iters = " + std::to_string(*c.iters) + " must be >= 0");
  if (!errors.empty()) throw ConfigError(errors);
  return rc;
}

const fs::path& require_root(const cli::RunConfig& rc) {
  if (!rc.dataset_root) throw ConfigError({"data.root: no dataset root given (use --data or [data] root)"});
  return *rc.dataset_root;
}

struct Dataset {
  std::vector<VideoSequence> train;
  std::vector<VideoSequence> val;
};

// Generated datasets carry a manifest with splits; any other directory of
// sequences is treated as all-val.
Dataset load_dataset(const fs::path& root) {
  Dataset d;
  if (fs::exists(root / "manifest.json")) {
    auto s = synthvid::read_dataset(root);
    d.train = std::move(s.train);
    d.val = std::move(s.val);
  } else {
    for (const auto& name : list_sequences(root)) d.val.push_back(load_sequence(root, name));
  }
  return d;
}

std::vector<VideoSequence> select(std::vector<VideoSequence> seqs, const std::vector<std::string>& names) {
  if (names.empty()) return seqs;
  std::vector<VideoSequence> out;
  for (const auto& n : names) {
    auto it = std::find_if(seqs.begin(), seqs.end(), [&](const VideoSequence& s) { return s.name == n; });
    if (it == seqs.end()) throw IoError("sequence '" + n + "' not found in dataset");
    out.push_back(*it);
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write '" + path.string() + "'");
  f << text;
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

// Masks of one sequence below a prediction root: <root>/<seq>/masks,
// <root>/<seq>/gt (so a dataset can be scored against itself), or <root>/<seq>.
std::vector<Mask> load_predicted(const fs::path& root, const std::string& name, std::size_t count) {
  const fs::path base = root / name;
  for (const char* sub : {"masks", "gt"}) {
    if (fs::is_directory(base / sub)) return load_mask_dir(base / sub, count);
  }
  if (!fs::is_directory(base)) throw IoError("no predicted masks for sequence '" + name + "' under '" + root.string() + "'");
  return load_mask_dir(base, count);
}

std::vector<VideoSequence> with_gt(std::vector<VideoSequence> seqs) {
  for (const auto& s : seqs) {
    if (!s.has_gt()) throw IoError("sequence '" + s.name + "' has no gt masks");
  }
  return seqs;
}

json stats_json(const metrics::Statistics& s) { return {{"mean", s.mean}, {"recall", s.recall}, {"decay", s.decay}}; }

// {J: {mean, recall, decay}, F: {...}, T: {mean}} averaged over sequences.
json method_row(const std::vector<metrics::SequenceReport>& reports) {
  metrics::Statistics j, f;
  double t = 0.0;
  for (const auto& r : reports) {
    j.mean += r.j.mean;
    j.recall += r.j.recall;
    j.decay += r.j.decay;
    f.mean += r.f.mean;
    f.recall += r.f.recall;
    f.decay += r.f.decay;
    t += r.t_mean;
  }
  const double n = static_cast<double>(std::max<std::size_t>(reports.size(), 1));
  for (auto* s : {&j, &f}) {
    s->mean /= n;
    s->recall /= n;
    s->decay /= n;
  }
  return {{"J", stats_json(j)}, {"F", stats_json(f)}, {"T", {{"mean", t / n}}}};
}

nnet::FcnModel load_model_for(const fs::path& model, const std::string& seq) {
  if (fs::is_directory(model)) return nnet::load_checkpoint(model / (seq + ".oswt"));
  return nnet::load_checkpoint(model);
}

// Runs one subcommand body and records the outcome in <out>/<name>.run.json.
class RunLog {
 public:
  RunLog(std::string name, const cli::RunConfig& rc) : name_(std::move(name)), out_(rc.out), start_(Clock::now()) {
    log_["tool"] = "osvos";
    log_["version"] = kVersion;
    log_["subcommand"] = name_;
    log_["seed"] = rc.experiment.seed;
    log_["config"] = cli::to_json(rc);
  }
  json& operator[](const char* key) { return log_[key]; }
  void finish() {
    log_["seconds"] = std::chrono::duration<double>(Clock::now() - start_).count();
    log_["status"] = "ok";
    write_text(out_ / (name_ + ".run.json"), log_.dump(2) + "\n");
  }

 private:
  using Clock = std::chrono::steady_clock;
  std::string name_;
  fs::path out_;
  Clock::time_point start_;
  json log_;
};

void progress(const std::string& msg) { std::cerr << "[osvos] " << msg << "\n"; }

// ---- subcommands ------------------------------------------------------------------

int cmd_generate(const Common& c) {
  const auto rc = resolve(c);
  const auto& e = rc.experiment;
  RunLog log("generate", rc);
  const auto ds = synthvid::make_benchmark(e.seed, e.n_train, e.n_val, {e.frame_size, e.num_frames});
  synthvid::write_dataset(ds, rc.out);
  log["sequences"] = ds.train.size() + ds.val.size();
  log.finish();
  return 0;
}

int cmd_train_parent(const Common& c, double fraction) {
  auto rc = resolve(c);
  auto& e = rc.experiment;
  if (c.iters) e.parent.iterations = *c.iters;
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError({"--fraction must lie in (0, 1]"});
  const auto ds = load_dataset(require_root(rc));
  if (ds.train.empty()) throw IoError("dataset has no training split");
  RunLog log("train-parent", rc);
  nnet::TrainConfig cfg = e.parent;
  cfg.seed = SplitMix64::derive(e.seed, 0x9A2E47);
  const auto base = protocol::base_weights(e.arch, SplitMix64::derive(e.seed, 0xBA5E));
  const auto run = protocol::train_parent(with_gt(ds.train), base, cfg, fraction);
  nnet::save_checkpoint(base.model, rc.out / "base.oswt");
  nnet::save_checkpoint(run.weights.model, rc.out / "parent.oswt");
  std::string csv = "iteration,loss\n";
  for (std::size_t i = 0; i < run.loss_log.size(); ++i) csv += std::to_string(i) + "," + num(run.loss_log[i]) + "\n";
  write_text(rc.out / "loss.csv", csv);
  log["frames_used"] = run.frames_used;
  log["loss_first"] = run.loss_log.empty() ? 0.0 : run.loss_log.front();
  log["loss_last"] = run.loss_log.empty() ? 0.0 : run.loss_log.back();
  log.finish();
  return 0;
}

int cmd_finetune(const Common& c, const std::string& model, const std::vector<std::string>& names) {
  auto rc = resolve(c);
  if (c.iters) rc.experiment.oneshot.iterations = *c.iters;
  const auto seqs = with_gt(select(load_dataset(require_root(rc)).val, names));
  RunLog log("finetune", rc);
  protocol::StageWeights parent{protocol::Stage::parent, {}, {}, nnet::load_checkpoint(model)};
  std::vector<protocol::StageWeights> tuned(seqs.size());
  protocol::parallel_for(seqs.size(), rc.experiment.workers, [&](std::size_t s) {
    tuned[s] = protocol::finetune_oneshot(parent, seqs[s], protocol::first_frame_annotation(seqs[s]),
                                          rc.experiment.oneshot);
  });
  json written = json::array();
  for (std::size_t s = 0; s < seqs.size(); ++s) {
    nnet::save_checkpoint(tuned[s].model, rc.out / (seqs[s].name + ".oswt"));
    written.push_back(seqs[s].name + ".oswt");
  }
  log["checkpoints"] = written;
  log.finish();
  return 0;
}

int cmd_infer(const Common& c, const std::string& model, const std::vector<std::string>& names, bool snapping) {
  const auto rc = resolve(c);
  const auto seqs = select(load_dataset(require_root(rc)).val, names);
  RunLog log("infer", rc);
  std::vector<nnet::FcnModel> models;
  for (const auto& s : seqs) models.push_back(load_model_for(model, s.name));
  protocol::parallel_for(seqs.size(), rc.experiment.workers, [&](std::size_t s) {
    const auto preds = protocol::infer_sequence(models[s], seqs[s]);
    const fs::path dir = rc.out / seqs[s].name;
    fs::create_directories(dir / "fg");
    fs::create_directories(dir / "contour");
    for (std::size_t t = 0; t < preds.size(); ++t) {
      save_probmap(preds[t].foreground, dir / "fg" / frame_filename(t, "pmap"));
      save_probmap(preds[t].contour, dir / "contour" / frame_filename(t, "pmap"));
    }
    save_mask_dir(protocol::segment(preds, snapping, rc.experiment.pipeline), dir / "masks");
  });
  log["sequences"] = seqs.size();
  log["snapping"] = snapping;
  log.finish();
  return 0;
}

std::vector<fs::path> pmap_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("probability map directory '" + dir.string() + "' does not exist");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".pmap") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

int cmd_snap(const Common& c, const std::string& fg_dir, const std::string& contour_dir, std::optional<double> majority,
             std::optional<double> contour_threshold) {
  auto rc = resolve(c);
  if (majority) rc.experiment.pipeline.majority = *majority;
  if (contour_threshold) rc.experiment.pipeline.contour_threshold = *contour_threshold;
  if (auto errors = cli::check_config(rc); !errors.empty()) throw ConfigError(errors);
  const auto fg_files = pmap_files(fg_dir);
  std::vector<ProbMap> fg, contours;
  for (const auto& f : fg_files) {
    fg.push_back(load_probmap(f));
    const fs::path cf = fs::path(contour_dir) / f.filename();
    if (!fs::exists(cf)) throw IoError("missing contour map '" + cf.string() + "'");
    contours.push_back(load_probmap(cf));
  }
  RunLog log("snap", rc);
  fs::create_directories(rc.out);
  const auto& p = rc.experiment.pipeline;
  for (std::size_t i = 0; i < fg.size(); ++i) {
    const auto part = snap::partition_from_contours(contours[i], p.contour_threshold);
    save_mask(snap::snap_mask(fg[i], part, p.majority), rc.out / fg_files[i].filename().replace_extension(".pgm"));
  }
  log["frames"] = fg.size();
  log.finish();
  return 0;
}

int cmd_evaluate(const Common& c, const std::string& pred, const std::string& method) {
  const auto rc = resolve(c);
  const auto seqs = with_gt(load_dataset(require_root(rc)).val);
  RunLog log("evaluate", rc);
  std::vector<metrics::SequenceReport> reports;
  std::string csv = "seq,frame,J,F\n";
  json per_seq = json::array();
  for (const auto& s : seqs) {
    const auto masks = load_predicted(pred, s.name, s.size());
    const auto ev = protocol::evaluate(s, masks, rc.experiment.pipeline);
    for (std::size_t t = 0; t < ev.report.frames.size(); ++t) {
      csv += s.name + "," + std::to_string(t) + "," + num(ev.report.frames[t].j) + "," + num(ev.report.frames[t].f) + "\n";
    }
    per_seq.push_back({{"seq", s.name}, {"J", stats_json(ev.report.j)}, {"F", stats_json(ev.report.f)},
                       {"T", {{"mean", ev.report.t_mean}}}});
    reports.push_back(ev.report);
  }
  json summary;
  summary["methods"] = {{method, method_row(reports)}};
  summary["sequences"] = per_seq;
  write_text(rc.out / "per_frame.csv", csv);
  write_text(rc.out / "summary.json", summary.dump(2) + "\n");
  log["sequences"] = seqs.size();
  log.finish();
  return 0;
}

int cmd_track_eval(const Common& c, const std::string& pred) {
  const auto rc = resolve(c);
  const auto seqs = with_gt(load_dataset(require_root(rc)).val);
  RunLog log("track-eval", rc);
  std::vector<Mask> all_pred, all_gt;
  for (const auto& s : seqs) {
    const auto masks = load_predicted(pred, s.name, s.size());
    all_pred.insert(all_pred.end(), masks.begin(), masks.end());
    all_gt.insert(all_gt.end(), s.gt->begin(), s.gt->end());
  }
  const auto thresholds = analysis::default_tracker_thresholds();
  const auto curve = analysis::tracker_eval(all_pred, all_gt, thresholds);
  std::string csv = "threshold,success\n";
  double auc = 0.0;
  for (std::size_t i = 0; i < curve.thresholds.size(); ++i) {
    csv += num(curve.thresholds[i]) + "," + num(curve.success[i]) + "\n";
    auc += curve.success[i];
  }
  write_text(rc.out / "tracker.csv", csv);
  log["frames"] = all_pred.size();
  log["success_mean"] = curve.success.empty() ? 0.0 : auc / static_cast<double>(curve.success.size());
  log.finish();
  return 0;
}

// Report bundle from predicted masks of several methods (name=dir pairs).
int cmd_analyze(const Common& c, const std::vector<std::string>& method_specs) {
  const auto rc = resolve(c);
  const auto seqs = with_gt(load_dataset(require_root(rc)).val);
  std::vector<std::pair<std::string, fs::path>> methods;
  for (const auto& m : method_specs) {
    const auto eq = m.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == m.size()) {
      throw ConfigError({"--method expects name=directory, got '" + m + "'"});
    }
    methods.emplace_back(m.substr(0, eq), fs::path(m.substr(eq + 1)));
  }
  RunLog log("analyze", rc);
  analysis::ExperimentBundle b;
  b.seed = rc.experiment.seed;
  for (const auto& s : seqs) {
    b.sequences.push_back(s.name);
    b.attributes.push_back(s.attributes);
  }
  for (const auto& [name, dir] : methods) {
    analysis::MethodRun run;
    run.method = name;
    std::vector<Mask> all_pred, all_gt;
    for (const auto& s : seqs) {
      const auto masks = load_predicted(dir, s.name, s.size());
      const auto ev = protocol::evaluate(s, masks, rc.experiment.pipeline);
      run.sequences.push_back(ev.report);
      run.errors.push_back(ev.errors);
      all_pred.insert(all_pred.end(), masks.begin(), masks.end());
      all_gt.insert(all_gt.end(), s.gt->begin(), s.gt->end());
    }
    run.tracker = analysis::tracker_eval(all_pred, all_gt, analysis::default_tracker_thresholds());
    b.methods.push_back(std::move(run));
  }
  auto has = [&](const std::string& n) {
    return std::any_of(methods.begin(), methods.end(), [&](const auto& m) { return m.first == n; });
  };
  b.reference_method = has("Ours") ? "Ours" : methods.front().first;
  b.error_reference_method = has("-BS") ? "-BS" : methods.front().first;
  analysis::write_report(b, rc.out / "report");
  log["methods"] = methods.size();
  log.finish();
  return 0;
}

protocol::StageWeights parent_or_train(const cli::RunConfig& rc, const std::string& parent_path,
                                       const std::vector<VideoSequence>& train) {
  if (!parent_path.empty()) return {protocol::Stage::parent, {}, {}, nnet::load_checkpoint(parent_path)};
  if (train.empty()) throw IoError("no --parent checkpoint given and the dataset has no training split");
  progress("training parent network");
  nnet::TrainConfig cfg = rc.experiment.parent;
  cfg.seed = SplitMix64::derive(rc.experiment.seed, 0x9A2E47);
  const auto base = protocol::base_weights(rc.experiment.arch, SplitMix64::derive(rc.experiment.seed, 0xBA5E));
  return protocol::train_parent(with_gt(train), base, cfg).weights;
}

int cmd_ablate(const Common& c, const std::string& parent_path) {
  auto rc = resolve(c);
  if (c.iters) rc.experiment.oneshot.iterations = *c.iters;
  const auto ds = load_dataset(require_root(rc));
  const auto val = with_gt(ds.val);
  RunLog log("ablate", rc);
  const auto parent = parent_or_train(rc, parent_path, ds.train);
  const auto base = protocol::base_weights(parent.model.architecture(), SplitMix64::derive(rc.experiment.seed, 0xBA5E));
  const auto res = protocol::run_ablation(val, base, parent, rc.experiment,
                                          {protocol::Component::parent_network, protocol::Component::one_shot,
                                           protocol::Component::boundary_snapping});
  analysis::ExperimentBundle b;
  b.seed = rc.experiment.seed;
  for (const auto& s : val) {
    b.sequences.push_back(s.name);
    b.attributes.push_back(s.attributes);
  }
  b.methods = res.methods;
  analysis::write_report(b, rc.out / "report");
  json j = json::object();
  for (const auto& m : res.methods) j[m.method] = analysis::mean_j(m);
  log["J_mean"] = j;
  log["ablation_seconds"] = res.seconds;
  log.finish();
  return 0;
}

int cmd_refine(const Common& c, const std::string& parent_path, const std::vector<std::string>& names, int max_n) {
  auto rc = resolve(c);
  if (c.iters) rc.experiment.oneshot.iterations = *c.iters;
  if (max_n < 0) throw ConfigError({"--max-n must be >= 0"});
  const auto ds = load_dataset(require_root(rc));
  const auto val = with_gt(select(ds.val, names));
  for (const auto& s : val) {
    if (static_cast<std::size_t>(max_n) >= s.size()) throw ConfigError({"--max-n must be below the sequence length"});
  }
  RunLog log("refine", rc);
  const auto parent = parent_or_train(rc, parent_path, ds.train);
  std::vector<protocol::RefinementTrace> traces(val.size());
  protocol::parallel_for(val.size(), rc.experiment.workers, [&](std::size_t s) {
    traces[s] = protocol::progressive_refine(parent, val[s], max_n, rc.experiment.oneshot, rc.experiment.pipeline, true,
                                             rc.experiment.refine_all);
  });
  std::string csv = "seq,annotations,frames,J\n";
  for (std::size_t s = 0; s < val.size(); ++s) {
    for (const auto& step : traces[s].steps) {
      std::string frames;
      for (int f : step.frames) frames += (frames.empty() ? "" : ";") + std::to_string(f);
      csv += val[s].name + "," + std::to_string(step.annotations) + "," + frames + "," + num(step.j_mean) + "\n";
    }
    if (traces[s].all_j) csv += val[s].name + ",All,," + num(*traces[s].all_j) + "\n";
  }
  write_text(rc.out / "refinement.csv", csv);
  log["sequences"] = val.size();
  log.finish();
  return 0;
}

int cmd_timing(const Common& c, const std::string& parent_path, const std::vector<std::string>& names) {
  const auto rc = resolve(c);
  const auto ds = load_dataset(require_root(rc));
  const auto val = with_gt(select(ds.val, names));
  RunLog log("timing", rc);
  const auto parent = parent_or_train(rc, parent_path, ds.train);
  std::string csv = "seq,mode,iterations,work_per_frame,J\n";
  json measured = json::array();
  for (const auto& s : val) {
    const auto points = protocol::timing_profile(parent, s, rc.experiment.timing_grid, rc.experiment.oneshot,
                                                 rc.experiment.pipeline);
    for (const auto& p : points) {
      csv += s.name + "," + p.mode + "," + std::to_string(p.iterations) + "," + num(p.work_per_frame) + "," +
             num(p.j_mean) + "\n";
      measured.push_back({{"seq", s.name}, {"mode", p.mode}, {"iterations", p.iterations},
                          {"seconds_per_frame", p.seconds_per_frame}});
    }
  }
  write_text(rc.out / "timing.csv", csv);
  log["timing_measured"] = measured;
  log.finish();
  return 0;
}

int cmd_full_suite(const Common& c) {
  auto rc = resolve(c);
  if (c.iters) rc.experiment.parent.iterations = *c.iters;
  RunLog log("full-suite", rc);
  const auto res = protocol::run_full_suite(rc.experiment, rc.out, progress);
  json j = json::object();
  for (const auto& m : res.bundle.methods) j[m.method] = analysis::mean_j(m);
  log["J_mean"] = j;
  log["total_seconds"] = res.total_seconds;
  log.finish();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"One-shot video object segmentation toolkit"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  Common c;
  std::string model, parent, pred, fg_dir, contour_dir, method = "pred";
  std::vector<std::string> names, method_specs;
  std::optional<double> majority, contour_threshold;
  double fraction = 1.0;
  int max_n = 5;
  bool snapping = true;

  auto* generate = app.add_subcommand("generate", "render the synthetic benchmark into --out");
  add_common(generate, c, false);

  auto* train = app.add_subcommand("train-parent", "train the parent network on the training split");
  add_common(train, c, true);
  train->add_option("--fraction", fraction, "fraction of training frames per sequence");

  auto* finetune = app.add_subcommand("finetune", "one-shot fine-tune on the first frame of each sequence");
  add_common(finetune, c, true);
  finetune->add_option("--model", model, "parent checkpoint")->required();
  finetune->add_option("--sequence", names, "restrict to these sequences");

  auto* infer = app.add_subcommand("infer", "write fg/contour maps and masks for each sequence");
  add_common(infer, c, true);
  infer->add_option("--model", model, "checkpoint, or a directory of <sequence>.oswt")->required();
  infer->add_option("--sequence", names, "restrict to these sequences");
  infer->add_flag("!--no-snap", snapping, "threshold instead of snapping");

  auto* snapc = app.add_subcommand("snap", "snap foreground maps to contour superpixels");
  add_common(snapc, c, false);
  snapc->add_option("--fg", fg_dir, "directory of foreground .pmap files")->required();
  snapc->add_option("--contours", contour_dir, "directory of contour .pmap files with matching names")->required();
  snapc->add_option("--majority", majority, "mean-probability vote for a superpixel");
  snapc->add_option("--contour-threshold", contour_threshold, "contour strength below which pixels seed regions");

  auto* evaluate = app.add_subcommand("evaluate", "per-frame J/F CSV and summary JSON against gt");
  add_common(evaluate, c, true);
  evaluate->add_option("--pred", pred, "prediction root with one directory per sequence")->required();
  evaluate->add_option("--method", method, "method name used in the summary");

  auto* ablate = app.add_subcommand("ablate", "ablation over parent, one-shot and snapping");
  add_common(ablate, c, true);
  ablate->add_option("--parent", parent, "parent checkpoint (trained from the dataset if omitted)");

  auto* refine = app.add_subcommand("refine", "progressive refinement trace");
  add_common(refine, c, true);
  refine->add_option("--parent", parent, "parent checkpoint (trained from the dataset if omitted)");
  refine->add_option("--sequence", names, "restrict to these sequences");
  refine->add_option("--max-n", max_n, "largest number of annotated frames");

  auto* timing = app.add_subcommand("timing", "quality against fine-tuning iterations");
  add_common(timing, c, true);
  timing->add_option("--parent", parent, "parent checkpoint (trained from the dataset if omitted)");
  timing->add_option("--sequence", names, "restrict to these sequences");

  auto* track = app.add_subcommand("track-eval", "box success curve of predicted masks");
  add_common(track, c, true);
  track->add_option("--pred", pred, "prediction root with one directory per sequence")->required();

  auto* analyze = app.add_subcommand("analyze", "report bundle from predicted masks");
  add_common(analyze, c, true);
  analyze->add_option("--method", method_specs, "name=directory, repeatable")->required();

  auto* full = app.add_subcommand("full-suite", "complete reproduction: data, training, experiments, report");
  add_common(full, c, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    const CLI::App* used = &app;
    for (const auto* sub : app.get_subcommands()) used = sub;
    std::cerr << used->help();
    return kExitUsage;
  }

  try {
    if (*generate) return cmd_generate(c);
    if (*train) return cmd_train_parent(c, fraction);
    if (*finetune) return cmd_finetune(c, model, names);
    if (*infer) return cmd_infer(c, model, names, snapping);
    if (*snapc) return cmd_snap(c, fg_dir, contour_dir, majority, contour_threshold);
    if (*evaluate) return cmd_evaluate(c, pred, method);
    if (*ablate) return cmd_ablate(c, parent);
    if (*refine) return cmd_refine(c, parent, names, max_n);
    if (*timing) return cmd_timing(c, parent, names);
    if (*track) return cmd_track_eval(c, pred);
    if (*analyze) return cmd_analyze(c, method_specs);
    if (*full) return cmd_full_suite(c);
  } catch (const ConfigError& e) {
    std::cerr << "error: invalid configuration\n";
    for (const auto& msg : e.errors) std::cerr << "  " << msg << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitMissing;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitOther;
  }
  return kExitUsage;
}
