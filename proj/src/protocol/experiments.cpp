#include <algorithm>
#include <chrono>
#include <fstream>
#include <map>

#include "json.hpp"
#include "osvos/error.hpp"
#include "osvos/protocol.hpp"
#include "osvos/rng.hpp"
#include "osvos/snap.hpp"
#include "osvos/synthvid.hpp"
#include "osvos/version.hpp"

namespace osvos::protocol {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

std::vector<double> frame_j(const VideoSequence& seq, std::span<const Mask> masks) {
  std::vector<double> j;
  for (std::size_t t = 0; t < masks.size(); ++t) j.push_back(metrics::region_similarity(masks[t], (*seq.gt)[t]));
  return j;
}

}  // namespace

std::vector<Variant> ablation_variants(const std::set<Component>& removable) {
  const std::vector<Variant> all = {
      {"Ours", true, true, true},
      {"-BS", true, true, false},
      {"-PN-BS", false, true, false},
      {"-OS-BS", true, false, false},
      {"-PN-OS-BS", false, false, false},
  };
  std::vector<Variant> out;
  for (const Variant& v : all) {
    const bool ok = (v.parent || removable.contains(Component::parent_network)) &&
                    (v.one_shot || removable.contains(Component::one_shot)) &&
                    (v.snapping || removable.contains(Component::boundary_snapping));
    if (ok) out.push_back(v);
  }
  return out;
}

AblationResult run_ablation(std::span<const VideoSequence> val, const StageWeights& base, const StageWeights& parent,
                            const ExperimentConfig& config, const std::set<Component>& removable) {
  const auto start = Clock::now();
  const std::vector<Variant> variants = ablation_variants(removable);
  const bool need_base_ft = std::any_of(variants.begin(), variants.end(), [](const Variant& v) { return !v.parent && v.one_shot; });
  const bool need_base = std::any_of(variants.begin(), variants.end(), [](const Variant& v) { return !v.parent && !v.one_shot; });

  // masks[variant][sequence]
  std::vector<std::vector<Evaluation>> evals(variants.size(), std::vector<Evaluation>(val.size()));
  std::vector<std::vector<std::vector<Mask>>> masks(variants.size(), std::vector<std::vector<Mask>>(val.size()));
  AblationResult result;
  result.oneshot_models.resize(val.size());

  parallel_for(val.size(), config.workers, [&](std::size_t s) {
    const VideoSequence& seq = val[s];
    const auto annotation = first_frame_annotation(seq);
    const StageWeights tuned = finetune_oneshot(parent, seq, annotation, config.oneshot);
    const auto pred_tuned = infer_sequence(tuned.model, seq);
    const auto pred_parent = infer_sequence(parent.model, seq);
    std::vector<nnet::Prediction> pred_base_tuned, pred_base;
    if (need_base_ft) pred_base_tuned = infer_sequence(finetune_oneshot(base, seq, annotation, config.oneshot).model, seq);
    if (need_base) pred_base = infer_sequence(base.model, seq);
    for (std::size_t v = 0; v < variants.size(); ++v) {
      const Variant& var = variants[v];
      const auto& preds = var.one_shot ? (var.parent ? pred_tuned : pred_base_tuned) : (var.parent ? pred_parent : pred_base);
      masks[v][s] = segment(preds, var.snapping, config.pipeline);
      evals[v][s] = evaluate(seq, masks[v][s], config.pipeline);
    }
    result.oneshot_models[s] = tuned;
  });

  const auto thresholds = analysis::default_tracker_thresholds();
  for (std::size_t v = 0; v < variants.size(); ++v) {
    analysis::MethodRun run;
    run.method = variants[v].name;
    std::vector<Mask> all_pred, all_gt;
    for (std::size_t s = 0; s < val.size(); ++s) {
      run.sequences.push_back(evals[v][s].report);
      run.errors.push_back(evals[v][s].errors);
      all_pred.insert(all_pred.end(), masks[v][s].begin(), masks[v][s].end());
      all_gt.insert(all_gt.end(), val[s].gt->begin(), val[s].gt->end());
    }
    run.tracker = analysis::tracker_eval(all_pred, all_gt, thresholds);
    result.methods.push_back(std::move(run));
  }
  result.seconds = seconds_since(start);
  return result;
}

RefinementTrace progressive_refine(const StageWeights& parent, const VideoSequence& seq, int max_n,
                                   const nnet::TrainConfig& config, const PipelineOptions& opts, bool snapping,
                                   bool include_all) {
  if (!seq.has_gt()) throw Error("progressive_refine: sequence '" + seq.name + "' has no ground truth");
  if (max_n < 0 || static_cast<std::size_t>(max_n) > seq.size()) throw Error("progressive_refine: max_n exceeds frame count");
  RefinementTrace trace;
  std::vector<int> annotated;
  std::vector<double> j = frame_j(seq, segment(infer_sequence(parent.model, seq), snapping, opts));
  trace.steps.push_back({0, {}, mean_of(j)});
  for (int n = 1; n <= max_n; ++n) {
    int worst = -1;
    for (std::size_t t = 0; t < j.size(); ++t) {
      if (std::find(annotated.begin(), annotated.end(), static_cast<int>(t)) != annotated.end()) continue;
      if (worst < 0 || j[t] < j[static_cast<std::size_t>(worst)]) worst = static_cast<int>(t);
    }
    annotated.push_back(worst);
    std::vector<Annotation> ann;
    for (int f : annotated) ann.push_back({f, (*seq.gt)[static_cast<std::size_t>(f)]});
    const StageWeights tuned = finetune_oneshot(parent, seq, ann, config);
    j = frame_j(seq, segment(infer_sequence(tuned.model, seq), snapping, opts));
    trace.steps.push_back({n, annotated, mean_of(j)});
  }
  if (include_all) {
    std::vector<Annotation> ann;
    for (std::size_t t = 0; t < seq.size(); ++t) ann.push_back({static_cast<int>(t), (*seq.gt)[t]});
    const StageWeights tuned = finetune_oneshot(parent, seq, ann, config);
    trace.all_j = mean_of(frame_j(seq, segment(infer_sequence(tuned.model, seq), snapping, opts)));
  }
  return trace;
}

std::vector<TimingPoint> timing_profile(const StageWeights& parent, const VideoSequence& seq,
                                        std::span<const int> iteration_grid, const nnet::TrainConfig& config,
                                        const PipelineOptions& opts) {
  if (iteration_grid.empty()) throw Error("timing_profile: empty iteration grid");
  const double frames = static_cast<double>(seq.size());
  std::vector<TimingPoint> out;
  for (int iters : iteration_grid) {
    nnet::TrainConfig cfg = config;
    cfg.iterations = iters;
    auto t0 = Clock::now();
    const StageWeights tuned = finetune_oneshot(parent, seq, first_frame_annotation(seq), cfg);
    const double tune_s = seconds_since(t0);
    t0 = Clock::now();
    const auto preds = infer_sequence(tuned.model, seq);
    const double fwd_s = seconds_since(t0);
    t0 = Clock::now();
    const auto plain = segment(preds, false, opts);
    const double thr_s = seconds_since(t0);
    t0 = Clock::now();
    const auto snapped = segment(preds, true, opts);
    const double snap_s = seconds_since(t0);

    const double j_plain = mean_of(frame_j(seq, plain));
    const double j_snap = mean_of(frame_j(seq, snapped));
    const double tune_work = kWorkPerTrainingStep * iters / frames;
    const double per_frame_plain = (fwd_s + thr_s) / frames;
    const double per_frame_snap = (fwd_s + snap_s) / frames;
    out.push_back({"-BS", iters, tune_s / frames + per_frame_plain, tune_work + 1.0, j_plain});
    out.push_back({"Ours", iters, tune_s / frames + per_frame_snap, tune_work + 1.0, j_snap});
    out.push_back({"-BS Pre", iters, per_frame_plain, 1.0, j_plain});
    out.push_back({"Ours Pre", iters, per_frame_snap, 1.0, j_snap});
  }
  return out;
}

// ---- full suite -------------------------------------------------------------------

nlohmann::ordered_json config_json(const ExperimentConfig& c) {
  nlohmann::ordered_json j;
  j["seed"] = c.seed;
  j["n_train"] = c.n_train;
  j["n_val"] = c.n_val;
  j["frame_size"] = c.frame_size;
  j["num_frames"] = c.num_frames;
  j["arch"] = {{"in_channels", c.arch.in_channels}, {"widths", c.arch.widths}};
  auto tc = [](const nnet::TrainConfig& t) {
    return nlohmann::ordered_json{{"learning_rate", t.learning_rate},
                                  {"momentum", t.momentum},
                                  {"iterations", t.iterations},
                                  {"seed", t.seed},
                                  {"pos_weight", t.loss.mode == nnet::PosWeightMode::balanced ? "balanced" : "fixed"},
                                  {"fixed_pos_weight", t.loss.fixed_pos_weight},
                                  {"contour_weight", t.loss.contour_weight}};
  };
  j["parent"] = tc(c.parent);
  j["oneshot"] = tc(c.oneshot);
  j["pipeline"] = {{"tau", c.pipeline.tau},
                   {"contour_threshold", c.pipeline.contour_threshold},
                   {"majority", c.pipeline.majority},
                   {"contour_tolerance", c.pipeline.contour_tolerance},
                   {"error_distance", c.pipeline.error_distance}};
  j["budget_fraction"] = c.budget_fraction;
  j["refine_max_n"] = c.refine_max_n;
  j["refine_all"] = c.refine_all;
  j["timing_grid"] = c.timing_grid;
  return j;
}

namespace {

// Per-sequence mean J of the proposal and superpixel oracles, both driven by
// the parent network (class-agnostic objectness and generic contours).
std::pair<double, double> oracle_bounds(std::span<const VideoSequence> val, const StageWeights& parent,
                                        const ExperimentConfig& config) {
  std::vector<double> proposal(val.size()), superpixel(val.size());
  parallel_for(val.size(), config.workers, [&](std::size_t s) {
    const VideoSequence& seq = val[s];
    const auto preds = infer_sequence(parent.model, seq);
    std::vector<double> pj, sj;
    for (std::size_t t = 0; t < seq.size(); ++t) {
      const Mask& gt = (*seq.gt)[t];
      const Mask fg = threshold(preds[t].foreground, config.pipeline.tau);
      int count = 0;
      const auto labels = connected_components(fg, &count);
      std::vector<Mask> candidates(static_cast<std::size_t>(count) + 1, Mask(fg.width(), fg.height()));
      for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= 0) candidates[static_cast<std::size_t>(labels[i]) + 1].set(i, true);
      }
      pj.push_back(snap::best_proposal_oracle(candidates, gt).j);
      if (gt.none()) {
        sj.push_back(1.0);
      } else {
        const auto part = snap::partition_from_contours(preds[t].contour, config.pipeline.contour_threshold);
        sj.push_back(snap::best_superpixel_oracle(part, gt).j);
      }
    }
    proposal[s] = mean_of(pj);
    superpixel[s] = mean_of(sj);
  });
  return {mean_of(proposal), mean_of(superpixel)};
}

double ours_j_with_parent(std::span<const VideoSequence> val, const StageWeights& parent, const ExperimentConfig& config) {
  std::vector<double> per(val.size());
  parallel_for(val.size(), config.workers, [&](std::size_t s) {
    const auto tuned = finetune_oneshot(parent, val[s], first_frame_annotation(val[s]), config.oneshot);
    per[s] = mean_of(frame_j(val[s], segment(infer_sequence(tuned.model, val[s]), true, config.pipeline)));
  });
  return mean_of(per);
}

}  // namespace

SuiteResult run_full_suite(const ExperimentConfig& config, const std::filesystem::path& out, const ProgressFn& progress) {
  const auto start = Clock::now();
  auto note = [&](const std::string& msg) {
    if (progress) progress(msg);
  };
  config.parent.validate();
  config.oneshot.validate();

  SuiteResult res;
  note("generating benchmark");
  const auto ds = synthvid::make_benchmark(config.seed, config.n_train, config.n_val,
                                           {config.frame_size, config.num_frames});
  if (!out.empty()) synthvid::write_dataset(ds, out / "data");

  nnet::TrainConfig parent_cfg = config.parent;
  parent_cfg.seed = SplitMix64::derive(config.seed, 0x9A2E47);
  const StageWeights base = base_weights(config.arch, SplitMix64::derive(config.seed, 0xBA5E));

  note("training parent network");
  auto t0 = Clock::now();
  const ParentRun parent = train_parent(ds.train, base, parent_cfg, 1.0);
  res.parent_seconds = seconds_since(t0);
  if (!out.empty()) {
    nnet::save_checkpoint(base.model, out / "models" / "base.oswt");
    nnet::save_checkpoint(parent.weights.model, out / "models" / "parent.oswt");
  }

  note("running ablation");
  res.ablation = run_ablation(ds.val, base, parent.weights, config,
                              {Component::parent_network, Component::one_shot, Component::boundary_snapping});

  note("training-data budget");
  res.budget_j.push_back(analysis::mean_j(res.ablation.methods.front()));
  std::vector<analysis::BudgetRow> budget_rows = {{1.0, parent.frames_used, res.budget_j.back()}};
  if (config.budget_fraction < 1.0) {
    const ParentRun partial = train_parent(ds.train, base, parent_cfg, config.budget_fraction);
    res.budget_j.push_back(ours_j_with_parent(ds.val, partial.weights, config));
    budget_rows.push_back({config.budget_fraction, partial.frames_used, res.budget_j.back()});
  }

  note("progressive refinement");
  res.refinement.resize(ds.val.size());
  parallel_for(ds.val.size(), config.workers, [&](std::size_t s) {
    res.refinement[s] = progressive_refine(parent.weights, ds.val[s], config.refine_max_n, config.oneshot, config.pipeline,
                                           true, config.refine_all);
  });

  note("timing profile");
  std::vector<std::vector<TimingPoint>> timing(ds.val.size());
  parallel_for(ds.val.size(), config.workers, [&](std::size_t s) {
    timing[s] = timing_profile(parent.weights, ds.val[s], config.timing_grid, config.oneshot, config.pipeline);
  });
  for (std::size_t i = 0; i < timing.front().size(); ++i) {
    TimingPoint p = timing.front()[i];
    p.seconds_per_frame = p.j_mean = p.work_per_frame = 0.0;
    for (const auto& seq_points : timing) {
      p.seconds_per_frame += seq_points[i].seconds_per_frame;
      p.work_per_frame += seq_points[i].work_per_frame;
      p.j_mean += seq_points[i].j_mean;
    }
    const double n = static_cast<double>(timing.size());
    p.seconds_per_frame /= n;
    p.work_per_frame /= n;
    p.j_mean /= n;
    res.timing.push_back(p);
  }

  note("oracle bounds");
  const auto [proposal_j, superpixel_j] = oracle_bounds(ds.val, parent.weights, config);

  analysis::ExperimentBundle& b = res.bundle;
  b.seed = config.seed;
  for (const auto& seq : ds.val) {
    b.sequences.push_back(seq.name);
    b.attributes.push_back(seq.attributes);
  }
  b.methods = res.ablation.methods;
  b.budget = budget_rows;
  for (int n = 0; n <= config.refine_max_n; ++n) {
    double j = 0.0;
    for (const auto& tr : res.refinement) j += tr.steps[static_cast<std::size_t>(n)].j_mean;
    b.refinement.push_back({std::to_string(n), n, j / static_cast<double>(res.refinement.size())});
  }
  if (config.refine_all) {
    double j = 0.0;
    for (const auto& tr : res.refinement) j += *tr.all_j;
    b.refinement.push_back({"All", config.num_frames, j / static_cast<double>(res.refinement.size())});
  }
  for (const auto& p : res.timing) b.timing.push_back({p.mode, p.iterations, p.work_per_frame, p.j_mean});
  b.bounds = {{"Ours", analysis::mean_j(res.ablation.methods.front())},
              {"superpixel_oracle", superpixel_j},
              {"proposal_oracle", proposal_j}};

  res.total_seconds = seconds_since(start);
  if (!out.empty()) {
    analysis::write_report(b, out / "report");
    nlohmann::ordered_json manifest;
    manifest["tool"] = "osvos";
    manifest["version"] = kVersion;
    manifest["checkpoint_version"] = 1;
    manifest["config"] = config_json(config);
    manifest["parent_loss_first"] = parent.loss_log.empty() ? 0.0 : parent.loss_log.front();
    manifest["parent_loss_last"] = parent.loss_log.empty() ? 0.0 : parent.loss_log.back();
    manifest["wall_clock"] = {{"parent_seconds", res.parent_seconds},
                              {"ablation_seconds", res.ablation.seconds},
                              {"total_seconds", res.total_seconds}};
    nlohmann::ordered_json timing_measured = nlohmann::ordered_json::array();
    for (const auto& p : res.timing) {
      timing_measured.push_back({{"mode", p.mode}, {"iterations", p.iterations}, {"seconds_per_frame", p.seconds_per_frame}, {"J", p.j_mean}});
    }
    manifest["timing_measured"] = timing_measured;
    std::ofstream f(out / "run.json", std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write run manifest in '" + out.string() + "'");
    f << manifest.dump(2) << "\n";
  }
  return res;
}

}  // namespace osvos::protocol
