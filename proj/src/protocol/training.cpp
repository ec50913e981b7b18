#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <cmath>
#include <thread>

#include "osvos/error.hpp"
#include "osvos/protocol.hpp"
#include "osvos/rng.hpp"
#include "osvos/snap.hpp"

namespace osvos::protocol {

namespace {

template <class T>
void shuffle(std::vector<T>& v, SplitMix64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = rng.below(i);
    std::swap(v[i - 1], v[j]);
  }
}

struct TrainingSample {
  const Frame* frame;
  const Mask* fg;
  Mask contour;
};

}  // namespace

const char* stage_name(Stage s) {
  switch (s) {
    case Stage::base:
      return "base";
    case Stage::parent:
      return "parent";
    case Stage::oneshot:
      return "oneshot";
  }
  return "?";
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& job) {
  const std::size_t threads = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, workers)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_lock;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          job(i);
        } catch (...) {
          std::lock_guard lock(failure_lock);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

StageWeights base_weights(const nnet::Architecture& arch, std::uint64_t seed) {
  return {Stage::base, {}, {}, nnet::FcnModel::he_init(arch, seed)};
}

ParentRun train_parent(std::span<const VideoSequence> train, const StageWeights& init, const nnet::TrainConfig& config,
                       double subset_fraction) {
  config.validate();
  if (train.empty()) throw Error("train_parent: empty training split");
  if (!(subset_fraction > 0.0 && subset_fraction <= 1.0)) throw Error("train_parent: subset fraction must lie in (0,1]");

  std::vector<TrainingSample> pool;
  for (std::size_t s = 0; s < train.size(); ++s) {
    const VideoSequence& seq = train[s];
    if (!seq.has_gt()) throw Error("train_parent: sequence '" + seq.name + "' has no ground truth");
    std::vector<std::size_t> idx(seq.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    SplitMix64 pick(SplitMix64::derive(config.seed, 0x5E1EC7 + s));
    shuffle(idx, pick);
    const auto keep = static_cast<std::size_t>(std::floor(subset_fraction * static_cast<double>(seq.size()) + 1e-9));
    idx.resize(keep);
    std::sort(idx.begin(), idx.end());
    for (std::size_t t : idx) {
      // Generic object edges when available, else the target's own boundary.
      Mask contour = seq.edges ? dilate((*seq.edges)[t], 1) : nnet::contour_target((*seq.gt)[t]);
      pool.push_back({&seq.frames[t], &(*seq.gt)[t], std::move(contour)});
    }
  }
  if (pool.empty()) throw Error("train_parent: empty effective subset");

  ParentRun run;
  run.frames_used = pool.size();
  run.weights = {Stage::parent, {}, {}, init.model};
  auto params = run.weights.model.parameters();
  std::vector<double> velocity(params.size(), 0.0);

  std::vector<std::size_t> order(pool.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  SplitMix64 rng(SplitMix64::derive(config.seed, 0x0DE5));
  std::size_t cursor = order.size();
  run.loss_log.reserve(static_cast<std::size_t>(config.iterations));
  for (int it = 0; it < config.iterations; ++it) {
    if (cursor == order.size()) {
      shuffle(order, rng);
      cursor = 0;
    }
    const TrainingSample& sample = pool[order[cursor++]];
    const auto res = nnet::backward(run.weights.model, *sample.frame, *sample.fg, sample.contour, config.loss);
    nnet::sgd_step(params, res.gradients, velocity, config);
    run.loss_log.push_back(res.loss);
  }
  return run;
}

std::vector<Annotation> first_frame_annotation(const VideoSequence& seq) {
  if (!seq.has_gt()) throw Error("sequence '" + seq.name + "' has no ground truth for the first frame");
  return {Annotation{0, seq.gt->front()}};
}

StageWeights finetune_oneshot(const StageWeights& parent, const VideoSequence& seq,
                              std::span<const Annotation> annotations, const nnet::TrainConfig& config) {
  config.validate();
  if (annotations.empty()) throw Error("finetune_oneshot: empty annotation set");
  std::vector<Annotation> sorted(annotations.begin(), annotations.end());
  std::sort(sorted.begin(), sorted.end(), [](const Annotation& a, const Annotation& b) { return a.frame < b.frame; });
  StageWeights out{Stage::oneshot, seq.name, {}, parent.model};
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const Annotation& a = sorted[i];
    if (a.frame < 0 || static_cast<std::size_t>(a.frame) >= seq.size()) {
      throw Error("finetune_oneshot: annotation frame " + std::to_string(a.frame) + " out of range");
    }
    if (i > 0 && sorted[i - 1].frame == a.frame) throw Error("finetune_oneshot: duplicate annotation frame");
    if (a.mask.width() != seq.frames[0].width() || a.mask.height() != seq.frames[0].height()) {
      throw Error("finetune_oneshot: annotation mask dimensions differ from the frames");
    }
    out.annotated_frames.push_back(a.frame);
  }
  if (config.iterations == 0) return out;

  std::vector<Mask> contours;
  for (const Annotation& a : sorted) contours.push_back(nnet::contour_target(a.mask));
  auto params = out.model.parameters();
  std::vector<double> velocity(params.size(), 0.0);
  for (int it = 0; it < config.iterations; ++it) {
    const std::size_t k = static_cast<std::size_t>(it) % sorted.size();
    const auto res = nnet::backward(out.model, seq.frames[static_cast<std::size_t>(sorted[k].frame)], sorted[k].mask,
                                    contours[k], config.loss);
    nnet::sgd_step(params, res.gradients, velocity, config);
  }
  return out;
}

std::vector<nnet::Prediction> infer_sequence(const nnet::FcnModel& model, const VideoSequence& seq,
                                             std::span<const std::size_t> order) {
  std::vector<nnet::Prediction> out(seq.size());
  if (order.empty()) {
    for (std::size_t t = 0; t < seq.size(); ++t) out[t] = nnet::forward(model, seq.frames[t]);
    return out;
  }
  if (order.size() != seq.size()) throw Error("infer_sequence: order must be a permutation of the frames");
  std::vector<char> seen(seq.size(), 0);
  for (std::size_t t : order) {
    if (t >= seq.size() || seen[t]) throw Error("infer_sequence: order must be a permutation of the frames");
    seen[t] = 1;
    out[t] = nnet::forward(model, seq.frames[t]);
  }
  return out;
}

std::vector<Mask> segment(std::span<const nnet::Prediction> preds, bool snapping, const PipelineOptions& opts) {
  std::vector<Mask> masks;
  masks.reserve(preds.size());
  for (const auto& p : preds) {
    if (snapping) {
      const auto part = snap::partition_from_contours(p.contour, opts.contour_threshold);
      masks.push_back(snap::snap_mask(p.foreground, part, opts.majority));
    } else {
      masks.push_back(threshold(p.foreground, opts.tau));
    }
  }
  return masks;
}

Evaluation evaluate(const VideoSequence& seq, std::span<const Mask> masks, const PipelineOptions& opts) {
  if (!seq.has_gt()) throw Error("evaluate: sequence '" + seq.name + "' has no ground truth");
  Evaluation ev;
  ev.report = metrics::evaluate_sequence(seq.name, masks, *seq.gt, opts.contour_tolerance);
  for (std::size_t t = 0; t < masks.size(); ++t) {
    ev.errors.push_back(analysis::error_decomposition(masks[t], (*seq.gt)[t], opts.error_distance));
  }
  return ev;
}

}  // namespace osvos::protocol
