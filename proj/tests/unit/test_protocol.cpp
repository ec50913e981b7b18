#include <algorithm>
#include <numeric>
#include <set>

#include "doctest.h"
#include "osvos/error.hpp"
#include "osvos/protocol.hpp"
#include "osvos/rng.hpp"
#include "osvos/synthvid.hpp"

using namespace osvos;
using namespace osvos::protocol;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.seed = 11;
  c.n_train = 2;
  c.n_val = 2;
  c.frame_size = 32;
  c.num_frames = 6;
  c.arch.widths = {4, 8};
  c.parent.iterations = 30;
  c.oneshot.iterations = 10;
  c.refine_max_n = 3;
  c.timing_grid = {0, 5};
  return c;
}

struct Fixture {
  ExperimentConfig config = small_config();
  synthvid::SynthDataset data = synthvid::make_benchmark(config.seed, config.n_train, config.n_val,
                                                         {config.frame_size, config.num_frames});
  StageWeights base = base_weights(config.arch, 5);
  StageWeights parent = train_parent(data.train, base, config.parent).weights;
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

}  // namespace

TEST_CASE("zero model predicts 0.5 everywhere") {
  const auto& f = fixture();
  const nnet::FcnModel zero(f.config.arch);
  const auto preds = infer_sequence(zero, f.data.val[0]);
  for (const auto& p : preds) {
    for (double v : p.foreground.values()) CHECK(v == 0.5);
  }
}

TEST_CASE("parent training is deterministic and changes the weights") {
  const auto& f = fixture();
  const auto again = train_parent(f.data.train, f.base, f.config.parent);
  CHECK(again.weights.model.parameters().size() == f.parent.model.parameters().size());
  CHECK(std::equal(again.weights.model.parameters().begin(), again.weights.model.parameters().end(),
                   f.parent.model.parameters().begin()));
  CHECK(again.loss_log.size() == 30);
  CHECK(f.parent.stage == Stage::parent);
  CHECK_FALSE(std::equal(f.base.model.parameters().begin(), f.base.model.parameters().end(),
                         f.parent.model.parameters().begin()));
  const auto half = train_parent(f.data.train, f.base, f.config.parent, 0.5);
  CHECK(half.frames_used == static_cast<std::size_t>(f.config.n_train * (f.config.num_frames / 2)));
}

TEST_CASE("zero fine-tuning iterations return the parent weights") {
  const auto& f = fixture();
  nnet::TrainConfig t = f.config.oneshot;
  t.iterations = 0;
  const auto& seq = f.data.val[0];
  const auto tuned = finetune_oneshot(f.parent, seq, first_frame_annotation(seq), t);
  CHECK(std::equal(tuned.model.parameters().begin(), tuned.model.parameters().end(),
                   f.parent.model.parameters().begin()));
  CHECK(tuned.stage == Stage::oneshot);
  CHECK(tuned.annotated_frames == std::vector<int>{0});
}

TEST_CASE("fine-tuning does not depend on annotation order") {
  const auto& f = fixture();
  const auto& seq = f.data.val[1];
  std::vector<Annotation> fwd = {{0, (*seq.gt)[0]}, {3, (*seq.gt)[3]}};
  std::vector<Annotation> rev = {fwd[1], fwd[0]};
  const auto a = finetune_oneshot(f.parent, seq, fwd, f.config.oneshot);
  const auto b = finetune_oneshot(f.parent, seq, rev, f.config.oneshot);
  CHECK(std::equal(a.model.parameters().begin(), a.model.parameters().end(), b.model.parameters().begin()));
  std::vector<Annotation> bad = {{99, (*seq.gt)[0]}};
  CHECK_THROWS_AS(finetune_oneshot(f.parent, seq, bad, f.config.oneshot), Error);
}

TEST_CASE("inference is independent of frame order") {
  const auto& f = fixture();
  const auto& seq = f.data.val[0];
  std::vector<std::size_t> order(seq.frames.size());
  std::iota(order.begin(), order.end(), 0);
  std::reverse(order.begin(), order.end());
  const auto a = infer_sequence(f.parent.model, seq);
  const auto b = infer_sequence(f.parent.model, seq, order);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].foreground == b[i].foreground);
    CHECK(a[i].contour == b[i].contour);
  }
}

TEST_CASE("ablation variants and reproducibility") {
  const auto& f = fixture();
  const std::set<Component> all = {Component::parent_network, Component::one_shot, Component::boundary_snapping};
  const auto variants = ablation_variants(all);
  REQUIRE(variants.size() == 5);
  CHECK(variants[0].name == "Ours");
  CHECK(ablation_variants({}).size() == 1);
  const auto a = run_ablation(f.data.val, f.base, f.parent, f.config, all);
  const auto b = run_ablation(f.data.val, f.base, f.parent, f.config, all);
  REQUIRE(a.methods.size() == 5);
  for (std::size_t m = 0; m < a.methods.size(); ++m) {
    CHECK(a.methods[m].method == b.methods[m].method);
    CHECK(analysis::mean_j(a.methods[m]) == analysis::mean_j(b.methods[m]));
  }
}

TEST_CASE("progressive refinement adds one new frame per round") {
  const auto& f = fixture();
  const auto trace =
      progressive_refine(f.parent, f.data.val[0], 3, f.config.oneshot, f.config.pipeline, true, true);
  REQUIRE(trace.steps.size() == 4);
  CHECK(trace.steps[0].frames.empty());
  for (std::size_t k = 1; k < trace.steps.size(); ++k) {
    const auto& prev = trace.steps[k - 1].frames;
    const auto& cur = trace.steps[k].frames;
    REQUIRE(cur.size() == k);
    CHECK(std::equal(prev.begin(), prev.end(), cur.begin()));
    CHECK(std::count(prev.begin(), prev.end(), cur.back()) == 0);
  }
  CHECK(trace.all_j.has_value());
}

TEST_CASE("timing at zero iterations equals the parent alone; Pre excludes tuning cost") {
  const auto& f = fixture();
  const auto& seq = f.data.val[0];
  const auto points = timing_profile(f.parent, seq, f.config.timing_grid, f.config.oneshot, f.config.pipeline);
  const auto preds = infer_sequence(f.parent.model, seq);
  const double parent_j = evaluate(seq, segment(preds, false, f.config.pipeline), f.config.pipeline).report.j.mean;
  auto find = [&](const std::string& mode, int it) {
    for (const auto& p : points) {
      if (p.mode == mode && p.iterations == it) return p;
    }
    FAIL("missing timing point " << mode << " " << it);
    return TimingPoint{};
  };
  CHECK(find("-BS", 0).j_mean == parent_j);
  for (int it : f.config.timing_grid) {
    CHECK(find("-BS Pre", it).work_per_frame <= find("-BS", it).work_per_frame);
    CHECK(find("Ours Pre", it).work_per_frame <= find("Ours", it).work_per_frame);
  }
  CHECK(find("-BS", 5).work_per_frame > find("-BS", 0).work_per_frame);
}

TEST_CASE("parallel_for results do not depend on the worker count") {
  for (int workers : {1, 2, 4}) {
    std::vector<std::uint64_t> out(37);
    parallel_for(out.size(), workers, [&](std::size_t i) { out[i] = SplitMix64::derive(123, i); });
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == SplitMix64::derive(123, i));
  }
  std::vector<int> empty;
  CHECK_NOTHROW(parallel_for(0, 3, [&](std::size_t) { empty.push_back(1); }));
  CHECK(empty.empty());
}
