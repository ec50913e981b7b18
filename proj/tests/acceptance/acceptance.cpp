// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and a
// summary. Exits 0 once every criterion has been evaluated; with --strict the
// exit code is the number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "osvos/analysis.hpp"
#include "osvos/maskcore.hpp"
#include "osvos/metrics.hpp"
#include "osvos/nnet.hpp"
#include "osvos/protocol.hpp"
#include "osvos/rng.hpp"
#include "osvos/snap.hpp"

using namespace osvos;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string sci(double v) {
  std::ostringstream os;
  os.precision(2);
  os << std::scientific << v;
  return os.str();
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os.precision(digits);
  os << std::fixed << v;
  return os.str();
}

Mask random_mask(SplitMix64& rng, int w, int h, double density) {
  Mask m(w, h);
  for (std::size_t i = 0; i < m.size(); ++i) m.set(i, rng.uniform() < density);
  return m;
}

Mask rect(int w, int h, int x0, int y0, int x1, int y1) {
  Mask m(w, h);
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) m.set(x, y, true);
  }
  return m;
}

// ---- 1: metric fixtures -----------------------------------------------------------

Outcome metric_fixtures() {
  using namespace metrics;
  std::vector<std::pair<double, double>> cases;  // (computed, expected)
  const Mask a = rect(8, 8, 1, 1, 4, 4);
  cases.push_back({region_similarity(a, a), 1.0});
  cases.push_back({region_similarity(a, rect(8, 8, 6, 6, 7, 7)), 0.0});
  cases.push_back({region_similarity(Mask(8, 8), Mask(8, 8)), 1.0});
  cases.push_back({region_similarity(Mask(8, 8), a), 0.0});
  Mask p(2, 2), g(2, 2);
  p.set(0, 0, true);
  p.set(0, 1, true);
  g.set(0, 1, true);
  g.set(1, 1, true);
  cases.push_back({region_similarity(p, g), 1.0 / 3.0});
  const Mask s1 = rect(10, 10, 2, 0, 4, 2), s2 = rect(10, 10, 0, 0, 2, 2);
  cases.push_back({region_similarity(s1, s2), 0.2});
  cases.push_back({contour_accuracy(a, a, 0.0), 1.0});
  cases.push_back({contour_accuracy(Mask(6, 6), Mask(6, 6), 2.0), 1.0});
  cases.push_back({contour_accuracy(a, Mask(8, 8), 2.0), 0.0});
  cases.push_back({contour_accuracy(s1, s2, 0.0), 0.375});
  cases.push_back({contour_accuracy(translate(a, 1, 0), a, 1.0), 1.0});

  const auto flat = aggregate(std::vector<double>(8, 0.8));
  cases.push_back({flat.mean, 0.8});
  cases.push_back({flat.recall, 1.0});
  cases.push_back({flat.decay, 0.0});
  const auto step = aggregate(std::vector<double>{1, 1, 0, 0});
  cases.push_back({step.mean, 0.5});
  cases.push_back({step.recall, 0.5});
  cases.push_back({step.decay, 1.0});
  cases.push_back({aggregate(std::vector<double>{0.5, 0.5, 0.5}).recall, 0.0});
  const auto five = aggregate(std::vector<double>{0.9, 0.7, 0.5, 0.2, 0.1});
  cases.push_back({five.decay, 0.65});
  cases.push_back({five.recall, 0.4});

  std::vector<Mask> still(5, rect(32, 32, 8, 8, 14, 13)), moving;
  for (int t = 0; t < 6; ++t) moving.push_back(rect(32, 32, 2 + 3 * t, 4 + t, 8 + 3 * t, 10 + t));
  cases.push_back({temporal_instability(still, 1.0), 0.0});
  cases.push_back({temporal_instability(moving, 1.0), 0.0});

  double worst = 0.0;
  for (const auto& [got, want] : cases) worst = std::max(worst, std::abs(got - want));
  return {cases.size() >= 12 && worst <= 1e-12,
          std::to_string(cases.size()) + " fixtures, max deviation " + sci(worst)};
}

// ---- 2: distance transform ----------------------------------------------------------

Outcome distance_transform() {
  SplitMix64 rng(2);
  int grids = 0, mismatches = 0;
  while (grids < 200) {
    const int w = 1 + static_cast<int>(rng.below(32)), h = 1 + static_cast<int>(rng.below(32));
    const Mask m = random_mask(rng, w, h, rng.uniform(0.0, 0.3));
    if (m.none()) continue;
    ++grids;
    const auto sq = squared_distance_transform(m);
    bool ok = true;
    for (int y = 0; y < h && ok; ++y) {
      for (int x = 0; x < w && ok; ++x) {
        std::int64_t best = std::numeric_limits<std::int64_t>::max();
        for (int v = 0; v < h; ++v) {
          for (int u = 0; u < w; ++u) {
            if (m.at(u, v)) best = std::min<std::int64_t>(best, std::int64_t(u - x) * (u - x) + std::int64_t(v - y) * (v - y));
          }
        }
        ok = sq[static_cast<std::size_t>(y) * w + x] == best;
      }
    }
    mismatches += ok ? 0 : 1;
  }
  return {mismatches == 0, std::to_string(grids) + " grids, " + std::to_string(mismatches) + " mismatching"};
}

// ---- 3: gradient check --------------------------------------------------------------

Outcome gradient_check() {
  // Central differences with epsilon 1e-5 on a 2-stage net. Parameters whose
  // window straddles a ReLU/max-pool switch (one-sided quotients disagree) are
  // not differentiable there and are counted separately; gradients below the
  // quotient's rounding floor are compared absolutely.
  using namespace nnet;
  const Architecture arch{3, {4, 4}};
  const double eps = 1e-5, floor = 1e-9;
  SplitMix64 rng(4242);
  std::size_t checked = 0, kinks = 0, total = 0;
  double worst = 0.0;
  const int trials = 20;
  for (int trial = 0; trial < trials; ++trial) {
    FcnModel model = FcnModel::he_init(arch, 100 + static_cast<std::uint64_t>(trial));
    SplitMix64 brng(static_cast<std::uint64_t>(trial) ^ 0x5EEDULL);
    for (const auto& b : model.blobs()) {
      if (b.name.find("bias") == std::string::npos) continue;
      for (std::size_t i = 0; i < b.size; ++i) model.parameters()[b.offset + i] = 0.1 * brng.normal();
    }
    std::vector<double> px(16 * 16 * 3);
    for (auto& x : px) x = rng.uniform();
    const Frame frame(16, 16, 3, px);
    const Mask fg = random_mask(rng, 16, 16, 0.3);
    const Mask contour = contour_target(fg);
    const LossOptions opts{PosWeightMode::balanced, 1.0, 1.0};
    const BackwardResult br = backward(model, frame, fg, contour, opts);
    FcnModel probe = model;
    for (std::size_t i = 0; i < model.parameter_count(); ++i) {
      ++total;
      const double orig = probe.parameters()[i];
      probe.parameters()[i] = orig + eps;
      const double lp = backward(probe, frame, fg, contour, opts).loss;
      probe.parameters()[i] = orig - eps;
      const double lm = backward(probe, frame, fg, contour, opts).loss;
      probe.parameters()[i] = orig;
      const double fq = (lp - br.loss) / eps, bq = (br.loss - lm) / eps;
      if (std::abs(fq - bq) > 1e-3 * std::max(std::abs(fq), std::abs(bq)) + 1e-6) {
        ++kinks;
        continue;
      }
      const double fd = (lp - lm) / (2.0 * eps), an = br.gradients[i];
      const double gap = std::abs(an - fd), scale = std::max(std::abs(an), std::abs(fd));
      worst = std::max(worst, scale * 1e-4 > floor ? gap / scale : (gap <= floor ? 0.0 : gap / scale));
      ++checked;
    }
  }
  return {worst < 1e-4 && kinks * 100 <= total,
          std::to_string(trials) + " cases, " + std::to_string(checked) + " checks, worst rel " + sci(worst) +
              ", non-differentiable " + std::to_string(kinks) + "/" + std::to_string(total)};
}

// ---- 4: superpixel oracle vs enumeration ---------------------------------------------

Outcome superpixel_oracle() {
  SplitMix64 rng(2718);
  int cases = 0, mismatches = 0, largest = 0;
  while (cases < 100) {
    const int w = 6 + static_cast<int>(rng.below(10)), h = 6 + static_cast<int>(rng.below(10));
    std::vector<double> c(static_cast<std::size_t>(w) * h);
    const double density = rng.uniform(0.3, 0.7);
    for (auto& x : c) x = rng.uniform() < density ? rng.uniform(0.5, 1.0) : rng.uniform(0.0, 0.5);
    const auto part = snap::partition_from_contours(ProbMap(w, h, c), 0.5);
    if (part.count < 2 || part.count > 15) continue;
    const Mask gt = random_mask(rng, w, h, rng.uniform(0.1, 0.7));
    if (gt.none()) continue;
    ++cases;
    largest = std::max(largest, part.count);
    std::vector<std::int64_t> in(static_cast<std::size_t>(part.count)), out(in.size());
    for (std::size_t i = 0; i < part.labels.size(); ++i) (gt[i] ? in : out)[static_cast<std::size_t>(part.labels[i])]++;
    std::int64_t bn = 0, bd = 1;
    for (std::uint32_t s = 0; s < (1u << part.count); ++s) {
      std::int64_t num = 0, den = static_cast<std::int64_t>(gt.count());
      for (int r = 0; r < part.count; ++r) {
        if (s & (1u << r)) num += in[static_cast<std::size_t>(r)], den += out[static_cast<std::size_t>(r)];
      }
      if (num * bd > bn * den) bn = num, bd = den;
    }
    const auto choice = snap::best_superpixel_oracle(part, gt);
    const bool exact = choice.intersection * bd == bn * choice.union_size &&
                       choice.j == static_cast<double>(bn) / static_cast<double>(bd);
    mismatches += exact ? 0 : 1;
  }
  return {mismatches == 0, std::to_string(cases) + " partitions (up to " + std::to_string(largest) + " regions), " +
                               std::to_string(mismatches) + " mismatching"};
}

// ---- 8: tracker -----------------------------------------------------------------------

Outcome tracker_checks() {
  bool hand = box_iou({0, 0, 9, 9}, {5, 0, 14, 9}) == 1.0 / 3.0 && box_iou({0, 0, 3, 3}, {0, 0, 7, 7}) == 0.25 &&
              box_iou({0, 0, 1, 1}, {5, 5, 6, 6}) == 0.0 && box_iou({2, 2, 4, 4}, {2, 2, 4, 4}) == 1.0;
  const std::vector<Mask> pred = {rect(20, 10, 0, 0, 9, 9)}, gt = {rect(20, 10, 5, 0, 14, 9)};
  const std::vector<double> th = {0.3, 0.5};
  hand = hand && analysis::tracker_eval(pred, gt, th).success == std::vector<double>{1.0, 0.0};
  const std::vector<Mask> empties = {Mask(4, 4), Mask(4, 4)};
  const std::vector<Mask> one_empty = {Mask(4, 4), rect(4, 4, 0, 0, 1, 1)};
  hand = hand && analysis::tracker_eval(empties, one_empty, th).success == std::vector<double>{0.5, 0.5};

  SplitMix64 rng(8);
  std::vector<double> grid;
  for (int k = 0; k <= 20; ++k) grid.push_back(k / 20.0);
  int violations = 0;
  for (int i = 0; i < 200; ++i) {
    std::vector<Mask> p, g;
    const double density = rng.uniform(0.0, 0.1);
    for (int t = 0; t < 5; ++t) {
      p.push_back(random_mask(rng, 12, 12, density));
      g.push_back(random_mask(rng, 12, 12, density));
    }
    const auto curve = analysis::tracker_eval(p, g, grid);
    for (std::size_t k = 1; k < curve.success.size(); ++k) violations += curve.success[k] > curve.success[k - 1];
  }
  return {hand && violations == 0,
          std::string("hand cases ") + (hand ? "exact" : "wrong") + ", " + std::to_string(violations) +
              " monotonicity violations on 200 random inputs"};
}

// ---- suite-based criteria -------------------------------------------------------------

const analysis::MethodRun& method(const protocol::SuiteResult& r, const std::string& name) {
  for (const auto& m : r.ablation.methods) {
    if (m.method == name) return m;
  }
  throw std::runtime_error("missing method " + name);
}

Outcome ablation_order(const protocol::SuiteResult& r) {
  const double ours = analysis::mean_j(method(r, "Ours")), bs = analysis::mean_j(method(r, "-BS"));
  const double pnbs = analysis::mean_j(method(r, "-PN-BS")), osbs = analysis::mean_j(method(r, "-OS-BS"));
  const double none = analysis::mean_j(method(r, "-PN-OS-BS"));
  const bool c1 = ours >= bs, c2 = bs >= pnbs + 0.05, c3 = bs >= osbs + 0.10, c4 = none < 0.35;
  const bool c5 = r.ablation.seconds < 480.0;
  const bool enough = method(r, "Ours").sequences.size() >= 4;
  auto mark = [](bool b) { return b ? "ok" : "NO"; };
  std::string d = "Ours " + fmt(ours) + " -BS " + fmt(bs) + " -PN-BS " + fmt(pnbs) + " -OS-BS " + fmt(osbs) +
                  " -PN-OS-BS " + fmt(none) + " | Ours>=-BS " + mark(c1) + ", PN gap " + fmt(100 * (bs - pnbs), 1) +
                  " " + mark(c2) + ", OS gap " + fmt(100 * (bs - osbs), 1) + " " + mark(c3) + ", chance " + mark(c4) +
                  ", runtime " + fmt(r.ablation.seconds, 1) + "s " + mark(c5);
  return {c1 && c2 && c3 && c4 && c5 && enough, d};
}

Outcome refinement(const protocol::SuiteResult& r) {
  const auto& rows = r.bundle.refinement;
  std::vector<double> trace;
  double all = -1.0;
  for (const auto& row : rows) {
    if (row.label == "All") {
      all = row.j_mean;
    } else if (row.annotations <= 5) {
      trace.push_back(row.j_mean);
    }
  }
  if (trace.size() < 2) return {false, "trace too short"};
  bool monotone = true;
  std::string d = "J(N=0..)";
  for (std::size_t k = 0; k < trace.size(); ++k) {
    d += " " + fmt(trace[k]);
    if (k > 0) monotone = monotone && trace[k] >= trace[k - 1] - 0.005;
  }
  const bool jump = trace[1] > trace[0] + 0.05;
  if (all >= 0.0) d += " All " + fmt(all);
  return {jump && monotone, d + " | J(1)-J(0) " + fmt(100 * (trace[1] - trace[0]), 1) + " pts"};
}

Outcome error_split(const protocol::SuiteResult& r) {
  std::size_t frames = 0, broken = 0;
  for (const auto& m : r.ablation.methods) {
    for (const auto& seq : m.errors) {
      for (const auto& e : seq) {
        ++frames;
        broken += e.fp_close + e.fp_far + e.fn != e.total_error;
      }
    }
  }
  auto fp = [&](const std::string& name) {
    std::int64_t s = 0;
    for (const auto& seq : method(r, name).errors) {
      for (const auto& e : seq) s += e.fp_close + e.fp_far;
    }
    return s;
  };
  const auto ours = fp("Ours"), bs = fp("-BS");
  return {broken == 0 && frames > 0 && ours < bs,
          "identity on " + std::to_string(frames - broken) + "/" + std::to_string(frames) + " frames; FP Ours " +
              std::to_string(ours) + " vs -BS " + std::to_string(bs)};
}

Outcome budget(const protocol::SuiteResult& r) {
  if (r.budget_j.size() < 2) return {false, "budget run missing"};
  const double full = r.budget_j[0], part = r.budget_j[1];
  return {std::abs(full - part) <= 0.03,
          "J 100% " + fmt(full) + ", J " + fmt(100 * r.bundle.budget[1].fraction, 0) + "% " + fmt(part)};
}

Outcome timing(const protocol::SuiteResult& r) {
  bool monotone = true, zero_match = false;
  std::string d;
  for (const char* mode : {"-BS", "Ours"}) {
    std::vector<const protocol::TimingPoint*> pts;
    for (const auto& p : r.timing) {
      if (p.mode == mode) pts.push_back(&p);
    }
    std::sort(pts.begin(), pts.end(), [](auto* a, auto* b) { return a->iterations < b->iterations; });
    d += std::string(d.empty() ? "" : " | ") + mode + ":";
    for (std::size_t k = 0; k < pts.size(); ++k) {
      d += " " + std::to_string(pts[k]->iterations) + "->" + fmt(pts[k]->j_mean);
      if (k > 0) monotone = monotone && pts[k]->j_mean >= pts[k - 1]->j_mean - 0.01;
    }
    if (std::string(mode) == "-BS" && !pts.empty() && pts.front()->iterations == 0) {
      zero_match = pts.front()->j_mean == analysis::mean_j(method(r, "-OS-BS"));
    }
  }
  return {monotone && zero_match, d + " | 0-iteration point " + (zero_match ? "equals" : "differs from") + " -OS-BS"};
}

Outcome occlusion_recovery(const protocol::SuiteResult& r, const protocol::ExperimentConfig& c) {
  const auto& frames = method(r, "Ours").sequences.front().frames;
  const int from = c.num_frames * 2 / 5, until = c.num_frames * 3 / 5;
  double pre = 0.0, post = 0.0;
  for (int t = 1; t < from; ++t) pre += frames[static_cast<std::size_t>(t)].j;
  for (int t = until; t < c.num_frames; ++t) post += frames[static_cast<std::size_t>(t)].j;
  pre /= from - 1;
  post /= c.num_frames - until;
  return {post >= pre - 0.02, "val_000 pre-occlusion J " + fmt(pre) + ", post-occlusion J " + fmt(post)};
}

// ---- 11: CLI determinism ---------------------------------------------------------------

std::map<std::string, std::string> read_tree(const fs::path& dir) {
  std::map<std::string, std::string> files;
  if (!fs::is_directory(dir)) return files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    files[fs::relative(e.path(), dir).string()] = ss.str();
  }
  return files;
}

Outcome cli_determinism(const fs::path& scratch) {
  const fs::path cfg = scratch / "reduced.cfg";
  std::ofstream(cfg) << "[data]\nn_train = 3\nn_val = 2\nframe_size = 32\nnum_frames = 8\n"
                        "[parent]\niterations = 80\n[oneshot]\niterations = 20\n"
                        "[experiments]\nrefine_max_n = 2\ntiming_grid = 0, 10\n";
  std::vector<std::map<std::string, std::string>> runs;
  for (int workers : {1, 2}) {
    const fs::path out = scratch / ("run" + std::to_string(workers));
    fs::remove_all(out);
    const std::string cmd = std::string(OSVOS_BINARY) + " full-suite --config " + cfg.string() + " --seed 5 --workers " +
                            std::to_string(workers) + " --out " + out.string() + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) return {false, "full-suite exited abnormally"};
    runs.push_back(read_tree(out / "report"));
  }
  const bool same = !runs[0].empty() && runs[0] == runs[1];
  return {same, std::to_string(runs[0].size()) + " report files, " + (same ? "byte-identical" : "different") +
                    " across runs (workers 1 and 2)"};
}

}  // namespace

int main(int argc, char** argv) {
  const bool strict = argc > 1 && std::string(argv[1]) == "--strict";
  int failed = 0, total = 0;
  auto report = [&](const std::string& label, const Outcome& o, bool counted = true) {
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << label << ": " << o.detail << std::endl;
    if (counted) {
      ++total;
      failed += o.pass ? 0 : 1;
    }
  };
  auto guarded = [](const std::function<Outcome()>& f) {
    try {
      return f();
    } catch (const std::exception& e) {
      return Outcome{false, std::string("threw: ") + e.what()};
    }
  };

  report("criterion 1 (metric oracles)", guarded(metric_fixtures));
  report("criterion 2 (distance transform)", guarded(distance_transform));
  report("criterion 3 (gradient check)", guarded(gradient_check));
  report("criterion 4 (superpixel oracle)", guarded(superpixel_oracle));

  const protocol::ExperimentConfig config;
  std::cerr << "running full suite with the default configuration..." << std::endl;
  protocol::SuiteResult suite;
  bool have_suite = true;
  try {
    suite = protocol::run_full_suite(config, {}, [](const std::string& m) { std::cerr << "  " << m << std::endl; });
  } catch (const std::exception& e) {
    std::cerr << "full suite failed: " << e.what() << std::endl;
    have_suite = false;
  }
  auto from_suite = [&](Outcome (*f)(const protocol::SuiteResult&)) {
    return have_suite ? guarded([&] { return f(suite); }) : Outcome{false, "full suite did not complete"};
  };
  report("criterion 5 (ablation)", from_suite(ablation_order));
  report("criterion 6 (refinement)", from_suite(refinement));
  report("criterion 7 (error decomposition)", from_suite(error_split));
  report("criterion 8 (tracker)", guarded(tracker_checks));
  report("criterion 9 (training budget)", from_suite(budget));
  report("criterion 10 (timing profile)", from_suite(timing));

  const fs::path scratch = fs::temp_directory_path() / "osvos_acceptance";
  fs::create_directories(scratch);
  report("criterion 11 (determinism)", guarded([&] { return cli_determinism(scratch); }));
  fs::remove_all(scratch);

  report("extra (occlusion recovery)",
         have_suite ? guarded([&] { return occlusion_recovery(suite, config); }) : Outcome{false, "no suite"}, false);
  if (have_suite) {
    std::cout << "suite time " << fmt(suite.total_seconds, 1) << "s (parent " << fmt(suite.parent_seconds, 1)
              << "s, ablation " << fmt(suite.ablation.seconds, 1) << "s)" << std::endl;
  }
  std::cout << "SUMMARY " << (total - failed) << "/" << total << " criteria passed" << std::endl;
  return strict ? failed : 0;
}
