#include "osvos/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "osvos/error.hpp"

namespace osvos::metrics {

namespace {

void require_same_shape(const Mask& a, const Mask& b) {
  if (!a.same_shape(b)) throw Error("mask dimension mismatch");
}

// Fraction of `from` boundary pixels within `tol` of some `to` boundary pixel.
double matched_fraction(const Mask& from_boundary, std::size_t from_count, const Mask& to_boundary, double tol) {
  const auto sq = squared_distance_transform(to_boundary);
  const double tol_sq = tol * tol;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < from_boundary.size(); ++i) {
    if (from_boundary[i] && static_cast<double>(sq[i]) <= tol_sq) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(from_count);
}

}  // namespace

double region_similarity(const Mask& pred, const Mask& gt) {
  require_same_shape(pred, gt);
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    inter += (pred[i] && gt[i]) ? 1 : 0;
    uni += (pred[i] || gt[i]) ? 1 : 0;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double contour_accuracy(const Mask& pred, const Mask& gt, double tol) {
  require_same_shape(pred, gt);
  if (!(tol >= 0.0)) throw Error("contour tolerance must be non-negative");
  const Mask pb = boundary_mask(pred);
  const Mask gb = boundary_mask(gt);
  const std::size_t np = pb.count();
  const std::size_t ng = gb.count();
  if (np == 0 && ng == 0) return 1.0;
  if (np == 0 || ng == 0) return 0.0;
  const double precision = matched_fraction(pb, np, gb, tol);
  const double recall = matched_fraction(gb, ng, pb, tol);
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

int default_contour_tolerance(int width, int height) {
  const double diag = std::sqrt(static_cast<double>(width) * width + static_cast<double>(height) * height);
  return std::max(1, static_cast<int>(std::ceil(0.008 * diag)));
}

Pixel centroid_shift(const Mask& from, const Mask& to) {
  auto centroid = [](const Mask& m, double& cx, double& cy) {
    std::int64_t sx = 0, sy = 0, n = 0;
    for (int y = 0; y < m.height(); ++y) {
      for (int x = 0; x < m.width(); ++x) {
        if (m.at(x, y)) {
          sx += x;
          sy += y;
          ++n;
        }
      }
    }
    cx = static_cast<double>(sx) / static_cast<double>(n);
    cy = static_cast<double>(sy) / static_cast<double>(n);
  };
  double fx, fy, tx, ty;
  centroid(from, fx, fy);
  centroid(to, tx, ty);
  return {static_cast<int>(std::lround(tx - fx)), static_cast<int>(std::lround(ty - fy))};
}

double temporal_instability(std::span<const Mask> masks, double tol) {
  if (masks.size() < 2) throw Error("temporal instability needs at least 2 masks");
  for (const Mask& m : masks) require_same_shape(m, masks.front());
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t t = 0; t + 1 < masks.size(); ++t) {
    const Mask& a = masks[t];
    const Mask& b = masks[t + 1];
    if (a.none() || b.none()) continue;
    const Pixel shift = centroid_shift(a, b);
    sum += 1.0 - contour_accuracy(translate(a, shift.x, shift.y), b, tol);
    ++pairs;
  }
  if (pairs == 0) return 0.0;
  return 100.0 * sum / static_cast<double>(pairs);
}

Statistics aggregate(std::span<const double> per_frame) {
  if (per_frame.empty()) throw Error("cannot aggregate an empty list");
  const std::size_t n = per_frame.size();
  Statistics s;
  std::size_t above = 0;
  double total = 0.0;
  for (double v : per_frame) {
    total += v;
    if (v > 0.5) ++above;
  }
  s.mean = total / static_cast<double>(n);
  s.recall = static_cast<double>(above) / static_cast<double>(n);
  const std::size_t q = (n + 3) / 4;
  double head = 0.0, tail = 0.0;
  for (std::size_t i = 0; i < q; ++i) {
    head += per_frame[i];
    tail += per_frame[n - q + i];
  }
  s.decay = head / static_cast<double>(q) - tail / static_cast<double>(q);
  return s;
}

SequenceReport evaluate_sequence(const std::string& name, std::span<const Mask> pred, std::span<const Mask> gt,
                                 double tol) {
  if (pred.size() != gt.size()) throw Error("prediction/ground-truth length mismatch for '" + name + "'");
  if (pred.empty()) throw Error("nothing to evaluate for '" + name + "'");
  if (tol <= 0.0) tol = default_contour_tolerance(gt.front().width(), gt.front().height());
  SequenceReport r;
  r.sequence = name;
  std::vector<double> js, fs;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    FrameScores s{region_similarity(pred[t], gt[t]), contour_accuracy(pred[t], gt[t], tol)};
    r.frames.push_back(s);
    js.push_back(s.j);
    fs.push_back(s.f);
  }
  r.j = aggregate(js);
  r.f = aggregate(fs);
  r.t_mean = pred.size() >= 2 ? temporal_instability(pred, tol) : 0.0;
  return r;
}

AttributeReport attribute_report(std::span<const SequenceReport> reports,
                                 std::span<const std::set<std::string>> tags) {
  if (reports.size() != tags.size()) throw Error("attribute_report: one tag set per sequence required");
  std::set<std::string> all;
  for (const auto& t : tags) all.insert(t.begin(), t.end());
  AttributeReport out;
  for (const std::string& attr : all) {
    AttributeEntry e;
    double with = 0.0, without = 0.0;
    for (std::size_t i = 0; i < reports.size(); ++i) {
      if (tags[i].contains(attr)) {
        with += reports[i].j.mean;
        ++e.n_with;
      } else {
        without += reports[i].j.mean;
        ++e.n_without;
      }
    }
    if (e.n_with == 0 || e.n_without == 0) continue;
    e.with_mean = with / static_cast<double>(e.n_with);
    e.without_mean = without / static_cast<double>(e.n_without);
    e.gain = e.without_mean - e.with_mean;
    out.emplace(attr, e);
  }
  return out;
}

}  // namespace osvos::metrics
