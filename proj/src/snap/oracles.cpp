#include "osvos/error.hpp"
#include "osvos/metrics.hpp"
#include "osvos/snap.hpp"

namespace osvos::snap {

ProposalChoice best_proposal_oracle(std::span<const Mask> candidates, const Mask& gt) {
  if (candidates.empty()) throw Error("best_proposal_oracle: empty candidate list");
  ProposalChoice best{0, metrics::region_similarity(candidates[0], gt)};
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const double j = metrics::region_similarity(candidates[i], gt);
    if (j > best.j) best = {i, j};
  }
  return best;
}

SuperpixelChoice best_superpixel_oracle(const SuperpixelPartition& part, const Mask& gt) {
  if (gt.width() != part.width || gt.height() != part.height) throw Error("oracle: gt and partition dimensions differ");
  const auto gt_size = static_cast<std::int64_t>(gt.count());
  if (gt_size == 0) throw Error("best_superpixel_oracle: empty ground truth");

  std::vector<std::int64_t> inside(static_cast<std::size_t>(part.count), 0);
  std::vector<std::int64_t> outside(static_cast<std::size_t>(part.count), 0);
  for (std::size_t i = 0; i < part.labels.size(); ++i) {
    (gt[i] ? inside : outside)[static_cast<std::size_t>(part.labels[i])] += 1;
  }

  // Current ratio A/B; start from 0/1 so the first pass takes every region
  // touching gt.
  std::int64_t num = 0;
  std::int64_t den = 1;
  std::vector<int> selected;
  SuperpixelChoice out;
  for (;;) {
    std::vector<int> next;
    std::int64_t a = 0;
    std::int64_t b = gt_size;
    for (int r = 0; r < part.count; ++r) {
      const auto ar = inside[static_cast<std::size_t>(r)];
      const auto br = outside[static_cast<std::size_t>(r)];
      // a_r - lambda * b_r > 0 with lambda = num/den, den > 0.
      if (ar > 0 && ar * den > num * br) {
        next.push_back(r);
        a += ar;
        b += br;
      }
    }
    const bool improved = a * den > num * b;
    if (next == selected || !improved) {
      if (improved || next != selected) {
        // Same ratio, fewer zero-gain regions: keep the canonical selection.
        selected = std::move(next);
        num = a;
        den = b;
      }
      break;
    }
    selected = std::move(next);
    num = a;
    den = b;
    out.ratio_trace.push_back(static_cast<double>(num) / static_cast<double>(den));
  }
  out.regions = selected;
  out.intersection = num;
  out.union_size = den;
  out.j = static_cast<double>(num) / static_cast<double>(den);
  out.mask = region_union(part, selected);
  return out;
}

}  // namespace osvos::snap
