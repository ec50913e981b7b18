#pragma once

// Boundary snapping on superpixels derived from a contour map, and the two
// selection oracles used as practical upper bounds.

#include <cstdint>
#include <span>
#include <vector>

#include "osvos/maskcore.hpp"

namespace osvos::snap {

/// Exhaustive, disjoint labeling of pixels into 4-connected regions 0..count-1.
struct SuperpixelPartition {
  int width = 0;
  int height = 0;
  int count = 0;
  std::vector<int> labels;  ///< row-major

  int at(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x]; }
  /// Throws unless every label is used and every region is 4-connected.
  void validate() const;
};

/// Pixels weaker than `strength_threshold` seed regions (4-connected
/// components). Remaining pixels are flooded in order of the highest
/// contour strength crossed to reach them, then region id. Seed ids follow
/// ascending seed size (ties by first pixel in raster order).
/// A map without seeds yields a single region.
SuperpixelPartition partition_from_contours(const ContourMap& contours, double strength_threshold = 0.5);

/// A region becomes foreground iff its mean probability is >= majority.
Mask snap_mask(const ProbMap& fg, const SuperpixelPartition& part, double majority = 0.5);

/// Union of the listed regions.
Mask region_union(const SuperpixelPartition& part, std::span<const int> regions);

struct ProposalChoice {
  std::size_t index = 0;
  double j = 0.0;
};

/// Candidate with the highest IoU against gt; ties go to the lowest index.
ProposalChoice best_proposal_oracle(std::span<const Mask> candidates, const Mask& gt);

struct SuperpixelChoice {
  Mask mask;
  std::vector<int> regions;        ///< selected region ids, ascending
  std::int64_t intersection = 0;   ///< sum of |region & gt| over the selection
  std::int64_t union_size = 0;     ///< |gt| + sum of |region \ gt|
  double j = 0.0;                  ///< intersection / union_size
  std::vector<double> ratio_trace; ///< achieved ratio after each iteration
};

/// Union of regions maximizing IoU with gt, found exactly by Dinkelbach
/// iteration on integer counts. Throws for an empty gt.
SuperpixelChoice best_superpixel_oracle(const SuperpixelPartition& part, const Mask& gt);

}  // namespace osvos::snap
