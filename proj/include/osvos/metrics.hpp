#pragma once

// Region similarity (J), contour accuracy (F), temporal instability (T) and
// the per-sequence statistics built on them.

#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "osvos/maskcore.hpp"

namespace osvos::metrics {

/// Intersection over union; 1.0 when both masks are empty.
double region_similarity(const Mask& pred, const Mask& gt);

/// Boundary F-measure with Euclidean matching tolerance `tol` (pixels).
/// Both boundaries empty gives 1, exactly one empty gives 0.
double contour_accuracy(const Mask& pred, const Mask& gt, double tol);

/// ceil(0.8% of the image diagonal), at least 1 pixel.
int default_contour_tolerance(int width, int height);

/// 100 x mean over consecutive pairs of (1 - F) after translating the
/// earlier mask onto the later one's centroid. Pairs with an empty mask are
/// skipped; 0 if every pair is skipped.
double temporal_instability(std::span<const Mask> masks, double tol);

/// Centroid-alignment shift used by temporal_instability.
Pixel centroid_shift(const Mask& from, const Mask& to);

struct Statistics {
  double mean = 0.0;
  double recall = 0.0;  ///< fraction of frames strictly above 0.5
  double decay = 0.0;   ///< first-quartile mean minus last-quartile mean
};

/// Throws on an empty list. Quartile size is ceil(n/4).
Statistics aggregate(std::span<const double> per_frame);

struct FrameScores {
  double j = 0.0;
  double f = 0.0;
};

struct SequenceReport {
  std::string sequence;
  std::vector<FrameScores> frames;
  Statistics j;
  Statistics f;
  double t_mean = 0.0;
};

/// Scores every frame and aggregates. `tol` <= 0 selects the default
/// tolerance for the frame size.
SequenceReport evaluate_sequence(const std::string& name, std::span<const Mask> pred, std::span<const Mask> gt,
                                 double tol = 0.0);

struct AttributeEntry {
  double with_mean = 0.0;     ///< mean J over sequences carrying the tag
  double without_mean = 0.0;  ///< mean J over the rest
  double gain = 0.0;          ///< without_mean - with_mean
  std::size_t n_with = 0;
  std::size_t n_without = 0;
};

/// Keyed by attribute tag. Tags present on every sequence are omitted.
using AttributeReport = std::map<std::string, AttributeEntry>;

AttributeReport attribute_report(std::span<const SequenceReport> reports,
                                 std::span<const std::set<std::string>> tags);

}  // namespace osvos::metrics
