#pragma once

// Error decomposition, tracker-style box evaluation and assembly of the
// experiment report bundle.

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "osvos/maskcore.hpp"
#include "osvos/metrics.hpp"

namespace osvos::analysis {

struct ErrorBreakdown {
  std::int64_t fp_close = 0;
  std::int64_t fp_far = 0;
  std::int64_t fn = 0;
  std::int64_t total_error = 0;  ///< |pred xor gt|, counted independently

  ErrorBreakdown& operator+=(const ErrorBreakdown& o) {
    fp_close += o.fp_close;
    fp_far += o.fp_far;
    fn += o.fn;
    total_error += o.total_error;
    return *this;
  }
};

struct ErrorShares {
  double fp_close = 0.0;
  double fp_far = 0.0;
  double fn = 0.0;
};

/// False positives within `distance` pixels of the gt object are "close",
/// the rest "far". With an empty gt every false positive is far.
ErrorBreakdown error_decomposition(const Mask& pred, const Mask& gt, double distance = 20.0);

/// Counts divided by `reference_total` (e.g. the total error of -BS).
ErrorShares normalize(const ErrorBreakdown& e, double reference_total);

struct TrackerCurve {
  std::vector<double> thresholds;
  std::vector<double> success;  ///< fraction of frames with box IoU above each threshold
};

std::vector<double> default_tracker_thresholds();

/// Frames where both boxes exist are scored by box IoU (success iff IoU >
/// threshold); both empty is a success, exactly one empty a failure.
TrackerCurve tracker_eval(std::span<const Mask> pred, std::span<const Mask> gt, std::span<const double> thresholds);

// ---- report bundle ----------------------------------------------------------------

struct MethodRun {
  std::string method;
  std::vector<metrics::SequenceReport> sequences;
  std::vector<std::vector<ErrorBreakdown>> errors;  ///< per sequence, per frame
  TrackerCurve tracker;
};

struct BudgetRow {
  double fraction = 1.0;
  std::size_t frames = 0;
  double j_mean = 0.0;
};

struct RefinementRow {
  std::string label;  ///< "0".."N" or "All"
  int annotations = 0;
  double j_mean = 0.0;
};

struct TimingRow {
  std::string mode;
  int iterations = 0;
  double work_per_frame = 0.0;  ///< forward-pass equivalents per frame
  double j_mean = 0.0;
};

struct BoundsRow {
  std::string name;
  double j_mean = 0.0;
};

struct ExperimentBundle {
  std::uint64_t seed = 0;
  std::string reference_method = "Ours";
  std::string error_reference_method = "-BS";
  std::vector<std::string> sequences;
  std::vector<std::set<std::string>> attributes;  ///< per sequence
  std::vector<MethodRun> methods;
  std::vector<BudgetRow> budget;
  std::vector<RefinementRow> refinement;
  std::vector<TimingRow> timing;
  std::vector<BoundsRow> bounds;
};

/// File name -> contents for summary.json, per_sequence.csv, errors.csv,
/// tracker.csv and timing.csv. Output depends only on the bundle.
std::map<std::string, std::string> assemble_report(const ExperimentBundle& bundle);

/// Writes assemble_report() into `dir`.
void write_report(const ExperimentBundle& bundle, const std::filesystem::path& dir);

/// Mean over sequences of the per-sequence J mean.
double mean_j(const MethodRun& run);

}  // namespace osvos::analysis
