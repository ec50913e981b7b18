#pragma once

// Three-stage training protocol (base -> parent -> one-shot) and the
// experiments built on it: ablation, training budget, progressive
// refinement, timing, oracle bounds and the end-to-end suite.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "osvos/analysis.hpp"
#include "osvos/maskcore.hpp"
#include "osvos/metrics.hpp"
#include "osvos/nnet.hpp"

namespace osvos::protocol {

enum class Stage { base, parent, oneshot };

const char* stage_name(Stage s);

struct StageWeights {
  Stage stage = Stage::base;
  std::string sequence;               ///< oneshot only
  std::vector<int> annotated_frames;  ///< oneshot only, ascending
  nnet::FcnModel model;
};

struct Annotation {
  int frame = 0;
  Mask mask;
};

/// Seeded random initialisation standing in for a pretrained base network.
StageWeights base_weights(const nnet::Architecture& arch, std::uint64_t seed);

struct ParentRun {
  StageWeights weights;
  std::vector<double> loss_log;  ///< one entry per iteration
  std::size_t frames_used = 0;
};

/// Trains on floor(fraction * n) seeded-randomly chosen frames of every
/// training sequence, visiting the pool in a reshuffled order each epoch.
ParentRun train_parent(std::span<const VideoSequence> train, const StageWeights& init, const nnet::TrainConfig& config,
                       double subset_fraction = 1.0);

/// Continues SGD (fresh momentum) from `parent` on the annotated frames,
/// cycled in ascending frame order. config.iterations == 0 returns the parent
/// weights unchanged.
StageWeights finetune_oneshot(const StageWeights& parent, const VideoSequence& seq,
                              std::span<const Annotation> annotations, const nnet::TrainConfig& config);

/// First-frame annotation, the canonical one-shot setting.
std::vector<Annotation> first_frame_annotation(const VideoSequence& seq);

/// Independent forward pass per frame. `order` (a permutation of frame
/// indices) only changes the processing order, never the results.
std::vector<nnet::Prediction> infer_sequence(const nnet::FcnModel& model, const VideoSequence& seq,
                                             std::span<const std::size_t> order = {});

struct PipelineOptions {
  double tau = 0.5;                ///< binarization threshold (inclusive)
  double contour_threshold = 0.5;  ///< superpixel seed threshold
  double majority = 0.5;           ///< snapping vote on mean probability
  double contour_tolerance = 0.0;  ///< F tolerance in pixels; <= 0 picks the default
  double error_distance = 20.0;    ///< FP close/far split in pixels
};

/// Threshold (snapping == false) or snap each prediction.
std::vector<Mask> segment(std::span<const nnet::Prediction> preds, bool snapping, const PipelineOptions& opts);

/// Evaluates masks against gt: J/F/T report, per-frame error breakdown.
struct Evaluation {
  metrics::SequenceReport report;
  std::vector<analysis::ErrorBreakdown> errors;
};
Evaluation evaluate(const VideoSequence& seq, std::span<const Mask> masks, const PipelineOptions& opts);

// ---- ablation ---------------------------------------------------------------------

enum class Component { parent_network, one_shot, boundary_snapping };

struct Variant {
  std::string name;  ///< "Ours", "-BS", "-PN-BS", "-OS-BS", "-PN-OS-BS"
  bool parent = true;
  bool one_shot = true;
  bool snapping = true;
};

/// Variants whose removed components are all in `removable`, in table order.
std::vector<Variant> ablation_variants(const std::set<Component>& removable);

struct ExperimentConfig;

struct AblationResult {
  std::vector<analysis::MethodRun> methods;
  /// Fine-tuned-from-parent model per sequence (reused by other experiments).
  std::vector<StageWeights> oneshot_models;
  double seconds = 0.0;
};

AblationResult run_ablation(std::span<const VideoSequence> val, const StageWeights& base, const StageWeights& parent,
                            const ExperimentConfig& config, const std::set<Component>& removable);

// ---- progressive refinement -------------------------------------------------------

struct RefinementStep {
  int annotations = 0;
  std::vector<int> frames;  ///< annotated frame indices in the order they were added
  double j_mean = 0.0;
};

struct RefinementTrace {
  std::vector<RefinementStep> steps;  ///< N = 0..max_N
  std::optional<double> all_j;        ///< every frame annotated
};

/// Round 0 is the parent alone; each round annotates the worst-J frame not yet
/// annotated (ties -> lowest index) and re-fine-tunes from the parent.
RefinementTrace progressive_refine(const StageWeights& parent, const VideoSequence& seq, int max_n,
                                   const nnet::TrainConfig& config, const PipelineOptions& opts, bool snapping,
                                   bool include_all = true);

// ---- timing -----------------------------------------------------------------------

struct TimingPoint {
  std::string mode;  ///< "-BS", "Ours", "-BS Pre", "Ours Pre"
  int iterations = 0;
  double seconds_per_frame = 0.0;  ///< measured wall clock
  double work_per_frame = 0.0;     ///< forward-pass equivalents, deterministic
  double j_mean = 0.0;
};

/// Forward-pass equivalents charged for one training iteration.
inline constexpr double kWorkPerTrainingStep = 3.0;

/// For each iteration count: fine-tune from the parent on the first frame,
/// segment the sequence, and report per-frame cost with the fine-tune
/// amortized over the sequence (or excluded for the Pre modes).
std::vector<TimingPoint> timing_profile(const StageWeights& parent, const VideoSequence& seq,
                                        std::span<const int> iteration_grid, const nnet::TrainConfig& config,
                                        const PipelineOptions& opts);

// ---- full suite -------------------------------------------------------------------

struct ExperimentConfig {
  std::uint64_t seed = 7;
  int n_train = 24;
  int n_val = 6;
  int frame_size = 64;
  int num_frames = 20;
  nnet::Architecture arch;
  nnet::TrainConfig parent{1e-2, 0.9, 4000, 0, {}};
  /// The contour branch stays generic: one-shot fine-tuning trains the
  /// foreground head only (contour_weight 0).
  nnet::TrainConfig oneshot{1e-2, 0.9, 200, 0, {nnet::PosWeightMode::balanced, 1.0, 0.0}};
  PipelineOptions pipeline;
  double budget_fraction = 0.5;
  int refine_max_n = 5;
  bool refine_all = true;
  std::vector<int> timing_grid{0, 25, 50, 100, 200};
  int workers = 1;
};

struct SuiteResult {
  analysis::ExperimentBundle bundle;
  AblationResult ablation;
  std::vector<RefinementTrace> refinement;  ///< per val sequence
  std::vector<TimingPoint> timing;          ///< averaged over val sequences
  std::vector<double> budget_j;             ///< Ours J per budget fraction (1.0, budget_fraction)
  double parent_seconds = 0.0;
  double total_seconds = 0.0;
};

/// Every field of the config, for run manifests.
nlohmann::ordered_json config_json(const ExperimentConfig& c);

using ProgressFn = std::function<void(const std::string&)>;

/// Runs the whole desk-scale reproduction. When `out` is non-empty the
/// dataset, checkpoints, report bundle (out/report) and a run manifest are
/// written there.
SuiteResult run_full_suite(const ExperimentConfig& config, const std::filesystem::path& out = {},
                           const ProgressFn& progress = {});

/// Runs jobs 0..n-1 on up to `workers` threads. Each job writes only its own
/// output slot, so results do not depend on the worker count.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& job);

}  // namespace osvos::protocol
