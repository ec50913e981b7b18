#pragma once

// Deterministic synthetic video benchmark: textured shapes moving over a
// textured background, with distractors, occluders and per-pixel noise.
// Rendering uses only correctly rounded arithmetic so output is bit-exact
// across platforms.

#include <climits>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "osvos/maskcore.hpp"

namespace osvos::synthvid {

struct Color {
  double r = 0.0;
  double g = 0.0;
  double b = 0.0;
};

enum class TextureKind { flat, checker, gradient, speckle };
enum class ShapeKind { ellipse, polygon };

struct Texture {
  TextureKind kind = TextureKind::flat;
  Color primary;
  Color secondary;
  int period = 4;     ///< checker cell size / speckle grain (pixels)
  int direction = 0;  ///< gradient direction, index into a 16-way table
  std::uint64_t seed = 0;
};

/// Centre moves linearly and bounces between `margin` and size - margin,
/// where the margin is the larger of the scene margin and `inset`.
struct Motion {
  double x0 = 32.0;
  double y0 = 32.0;
  double vx = 0.0;
  double vy = 0.0;
  double growth = 0.0;  ///< relative scale change over the whole sequence
  double inset = 0.0;   ///< per-shape bounce margin, e.g. to keep the shape inside the frame
};

struct ShapeDesc {
  ShapeKind kind = ShapeKind::ellipse;
  double radius_x = 8.0;
  double radius_y = 8.0;
  int orientation = 0;               ///< index into the 16-way direction table
  std::vector<double> vertex_radii;  ///< polygon: 8 relative radii in (0,1]
  Texture texture;
  Motion motion;
  std::optional<Color> drift_to;  ///< primary colour at the last frame (appearance change)
  int visible_from = 0;           ///< visible in frames [visible_from, visible_until)
  int visible_until = INT_MAX;

  bool visible(int t) const { return t >= visible_from && t < visible_until; }
};

struct SceneSpec {
  std::string name;
  std::uint64_t seed = 0;
  int frame_size = 64;
  int num_frames = 20;
  double margin = 6.0;
  Texture background;
  bool background_scroll = false;  ///< dynamic background
  bool motion_blur = false;        ///< target colour averaged over sub-frame positions
  ShapeDesc target;
  std::vector<ShapeDesc> distractors;  ///< drawn behind the target
  std::optional<ShapeDesc> occluder;   ///< drawn in front of everything
  double noise_sigma = 0.0;
  double gain_end = 1.0;  ///< illumination gain reached on the last frame (1 on frame 0)

  /// Throws osvos::Error for an unrenderable spec.
  void validate() const;
};

/// Attribute tags implied by a spec: OCC, FM, AC, DB, MB. AC covers both
/// target colour drift and a global illumination change of 20% or more.
std::set<std::string> derive_attributes(const SceneSpec& spec);

/// Frame t and its ground truth. Depends only on (spec, t).
/// `edges` receives the pixels on either side of every object edge.
Frame render_frame(const SceneSpec& spec, int t, Mask* gt = nullptr, Mask* edges = nullptr);

/// Silhouette of a shape at frame t (ignores the visibility window).
Mask rasterize(const SceneSpec& spec, const ShapeDesc& shape, int t);

VideoSequence render_sequence(const SceneSpec& spec);

struct SynthDataset {
  std::uint64_t master_seed = 0;
  std::vector<SceneSpec> train_specs;
  std::vector<SceneSpec> val_specs;
  std::vector<VideoSequence> train;
  std::vector<VideoSequence> val;
};

struct BenchmarkOptions {
  int frame_size = 64;
  int num_frames = 20;
};

/// n_train + n_val sequences. val[0] always has a full occlusion window and
/// val[1] (when n_val >= 2) a same-appearance distractor entering mid-sequence.
SynthDataset make_benchmark(std::uint64_t master_seed, int n_train, int n_val, const BenchmarkOptions& opts = {});

/// Writes `<root>/<name>/...` for every sequence plus `<root>/manifest.json`.
void write_dataset(const SynthDataset& ds, const std::filesystem::path& root);

struct DatasetSplits {
  std::vector<VideoSequence> train;
  std::vector<VideoSequence> val;
};

/// Reads a dataset written by write_dataset, using its manifest for splits.
DatasetSplits read_dataset(const std::filesystem::path& root);

}  // namespace osvos::synthvid
