#pragma once

// Raster types shared by every module, plus geometry helpers and the
// on-disk formats for frames, masks and probability maps.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace osvos {

struct Pixel {
  int x = 0;
  int y = 0;
  friend bool operator==(const Pixel&, const Pixel&) = default;
  friend auto operator<=>(const Pixel&, const Pixel&) = default;
};

/// Binary per-pixel labeling of one frame, row-major, 1 = foreground.
class Mask {
 public:
  Mask() = default;
  Mask(int width, int height);
  /// Throws if any value is not 0 or 1 or the size does not match.
  Mask(int width, int height, std::vector<std::uint8_t> bits);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return bits_.size(); }

  bool at(int x, int y) const { return bits_[index(x, y)] != 0; }
  bool operator[](std::size_t i) const { return bits_[i] != 0; }
  void set(int x, int y, bool v) { bits_[index(x, y)] = v ? 1 : 0; }
  void set(std::size_t i, bool v) { bits_[i] = v ? 1 : 0; }

  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }
  std::span<const std::uint8_t> bits() const { return bits_; }

  /// Number of foreground pixels.
  std::size_t count() const;
  bool none() const { return count() == 0; }
  bool same_shape(const Mask& o) const { return width_ == o.width_ && height_ == o.height_; }

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Real-valued map with every value in [0,1]. Holds both foreground
/// probabilities and contour strengths.
class ProbMap {
 public:
  ProbMap() = default;
  ProbMap(int width, int height, double fill = 0.0);
  /// Throws if a value is outside [0,1] (or NaN) or the size does not match.
  ProbMap(int width, int height, std::vector<double> values);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return values_.size(); }
  double at(int x, int y) const {
    return values_[static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x)];
  }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> values() const { return values_; }

  friend bool operator==(const ProbMap&, const ProbMap&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> values_;
};

using ContourMap = ProbMap;

/// Image with 1 or 3 channels stored plane by plane, intensities in [0,1].
class Frame {
 public:
  Frame() = default;
  Frame(int width, int height, int channels);
  Frame(int width, int height, int channels, std::vector<double> planes);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  std::size_t plane_size() const { return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_); }

  double at(int c, int x, int y) const { return values_[offset(c, x, y)]; }
  void set(int c, int x, int y, double v) { values_[offset(c, x, y)] = v; }
  std::span<const double> plane(int c) const {
    return std::span<const double>(values_).subspan(static_cast<std::size_t>(c) * plane_size(), plane_size());
  }
  std::span<const double> values() const { return values_; }

  friend bool operator==(const Frame&, const Frame&) = default;

 private:
  std::size_t offset(int c, int x, int y) const {
    return static_cast<std::size_t>(c) * plane_size() + static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<double> values_;
};

/// Row-major grid of doubles without range restrictions (distance maps).
struct RealGrid {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  double at(int x, int y) const {
    return values[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)];
  }
};

struct VideoSequence {
  std::string name;
  std::vector<Frame> frames;
  std::optional<std::vector<Mask>> gt;
  /// Pixels with a 4-neighbour belonging to a different object (or the
  /// background), for every visible object. Optional supervision for a
  /// generic contour detector.
  std::optional<std::vector<Mask>> edges;
  std::set<std::string> attributes;

  std::size_t size() const { return frames.size(); }
  bool has_gt() const { return gt.has_value(); }
  /// Throws unless frames share dimensions and gt (if any) matches them.
  void validate() const;
};

/// Inclusive pixel box.
struct BoundingBox {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  long long area() const { return static_cast<long long>(x1 - x0 + 1) * static_cast<long long>(y1 - y0 + 1); }
  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

// ---- geometry ---------------------------------------------------------------

/// Tightest box around the foreground; nullopt for an empty mask.
std::optional<BoundingBox> bounding_box(const Mask& m);

/// Intersection over union of two inclusive boxes.
double box_iou(const BoundingBox& a, const BoundingBox& b);

/// Exact Euclidean distance from every pixel to the nearest foreground pixel.
/// Two-pass separable algorithm on integer squared distances.
/// Throws osvos::Error for an empty mask.
RealGrid euclidean_distance_transform(const Mask& m);

/// Squared distances as integers, same algorithm as above.
std::vector<std::int64_t> squared_distance_transform(const Mask& m);

/// Foreground pixels with a 4-neighbor that is background or outside the
/// image, in row-major order.
std::vector<Pixel> boundary_pixels(const Mask& m);

/// boundary_pixels as a mask.
Mask boundary_mask(const Mask& m);

/// Dilation with a (2r+1)x(2r+1) square structuring element, clipped.
Mask dilate(const Mask& m, int radius);

/// Foreground iff value >= tau. tau must lie in [0,1].
Mask threshold(const ProbMap& p, double tau = 0.5);

/// 4-connected components of the foreground, labelled 0..n-1 in row-major
/// order of first pixel. Background pixels get -1.
std::vector<int> connected_components(const Mask& m, int* count = nullptr);

/// Shift by (dx, dy); pixels leaving the image are dropped.
Mask translate(const Mask& m, int dx, int dy);

Mask mask_and(const Mask& a, const Mask& b);
Mask mask_or(const Mask& a, const Mask& b);
Mask mask_minus(const Mask& a, const Mask& b);

// ---- file formats -------------------------------------------------------------

Mask load_mask(const std::filesystem::path& path);
void save_mask(const Mask& m, const std::filesystem::path& path);

/// Reads P5 (1 channel) or P6 (3 channels) with maxval 255.
Frame load_frame(const std::filesystem::path& path);
/// Writes P5 or P6 depending on channel count; values rounded to 1/255.
void save_frame(const Frame& f, const std::filesystem::path& path);

/// "PMAP" header + little-endian float32 grid.
ProbMap load_probmap(const std::filesystem::path& path);
void save_probmap(const ProbMap& p, const std::filesystem::path& path);

/// Encoders used by the savers; exposed for byte-level tests.
std::string encode_pgm(const Mask& m);
std::string encode_probmap(const ProbMap& p);
Mask decode_mask(std::string_view bytes);
ProbMap decode_probmap(std::string_view bytes);

/// `<root>/<name>/frames/%05d.(pgm|ppm)`, `<root>/<name>/gt/%05d.pgm`,
/// optional `<root>/<name>/attributes.txt`.
VideoSequence load_sequence(const std::filesystem::path& root, const std::string& name);
void save_sequence(const VideoSequence& seq, const std::filesystem::path& root);
/// Loads `<dir>/%05d.pgm` for frame indices 0..count-1.
std::vector<Mask> load_mask_dir(const std::filesystem::path& dir, std::size_t count);
void save_mask_dir(std::span<const Mask> masks, const std::filesystem::path& dir);
/// Sorted names of subdirectories containing a `frames/` directory.
std::vector<std::string> list_sequences(const std::filesystem::path& root);

std::string frame_filename(std::size_t index, const char* ext);

}  // namespace osvos
