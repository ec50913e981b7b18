#pragma once

// Small fully-convolutional network with two prediction heads
// (foreground and contours), written out by hand with exact reverse-mode
// gradients. Everything is double precision and single threaded per call.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "osvos/maskcore.hpp"

namespace osvos::nnet {

/// Channels-first dense tensor.
class Tensor {
 public:
  Tensor() = default;
  Tensor(int channels, int height, int width, double fill = 0.0);

  int channels() const { return channels_; }
  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t plane_size() const { return static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_); }

  double& at(int c, int y, int x) { return values_[(c * plane_size()) + static_cast<std::size_t>(y) * width_ + x]; }
  double at(int c, int y, int x) const { return values_[(c * plane_size()) + static_cast<std::size_t>(y) * width_ + x]; }
  double* plane(int c) { return values_.data() + c * plane_size(); }
  const double* plane(int c) const { return values_.data() + c * plane_size(); }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  /// Throws osvos::Error if any entry is NaN or infinite.
  void require_finite(const char* where) const;

 private:
  int channels_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<double> values_;
};

/// Encoder widths, one per stage. Each stage is two 3x3 conv+relu followed
/// by a 2x max-pool (except the last).
struct Architecture {
  int in_channels = 3;
  std::vector<int> widths{8, 16, 32};

  int stages() const { return static_cast<int>(widths.size()); }
  /// Input sides must be multiples of this.
  int divisor() const { return 1 << (stages() - 1); }
  friend bool operator==(const Architecture&, const Architecture&) = default;
};

enum class Head { foreground = 0, contour = 1 };

/// Named slice of the flat parameter vector.
struct ParamBlob {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
};

/// Weights of the network as one flat vector plus a layout describing it.
/// The bilinear upsamplers are fixed operators and own no parameters.
class FcnModel {
 public:
  FcnModel() : FcnModel(Architecture{}) {}
  /// All parameters zero.
  explicit FcnModel(Architecture arch);
  /// He fan-in normal init from a SplitMix64 stream; biases zero.
  static FcnModel he_init(Architecture arch, std::uint64_t seed);

  const Architecture& architecture() const { return arch_; }
  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }
  std::size_t parameter_count() const { return params_.size(); }
  const std::vector<ParamBlob>& blobs() const { return blobs_; }

  struct ConvLayout {
    std::size_t weight = 0;
    std::size_t bias = 0;
    int in = 0;
    int out = 0;
    int kernel = 0;
  };
  struct HeadLayout {
    std::vector<ConvLayout> side;  // 1x1, width_s -> 1
    std::size_t fuse_weight = 0;   // one per stage
    std::size_t fuse_bias = 0;
  };

  const ConvLayout& conv(int stage, int index) const { return convs_[static_cast<std::size_t>(stage * 2 + index)]; }
  const HeadLayout& head(Head h) const { return heads_[static_cast<int>(h)]; }

  friend bool operator==(const FcnModel& a, const FcnModel& b) {
    return a.arch_ == b.arch_ && a.params_ == b.params_;
  }

 private:
  std::size_t add_blob(std::string name, std::size_t size);

  Architecture arch_;
  std::vector<ParamBlob> blobs_;
  std::vector<ConvLayout> convs_;
  HeadLayout heads_[2];
  std::vector<double> params_;
};

struct HeadLogits {
  Tensor foreground;  ///< 1 x H x W
  Tensor contour;     ///< 1 x H x W
};

struct Prediction {
  ProbMap foreground;
  ProbMap contour;
};

/// Full-resolution fused logits of both heads. Throws if the frame sides are
/// not multiples of the architecture divisor (padding required) or the
/// channel count is incompatible.
HeadLogits forward_logits(const FcnModel& model, const Frame& frame);

/// Sigmoid of forward_logits.
Prediction forward(const FcnModel& model, const Frame& frame);

double sigmoid(double x);

enum class PosWeightMode { balanced, fixed };

struct LossOptions {
  PosWeightMode mode = PosWeightMode::balanced;
  double fixed_pos_weight = 1.0;  ///< w+ when mode == fixed (w- = 1)
  double contour_weight = 1.0;    ///< lambda in fg_loss + lambda * contour_loss
};

struct LossResult {
  double loss = 0.0;
  Tensor grad;  ///< d loss / d logits
};

/// Class-balanced binary cross-entropy averaged over pixels.
/// Balanced mode uses w+ = N/(2 N+), w- = N/(2 N-), both 1 if a class is absent.
LossResult balanced_bce_loss(const Tensor& logits, const Mask& target, const LossOptions& opts = {});

struct BackwardResult {
  double loss = 0.0;
  double foreground_loss = 0.0;
  double contour_loss = 0.0;
  std::vector<double> gradients;  ///< same layout as FcnModel::parameters()
};

/// Exact gradient of fg_loss + lambda * contour_loss over every parameter.
BackwardResult backward(const FcnModel& model, const Frame& frame, const Mask& fg_target, const Mask& contour_target,
                        const LossOptions& opts = {});

/// Boundary of `gt` dilated by one pixel (3x3 element).
Mask contour_target(const Mask& gt);

struct TrainConfig {
  double learning_rate = 1e-2;
  double momentum = 0.9;
  int iterations = 0;
  std::uint64_t seed = 0;
  LossOptions loss;

  /// Throws osvos::Error naming the violated field.
  void validate() const;
};

/// Classic momentum: v <- mu v - lr g; p <- p + v.
void sgd_step(std::span<double> params, std::span<const double> grads, std::span<double> velocity,
              const TrainConfig& config);

/// Versioned binary checkpoint: "OSWT", u32 version, architecture, then
/// each parameter blob as little-endian f64.
std::string encode_checkpoint(const FcnModel& model);
FcnModel decode_checkpoint(std::string_view bytes);
void save_checkpoint(const FcnModel& model, const std::filesystem::path& path);
FcnModel load_checkpoint(const std::filesystem::path& path);

}  // namespace osvos::nnet
