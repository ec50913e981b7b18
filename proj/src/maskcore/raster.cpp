#include "osvos/maskcore.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "osvos/error.hpp"

namespace osvos {

namespace {

std::size_t checked_area(int width, int height) {
  if (width < 1 || height < 1) {
    throw Error("raster dimensions must be positive, got " + std::to_string(width) + "x" + std::to_string(height));
  }
  return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
}

}  // namespace

Mask::Mask(int width, int height) : width_(width), height_(height), bits_(checked_area(width, height), 0) {}

Mask::Mask(int width, int height, std::vector<std::uint8_t> bits)
    : width_(width), height_(height), bits_(std::move(bits)) {
  if (bits_.size() != checked_area(width, height)) {
    throw Error("mask data size does not match dimensions");
  }
  for (std::size_t i = 0; i < bits_.size(); ++i) {
    if (bits_[i] > 1) {
      throw Error("non-binary mask value at pixel " + std::to_string(i));
    }
  }
}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

ProbMap::ProbMap(int width, int height, double fill)
    : width_(width), height_(height), values_(checked_area(width, height), fill) {
  if (!(fill >= 0.0 && fill <= 1.0)) throw Error("probability map fill value outside [0,1]");
}

ProbMap::ProbMap(int width, int height, std::vector<double> values)
    : width_(width), height_(height), values_(std::move(values)) {
  if (values_.size() != checked_area(width, height)) {
    throw Error("probability map data size does not match dimensions");
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!(values_[i] >= 0.0 && values_[i] <= 1.0)) {
      throw Error("probability map value outside [0,1] at pixel " + std::to_string(i));
    }
  }
}

Frame::Frame(int width, int height, int channels)
    : width_(width), height_(height), channels_(channels) {
  if (channels != 1 && channels != 3) throw Error("frames have 1 or 3 channels");
  values_.assign(checked_area(width, height) * static_cast<std::size_t>(channels), 0.0);
}

Frame::Frame(int width, int height, int channels, std::vector<double> planes)
    : width_(width), height_(height), channels_(channels), values_(std::move(planes)) {
  if (channels != 1 && channels != 3) throw Error("frames have 1 or 3 channels");
  if (values_.size() != checked_area(width, height) * static_cast<std::size_t>(channels)) {
    throw Error("frame data size does not match dimensions");
  }
  for (double v : values_) {
    if (!(v >= 0.0 && v <= 1.0)) throw Error("frame intensity outside [0,1]");
  }
}

void VideoSequence::validate() const {
  if (frames.empty()) throw Error("sequence '" + name + "' has no frames");
  const Frame& first = frames.front();
  for (const Frame& f : frames) {
    if (f.width() != first.width() || f.height() != first.height() || f.channels() != first.channels()) {
      throw Error("sequence '" + name + "' has frames of differing dimensions");
    }
  }
  if (gt) {
    if (gt->size() != frames.size()) throw Error("sequence '" + name + "' has a ground-truth count mismatch");
    for (const Mask& m : *gt) {
      if (m.width() != first.width() || m.height() != first.height()) {
        throw Error("sequence '" + name + "' has ground truth of differing dimensions");
      }
    }
  }
  if (edges) {
    if (edges->size() != frames.size()) throw Error("sequence '" + name + "' has an edge-map count mismatch");
    for (const Mask& m : *edges) {
      if (m.width() != first.width() || m.height() != first.height()) {
        throw Error("sequence '" + name + "' has edge maps of differing dimensions");
      }
    }
  }
}

Mask threshold(const ProbMap& p, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw Error("threshold tau must lie in [0,1]");
  Mask m(p.width(), p.height());
  for (std::size_t i = 0; i < p.size(); ++i) m.set(i, p[i] >= tau);
  return m;
}

namespace {

template <class Op>
Mask combine(const Mask& a, const Mask& b, Op op) {
  if (!a.same_shape(b)) throw Error("mask dimension mismatch");
  Mask out(a.width(), a.height());
  for (std::size_t i = 0; i < a.size(); ++i) out.set(i, op(a[i], b[i]));
  return out;
}

}  // namespace

Mask mask_and(const Mask& a, const Mask& b) {
  return combine(a, b, [](bool x, bool y) { return x && y; });
}
Mask mask_or(const Mask& a, const Mask& b) {
  return combine(a, b, [](bool x, bool y) { return x || y; });
}
Mask mask_minus(const Mask& a, const Mask& b) {
  return combine(a, b, [](bool x, bool y) { return x && !y; });
}

Mask translate(const Mask& m, int dx, int dy) {
  Mask out(m.width(), m.height());
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      if (m.at(x, y) && m.contains(x + dx, y + dy)) out.set(x + dx, y + dy, true);
    }
  }
  return out;
}

}  // namespace osvos
