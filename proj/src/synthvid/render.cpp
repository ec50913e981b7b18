#include <algorithm>
#include <array>
#include <cmath>

#include "osvos/error.hpp"
#include "osvos/rng.hpp"
#include "osvos/synthvid.hpp"

namespace osvos::synthvid {

namespace {

struct Dir {
  double x;
  double y;
};

// Unit vectors at multiples of 22.5 degrees, written out so no libm call is
// involved in rendering.
constexpr std::array<Dir, 16> make_directions() {
  constexpr double c1 = 0.92387953251128674;
  constexpr double c2 = 0.70710678118654757;
  constexpr double c3 = 0.38268343236508978;
  return {{{1.0, 0.0},
           {c1, c3},
           {c2, c2},
           {c3, c1},
           {0.0, 1.0},
           {-c3, c1},
           {-c2, c2},
           {-c1, c3},
           {-1.0, 0.0},
           {-c1, -c3},
           {-c2, -c2},
           {-c3, -c1},
           {0.0, -1.0},
           {c3, -c1},
           {c2, -c2},
           {c1, -c3}}};
}

constexpr std::array<Dir, 16> kDirections = make_directions();

Dir direction(int index) { return kDirections[static_cast<std::size_t>(((index % 16) + 16) % 16)]; }

double bounce(double p, double lo, double hi) {
  const double span = hi - lo;
  if (span <= 0.0) return lo;
  double u = std::fmod(p - lo, 2.0 * span);
  if (u < 0.0) u += 2.0 * span;
  if (u > span) u = 2.0 * span - u;
  return lo + u;
}

double time_fraction(const SceneSpec& spec, double t) { return t / static_cast<double>(spec.num_frames - 1); }

struct Placement {
  double cx;
  double cy;
  double scale;
};

Placement place(const SceneSpec& spec, const ShapeDesc& s, double t) {
  const double half = 0.5 * spec.frame_size;
  const double lo = std::min(std::max(spec.margin, s.motion.inset), half);
  const double hi = spec.frame_size - lo;
  return {bounce(s.motion.x0 + s.motion.vx * t, lo, hi), bounce(s.motion.y0 + s.motion.vy * t, lo, hi),
          1.0 + s.motion.growth * time_fraction(spec, t)};
}

bool inside(const ShapeDesc& s, const Placement& pl, double px, double py) {
  const double dx = px - pl.cx;
  const double dy = py - pl.cy;
  const Dir d = direction(s.orientation);
  const double u = dx * d.x + dy * d.y;
  const double v = -dx * d.y + dy * d.x;
  const double rx = s.radius_x * pl.scale;
  const double ry = s.radius_y * pl.scale;
  if (s.kind == ShapeKind::ellipse) {
    const double a = u / rx;
    const double b = v / ry;
    return a * a + b * b <= 1.0;
  }
  // Star-shaped polygon in the shape's own frame; even-odd crossing test.
  const std::size_t n = s.vertex_radii.size();
  bool in = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Dir di = direction(static_cast<int>(i * 16 / n));
    const Dir dj = direction(static_cast<int>(j * 16 / n));
    const double xi = di.x * s.vertex_radii[i] * rx;
    const double yi = di.y * s.vertex_radii[i] * ry;
    const double xj = dj.x * s.vertex_radii[j] * rx;
    const double yj = dj.y * s.vertex_radii[j] * ry;
    if ((yi > v) != (yj > v)) {
      const double xcross = xi + (v - yi) * (xj - xi) / (yj - yi);
      if (u < xcross) in = !in;
    }
  }
  return in;
}

Color lerp(const Color& a, const Color& b, double w) {
  return {a.r + (b.r - a.r) * w, a.g + (b.g - a.g) * w, a.b + (b.b - a.b) * w};
}

double floor_div(double v, int period) { return std::floor(v / period); }

Color sample(const Texture& tex, const Color& primary, double lx, double ly, double extent) {
  switch (tex.kind) {
    case TextureKind::flat:
      return primary;
    case TextureKind::checker: {
      const auto cx = static_cast<long long>(floor_div(lx, tex.period));
      const auto cy = static_cast<long long>(floor_div(ly, tex.period));
      return ((cx + cy) & 1) ? tex.secondary : primary;
    }
    case TextureKind::gradient: {
      const Dir d = direction(tex.direction);
      const double w = std::clamp(0.5 + (lx * d.x + ly * d.y) / (2.0 * extent), 0.0, 1.0);
      return lerp(primary, tex.secondary, w);
    }
    case TextureKind::speckle: {
      const auto gx = static_cast<std::uint64_t>(static_cast<long long>(floor_div(lx, tex.period)));
      const auto gy = static_cast<std::uint64_t>(static_cast<long long>(floor_div(ly, tex.period)));
      const std::uint64_t h = SplitMix64::mix(tex.seed ^ (gx * 0x9E3779B97F4A7C15ULL) ^ (gy * 0xC2B2AE3D27D4EB4FULL));
      const double w = static_cast<double>(h >> 11) * 0x1.0p-53;
      return lerp(primary, tex.secondary, w);
    }
  }
  return primary;
}

Color shape_color(const SceneSpec& spec, const ShapeDesc& s, const Placement& pl, double t, double px, double py) {
  if (!s.drift_to) return sample(s.texture, s.texture.primary, px - pl.cx, py - pl.cy, s.radius_x * pl.scale);
  // The whole palette shifts with the primary colour.
  Texture tex = s.texture;
  const Color primary = lerp(tex.primary, *s.drift_to, time_fraction(spec, t));
  tex.secondary = {std::clamp(tex.secondary.r + primary.r - tex.primary.r, 0.0, 1.0),
                   std::clamp(tex.secondary.g + primary.g - tex.primary.g, 0.0, 1.0),
                   std::clamp(tex.secondary.b + primary.b - tex.primary.b, 0.0, 1.0)};
  return sample(tex, primary, px - pl.cx, py - pl.cy, s.radius_x * pl.scale);
}

void validate_shape(const ShapeDesc& s, const char* what) {
  if (!(s.radius_x > 0.0 && s.radius_y > 0.0)) throw Error(std::string(what) + ": radii must be positive");
  if (s.kind == ShapeKind::polygon) {
    const std::size_t n = s.vertex_radii.size();
    if (n != 4 && n != 8 && n != 16) throw Error(std::string(what) + ": polygons need 4, 8 or 16 vertices");
    for (double r : s.vertex_radii) {
      if (!(r > 0.0 && r <= 1.0)) throw Error(std::string(what) + ": vertex radii must lie in (0,1]");
    }
  }
  if (s.texture.period < 1) throw Error(std::string(what) + ": texture period must be >= 1");
  if (!(s.motion.inset >= 0.0)) throw Error(std::string(what) + ": inset must be >= 0");
  if (!(1.0 + s.motion.growth > 0.0)) throw Error(std::string(what) + ": growth would collapse the shape");
}

}  // namespace

void SceneSpec::validate() const {
  if (num_frames < 2) throw Error("scene needs at least 2 frames");
  if (frame_size < 4) throw Error("frame size too small");
  if (!(margin >= 0.0 && 2.0 * margin < frame_size)) throw Error("margin leaves no room for motion");
  if (!(noise_sigma >= 0.0)) throw Error("noise sigma must be non-negative");
  if (!(gain_end > 0.0)) throw Error("illumination gain must be positive");
  validate_shape(target, "target");
  for (const auto& d : distractors) validate_shape(d, "distractor");
  if (occluder) validate_shape(*occluder, "occluder");
}

std::set<std::string> derive_attributes(const SceneSpec& spec) {
  std::set<std::string> tags;
  if (spec.occluder) tags.insert("OCC");
  const double speed = std::sqrt(spec.target.motion.vx * spec.target.motion.vx + spec.target.motion.vy * spec.target.motion.vy);
  if (speed >= 2.5) tags.insert("FM");
  if (spec.target.drift_to || std::abs(spec.gain_end - 1.0) >= 0.2) tags.insert("AC");
  if (spec.background_scroll) tags.insert("DB");
  if (spec.motion_blur) tags.insert("MB");
  return tags;
}

Mask rasterize(const SceneSpec& spec, const ShapeDesc& shape, int t) {
  const Placement pl = place(spec, shape, t);
  Mask m(spec.frame_size, spec.frame_size);
  for (int y = 0; y < spec.frame_size; ++y) {
    for (int x = 0; x < spec.frame_size; ++x) m.set(x, y, inside(shape, pl, x + 0.5, y + 0.5));
  }
  return m;
}

Frame render_frame(const SceneSpec& spec, int t, Mask* gt, Mask* edges) {
  const int n = spec.frame_size;
  const double tt = t;
  std::vector<Color> canvas(static_cast<std::size_t>(n) * n);
  // Topmost object per pixel, 0 = background.
  std::vector<int> owner(canvas.size(), 0);
  int next_owner = 1;

  const double scroll = spec.background_scroll ? 1.5 * tt : 0.0;
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      canvas[static_cast<std::size_t>(y) * n + x] =
          sample(spec.background, spec.background.primary, x + 0.5 + scroll, y + 0.5 + 0.5 * scroll, 0.5 * n);
    }
  }

  auto paint = [&](const ShapeDesc& s) {
    const Placement pl = place(spec, s, tt);
    const int id = next_owner++;
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) {
        if (inside(s, pl, x + 0.5, y + 0.5)) {
          canvas[static_cast<std::size_t>(y) * n + x] = shape_color(spec, s, pl, tt, x + 0.5, y + 0.5);
          owner[static_cast<std::size_t>(y) * n + x] = id;
        }
      }
    }
  };

  for (const auto& d : spec.distractors) {
    if (d.visible(t)) paint(d);
  }

  Mask silhouette(n, n);
  if (spec.target.visible(t)) {
    const Placement pl = place(spec, spec.target, tt);
    if (spec.motion_blur) {
      const std::vector<Color> under = canvas;
      const double offsets[3] = {-1.0 / 3.0, 0.0, 1.0 / 3.0};
      for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
          Color acc{0.0, 0.0, 0.0};
          for (double off : offsets) {
            const Placement sub = place(spec, spec.target, tt + off);
            const Color c = inside(spec.target, sub, x + 0.5, y + 0.5)
                                ? shape_color(spec, spec.target, sub, tt + off, x + 0.5, y + 0.5)
                                : under[static_cast<std::size_t>(y) * n + x];
            acc.r += c.r;
            acc.g += c.g;
            acc.b += c.b;
          }
          canvas[static_cast<std::size_t>(y) * n + x] = {acc.r / 3.0, acc.g / 3.0, acc.b / 3.0};
        }
      }
    } else {
      paint(spec.target);
    }
    const int id = next_owner++;
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) {
        const bool in = inside(spec.target, pl, x + 0.5, y + 0.5);
        silhouette.set(x, y, in);
        if (in) owner[static_cast<std::size_t>(y) * n + x] = id;
      }
    }
  }

  if (spec.occluder && spec.occluder->visible(t)) {
    const Placement pl = place(spec, *spec.occluder, tt);
    paint(*spec.occluder);
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) {
        if (inside(*spec.occluder, pl, x + 0.5, y + 0.5)) silhouette.set(x, y, false);
      }
    }
  }

  const std::size_t plane = static_cast<std::size_t>(n) * n;
  std::vector<double> values(plane * 3);
  const double gain = 1.0 + (spec.gain_end - 1.0) * time_fraction(spec, t);
  for (std::size_t i = 0; i < plane; ++i) {
    const double ch[3] = {canvas[i].r, canvas[i].g, canvas[i].b};
    for (std::size_t c = 0; c < 3; ++c) {
      double v = gain * ch[c];
      if (spec.noise_sigma > 0.0) {
        const std::uint64_t key = (static_cast<std::uint64_t>(t) * 3 + c) * plane + i;
        SplitMix64 rng(SplitMix64::derive(spec.seed, key));
        v += spec.noise_sigma * rng.normal();
      }
      v = std::clamp(v, 0.0, 1.0);
      // Quantized so frames survive an 8-bit round trip unchanged.
      values[c * plane + i] = static_cast<double>(std::lround(v * 255.0)) / 255.0;
    }
  }
  if (edges) {
    // Pixels on either side of a change of owner: a band centred on the edge.
    *edges = Mask(n, n);
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) {
        const int o = owner[static_cast<std::size_t>(y) * n + x];
        const bool diff = (x > 0 && owner[static_cast<std::size_t>(y) * n + x - 1] != o) ||
                          (x + 1 < n && owner[static_cast<std::size_t>(y) * n + x + 1] != o) ||
                          (y > 0 && owner[static_cast<std::size_t>(y - 1) * n + x] != o) ||
                          (y + 1 < n && owner[static_cast<std::size_t>(y + 1) * n + x] != o);
        edges->set(x, y, diff);
      }
    }
  }
  if (gt) *gt = std::move(silhouette);
  return Frame(n, n, 3, std::move(values));
}

VideoSequence render_sequence(const SceneSpec& spec) {
  spec.validate();
  VideoSequence seq;
  seq.name = spec.name;
  seq.attributes = derive_attributes(spec);
  std::vector<Mask> gt;
  std::vector<Mask> edges;
  for (int t = 0; t < spec.num_frames; ++t) {
    Mask m;
    Mask e;
    seq.frames.push_back(render_frame(spec, t, &m, &e));
    gt.push_back(std::move(m));
    edges.push_back(std::move(e));
  }
  seq.gt = std::move(gt);
  seq.edges = std::move(edges);
  return seq;
}

}  // namespace osvos::synthvid
