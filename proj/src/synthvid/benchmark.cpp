#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "osvos/error.hpp"
#include "osvos/rng.hpp"
#include "osvos/synthvid.hpp"

namespace osvos::synthvid {

namespace {

constexpr std::uint64_t kTrainStream = 0x7472616E;  // "tran"
constexpr std::uint64_t kValStream = 0x76616C31;    // "val1"

Color random_color(SplitMix64& rng) { return {rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95)}; }

double color_distance(const Color& a, const Color& b) {
  return std::abs(a.r - b.r) + std::abs(a.g - b.g) + std::abs(a.b - b.b);
}

// Colour at least `min_dist` (L1) away from every colour in `avoid`.
Color distinct_color(SplitMix64& rng, const std::vector<Color>& avoid, double min_dist) {
  Color c = random_color(rng);
  for (int attempt = 0; attempt < 64; ++attempt) {
    bool ok = true;
    for (const Color& a : avoid) ok = ok && color_distance(c, a) >= min_dist;
    if (ok) break;
    c = random_color(rng);
  }
  return c;
}

Color nearby_color(SplitMix64& rng, const Color& base, double spread) {
  auto jitter = [&](double v) { return std::clamp(v + rng.uniform(-spread, spread), 0.0, 1.0); };
  return {jitter(base.r), jitter(base.g), jitter(base.b)};
}

// Flat, gradient or speckle. Checkers are reserved for the object class.
Texture random_texture(SplitMix64& rng, const Color& primary, double contrast) {
  static constexpr TextureKind kinds[3] = {TextureKind::flat, TextureKind::gradient, TextureKind::speckle};
  Texture tex;
  tex.kind = kinds[rng.below(3)];
  tex.primary = primary;
  tex.secondary = nearby_color(rng, primary, contrast);
  tex.period = 2 + static_cast<int>(rng.below(4));
  tex.direction = static_cast<int>(rng.below(16));
  tex.seed = rng.next();
  return tex;
}

// High-contrast checker: the appearance shared by every target, so a network
// trained on many sequences can learn what a foreground object looks like.
Texture class_texture(SplitMix64& rng, const Color& primary) {
  auto flip = [](double v) { return v < 0.5 ? v + 0.4 : v - 0.4; };
  Texture tex;
  tex.kind = TextureKind::checker;
  tex.primary = primary;
  tex.secondary = {flip(primary.r), flip(primary.g), flip(primary.b)};
  tex.period = 3 + static_cast<int>(rng.below(2));
  tex.direction = static_cast<int>(rng.below(16));
  tex.seed = rng.next();
  return tex;
}

ShapeDesc random_shape(SplitMix64& rng, double r_lo, double r_hi) {
  ShapeDesc s;
  s.kind = rng.below(2) == 0 ? ShapeKind::ellipse : ShapeKind::polygon;
  s.radius_x = rng.uniform(r_lo, r_hi);
  s.radius_y = s.radius_x * rng.uniform(0.6, 1.0);
  s.orientation = static_cast<int>(rng.below(16));
  if (s.kind == ShapeKind::polygon) {
    s.vertex_radii.resize(8);
    for (double& r : s.vertex_radii) r = rng.uniform(0.65, 1.0);
  }
  return s;
}

// Largest distance from the centre the shape reaches at any time.
double full_extent(const ShapeDesc& s) {
  return std::max(s.radius_x, s.radius_y) * (1.0 + std::max(s.motion.growth, 0.0));
}

Motion random_motion(SplitMix64& rng, int size, double radius, double speed_lo, double speed_hi) {
  Motion m;
  const double lo = std::min(radius + 2.0, 0.5 * size);
  const double hi = std::max(size - radius - 2.0, 0.5 * size);
  m.x0 = rng.uniform(lo, hi);
  m.y0 = rng.uniform(lo, hi);
  const double speed = rng.uniform(speed_lo, speed_hi);
  // Direction from the 16-way table keeps the generator free of libm calls.
  static constexpr double dirs[16][2] = {{1, 0},       {0.9238795, 0.3826834},   {0.7071068, 0.7071068},
                                         {0.3826834, 0.9238795}, {0, 1},  {-0.3826834, 0.9238795},
                                         {-0.7071068, 0.7071068}, {-0.9238795, 0.3826834}, {-1, 0},
                                         {-0.9238795, -0.3826834}, {-0.7071068, -0.7071068},
                                         {-0.3826834, -0.9238795}, {0, -1}, {0.3826834, -0.9238795},
                                         {0.7071068, -0.7071068}, {0.9238795, -0.3826834}};
  const auto k = rng.below(16);
  m.vx = speed * dirs[k][0];
  m.vy = speed * dirs[k][1];
  return m;
}

enum class Special { none, full_occlusion, twin_distractor };

SceneSpec random_scene(std::uint64_t seed, const std::string& name, const BenchmarkOptions& opts, Special special) {
  SplitMix64 rng(seed);
  SceneSpec spec;
  spec.name = name;
  spec.seed = seed;
  spec.frame_size = opts.frame_size;
  spec.num_frames = opts.num_frames;
  const int size = opts.frame_size;
  const double unit = size / 64.0;

  const Color bg = random_color(rng);
  spec.background = random_texture(rng, bg, 0.12);
  spec.background.period = 3 + static_cast<int>(rng.below(6));
  spec.background_scroll = rng.uniform() < 0.25;
  spec.noise_sigma = rng.uniform(0.01, 0.04);
  if (rng.uniform() < 0.5) spec.gain_end = rng.uniform() < 0.5 ? rng.uniform(0.55, 0.8) : rng.uniform(1.25, 1.5);

  // Target: the largest object in the scene.
  spec.target = random_shape(rng, 9.0 * unit, 13.0 * unit);
  const Color target_color = distinct_color(rng, {bg}, 0.7);
  spec.target.texture = class_texture(rng, target_color);
  const bool fast = rng.uniform() < 0.2;
  spec.target.motion = fast ? random_motion(rng, size, spec.target.radius_x, 2.5 * unit, 3.5 * unit)
                            : random_motion(rng, size, spec.target.radius_x, 0.3 * unit, 1.5 * unit);
  spec.target.motion.growth = rng.uniform(-0.2, 0.3);
  spec.target.motion.inset = full_extent(spec.target) + 4.0;
  if (rng.uniform() < 0.5) spec.target.drift_to = distinct_color(rng, {target_color, bg}, 0.6);
  spec.motion_blur = fast && rng.uniform() < 0.5;

  const int n_distractors = 1 + static_cast<int>(rng.below(2));
  std::vector<Color> used = {bg, target_color};
  for (int i = 0; i < n_distractors; ++i) {
    ShapeDesc d = random_shape(rng, 4.0 * unit, 7.5 * unit);
    const Color c = distinct_color(rng, used, 0.5);
    used.push_back(c);
    d.texture = rng.uniform() < 0.35 ? class_texture(rng, c) : random_texture(rng, c, 0.35);
    d.motion = random_motion(rng, size, d.radius_x, 0.3 * unit, 2.0 * unit);
    d.motion.inset = full_extent(d) + 4.0;
    spec.distractors.push_back(std::move(d));
  }

  const int t_frames = opts.num_frames;
  switch (special) {
    case Special::full_occlusion: {
      // Follows the target exactly and is larger than its maximal extent.
      ShapeDesc occ;
      occ.kind = ShapeKind::ellipse;
      const double extent = std::max(spec.target.radius_x, spec.target.radius_y) *
                            (1.0 + std::max(spec.target.motion.growth, 0.0));
      occ.radius_x = occ.radius_y = extent + 3.0;
      occ.texture = random_texture(rng, distinct_color(rng, used, 0.5), 0.2);
      occ.motion = spec.target.motion;
      occ.motion.growth = 0.0;
      occ.visible_from = t_frames * 2 / 5;
      occ.visible_until = t_frames * 3 / 5;
      spec.occluder = std::move(occ);
      break;
    }
    case Special::twin_distractor: {
      ShapeDesc twin = spec.target;
      twin.radius_x *= 0.9;
      twin.radius_y *= 0.9;
      twin.motion = random_motion(rng, size, twin.radius_x, 0.5 * unit, 1.5 * unit);
      twin.motion.inset = full_extent(twin) + 4.0;
      twin.visible_from = t_frames / 3;
      spec.distractors.push_back(std::move(twin));
      break;
    }
    case Special::none:
      // Half-size copy of the target entering after the first frame: colour
      // alone cannot tell it apart, only size and shape can.
      if (rng.uniform() < 0.5) {
        ShapeDesc decoy = spec.target;
        const double scale = rng.uniform(0.4, 0.6);
        decoy.radius_x *= scale;
        decoy.radius_y *= scale;
        decoy.motion = random_motion(rng, size, decoy.radius_x, 0.5 * unit, 1.5 * unit);
        decoy.motion.inset = full_extent(decoy) + 4.0;
        decoy.visible_from = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(std::max(1, t_frames / 2))));
        spec.distractors.push_back(std::move(decoy));
      }
      if (rng.uniform() < 0.2) {
        ShapeDesc occ = random_shape(rng, 5.0 * unit, 9.0 * unit);
        occ.texture = random_texture(rng, distinct_color(rng, used, 0.5), 0.2);
        occ.motion = random_motion(rng, size, occ.radius_x, 1.0 * unit, 2.5 * unit);
        occ.visible_from = static_cast<int>(rng.below(static_cast<std::uint64_t>(std::max(1, t_frames / 2))));
        occ.visible_until = occ.visible_from + 3 + static_cast<int>(rng.below(static_cast<std::uint64_t>(std::max(1, t_frames / 3))));
        spec.occluder = std::move(occ);
      }
      break;
  }
  spec.validate();
  return spec;
}

std::string sequence_name(const char* split, int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%03d", split, index);
  return buf;
}

}  // namespace

SynthDataset make_benchmark(std::uint64_t master_seed, int n_train, int n_val, const BenchmarkOptions& opts) {
  if (n_train < 1 || n_val < 1) throw Error("benchmark needs at least one train and one val sequence");
  SynthDataset ds;
  ds.master_seed = master_seed;
  std::set<std::uint64_t> seeds;
  auto fresh_seed = [&](std::uint64_t stream, int index) {
    std::uint64_t s = SplitMix64::derive(SplitMix64::derive(master_seed, stream), static_cast<std::uint64_t>(index));
    while (!seeds.insert(s).second) s = SplitMix64::mix(s);
    return s;
  };
  for (int i = 0; i < n_train; ++i) {
    ds.train_specs.push_back(random_scene(fresh_seed(kTrainStream, i), sequence_name("train", i), opts, Special::none));
  }
  for (int i = 0; i < n_val; ++i) {
    const Special special = i == 0 ? Special::full_occlusion : i == 1 ? Special::twin_distractor : Special::none;
    ds.val_specs.push_back(random_scene(fresh_seed(kValStream, i), sequence_name("val", i), opts, special));
  }
  for (const auto& s : ds.train_specs) ds.train.push_back(render_sequence(s));
  for (const auto& s : ds.val_specs) ds.val.push_back(render_sequence(s));
  return ds;
}

void write_dataset(const SynthDataset& ds, const std::filesystem::path& root) {
  std::filesystem::create_directories(root);
  nlohmann::ordered_json manifest;
  manifest["format"] = "osvos-synth";
  manifest["version"] = 1;
  manifest["master_seed"] = ds.master_seed;
  auto entries = [](const std::vector<SceneSpec>& specs) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& s : specs) {
      nlohmann::ordered_json e;
      e["name"] = s.name;
      e["seed"] = s.seed;
      e["frames"] = s.num_frames;
      e["frame_size"] = s.frame_size;
      e["attributes"] = derive_attributes(s);
      arr.push_back(std::move(e));
    }
    return arr;
  };
  manifest["train"] = entries(ds.train_specs);
  manifest["val"] = entries(ds.val_specs);
  for (const auto& seq : ds.train) save_sequence(seq, root);
  for (const auto& seq : ds.val) save_sequence(seq, root);
  std::ofstream out(root / "manifest.json", std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write manifest in '" + root.string() + "'");
  out << manifest.dump(2) << "\n";
}

DatasetSplits read_dataset(const std::filesystem::path& root) {
  const auto path = root / "manifest.json";
  std::ifstream in(path);
  if (!in) throw IoError("missing dataset manifest '" + path.string() + "'");
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("invalid manifest '" + path.string() + "': " + e.what());
  }
  DatasetSplits splits;
  for (const auto& e : manifest.value("train", nlohmann::json::array())) {
    splits.train.push_back(load_sequence(root, e.at("name").get<std::string>()));
  }
  for (const auto& e : manifest.value("val", nlohmann::json::array())) {
    splits.val.push_back(load_sequence(root, e.at("name").get<std::string>()));
  }
  return splits;
}

}  // namespace osvos::synthvid
