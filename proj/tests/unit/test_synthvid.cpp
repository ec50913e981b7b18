#include <filesystem>
#include <vector>

#include "doctest.h"
#include "osvos/error.hpp"
#include "osvos/synthvid.hpp"

using namespace osvos;
using namespace osvos::synthvid;
namespace fs = std::filesystem;

namespace {

SceneSpec static_scene() {
  SceneSpec s;
  s.name = "still";
  s.seed = 5;
  s.frame_size = 32;
  s.num_frames = 6;
  s.background = {TextureKind::checker, {0.2, 0.3, 0.4}, {0.3, 0.3, 0.3}, 4, 0, 1};
  s.target.texture = {TextureKind::flat, {0.9, 0.1, 0.1}, {}, 4, 0, 2};
  s.target.radius_x = 6.0;
  s.target.radius_y = 5.0;
  s.target.motion = {16.0, 16.0, 0.0, 0.0, 0.0, 0.0};
  return s;
}

}  // namespace

TEST_CASE("rendering is deterministic") {
  const auto a = make_benchmark(99, 2, 2, {32, 8});
  const auto b = make_benchmark(99, 2, 2, {32, 8});
  REQUIRE(a.val.size() == b.val.size());
  for (std::size_t i = 0; i < a.val.size(); ++i) {
    CHECK(a.val[i].frames == b.val[i].frames);
    CHECK(*a.val[i].gt == *b.val[i].gt);
  }
  Mask g1, g2;
  CHECK(render_frame(a.val_specs[0], 3, &g1) == render_frame(a.val_specs[0], 3, &g2));
  CHECK(g1 == g2);
}

TEST_CASE("different seeds give different videos") {
  const auto a = make_benchmark(1, 1, 1, {32, 6});
  const auto b = make_benchmark(2, 1, 1, {32, 6});
  CHECK_FALSE(a.train[0].frames == b.train[0].frames);
}

TEST_CASE("a static target without noise has identical gt in every frame") {
  const auto seq = render_sequence(static_scene());
  REQUIRE(seq.gt.has_value());
  for (const auto& m : *seq.gt) CHECK(m == seq.gt->front());
  CHECK(seq.gt->front().count() > 0);
  for (const auto& f : seq.frames) CHECK(f == seq.frames.front());
}

TEST_CASE("an occluder covering the target empties gt exactly in its window") {
  SceneSpec s = static_scene();
  s.num_frames = 16;
  ShapeDesc occ;
  occ.radius_x = occ.radius_y = 10.0;
  occ.texture = {TextureKind::flat, {0.1, 0.9, 0.1}, {}, 4, 0, 3};
  occ.motion = s.target.motion;
  occ.visible_from = 8;
  occ.visible_until = 12;
  s.occluder = occ;
  const auto seq = render_sequence(s);
  for (int t = 0; t < 16; ++t) CHECK((*seq.gt)[static_cast<std::size_t>(t)].none() == (t >= 8 && t < 12));
  CHECK(derive_attributes(s).count("OCC") == 1);
}

TEST_CASE("benchmark layout and special validation sequences") {
  const auto ds = make_benchmark(8, 8, 4, {64, 20});
  CHECK(ds.train.size() == 8);
  CHECK(ds.val.size() == 4);
  for (const auto* split : {&ds.train, &ds.val}) {
    for (const auto& seq : *split) {
      REQUIRE(seq.gt.has_value());
      REQUIRE(seq.edges.has_value());
      CHECK(seq.frames.size() == 20);
      CHECK(seq.gt->size() == 20);
      CHECK(seq.gt->front().count() > 0);
    }
  }
  // val[0]: full occlusion mid-sequence, target visible before and after.
  const auto& occ = *ds.val[0].gt;
  CHECK(occ[0].count() > 0);
  CHECK(occ[19].count() > 0);
  bool empty_mid = false;
  for (int t = 1; t < 19; ++t) empty_mid |= occ[static_cast<std::size_t>(t)].none();
  CHECK(empty_mid);
  CHECK(ds.val[0].attributes.count("OCC") == 1);
  CHECK_THROWS_AS(make_benchmark(8, 0, 1), Error);
}

TEST_CASE("gt lies inside the target silhouette and edges straddle every gt edge") {
  const auto ds = make_benchmark(21, 3, 3, {48, 10});
  for (std::size_t i = 0; i < ds.val.size(); ++i) {
    const auto& spec = ds.val_specs[i];
    for (int t = 0; t < spec.num_frames; ++t) {
      const Mask& gt = (*ds.val[i].gt)[static_cast<std::size_t>(t)];
      const Mask& edges = (*ds.val[i].edges)[static_cast<std::size_t>(t)];
      CHECK(mask_minus(gt, rasterize(spec, spec.target, t)).none());
      bool straddles = true;
      for (int y = 0; y < gt.height(); ++y) {
        for (int x = 0; x + 1 < gt.width(); ++x) {
          if (gt.at(x, y) != gt.at(x + 1, y)) straddles = straddles && edges.at(x, y) && edges.at(x + 1, y);
        }
      }
      for (int y = 0; y + 1 < gt.height(); ++y) {
        for (int x = 0; x < gt.width(); ++x) {
          if (gt.at(x, y) != gt.at(x, y + 1)) straddles = straddles && edges.at(x, y) && edges.at(x, y + 1);
        }
      }
      CHECK(straddles);
    }
  }
}

TEST_CASE("spec validation") {
  SceneSpec s = static_scene();
  CHECK_NOTHROW(s.validate());
  s.target.radius_x = 0.0;
  CHECK_THROWS_AS(s.validate(), Error);
  s = static_scene();
  s.target.kind = ShapeKind::polygon;
  s.target.vertex_radii = {1.0, 0.5, 1.0};
  CHECK_THROWS_AS(s.validate(), Error);
}

TEST_CASE("dataset write and read round trip") {
  const fs::path dir = fs::temp_directory_path() / "osvos_test_synth_ds";
  fs::remove_all(dir);
  const auto ds = make_benchmark(3, 2, 2, {32, 6});
  write_dataset(ds, dir);
  const auto back = read_dataset(dir);
  REQUIRE(back.train.size() == 2);
  REQUIRE(back.val.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back.val[i].name == ds.val[i].name);
    CHECK(back.val[i].frames == ds.val[i].frames);
    CHECK(*back.val[i].gt == *ds.val[i].gt);
    CHECK(back.val[i].attributes == ds.val[i].attributes);
  }
  CHECK_THROWS_AS(read_dataset(dir / "nope"), IoError);
  fs::remove_all(dir);
}
