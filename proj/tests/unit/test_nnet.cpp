#include <cmath>
#include <filesystem>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "osvos/error.hpp"
#include "osvos/nnet.hpp"

using namespace osvos;
using namespace osvos::nnet;

namespace {

Frame random_frame(SplitMix64& rng, int w, int h, int channels) {
  std::vector<double> v(static_cast<std::size_t>(w) * h * channels);
  for (auto& x : v) x = rng.uniform();
  return Frame(w, h, channels, std::move(v));
}

// He init plus small random biases so no parameter sits at a symmetric point.
FcnModel random_model(const Architecture& arch, std::uint64_t seed) {
  FcnModel m = FcnModel::he_init(arch, seed);
  SplitMix64 rng(seed ^ 0x5EEDULL);
  for (const auto& b : m.blobs()) {
    if (b.name.find("bias") == std::string::npos) continue;
    for (std::size_t i = 0; i < b.size; ++i) m.parameters()[b.offset + i] = 0.1 * rng.normal();
  }
  return m;
}

double rel_error(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale < 1e-10 ? 0.0 : std::abs(a - b) / scale;
}

}  // namespace

TEST_CASE("zero network predicts 0.5 everywhere") {
  const FcnModel zero(Architecture{});
  SplitMix64 rng(1);
  const Frame f = random_frame(rng, 16, 16, 3);
  const Prediction p = forward(zero, f);
  for (double v : p.foreground.values()) CHECK(v == 0.5);
  for (double v : p.contour.values()) CHECK(v == 0.5);
}

TEST_CASE("forward is deterministic and full resolution") {
  const FcnModel m = random_model(Architecture{}, 3);
  SplitMix64 rng(2);
  const Frame f = random_frame(rng, 24, 16, 3);
  const Prediction a = forward(m, f);
  const Prediction b = forward(m, f);
  CHECK(a.foreground == b.foreground);
  CHECK(a.contour == b.contour);
  CHECK(a.foreground.width() == 24);
  CHECK(a.foreground.height() == 16);
  CHECK_THROWS_WITH_AS(forward(m, random_frame(rng, 18, 16, 3)), doctest::Contains("padding"), Error);
}

TEST_CASE("one-stage one-channel trace and fusion scaling") {
  FcnModel m(Architecture{1, {1}});
  auto p = m.parameters();
  p[m.conv(0, 0).weight + 4] = 1.0;  // centre tap: identity
  p[m.conv(0, 1).weight + 4] = 1.0;
  const auto& fg = m.head(Head::foreground);
  p[fg.side[0].weight] = 1.0;
  p[fg.fuse_weight] = 1.0;
  p[fg.fuse_bias] = 0.25;

  std::vector<double> pixels(16, 0.0);
  pixels[5] = 0.4;
  const Frame f(4, 4, 1, pixels);
  const HeadLogits base = forward_logits(m, f);
  CHECK(base.foreground.at(0, 1, 1) == 0.4 + 0.25);

  p[fg.fuse_weight] *= 2.0;
  p[fg.fuse_bias] *= 2.0;
  const HeadLogits doubled = forward_logits(m, f);
  for (std::size_t i = 0; i < 16; ++i) {
    CHECK(doubled.foreground.values()[i] == 2.0 * base.foreground.values()[i]);
  }
  CHECK(forward(m, f).foreground.at(1, 1) == doctest::Approx(1.0 / (1.0 + std::exp(-1.3))).epsilon(1e-15));
}

TEST_CASE("balanced loss: ln 2 at zero logits and vanishing at saturation") {
  Mask target(4, 4);
  for (int x = 0; x < 4; ++x) {
    target.set(x, 0, true);
    target.set(x, 1, true);
  }
  const Tensor zeros(1, 4, 4, 0.0);
  CHECK(std::abs(balanced_bce_loss(zeros, target).loss - std::log(2.0)) < 1e-15);

  Tensor sat(1, 4, 4);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) sat.at(0, y, x) = target.at(x, y) ? 40.0 : -40.0;
  }
  const LossResult r = balanced_bce_loss(sat, target);
  CHECK(r.loss < 1e-16);
  for (double g : r.grad.values()) CHECK(std::abs(g) < 1e-16);
}

TEST_CASE("loss gradient matches central finite differences on random 6x6 cases") {
  SplitMix64 rng(77);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor logits(1, 6, 6);
    for (auto& v : logits.values()) v = 1.5 * rng.normal();
    const Mask target = testutil::random_mask(rng, 6, 6, 0.4);
    LossOptions opts;
    if (trial % 2 == 1) opts = {PosWeightMode::fixed, 2.5, 1.0};
    const LossResult r = balanced_bce_loss(logits, target, opts);
    for (std::size_t i = 0; i < logits.values().size(); ++i) {
      const double eps = 1e-5;
      Tensor plus = logits, minus = logits;
      plus.values()[i] += eps;
      minus.values()[i] -= eps;
      const double fd =
          (balanced_bce_loss(plus, target, opts).loss - balanced_bce_loss(minus, target, opts).loss) / (2.0 * eps);
      CHECK(rel_error(r.grad.values()[i], fd) < 1e-6);
    }
  }
}

TEST_CASE("backward matches central finite differences for every parameter") {
  // Two stages of width 4, 16x16 input, epsilon 1e-5. The relative criterion
  // applies wherever the difference quotient resolves the gradient: when both
  // values sit below the quotient's rounding floor (machine epsilon times the
  // loss over epsilon, with margin) the absolute gap must stay under that
  // floor instead. Parameters whose +-epsilon window straddles a ReLU or
  // max-pool switch are not differentiable there; they are detected by
  // disagreeing one-sided quotients, counted, and must stay rare.
  const Architecture arch{3, {4, 4}};
  const double eps = 1e-5;
  const double floor = 1e-9;
  SplitMix64 rng(4242);
  std::size_t checked = 0, kinks = 0, total = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const FcnModel model = random_model(arch, 100 + static_cast<std::uint64_t>(trial));
    const Frame frame = random_frame(rng, 16, 16, 3);
    const Mask fg = testutil::random_mask(rng, 16, 16, 0.3);
    const Mask contour = contour_target(fg);
    const LossOptions opts{PosWeightMode::balanced, 1.0, trial % 3 == 0 ? 0.5 : 1.0};
    const BackwardResult br = backward(model, frame, fg, contour, opts);
    REQUIRE(br.gradients.size() == model.parameter_count());
    CHECK(std::abs(br.loss - (br.foreground_loss + opts.contour_weight * br.contour_loss)) < 1e-12);

    FcnModel probe = model;
    for (std::size_t i = 0; i < model.parameter_count(); ++i) {
      ++total;
      const double orig = probe.parameters()[i];
      probe.parameters()[i] = orig + eps;
      const double lp = backward(probe, frame, fg, contour, opts).loss;
      probe.parameters()[i] = orig - eps;
      const double lm = backward(probe, frame, fg, contour, opts).loss;
      probe.parameters()[i] = orig;
      const double forward_q = (lp - br.loss) / eps;
      const double backward_q = (br.loss - lm) / eps;
      if (std::abs(forward_q - backward_q) > 1e-3 * std::max(std::abs(forward_q), std::abs(backward_q)) + 1e-6) {
        ++kinks;
        continue;
      }
      const double fd = (lp - lm) / (2.0 * eps);
      const double a = br.gradients[i];
      const double gap = std::abs(a - fd);
      const double scale = std::max(std::abs(a), std::abs(fd));
      const double err = scale * 1e-4 > floor ? gap / scale : (gap <= floor ? 0.0 : gap / scale);
      worst = std::max(worst, err);
      ++checked;
    }
  }
  INFO("parameters: " << total << ", checked: " << checked << ", non-differentiable: " << kinks
                      << ", worst relative error: " << worst);
  CHECK(checked >= 20);
  CHECK(kinks * 100 <= total);
  CHECK(worst < 1e-4);
}

TEST_CASE("saturated predictions give near-zero gradients") {
  FcnModel m(Architecture{3, {4, 4}});
  const auto& fg = m.head(Head::foreground);
  const auto& ct = m.head(Head::contour);
  m.parameters()[fg.fuse_bias] = -40.0;
  m.parameters()[ct.fuse_bias] = -40.0;
  SplitMix64 rng(9);
  const Frame f = random_frame(rng, 16, 16, 3);
  const BackwardResult r = backward(m, f, Mask(16, 16), Mask(16, 16));
  for (double g : r.gradients) CHECK(std::abs(g) < 1e-15);
}

TEST_CASE("parameter layout has no upsampler weights") {
  const FcnModel m(Architecture{});
  for (const auto& b : m.blobs()) CHECK(b.name.find("up") == std::string::npos);
  std::size_t total = 0;
  for (const auto& b : m.blobs()) total += b.size;
  CHECK(total == m.parameter_count());
}

TEST_CASE("sgd step recurrences") {
  TrainConfig plain{0.1, 0.0, 1, 0, {}};
  std::vector<double> p{1.0, -2.0}, g{0.5, 1.0}, v{0.0, 0.0};
  sgd_step(p, g, v, plain);
  CHECK(p[0] == 1.0 - 0.1 * 0.5);
  CHECK(p[1] == -2.0 - 0.1 * 1.0);

  std::vector<double> q{3.0}, zero{0.0}, vel{0.0};
  sgd_step(q, zero, vel, TrainConfig{0.1, 0.9, 1, 0, {}});
  CHECK(q[0] == 3.0);

  // Scalar with mu 0.9, lr 0.1, gradient 2 then 1:
  // v1 = -0.2, p1 = 0.8; v2 = 0.9*(-0.2) - 0.1 = -0.28, p2 = 0.52.
  TrainConfig mom{0.1, 0.9, 2, 0, {}};
  std::vector<double> s{1.0}, vs{0.0}, g1{2.0}, g2{1.0};
  sgd_step(s, g1, vs, mom);
  CHECK(s[0] == doctest::Approx(0.8).epsilon(1e-15));
  sgd_step(s, g2, vs, mom);
  CHECK(vs[0] == doctest::Approx(-0.28).epsilon(1e-15));
  CHECK(s[0] == doctest::Approx(0.52).epsilon(1e-15));
}

TEST_CASE("train config validation names the field") {
  TrainConfig c;
  c.momentum = 1.2;
  CHECK_THROWS_WITH(c.validate(), doctest::Contains("momentum"));
  c = TrainConfig{};
  c.learning_rate = 0.0;
  CHECK_THROWS_WITH(c.validate(), doctest::Contains("learning_rate"));
}

TEST_CASE("contour target examples") {
  CHECK(contour_target(Mask(6, 6)).none());
  Mask dot(5, 5);
  dot.set(0, 0, true);
  const Mask t = contour_target(dot);
  CHECK(t.count() == 4);
  CHECK(t.at(1, 1));

  // 8x8 square: boundary ring dilated by a 3x3 element, by brute force.
  const Mask sq = testutil::rect(12, 12, 2, 2, 9, 9);
  Mask want(12, 12);
  for (int y = 0; y < 12; ++y) {
    for (int x = 0; x < 12; ++x) {
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int u = x + dx, v = y + dy;
          if (u < 2 || u > 9 || v < 2 || v > 9) continue;
          const bool ring = u == 2 || u == 9 || v == 2 || v == 9;
          if (ring) want.set(x, y, true);
        }
      }
    }
  }
  CHECK(contour_target(sq) == want);
}

TEST_CASE("checkpoint round trip and corruption") {
  const FcnModel m = random_model(Architecture{3, {4, 8}}, 12);
  const std::string bytes = encode_checkpoint(m);
  CHECK(decode_checkpoint(bytes) == m);
  CHECK(encode_checkpoint(decode_checkpoint(bytes)) == bytes);

  const auto path = std::filesystem::temp_directory_path() / "osvos_test_ckpt.oswt";
  save_checkpoint(m, path);
  CHECK(load_checkpoint(path) == m);
  std::filesystem::remove(path);

  CHECK_THROWS_AS(decode_checkpoint("XXXX" + bytes.substr(4)), FormatError);
  CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), FormatError);
  CHECK_THROWS_AS(decode_checkpoint(bytes + "z"), FormatError);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/osvos.oswt"), IoError);
}

TEST_CASE("tensor finiteness guard") {
  Tensor t(1, 2, 2);
  t.at(0, 1, 1) = std::nan("");
  CHECK_THROWS_AS(t.require_finite("t"), Error);
}
