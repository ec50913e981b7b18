#include <algorithm>
#include <cmath>
#include <string>

#include "osvos/error.hpp"
#include "osvos/nnet.hpp"

namespace osvos::nnet {

namespace {

// ---- layers -------------------------------------------------------------------

// 3x3 convolution, zero padding, stride 1. Weights laid out [out][in][3][3].
Tensor conv3x3(const Tensor& in, const double* weight, const double* bias, int out_channels) {
  const int h = in.height();
  const int w = in.width();
  const int cin = in.channels();
  Tensor out(out_channels, h, w);
  for (int co = 0; co < out_channels; ++co) {
    double* dst = out.plane(co);
    std::fill(dst, dst + out.plane_size(), bias[co]);
    for (int ci = 0; ci < cin; ++ci) {
      const double* src = in.plane(ci);
      const double* k = weight + (static_cast<std::size_t>(co) * cin + ci) * 9;
      for (int ky = 0; ky < 3; ++ky) {
        const int dy = ky - 1;
        const int y0 = std::max(0, -dy);
        const int y1 = std::min(h, h - dy);
        for (int kx = 0; kx < 3; ++kx) {
          const int dx = kx - 1;
          const int x0 = std::max(0, -dx);
          const int x1 = std::min(w, w - dx);
          const double wv = k[ky * 3 + kx];
          for (int y = y0; y < y1; ++y) {
            double* orow = dst + static_cast<std::size_t>(y) * w;
            const double* irow = src + static_cast<std::size_t>(y + dy) * w + dx;
            for (int x = x0; x < x1; ++x) orow[x] += wv * irow[x];
          }
        }
      }
    }
  }
  return out;
}

// Accumulates weight/bias gradients; fills `din` when non-null.
void conv3x3_backward(const Tensor& in, const double* weight, const Tensor& dout, double* dweight, double* dbias,
                      Tensor* din) {
  const int h = in.height();
  const int w = in.width();
  const int cin = in.channels();
  const int cout = dout.channels();
  if (din) *din = Tensor(cin, h, w);
  for (int co = 0; co < cout; ++co) {
    const double* g = dout.plane(co);
    double bsum = 0.0;
    for (std::size_t i = 0; i < dout.plane_size(); ++i) bsum += g[i];
    dbias[co] += bsum;
    for (int ci = 0; ci < cin; ++ci) {
      const double* src = in.plane(ci);
      double* dsrc = din ? din->plane(ci) : nullptr;
      const std::size_t kidx = (static_cast<std::size_t>(co) * cin + ci) * 9;
      for (int ky = 0; ky < 3; ++ky) {
        const int dy = ky - 1;
        const int y0 = std::max(0, -dy);
        const int y1 = std::min(h, h - dy);
        for (int kx = 0; kx < 3; ++kx) {
          const int dx = kx - 1;
          const int x0 = std::max(0, -dx);
          const int x1 = std::min(w, w - dx);
          const double wv = weight[kidx + ky * 3 + kx];
          double acc = 0.0;
          for (int y = y0; y < y1; ++y) {
            const double* grow = g + static_cast<std::size_t>(y) * w;
            const double* irow = src + static_cast<std::size_t>(y + dy) * w + dx;
            for (int x = x0; x < x1; ++x) acc += grow[x] * irow[x];
            if (dsrc) {
              double* drow = dsrc + static_cast<std::size_t>(y + dy) * w + dx;
              for (int x = x0; x < x1; ++x) drow[x] += wv * grow[x];
            }
          }
          dweight[kidx + ky * 3 + kx] += acc;
        }
      }
    }
  }
}

void relu_inplace(Tensor& t) {
  for (double& v : t.values()) v = v > 0.0 ? v : 0.0;
}

// 2x2 max-pool; `argmax` receives the flat source index of each output.
Tensor maxpool2(const Tensor& in, std::vector<std::size_t>& argmax) {
  const int h = in.height() / 2;
  const int w = in.width() / 2;
  Tensor out(in.channels(), h, w);
  argmax.assign(static_cast<std::size_t>(in.channels()) * h * w, 0);
  const auto src = in.values();
  std::size_t o = 0;
  for (int c = 0; c < in.channels(); ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x, ++o) {
        std::size_t best = c * in.plane_size() + static_cast<std::size_t>(2 * y) * in.width() + 2 * x;
        const std::size_t cands[3] = {best + 1, best + in.width(), best + in.width() + 1};
        for (std::size_t k : cands) {
          if (src[k] > src[best]) best = k;
        }
        argmax[o] = best;
        out.values()[o] = src[best];
      }
    }
  }
  return out;
}

// Fixed bilinear interpolation along one axis from n/factor samples to n,
// sampling at pixel centres with edge clamping.
struct AxisTable {
  std::vector<int> lo;
  std::vector<int> hi;
  std::vector<double> w_hi;
};

AxisTable axis_table(int n_out, int factor) {
  const int n_in = n_out / factor;
  AxisTable t;
  t.lo.resize(static_cast<std::size_t>(n_out));
  t.hi.resize(static_cast<std::size_t>(n_out));
  t.w_hi.resize(static_cast<std::size_t>(n_out));
  for (int i = 0; i < n_out; ++i) {
    double src = (i + 0.5) / factor - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(n_in - 1));
    const int lo = static_cast<int>(std::floor(src));
    t.lo[static_cast<std::size_t>(i)] = lo;
    t.hi[static_cast<std::size_t>(i)] = std::min(lo + 1, n_in - 1);
    t.w_hi[static_cast<std::size_t>(i)] = src - lo;
  }
  return t;
}

struct Upsampler {
  int factor = 1;
  int in_w = 0;
  AxisTable rows;
  AxisTable cols;

  Upsampler(int height, int width, int f) : factor(f), in_w(width / f), rows(axis_table(height, f)), cols(axis_table(width, f)) {}

  void apply(const double* src, double* dst) const {
    const int h = static_cast<int>(rows.lo.size());
    const int w = static_cast<int>(cols.lo.size());
    for (int y = 0; y < h; ++y) {
      const double wy1 = rows.w_hi[y];
      const double wy0 = 1.0 - wy1;
      const double* r0 = src + static_cast<std::size_t>(rows.lo[y]) * in_w;
      const double* r1 = src + static_cast<std::size_t>(rows.hi[y]) * in_w;
      for (int x = 0; x < w; ++x) {
        const double wx1 = cols.w_hi[x];
        const double wx0 = 1.0 - wx1;
        const int c0 = cols.lo[x];
        const int c1 = cols.hi[x];
        dst[static_cast<std::size_t>(y) * w + x] = wy0 * (wx0 * r0[c0] + wx1 * r0[c1]) + wy1 * (wx0 * r1[c0] + wx1 * r1[c1]);
      }
    }
  }

  // Adjoint of apply: accumulates into `dsrc`.
  void apply_transpose(const double* ddst, double* dsrc) const {
    const int h = static_cast<int>(rows.lo.size());
    const int w = static_cast<int>(cols.lo.size());
    for (int y = 0; y < h; ++y) {
      const double wy1 = rows.w_hi[y];
      const double wy0 = 1.0 - wy1;
      double* r0 = dsrc + static_cast<std::size_t>(rows.lo[y]) * in_w;
      double* r1 = dsrc + static_cast<std::size_t>(rows.hi[y]) * in_w;
      for (int x = 0; x < w; ++x) {
        const double g = ddst[static_cast<std::size_t>(y) * w + x];
        const double wx1 = cols.w_hi[x];
        const double wx0 = 1.0 - wx1;
        r0[cols.lo[x]] += wy0 * wx0 * g;
        r0[cols.hi[x]] += wy0 * wx1 * g;
        r1[cols.lo[x]] += wy1 * wx0 * g;
        r1[cols.hi[x]] += wy1 * wx1 * g;
      }
    }
  }
};

// ---- whole network --------------------------------------------------------------

struct StageTrace {
  Tensor input;
  Tensor pre1;  // conv output before relu
  Tensor act1;
  Tensor pre2;
  Tensor features;  // relu(pre2)
  std::vector<std::size_t> pool_argmax;
};

struct HeadTrace {
  std::vector<Tensor> side;       // stage resolution logits
  std::vector<Tensor> upsampled;  // full resolution
  Tensor fused;
};

struct ForwardTrace {
  std::vector<StageTrace> stages;
  std::vector<Upsampler> upsamplers;
  HeadTrace heads[2];
};

Tensor frame_to_tensor(const Frame& frame, const Architecture& arch) {
  const int d = arch.divisor();
  if (frame.width() % d != 0 || frame.height() % d != 0) {
    throw Error("padding required: frame " + std::to_string(frame.width()) + "x" + std::to_string(frame.height()) +
                " is not divisible by " + std::to_string(d));
  }
  if (frame.channels() != arch.in_channels && !(frame.channels() == 1 && arch.in_channels == 3)) {
    throw Error("frame has " + std::to_string(frame.channels()) + " channels, network expects " +
                std::to_string(arch.in_channels));
  }
  Tensor t(arch.in_channels, frame.height(), frame.width());
  for (int c = 0; c < arch.in_channels; ++c) {
    const auto plane = frame.plane(frame.channels() == 1 ? 0 : c);
    std::copy(plane.begin(), plane.end(), t.plane(c));
  }
  return t;
}

ForwardTrace run_forward(const FcnModel& model, const Frame& frame) {
  const Architecture& arch = model.architecture();
  const auto p = model.parameters();
  ForwardTrace tr;
  Tensor x = frame_to_tensor(frame, arch);
  x.require_finite("network input");
  const int height = x.height();
  const int width = x.width();
  for (int s = 0; s < arch.stages(); ++s) {
    StageTrace st;
    const auto& c0 = model.conv(s, 0);
    const auto& c1 = model.conv(s, 1);
    st.pre1 = conv3x3(x, p.data() + c0.weight, p.data() + c0.bias, c0.out);
    st.act1 = st.pre1;
    relu_inplace(st.act1);
    st.pre2 = conv3x3(st.act1, p.data() + c1.weight, p.data() + c1.bias, c1.out);
    st.features = st.pre2;
    relu_inplace(st.features);
    st.input = std::move(x);
    if (s + 1 < arch.stages()) x = maxpool2(st.features, st.pool_argmax);
    tr.stages.push_back(std::move(st));
    tr.upsamplers.emplace_back(height, width, 1 << s);
  }
  for (int h = 0; h < 2; ++h) {
    const auto& layout = model.head(static_cast<Head>(h));
    HeadTrace& ht = tr.heads[h];
    ht.fused = Tensor(1, height, width, p[layout.fuse_bias]);
    for (int s = 0; s < arch.stages(); ++s) {
      const Tensor& f = tr.stages[static_cast<std::size_t>(s)].features;
      const auto& side = layout.side[static_cast<std::size_t>(s)];
      Tensor logit(1, f.height(), f.width(), p[side.bias]);
      for (int c = 0; c < f.channels(); ++c) {
        const double wv = p[side.weight + c];
        const double* src = f.plane(c);
        double* dst = logit.plane(0);
        for (std::size_t i = 0; i < f.plane_size(); ++i) dst[i] += wv * src[i];
      }
      Tensor up(1, height, width);
      tr.upsamplers[static_cast<std::size_t>(s)].apply(logit.plane(0), up.plane(0));
      const double fw = p[layout.fuse_weight + s];
      double* fused = ht.fused.plane(0);
      const double* u = up.plane(0);
      for (std::size_t i = 0; i < up.plane_size(); ++i) fused[i] += fw * u[i];
      ht.side.push_back(std::move(logit));
      ht.upsampled.push_back(std::move(up));
    }
    ht.fused.require_finite("fused logits");
  }
  return tr;
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

ProbMap to_probmap(const Tensor& logits) {
  std::vector<double> v(logits.plane_size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = sigmoid(logits.values()[i]);
  return ProbMap(logits.width(), logits.height(), std::move(v));
}

}  // namespace

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

HeadLogits forward_logits(const FcnModel& model, const Frame& frame) {
  ForwardTrace tr = run_forward(model, frame);
  return {std::move(tr.heads[0].fused), std::move(tr.heads[1].fused)};
}

Prediction forward(const FcnModel& model, const Frame& frame) {
  const HeadLogits logits = forward_logits(model, frame);
  return {to_probmap(logits.foreground), to_probmap(logits.contour)};
}

LossResult balanced_bce_loss(const Tensor& logits, const Mask& target, const LossOptions& opts) {
  if (logits.channels() != 1 || logits.width() != target.width() || logits.height() != target.height()) {
    throw Error("loss: logits and target dimensions differ");
  }
  const std::size_t n = target.size();
  const std::size_t npos = target.count();
  const std::size_t nneg = n - npos;
  double wpos = 1.0;
  double wneg = 1.0;
  if (opts.mode == PosWeightMode::balanced) {
    if (npos > 0 && nneg > 0) {
      wpos = static_cast<double>(n) / (2.0 * static_cast<double>(npos));
      wneg = static_cast<double>(n) / (2.0 * static_cast<double>(nneg));
    }
  } else {
    wpos = opts.fixed_pos_weight;
  }
  LossResult r;
  r.grad = Tensor(1, logits.height(), logits.width());
  const double inv_n = 1.0 / static_cast<double>(n);
  const auto x = logits.values();
  auto g = r.grad.values();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = sigmoid(x[i]);
    if (target[i]) {
      total += wpos * softplus(-x[i]);
      g[i] = inv_n * wpos * (s - 1.0);
    } else {
      total += wneg * softplus(x[i]);
      g[i] = inv_n * wneg * s;
    }
  }
  r.loss = total * inv_n;
  return r;
}

BackwardResult backward(const FcnModel& model, const Frame& frame, const Mask& fg_target, const Mask& contour_target,
                        const LossOptions& opts) {
  const Architecture& arch = model.architecture();
  const auto p = model.parameters();
  ForwardTrace tr = run_forward(model, frame);

  BackwardResult res;
  res.gradients.assign(model.parameter_count(), 0.0);
  double* grad = res.gradients.data();

  LossResult fg = balanced_bce_loss(tr.heads[0].fused, fg_target, opts);
  LossResult ct = balanced_bce_loss(tr.heads[1].fused, contour_target, opts);
  res.foreground_loss = fg.loss;
  res.contour_loss = ct.loss;
  res.loss = fg.loss + opts.contour_weight * ct.loss;
  for (double& v : ct.grad.values()) v *= opts.contour_weight;

  // Gradients flowing into each stage's features from both heads.
  std::vector<Tensor> dfeat;
  for (const auto& st : tr.stages) dfeat.emplace_back(st.features.channels(), st.features.height(), st.features.width());

  const Tensor* dfused[2] = {&fg.grad, &ct.grad};
  for (int h = 0; h < 2; ++h) {
    const auto& layout = model.head(static_cast<Head>(h));
    const HeadTrace& ht = tr.heads[h];
    const double* dz = dfused[h]->plane(0);
    const std::size_t full = dfused[h]->plane_size();
    double bsum = 0.0;
    for (std::size_t i = 0; i < full; ++i) bsum += dz[i];
    grad[layout.fuse_bias] += bsum;
    for (int s = 0; s < arch.stages(); ++s) {
      const std::size_t si = static_cast<std::size_t>(s);
      const double* u = ht.upsampled[si].plane(0);
      double acc = 0.0;
      for (std::size_t i = 0; i < full; ++i) acc += dz[i] * u[i];
      grad[layout.fuse_weight + s] += acc;

      const double fw = p[layout.fuse_weight + s];
      std::vector<double> dup(full);
      for (std::size_t i = 0; i < full; ++i) dup[i] = fw * dz[i];
      const Tensor& logit = ht.side[si];
      Tensor dlogit(1, logit.height(), logit.width());
      tr.upsamplers[si].apply_transpose(dup.data(), dlogit.plane(0));

      const auto& side = layout.side[si];
      const Tensor& f = tr.stages[si].features;
      const double* dl = dlogit.plane(0);
      double lsum = 0.0;
      for (std::size_t i = 0; i < dlogit.plane_size(); ++i) lsum += dl[i];
      grad[side.bias] += lsum;
      for (int c = 0; c < f.channels(); ++c) {
        const double* src = f.plane(c);
        double wacc = 0.0;
        for (std::size_t i = 0; i < f.plane_size(); ++i) wacc += dl[i] * src[i];
        grad[side.weight + c] += wacc;
        const double wv = p[side.weight + c];
        double* df = dfeat[si].plane(c);
        for (std::size_t i = 0; i < f.plane_size(); ++i) df[i] += wv * dl[i];
      }
    }
  }

  Tensor dnext;  // gradient w.r.t. the pooled output feeding stage s+1
  for (int s = arch.stages() - 1; s >= 0; --s) {
    const std::size_t si = static_cast<std::size_t>(s);
    StageTrace& st = tr.stages[si];
    Tensor& dz2 = dfeat[si];
    if (s + 1 < arch.stages()) {
      auto d = dz2.values();
      const auto dn = dnext.values();
      for (std::size_t o = 0; o < st.pool_argmax.size(); ++o) d[st.pool_argmax[o]] += dn[o];
    }
    {
      auto d = dz2.values();
      const auto z = st.pre2.values();
      for (std::size_t i = 0; i < d.size(); ++i) {
        if (!(z[i] > 0.0)) d[i] = 0.0;
      }
    }
    const auto& c0 = model.conv(s, 0);
    const auto& c1 = model.conv(s, 1);
    Tensor dact1;
    conv3x3_backward(st.act1, p.data() + c1.weight, dz2, grad + c1.weight, grad + c1.bias, &dact1);
    {
      auto d = dact1.values();
      const auto z = st.pre1.values();
      for (std::size_t i = 0; i < d.size(); ++i) {
        if (!(z[i] > 0.0)) d[i] = 0.0;
      }
    }
    Tensor dinput;
    conv3x3_backward(st.input, p.data() + c0.weight, dact1, grad + c0.weight, grad + c0.bias, s > 0 ? &dinput : nullptr);
    dnext = std::move(dinput);
  }
  return res;
}

Mask contour_target(const Mask& gt) { return dilate(boundary_mask(gt), 1); }

}  // namespace osvos::nnet
