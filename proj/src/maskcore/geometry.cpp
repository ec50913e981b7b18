#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "osvos/error.hpp"
#include "osvos/maskcore.hpp"

namespace osvos {

std::optional<BoundingBox> bounding_box(const Mask& m) {
  BoundingBox b{m.width(), m.height(), -1, -1};
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      if (!m.at(x, y)) continue;
      b.x0 = std::min(b.x0, x);
      b.y0 = std::min(b.y0, y);
      b.x1 = std::max(b.x1, x);
      b.y1 = std::max(b.y1, y);
    }
  }
  if (b.x1 < 0) return std::nullopt;
  return b;
}

double box_iou(const BoundingBox& a, const BoundingBox& b) {
  const int ix0 = std::max(a.x0, b.x0);
  const int iy0 = std::max(a.y0, b.y0);
  const int ix1 = std::min(a.x1, b.x1);
  const int iy1 = std::min(a.y1, b.y1);
  long long inter = 0;
  if (ix0 <= ix1 && iy0 <= iy1) inter = static_cast<long long>(ix1 - ix0 + 1) * (iy1 - iy0 + 1);
  const long long uni = a.area() + b.area() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

// Meijster, Roerdink & Hesselink: column pass computes vertical distances,
// row pass takes the lower envelope of parabolas with integer separators.
std::vector<std::int64_t> squared_distance_transform(const Mask& m) {
  if (m.none()) throw Error("distance transform of empty mask");
  const int w = m.width();
  const int h = m.height();
  const std::int64_t inf = static_cast<std::int64_t>(w) + h;

  std::vector<std::int64_t> g(m.size());
  for (int x = 0; x < w; ++x) {
    g[x] = m.at(x, 0) ? 0 : inf;
    for (int y = 1; y < h; ++y) {
      g[static_cast<std::size_t>(y) * w + x] = m.at(x, y) ? 0 : g[static_cast<std::size_t>(y - 1) * w + x] + 1;
    }
    for (int y = h - 2; y >= 0; --y) {
      auto& cur = g[static_cast<std::size_t>(y) * w + x];
      const auto below = g[static_cast<std::size_t>(y + 1) * w + x];
      if (below < cur) cur = below + 1;
    }
  }

  std::vector<std::int64_t> out(m.size());
  std::vector<int> s(static_cast<std::size_t>(w));
  std::vector<std::int64_t> t(static_cast<std::size_t>(w));
  for (int y = 0; y < h; ++y) {
    const std::int64_t* row = g.data() + static_cast<std::size_t>(y) * w;
    auto f = [&](std::int64_t x, int i) { return (x - i) * (x - i) + row[i] * row[i]; };
    // First integer x at which parabola u is at most parabola i (u > i).
    auto sep = [&](int i, int u) {
      return (static_cast<std::int64_t>(u) * u - static_cast<std::int64_t>(i) * i + row[u] * row[u] - row[i] * row[i]) /
             (2 * static_cast<std::int64_t>(u - i));
    };
    int q = 0;
    s[0] = 0;
    t[0] = 0;
    for (int u = 1; u < w; ++u) {
      while (q >= 0 && f(t[q], s[q]) > f(t[q], u)) --q;
      if (q < 0) {
        q = 0;
        s[0] = u;
      } else {
        const std::int64_t wv = 1 + sep(s[q], u);
        if (wv < w) {
          ++q;
          s[q] = u;
          t[q] = wv;
        }
      }
    }
    for (int u = w - 1; u >= 0; --u) {
      out[static_cast<std::size_t>(y) * w + u] = f(u, s[q]);
      if (u == t[q]) --q;
    }
  }
  return out;
}

RealGrid euclidean_distance_transform(const Mask& m) {
  const auto sq = squared_distance_transform(m);
  RealGrid grid{m.width(), m.height(), std::vector<double>(sq.size())};
  for (std::size_t i = 0; i < sq.size(); ++i) grid.values[i] = std::sqrt(static_cast<double>(sq[i]));
  return grid;
}

namespace {

bool is_boundary(const Mask& m, int x, int y) {
  if (!m.at(x, y)) return false;
  constexpr int dx[4] = {1, -1, 0, 0};
  constexpr int dy[4] = {0, 0, 1, -1};
  for (int k = 0; k < 4; ++k) {
    const int nx = x + dx[k];
    const int ny = y + dy[k];
    if (!m.contains(nx, ny) || !m.at(nx, ny)) return true;
  }
  return false;
}

}  // namespace

std::vector<Pixel> boundary_pixels(const Mask& m) {
  std::vector<Pixel> out;
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      if (is_boundary(m, x, y)) out.push_back({x, y});
    }
  }
  return out;
}

Mask boundary_mask(const Mask& m) {
  Mask out(m.width(), m.height());
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) out.set(x, y, is_boundary(m, x, y));
  }
  return out;
}

Mask dilate(const Mask& m, int radius) {
  Mask out(m.width(), m.height());
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      if (!m.at(x, y)) continue;
      for (int yy = std::max(0, y - radius); yy <= std::min(m.height() - 1, y + radius); ++yy) {
        for (int xx = std::max(0, x - radius); xx <= std::min(m.width() - 1, x + radius); ++xx) out.set(xx, yy, true);
      }
    }
  }
  return out;
}

std::vector<int> connected_components(const Mask& m, int* count) {
  std::vector<int> labels(m.size(), -1);
  std::vector<std::size_t> stack;
  int next = 0;
  const int w = m.width();
  for (std::size_t start = 0; start < m.size(); ++start) {
    if (!m[start] || labels[start] >= 0) continue;
    labels[start] = next;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      const int x = static_cast<int>(i % w);
      const int y = static_cast<int>(i / w);
      const Pixel nbrs[4] = {{x + 1, y}, {x - 1, y}, {x, y + 1}, {x, y - 1}};
      for (const Pixel& p : nbrs) {
        if (!m.contains(p.x, p.y)) continue;
        const std::size_t j = static_cast<std::size_t>(p.y) * w + p.x;
        if (m[j] && labels[j] < 0) {
          labels[j] = next;
          stack.push_back(j);
        }
      }
    }
    ++next;
  }
  if (count) *count = next;
  return labels;
}

}  // namespace osvos
