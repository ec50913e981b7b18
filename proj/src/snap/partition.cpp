#include <algorithm>
#include <numeric>
#include <queue>
#include <tuple>

#include "osvos/error.hpp"
#include "osvos/snap.hpp"

namespace osvos::snap {

void SuperpixelPartition::validate() const {
  if (labels.size() != static_cast<std::size_t>(width) * height) throw Error("partition size mismatch");
  std::vector<int> seen(static_cast<std::size_t>(count), 0);
  for (int l : labels) {
    if (l < 0 || l >= count) throw Error("partition label out of range");
    seen[static_cast<std::size_t>(l)] = 1;
  }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end()) throw Error("partition has unused labels");
  // Each region must be a single 4-connected component.
  std::vector<int> visited(labels.size(), 0);
  std::vector<int> components(static_cast<std::size_t>(count), 0);
  std::vector<std::size_t> stack;
  for (std::size_t s = 0; s < labels.size(); ++s) {
    if (visited[s]) continue;
    const int l = labels[s];
    if (++components[static_cast<std::size_t>(l)] > 1) throw Error("partition region is not 4-connected");
    visited[s] = 1;
    stack.push_back(s);
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      const int x = static_cast<int>(i % width);
      const int y = static_cast<int>(i / width);
      const int nx[4] = {x + 1, x - 1, x, x};
      const int ny[4] = {y, y, y + 1, y - 1};
      for (int k = 0; k < 4; ++k) {
        if (nx[k] < 0 || ny[k] < 0 || nx[k] >= width || ny[k] >= height) continue;
        const std::size_t j = static_cast<std::size_t>(ny[k]) * width + nx[k];
        if (!visited[j] && labels[j] == l) {
          visited[j] = 1;
          stack.push_back(j);
        }
      }
    }
  }
}

SuperpixelPartition partition_from_contours(const ContourMap& contours, double strength_threshold) {
  if (!(strength_threshold > 0.0 && strength_threshold < 1.0)) throw Error("contour threshold must lie in (0,1)");
  const int w = contours.width();
  const int h = contours.height();
  Mask seeds(w, h);
  for (std::size_t i = 0; i < contours.size(); ++i) seeds.set(i, contours[i] < strength_threshold);

  SuperpixelPartition part;
  part.width = w;
  part.height = h;
  int count = 0;
  part.labels = connected_components(seeds, &count);
  if (count == 0) {
    part.count = 1;
    std::fill(part.labels.begin(), part.labels.end(), 0);
    return part;
  }
  part.count = count;

  // Number seeds by ascending size (stable on first pixel), so a ridge pixel
  // reached at equal cost from two sides joins the smaller region.
  {
    std::vector<std::size_t> size(static_cast<std::size_t>(count), 0);
    for (int l : part.labels) {
      if (l >= 0) ++size[static_cast<std::size_t>(l)];
    }
    std::vector<int> order(static_cast<std::size_t>(count));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return size[static_cast<std::size_t>(a)] < size[static_cast<std::size_t>(b)];
    });
    std::vector<int> rank(static_cast<std::size_t>(count));
    for (int r = 0; r < count; ++r) rank[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])] = r;
    for (int& l : part.labels) {
      if (l >= 0) l = rank[static_cast<std::size_t>(l)];
    }
  }

  // (max strength crossed, region, pixel); smallest popped first.
  using Key = std::tuple<double, int, std::size_t>;
  std::priority_queue<Key, std::vector<Key>, std::greater<>> queue;
  auto push_neighbors = [&](std::size_t i, double level, int region) {
    const int x = static_cast<int>(i % w);
    const int y = static_cast<int>(i / w);
    const int nx[4] = {x + 1, x - 1, x, x};
    const int ny[4] = {y, y, y + 1, y - 1};
    for (int k = 0; k < 4; ++k) {
      if (nx[k] < 0 || ny[k] < 0 || nx[k] >= w || ny[k] >= h) continue;
      const std::size_t j = static_cast<std::size_t>(ny[k]) * w + nx[k];
      if (part.labels[j] < 0) queue.emplace(std::max(level, contours[j]), region, j);
    }
  };
  for (std::size_t i = 0; i < part.labels.size(); ++i) {
    if (part.labels[i] >= 0) push_neighbors(i, 0.0, part.labels[i]);
  }
  while (!queue.empty()) {
    const auto [level, region, i] = queue.top();
    queue.pop();
    if (part.labels[i] >= 0) continue;
    part.labels[i] = region;
    push_neighbors(i, level, region);
  }
  return part;
}

Mask snap_mask(const ProbMap& fg, const SuperpixelPartition& part, double majority) {
  if (fg.width() != part.width || fg.height() != part.height) throw Error("snap: probability map and partition dimensions differ");
  if (!(majority > 0.0 && majority <= 1.0)) throw Error("snap: majority must lie in (0,1]");
  std::vector<double> sum(static_cast<std::size_t>(part.count), 0.0);
  std::vector<std::size_t> n(static_cast<std::size_t>(part.count), 0);
  for (std::size_t i = 0; i < part.labels.size(); ++i) {
    sum[static_cast<std::size_t>(part.labels[i])] += fg[i];
    ++n[static_cast<std::size_t>(part.labels[i])];
  }
  std::vector<char> on(static_cast<std::size_t>(part.count), 0);
  for (std::size_t r = 0; r < on.size(); ++r) on[r] = n[r] > 0 && sum[r] / static_cast<double>(n[r]) >= majority;
  Mask out(part.width, part.height);
  for (std::size_t i = 0; i < part.labels.size(); ++i) out.set(i, on[static_cast<std::size_t>(part.labels[i])] != 0);
  return out;
}

Mask region_union(const SuperpixelPartition& part, std::span<const int> regions) {
  std::vector<char> on(static_cast<std::size_t>(part.count), 0);
  for (int r : regions) on.at(static_cast<std::size_t>(r)) = 1;
  Mask out(part.width, part.height);
  for (std::size_t i = 0; i < part.labels.size(); ++i) out.set(i, on[static_cast<std::size_t>(part.labels[i])] != 0);
  return out;
}

}  // namespace osvos::snap
