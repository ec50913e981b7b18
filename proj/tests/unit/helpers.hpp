#pragma once

#include <cstdint>

#include "osvos/maskcore.hpp"
#include "osvos/rng.hpp"

namespace testutil {

inline osvos::Mask random_mask(osvos::SplitMix64& rng, int w, int h, double density) {
  osvos::Mask m(w, h);
  for (std::size_t i = 0; i < m.size(); ++i) m.set(i, rng.uniform() < density);
  return m;
}

inline osvos::Mask rect(int w, int h, int x0, int y0, int x1, int y1) {
  osvos::Mask m(w, h);
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) m.set(x, y, true);
  }
  return m;
}

}  // namespace testutil
