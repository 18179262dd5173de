#pragma once

// Brute-force graph segmentation reference: replays the sorted-edge merge
// predicate one edge at a time on an explicit label array, recomputing
// component membership, size and internal difference by full scans.

#include <algorithm>
#include <cmath>
#include <tuple>
#include <vector>

#include "rmae/image.hpp"
#include "rmae/rng.hpp"

namespace rmae_test {

struct OracleEdge {
  int a, b;
  double w;
};

// No smoothing: callers pass sigma = 0 to the implementation under test.
inline std::vector<int> fh_oracle(const rmae::Image& img, double scale, int min_size) {
  const int w = img.width, h = img.height, n = w * h;
  std::vector<OracleEdge> edges;
  auto weight = [&](int x1, int y1, int x2, int y2) {
    double s = 0;
    for (int c = 0; c < img.channels; ++c) {
      const double d = 255.0 * (static_cast<double>(img.at(x1, y1, c)) - img.at(x2, y2, c));
      s += d * d;
    }
    return std::sqrt(s);
  };
  const int dx[4] = {1, 0, 1, 1}, dy[4] = {0, 1, 1, -1};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int d = 0; d < 4; ++d) {
        const int x2 = x + dx[d], y2 = y + dy[d];
        if (x2 < 0 || x2 >= w || y2 < 0 || y2 >= h) continue;
        edges.push_back({y * w + x, y2 * w + x2, weight(x, y, x2, y2)});
      }
  std::sort(edges.begin(), edges.end(), [](const OracleEdge& l, const OracleEdge& r) {
    return std::tie(l.w, l.a, l.b) < std::tie(r.w, r.a, r.b);
  });

  std::vector<int> label(n);
  for (int i = 0; i < n; ++i) label[i] = i;
  std::vector<double> internal(n, 0.0);  // indexed by label id
  auto size_of = [&](int id) { return static_cast<int>(std::count(label.begin(), label.end(), id)); };
  auto merge = [&](int keep, int gone, double w) {
    for (int& l : label)
      if (l == gone) l = keep;
    internal[keep] = std::max({internal[keep], internal[gone], w});
  };
  for (const auto& e : edges) {
    const int ca = label[e.a], cb = label[e.b];
    if (ca == cb) continue;
    const double ta = internal[ca] + scale / size_of(ca);
    const double tb = internal[cb] + scale / size_of(cb);
    if (e.w <= std::min(ta, tb)) merge(ca, cb, e.w);
  }
  for (const auto& e : edges) {
    const int ca = label[e.a], cb = label[e.b];
    if (ca != cb && (size_of(ca) < min_size || size_of(cb) < min_size)) merge(ca, cb, e.w);
  }
  // Contiguous ids in order of first appearance.
  std::vector<int> remap(n, -1), out(n);
  int next = 0;
  for (int i = 0; i < n; ++i) {
    if (remap[label[i]] < 0) remap[label[i]] = next++;
    out[i] = remap[label[i]];
  }
  return out;
}

inline rmae::Image two_color_image(int w, int h, rmae::Rng& rng) {
  float pal[2][3];
  for (auto& c : pal)
    for (float& v : c) v = static_cast<float>(rng.below(256)) / 255.0f;
  rmae::Image img(w, h, 3);
  const int mode = rng.below(3);
  const double density = rng.uniform(0.1, 0.9);
  const int cx = rng.below(w), cy = rng.below(h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      bool second = false;
      if (mode == 0) second = rng.uniform() < density;       // salt and pepper
      if (mode == 1) second = x >= cx;                       // vertical split
      if (mode == 2) second = (x - cx) * (x - cx) + (y - cy) * (y - cy) < w;  // blob
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = pal[second][c];
    }
  return img;
}

}  // namespace rmae_test
