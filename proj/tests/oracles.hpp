#pragma once

// Brute-force reference implementations, deliberately written along different
// algorithmic routes than the library (plain loops, O(n^2) rank counting,
// two-pass statistics). The test suites compare the library against these.

#include <cmath>
#include <map>
#include <vector>

#include "erank/earr.hpp"
#include "erank/image.hpp"
#include "erank/patch_baseline.hpp"
#include "erank/scene.hpp"
#include "erank/stationary.hpp"

namespace oracle {

using namespace erank;

inline double psnr_bruteforce(const Image& a, const Image& b, const BinaryMask* region) {
  double acc = 0.0;
  long n = 0;
  for (int y = 0; y < a.height; ++y)
    for (int x = 0; x < a.width; ++x) {
      if (region != nullptr && !region->at(x, y)) continue;
      for (int c = 0; c < 3; ++c) {
        const double d = a.rgb(c, a.index(x, y)) - b.rgb(c, b.index(x, y));
        acc += d * d;
      }
      ++n;
    }
  double mse = acc / (3.0 * n);
  if (mse < 1e-10) mse = 1e-10;
  return 10.0 * std::log10(1.0 / mse);
}

inline double iou_bruteforce(const BinaryMask& a, const BinaryMask& b) {
  long inter = 0, uni = 0;
  for (int y = 0; y < a.height; ++y)
    for (int x = 0; x < a.width; ++x) {
      if (a.at(x, y) && b.at(x, y)) ++inter;
      if (a.at(x, y) || b.at(x, y)) ++uni;
    }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / uni;
}

inline BinaryMask dilate3x3_bruteforce(const BinaryMask& m) {
  BinaryMask out(m.width, m.height, false);
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) {
      bool any = false;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int nx = x + dx, ny = y + dy;
          if (nx < 0 || ny < 0 || nx >= m.width || ny >= m.height) continue;
          if (m.at(nx, ny)) any = true;
        }
      out.set(x, y, any);
    }
  return out;
}

// O(n^2) midrank: count strictly-smaller and equal values per element.
inline VectorXd rank_normalize_bruteforce(const VectorXd& residuals) {
  const Eigen::Index n = residuals.size();
  VectorXd out(n);
  if (n == 1) {
    out(0) = 0.0;
    return out;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    long less = 0, equal = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (residuals(j) < residuals(i)) ++less;
      else if (residuals(j) == residuals(i)) ++equal;
    }
    const double midrank = less + 0.5 * (equal + 1);  // mean of ordinals less+1..less+equal
    out(i) = (midrank - 1.0) / static_cast<double>(n - 1);
  }
  return out;
}

// Per-(patch, entity) mean ranks via a flat map, iterating batch pixels once.
inline std::map<std::pair<int, int>, std::pair<double, long>> cluster_means_bruteforce(
    const VectorXd& ranks, const std::vector<EntityMap>& maps, const PatchBatch& batch) {
  std::map<std::pair<int, int>, std::pair<double, long>> acc;
  const int k = batch.k;
  for (std::size_t q = 0; q < batch.patches.size(); ++q) {
    const auto& p = batch.patches[q];
    for (int oy = 0; oy < k; ++oy)
      for (int ox = 0; ox < k; ++ox) {
        const std::int32_t id = maps[static_cast<std::size_t>(p.frame)].at(p.x + ox, p.y + oy);
        if (id == kUnassignedId) continue;
        auto& [sum, count] = acc[{static_cast<int>(q), id}];
        sum += ranks(static_cast<Eigen::Index>(q) * k * k + oy * k + ox);
        ++count;
      }
  }
  return acc;
}

// Monolithic re-implementation of the whole labeling pipeline: residuals in,
// D out, no intermediate types.
inline ArrayXb earr_label_bruteforce(const VectorXd& residuals,
                                     const std::vector<EntityMap>& maps,
                                     const PatchBatch& batch,
                                     const std::map<int, int>& stuff_flags, double threshold,
                                     bool dilation) {
  const Eigen::Index n = residuals.size();
  const VectorXd ranks = rank_normalize_bruteforce(residuals);
  const int k = batch.k;
  ArrayXb d = ArrayXb::Constant(n, true);
  for (std::size_t q = 0; q < batch.patches.size(); ++q) {
    const auto& p = batch.patches[q];
    const EntityMap& emap = maps[static_cast<std::size_t>(p.frame)];
    // mean rank per entity in this patch
    std::map<int, std::pair<double, long>> acc;
    for (int oy = 0; oy < k; ++oy)
      for (int ox = 0; ox < k; ++ox) {
        const std::int32_t id = emap.at(p.x + ox, p.y + oy);
        if (id == kUnassignedId) continue;
        acc[id].first += ranks(static_cast<Eigen::Index>(q) * k * k + oy * k + ox);
        acc[id].second += 1;
      }
    for (const auto& [id, sc] : acc) {
      const double mean = sc.first / sc.second;
      const bool stuff = stuff_flags.at(id) != 0;
      if (stuff || mean <= threshold) continue;
      for (int oy = 0; oy < k; ++oy)
        for (int ox = 0; ox < k; ++ox)
          if (emap.at(p.x + ox, p.y + oy) == id)
            d(static_cast<Eigen::Index>(q) * k * k + oy * k + ox) = false;
    }
  }
  if (dilation) {
    ArrayXb grown = d;
    for (std::size_t q = 0; q < batch.patches.size(); ++q) {
      const Eigen::Index base = static_cast<Eigen::Index>(q) * k * k;
      for (int oy = 0; oy < k; ++oy)
        for (int ox = 0; ox < k; ++ox) {
          bool excluded_near = false;
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
              const int nx = ox + dx, ny = oy + dy;
              if (nx < 0 || ny < 0 || nx >= k || ny >= k) continue;
              if (!d(base + ny * k + nx)) excluded_near = true;
            }
          if (excluded_near) grown(base + oy * k + ox) = false;
        }
    }
    d = grown;
  }
  return d;
}

// Direct three-stage reimplementation of the patch baseline.
inline ArrayXb patch_weights_bruteforce(const ArrayXd& field, int width, int height,
                                        const PatchBaselineConfig& cfg) {
  const Eigen::Index n = field.size();
  // quantile by counting: smallest value v such that #(field <= v) >= ceil(q*n)
  std::vector<double> vals(field.data(), field.data() + n);
  std::sort(vals.begin(), vals.end());
  const long need = static_cast<long>(std::ceil(cfg.inlier_quantile * static_cast<double>(n)));
  const double cut = vals[static_cast<std::size_t>(std::max<long>(1, std::min<long>(need, n)) - 1)];

  auto idx = [&](int x, int y) { return static_cast<Eigen::Index>(y) * width + x; };
  std::vector<int> s1(static_cast<std::size_t>(n));
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) s1[static_cast<std::size_t>(idx(x, y))] = field(idx(x, y)) <= cut;

  std::vector<int> s2(static_cast<std::size_t>(n), 0);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      if (!s1[static_cast<std::size_t>(idx(x, y))]) continue;
      int inl = 0, tot = 0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int nx = x + dx, ny = y + dy;
          if (nx < 0 || ny < 0 || nx >= width || ny >= height) continue;
          ++tot;
          inl += s1[static_cast<std::size_t>(idx(nx, ny))];
        }
      s2[static_cast<std::size_t>(idx(x, y))] = inl >= cfg.smoothing_majority * tot;
    }

  ArrayXb out(n);
  for (int py = 0; py < height; py += 8)
    for (int px = 0; px < width; px += 8) {
      int inl = 0, tot = 0;
      for (int y = py - 4; y < py + 12; ++y)
        for (int x = px - 4; x < px + 12; ++x) {
          if (x < 0 || y < 0 || x >= width || y >= height) continue;
          ++tot;
          inl += s2[static_cast<std::size_t>(idx(x, y))];
        }
      const bool keep = inl >= 0.5 * tot;
      for (int y = py; y < py + 8; ++y)
        for (int x = px; x < px + 8; ++x) out(idx(x, y)) = keep;
    }
  return out;
}

// Two-pass feature statistics over an explicit pixel list.
inline FeatureVec features_bruteforce(const Image& frame, const EntityMap& emap, int entity) {
  std::vector<std::pair<int, int>> pixels;
  for (int y = 0; y < emap.height; ++y)
    for (int x = 0; x < emap.width; ++x)
      if (emap.at(x, y) == entity) pixels.emplace_back(x, y);

  FeatureVec f = FeatureVec::Zero();
  const double n = static_cast<double>(pixels.size());
  double mean[3] = {0, 0, 0};
  for (const auto& [x, y] : pixels)
    for (int c = 0; c < 3; ++c) mean[c] += frame.rgb(c, frame.index(x, y)) / n;
  double var[3] = {0, 0, 0};
  for (const auto& [x, y] : pixels)
    for (int c = 0; c < 3; ++c) {
      const double d = frame.rgb(c, frame.index(x, y)) - mean[c];
      var[c] += d * d / n;
    }
  double cx = 0, cy = 0;
  int minx = emap.width, maxx = -1, miny = emap.height, maxy = -1;
  for (const auto& [x, y] : pixels) {
    cx += x / n;
    cy += y / n;
    minx = std::min(minx, x);
    maxx = std::max(maxx, x);
    miny = std::min(miny, y);
    maxy = std::max(maxy, y);
  }
  auto luma = [&](int x, int y) {
    const auto col = frame.rgb.col(frame.index(x, y));
    return 0.299 * col(0) + 0.587 * col(1) + 0.114 * col(2);
  };
  double grad = 0;
  for (const auto& [x, y] : pixels) {
    double gx = 0, gy = 0;
    if (x + 1 < emap.width && emap.at(x + 1, y) == entity) gx = luma(x + 1, y) - luma(x, y);
    if (y + 1 < emap.height && emap.at(x, y + 1) == entity) gy = luma(x, y + 1) - luma(x, y);
    grad += std::sqrt(gx * gx + gy * gy) / n;
  }
  for (int c = 0; c < 3; ++c) {
    f(c) = mean[c];
    f(3 + c) = std::sqrt(std::max(0.0, var[c]));
  }
  f(6) = emap.width > 1 ? cx / (emap.width - 1) : 0.5;
  f(7) = emap.height > 1 ? cy / (emap.height - 1) : 0.5;
  f(8) = std::log(n / (static_cast<double>(emap.width) * emap.height));
  f(9) = grad;
  const double bw = maxx - minx + 1, bh = maxy - miny + 1;
  f(10) = std::min(bw, bh) / std::max(bw, bh);
  f(11) = n / (bw * bh);
  return f;
}

// Rasterizes a stored mover trajectory for one frame, independently of the
// generator's painting code.
inline BinaryMask rasterize_track(const MoverTrack& t, int frame, int width, int height) {
  BinaryMask m(width, height, false);
  const int x0 = t.positions[static_cast<std::size_t>(frame)][0];
  const int y0 = t.positions[static_cast<std::size_t>(frame)][1];
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      bool inside = false;
      if (t.shape == ShapeKind::kRect) {
        inside = x >= x0 && x < x0 + t.size && y >= y0 && y < y0 + t.size;
      } else {
        const double ccx = x0 + (t.size - 1) / 2.0, ccy = y0 + (t.size - 1) / 2.0;
        const double r = t.size / 2.0;
        inside = (x - ccx) * (x - ccx) + (y - ccy) * (y - ccy) <= r * r;
      }
      if (inside) m.set(x, y, true);
    }
  return m;
}

}  // namespace oracle
