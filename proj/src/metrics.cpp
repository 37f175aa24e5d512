#include "psfed/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace psfed {

BinaryMask class_mask(const LabelImage& labels, int cls) {
  BinaryMask m(labels.height, labels.width);
  for (std::size_t i = 0; i < labels.labels.size(); ++i)
    m.bits[i] = labels.labels[i] == cls ? 1 : 0;
  return m;
}

double dice(const BinaryMask& pred, const BinaryMask& gt) {
  if (pred.height != gt.height || pred.width != gt.width)
    throw std::invalid_argument("dice: shape mismatch");
  std::size_t np = 0, ng = 0, inter = 0;
  for (std::size_t i = 0; i < pred.bits.size(); ++i) {
    np += pred.bits[i] ? 1 : 0;
    ng += gt.bits[i] ? 1 : 0;
    inter += (pred.bits[i] && gt.bits[i]) ? 1 : 0;
  }
  if (np + ng == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(np + ng);
}

std::vector<std::pair<int, int>> boundary_pixels(const BinaryMask& mask) {
  std::vector<std::pair<int, int>> out;
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x) {
      if (!mask.at(y, x)) continue;
      const bool inner = y > 0 && mask.at(y - 1, x) && y < mask.height - 1 &&
                         mask.at(y + 1, x) && x > 0 && mask.at(y, x - 1) &&
                         x < mask.width - 1 && mask.at(y, x + 1);
      if (!inner) out.emplace_back(y, x);
    }
  return out;
}

namespace {

constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max() / 4;

// 1D squared-distance transform (lower envelope of parabolas) over the
// finite cells of f. Inputs and outputs are integer squared distances; the
// envelope bookkeeping in doubles is exact for grid-sized values because
// parabola intersections are rationals with small denominators.
void edt_1d(const std::vector<std::int64_t>& f, std::vector<std::int64_t>& d) {
  const int n = static_cast<int>(f.size());
  std::vector<int> sites;
  sites.reserve(n);
  for (int q = 0; q < n; ++q)
    if (f[q] < kInf) sites.push_back(q);
  if (sites.empty()) {
    d.assign(n, kInf);
    return;
  }

  auto intersect = [&](int q, int p) {
    return (static_cast<double>(f[q] - f[p]) +
            static_cast<double>(static_cast<std::int64_t>(q) * q -
                                static_cast<std::int64_t>(p) * p)) /
           (2.0 * (q - p));
  };

  std::vector<int> v(sites.size());
  std::vector<double> z(sites.size() + 1);
  int k = 0;
  v[0] = sites[0];
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  for (std::size_t si = 1; si < sites.size(); ++si) {
    const int q = sites[si];
    double s = intersect(q, v[k]);
    while (s <= z[k]) {
      --k;
      s = intersect(q, v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }

  d.assign(n, 0);
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[j + 1] < q) j++;
    d[q] = static_cast<std::int64_t>(q - v[j]) * (q - v[j]) + f[v[j]];
  }
}

// Exact 2D squared Euclidean distance transform to the given seed pixels.
std::vector<std::int64_t> edt_2d(int h, int w,
                                 const std::vector<std::pair<int, int>>& seeds) {
  std::vector<std::int64_t> dist(static_cast<std::size_t>(h) * w, kInf);
  for (const auto& [y, x] : seeds) dist[static_cast<std::size_t>(y) * w + x] = 0;

  // columns, then rows
  {
    std::vector<std::int64_t> f(h), d(h);
    for (int x = 0; x < w; ++x) {
      for (int y = 0; y < h; ++y) f[y] = dist[static_cast<std::size_t>(y) * w + x];
      edt_1d(f, d);
      for (int y = 0; y < h; ++y) dist[static_cast<std::size_t>(y) * w + x] = d[y];
    }
  }
  {
    std::vector<std::int64_t> f(w), d(w);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) f[x] = dist[static_cast<std::size_t>(y) * w + x];
      edt_1d(f, d);
      for (int x = 0; x < w; ++x) dist[static_cast<std::size_t>(y) * w + x] = d[x];
    }
  }
  return dist;
}

// Nearest-rank percentile of an ascending-sorted list.
double percentile_nearest_rank(std::vector<double>& values, double pct) {
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  std::size_t rank = static_cast<std::size_t>(
      std::ceil(pct / 100.0 * static_cast<double>(n)));
  rank = std::clamp<std::size_t>(rank, 1, n);
  return values[rank - 1];
}

}  // namespace

std::optional<double> hd95(const BinaryMask& pred, const BinaryMask& gt) {
  if (pred.height != gt.height || pred.width != gt.width)
    throw std::invalid_argument("hd95: shape mismatch");
  if (pred.empty_mask() || gt.empty_mask()) return std::nullopt;

  const auto bp = boundary_pixels(pred);
  const auto bg = boundary_pixels(gt);
  const int h = pred.height, w = pred.width;
  const auto dist_to_g = edt_2d(h, w, bg);
  const auto dist_to_p = edt_2d(h, w, bp);

  std::vector<double> pg, gp;
  pg.reserve(bp.size());
  gp.reserve(bg.size());
  for (const auto& [y, x] : bp)
    pg.push_back(std::sqrt(static_cast<double>(dist_to_g[static_cast<std::size_t>(y) * w + x])));
  for (const auto& [y, x] : bg)
    gp.push_back(std::sqrt(static_cast<double>(dist_to_p[static_cast<std::size_t>(y) * w + x])));

  return std::max(percentile_nearest_rank(pg, 95.0),
                  percentile_nearest_rank(gp, 95.0));
}

}  // namespace psfed
