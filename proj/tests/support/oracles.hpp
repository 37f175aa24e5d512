#pragma once

// Slow definitional oracles, independent of the library implementations.
// Probabilities come from a plain exp/sum softmax; the Lovasz extension is
// evaluated through its threshold integral with explicit set counting; HD95
// uses all-pairs distances.

#include <algorithm>
#include <climits>
#include <cmath>
#include <numeric>
#include <optional>
#include <set>
#include <vector>

#include "psfed/field.hpp"
#include "psfed/labelspace.hpp"
#include "psfed/losses.hpp"
#include "psfed/metrics.hpp"

namespace oracles {

using psfed::Field;
using psfed::LabelImage;
using psfed::LogitField;

// per-pixel probabilities as vectors, plain exponentials
inline std::vector<std::vector<double>> probs_of(const LogitField& logits) {
  const std::size_t pixels = logits.pixel_count();
  std::vector<std::vector<double>> p(pixels, std::vector<double>(logits.channels));
  for (std::size_t i = 0; i < pixels; ++i) {
    const double* f = logits.data.data() + i * logits.channels;
    double z = 0.0;
    for (int c = 0; c < logits.channels; ++c) z += std::exp(f[c]);
    for (int c = 0; c < logits.channels; ++c) p[i][c] = std::exp(f[c]) / z;
  }
  return p;
}

inline std::vector<std::vector<double>> marginal_probs(
    const LogitField& logits, const psfed::PartialScheme& scheme) {
  const auto p = probs_of(logits);
  std::vector<std::vector<double>> q(p.size(),
                                     std::vector<double>(scheme.num_merged(), 0.0));
  for (std::size_t i = 0; i < p.size(); ++i)
    for (int c = 0; c < scheme.num_full(); ++c)
      q[i][scheme.full_to_merged[c]] += p[i][c];
  return q;
}

inline double dice_value(const std::vector<std::vector<double>>& prob,
                         const std::vector<int>& target, int classes,
                         double smooth) {
  double value = 0.0;
  for (int m = 0; m < classes; ++m) {
    double num = 0.0, ysum = 0.0, psum = 0.0;
    for (std::size_t i = 0; i < prob.size(); ++i) {
      if (target[i] == m) {
        num += prob[i][m];
        ysum += 1.0;
      }
      psum += prob[i][m];
    }
    value += 1.0 - 2.0 * num / (ysum + psum + smooth);
  }
  return value;
}

inline double ce_value(const std::vector<std::vector<double>>& prob,
                       const std::vector<int>& target) {
  double acc = 0.0;
  for (std::size_t i = 0; i < prob.size(); ++i)
    acc += -std::log(prob[i][static_cast<std::size_t>(target[i])]);
  return acc / static_cast<double>(prob.size());
}

inline double focal_value(const std::vector<std::vector<double>>& prob,
                          const std::vector<int>& target, double gamma) {
  double acc = 0.0;
  for (std::size_t i = 0; i < prob.size(); ++i) {
    const double q = prob[i][static_cast<std::size_t>(target[i])];
    acc += -std::pow(1.0 - q, gamma) * std::log(q);
  }
  return acc / static_cast<double>(prob.size());
}

inline double topk_value(const std::vector<std::vector<double>>& prob,
                         const std::vector<int>& target, double fraction) {
  std::vector<double> ce(prob.size());
  for (std::size_t i = 0; i < prob.size(); ++i)
    ce[i] = -std::log(prob[i][static_cast<std::size_t>(target[i])]);
  std::sort(ce.begin(), ce.end(), std::greater<>());
  std::size_t k = static_cast<std::size_t>(
      std::ceil(fraction * static_cast<double>(ce.size())));
  k = std::clamp<std::size_t>(k, 1, ce.size());
  return std::accumulate(ce.begin(), ce.begin() + static_cast<long>(k), 0.0) /
         static_cast<double>(k);
}

// Lovasz extension by its threshold integral: J(e) = sum_k
// (e_(k) - e_(k+1)) * Delta(top-k set), Delta computed by counting.
inline double lovasz_extension(const std::vector<double>& errors,
                               const std::vector<bool>& gt) {
  const std::size_t n = errors.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return errors[a] > errors[b]; });

  std::size_t g_total = 0;
  for (bool b : gt) g_total += b ? 1 : 0;

  auto delta_of_topk = [&](std::size_t k) {
    // Delta(M) = 1 - |G \ M| / |G u M|
    std::size_t g_minus_m = g_total, g_union_m = g_total;
    for (std::size_t r = 0; r < k; ++r) {
      if (gt[order[r]])
        g_minus_m -= 1;
      else
        g_union_m += 1;
    }
    if (g_union_m == 0) return 0.0;
    return 1.0 - static_cast<double>(g_minus_m) / static_cast<double>(g_union_m);
  };

  double value = 0.0;
  for (std::size_t k = 1; k <= n; ++k) {
    const double e_k = errors[order[k - 1]];
    const double e_next = k < n ? errors[order[k]] : 0.0;
    value += (e_k - e_next) * delta_of_topk(k);
  }
  return value;
}

inline double marginal_lovasz_value(const std::vector<std::vector<double>>& q,
                                    const std::vector<int>& target, int classes) {
  double value = 0.0;
  int present = 0;
  for (int m = 0; m < classes; ++m) {
    bool any = false;
    for (int t : target) any = any || t == m;
    if (!any) continue;
    present++;
    std::vector<double> errors(q.size());
    std::vector<bool> gt(q.size());
    for (std::size_t i = 0; i < q.size(); ++i) {
      gt[i] = target[i] == m;
      errors[i] = gt[i] ? 1.0 - q[i][m] : q[i][m];
    }
    value += lovasz_extension(errors, gt);
  }
  return present > 0 ? value / present : 0.0;
}

inline double exclusion_dice_value(const std::vector<std::vector<double>>& p,
                                   const std::vector<std::vector<double>>& excl,
                                   int classes, double smooth) {
  double value = 0.0;
  for (int c = 0; c < classes; ++c) {
    double num = 0.0, esum = 0.0, psum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      num += excl[i][c] * p[i][c];
      esum += excl[i][c];
      psum += p[i][c];
    }
    value += 2.0 * num / (esum + psum + smooth);
  }
  return value;
}

inline double exclusion_ce_value(const std::vector<std::vector<double>>& p,
                                 const std::vector<std::vector<double>>& excl,
                                 int classes, double eps) {
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    for (int c = 0; c < classes; ++c)
      acc += excl[i][c] * std::log(p[i][c] + eps);
  return acc / static_cast<double>(p.size());
}

inline double exclusion_focal_value(const std::vector<std::vector<double>>& p,
                                    const std::vector<std::vector<double>>& excl,
                                    int classes, double eps, double gamma) {
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    for (int c = 0; c < classes; ++c)
      acc += excl[i][c] * std::pow(1.0 - p[i][c], gamma) * std::log(p[i][c] + eps);
  return acc / static_cast<double>(p.size());
}

inline double exclusion_topk_value(const std::vector<std::vector<double>>& p,
                                   const std::vector<std::vector<double>>& excl,
                                   int classes, double eps, double fraction) {
  std::vector<double> per_pixel(p.size(), 0.0);
  for (std::size_t i = 0; i < p.size(); ++i)
    for (int c = 0; c < classes; ++c)
      per_pixel[i] += excl[i][c] * std::log(p[i][c] + eps);
  std::sort(per_pixel.begin(), per_pixel.end(), std::greater<>());
  std::size_t k = static_cast<std::size_t>(
      std::ceil(fraction * static_cast<double>(per_pixel.size())));
  k = std::clamp<std::size_t>(k, 1, per_pixel.size());
  return std::accumulate(per_pixel.begin(), per_pixel.begin() + static_cast<long>(k),
                         0.0) /
         static_cast<double>(k);
}

inline double exclusion_lovasz_value(const std::vector<std::vector<double>>& p,
                                     const std::vector<std::vector<double>>& excl,
                                     int classes) {
  double value = 0.0;
  int active = 0;
  for (int c = 0; c < classes; ++c) {
    std::vector<double> errors;
    for (std::size_t i = 0; i < p.size(); ++i)
      if (excl[i][c] != 0.0) errors.push_back(p[i][c]);
    if (errors.empty()) continue;
    active++;
    value += lovasz_extension(errors, std::vector<bool>(errors.size(), true));
  }
  return active > 0 ? value / active : 0.0;
}

// exclusion field as per-pixel vectors, straight from the definitions
inline std::vector<std::vector<double>> exclusion_field_of(
    const LabelImage& merged_target, const psfed::PartialScheme& scheme,
    const psfed::ExclusionSets& excl) {
  const int n = scheme.num_full();
  std::vector<std::vector<double>> out(merged_target.size(),
                                       std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < merged_target.size(); ++i) {
    const auto& phi = scheme.merged_classes[merged_target.labels[i]];
    if (phi.size() != 1) continue;
    const int full = phi[0];
    for (int c = 0; c < n; ++c)
      for (int member : excl.per_class[c])
        if (member == full) out[i][c] = 1.0;
  }
  return out;
}

// all-pairs directed HD95
inline std::optional<double> hd95_all_pairs(const psfed::BinaryMask& a,
                                            const psfed::BinaryMask& b) {
  if (a.empty_mask() || b.empty_mask()) return std::nullopt;
  const auto ba = psfed::boundary_pixels(a);
  const auto bb = psfed::boundary_pixels(b);
  auto directed = [](const std::vector<std::pair<int, int>>& from,
                     const std::vector<std::pair<int, int>>& to) {
    std::vector<double> dists;
    dists.reserve(from.size());
    for (const auto& [fy, fx] : from) {
      long long best = LLONG_MAX;
      for (const auto& [ty, tx] : to) {
        const long long dy = fy - ty, dx = fx - tx;
        best = std::min(best, dy * dy + dx * dx);
      }
      dists.push_back(std::sqrt(static_cast<double>(best)));
    }
    std::sort(dists.begin(), dists.end());
    std::size_t rank = static_cast<std::size_t>(
        std::ceil(0.95 * static_cast<double>(dists.size())));
    rank = std::clamp<std::size_t>(rank, 1, dists.size());
    return dists[rank - 1];
  };
  return std::max(directed(ba, bb), directed(bb, ba));
}

}  // namespace oracles
