#include "psfed/losses.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace psfed {

namespace {

constexpr double kTiny = DBL_MIN;  // log argument floor; keeps -log finite

void check_field(const Field& f, const char* who) {
  if (f.height <= 0 || f.width <= 0 || f.channels <= 0)
    throw std::invalid_argument(std::string(who) + ": empty field");
}

void check_target(const LabelImage& t, const Field& logits, int num_labels,
                  const char* who) {
  if (t.height != logits.height || t.width != logits.width)
    throw std::invalid_argument(std::string(who) + ": target shape mismatch");
  for (std::uint8_t v : t.labels)
    if (v >= num_labels)
      throw std::invalid_argument(std::string(who) + ": target label out of range");
}

// dL/dlogits from dL/dp through the per-pixel softmax Jacobian.
Field softmax_backprop(const ProbField& p, const Field& dldp) {
  Field out(p.height, p.width, p.channels);
  const int c = p.channels;
  for (int y = 0; y < p.height; ++y) {
    for (int x = 0; x < p.width; ++x) {
      const double* pp = p.px(y, x);
      const double* gp = dldp.px(y, x);
      double s = 0.0;
      for (int k = 0; k < c; ++k) s += pp[k] * gp[k];
      double* op = out.px(y, x);
      for (int k = 0; k < c; ++k) op[k] = pp[k] * (gp[k] - s);
    }
  }
  return out;
}

// dL/dp from dL/dq: marginalization is linear, each full class feeds its
// merged class.
Field expand_marginal_grad(const Field& dldq, const PartialScheme& scheme) {
  const int n = scheme.num_full();
  Field out(dldq.height, dldq.width, n);
  for (int y = 0; y < dldq.height; ++y) {
    for (int x = 0; x < dldq.width; ++x) {
      const double* gq = dldq.px(y, x);
      double* gp = out.px(y, x);
      for (int c = 0; c < n; ++c) gp[c] = gq[scheme.full_to_merged[c]];
    }
  }
  return out;
}

struct MarginalCtx {
  ProbField p;  // over N
  ProbField q;  // over M
};

MarginalCtx marginal_ctx(const LogitField& logits, const PartialScheme& scheme,
                         const char* who) {
  check_field(logits, who);
  if (logits.channels != scheme.num_full())
    throw std::invalid_argument(std::string(who) + ": channel/scheme mismatch");
  MarginalCtx ctx;
  ctx.p = softmax(logits);
  ctx.q = marginalize(ctx.p, scheme);
  return ctx;
}

LossResult finish_marginal(const MarginalCtx& ctx, const PartialScheme& scheme,
                           double value, const Field& dldq) {
  LossResult r;
  r.value = value;
  r.grad = softmax_backprop(ctx.p, expand_marginal_grad(dldq, scheme));
  return r;
}

void check_exclusion_field(const LogitField& logits, const Field& excl,
                           const char* who) {
  check_field(logits, who);
  if (!excl.same_shape(logits))
    throw std::invalid_argument(std::string(who) + ": exclusion field shape mismatch");
}

// Jaccard-extension gradient for a descending-sorted 0/1 ground-truth vector:
// deltas of 1 - |G \ M_k| / |G u M_k| over growing prefixes M_k.
std::vector<double> lovasz_jaccard_deltas(const std::vector<double>& sorted_gt) {
  const std::size_t n = sorted_gt.size();
  const double gts = std::accumulate(sorted_gt.begin(), sorted_gt.end(), 0.0);
  std::vector<double> deltas(n);
  double cum_gt = 0.0, cum_not = 0.0, prev = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    cum_gt += sorted_gt[k];
    cum_not += 1.0 - sorted_gt[k];
    const double jac = 1.0 - (gts - cum_gt) / (gts + cum_not);
    deltas[k] = jac - prev;
    prev = jac;
  }
  return deltas;
}

// Indices sorted by value descending, ties by index ascending.
std::vector<std::size_t> order_desc(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return v[a] > v[b]; });
  return idx;
}

std::size_t topk_count(double fraction, std::size_t pixels) {
  auto k = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(pixels)));
  return std::clamp<std::size_t>(k, 1, pixels);
}

// Focal modulation g(t) = (1-t)^gamma * log(t + offset) and dg/dt, with the
// gamma == 0 case reduced to plain log so t == 1 stays finite.
double focal_log(double t, double offset, double gamma, double& dg) {
  const double lg = std::log(std::max(t + offset, kTiny));
  if (gamma == 0.0) {
    dg = 1.0 / std::max(t + offset, kTiny);
    return lg;
  }
  const double om = 1.0 - t;
  const double pow_g = std::pow(om, gamma);
  dg = -gamma * std::pow(om, gamma - 1.0) * lg + pow_g / std::max(t + offset, kTiny);
  return pow_g * lg;
}

}  // namespace

const char* loss_term_name(LossTerm t) {
  switch (t) {
    case LossTerm::marginal_dice: return "marginal_dice";
    case LossTerm::marginal_ce: return "marginal_ce";
    case LossTerm::marginal_focal: return "marginal_focal";
    case LossTerm::marginal_topk: return "marginal_topk";
    case LossTerm::marginal_lovasz: return "marginal_lovasz";
    case LossTerm::exclusion_dice: return "exclusion_dice";
    case LossTerm::exclusion_ce: return "exclusion_ce";
    case LossTerm::exclusion_focal: return "exclusion_focal";
    case LossTerm::exclusion_topk: return "exclusion_topk";
    case LossTerm::exclusion_lovasz: return "exclusion_lovasz";
  }
  return "?";
}

LossTerm loss_term_from_name(const std::string& name) {
  for (int i = 0; i <= static_cast<int>(LossTerm::exclusion_lovasz); ++i) {
    const auto t = static_cast<LossTerm>(i);
    if (name == loss_term_name(t)) return t;
  }
  throw std::invalid_argument("unknown loss term '" + name + "'");
}

void LossConfig::validate() const {
  if (gamma < 0.0) throw std::invalid_argument("LossConfig: gamma must be >= 0");
  if (!(topk_fraction > 0.0 && topk_fraction <= 1.0))
    throw std::invalid_argument("LossConfig: topk_fraction must be in (0,1]");
  if (epsilon <= 0.0) throw std::invalid_argument("LossConfig: epsilon must be > 0");
  if (dice_smooth <= 0.0)
    throw std::invalid_argument("LossConfig: dice_smooth must be > 0");
  for (const auto& [term, w] : term_weights)
    if (w < 0.0)
      throw std::invalid_argument(std::string("LossConfig: negative weight for ") +
                                  loss_term_name(term));
}

ProbField softmax(const LogitField& logits) {
  check_field(logits, "softmax");
  ProbField p(logits.height, logits.width, logits.channels);
  const int c = logits.channels;
  for (int y = 0; y < logits.height; ++y) {
    for (int x = 0; x < logits.width; ++x) {
      const double* f = logits.px(y, x);
      double* out = p.px(y, x);
      double mx = f[0];
      for (int k = 1; k < c; ++k) mx = std::max(mx, f[k]);
      double z = 0.0;
      for (int k = 0; k < c; ++k) {
        out[k] = std::exp(f[k] - mx);
        z += out[k];
      }
      for (int k = 0; k < c; ++k) out[k] /= z;
    }
  }
  return p;
}

ProbField marginalize(const ProbField& p, const PartialScheme& scheme) {
  check_field(p, "marginalize");
  if (p.channels != scheme.num_full())
    throw std::invalid_argument("marginalize: channel count != scheme classes");
  ProbField q(p.height, p.width, scheme.num_merged());
  for (int y = 0; y < p.height; ++y) {
    for (int x = 0; x < p.width; ++x) {
      const double* pp = p.px(y, x);
      double* qp = q.px(y, x);
      for (int c = 0; c < p.channels; ++c)
        qp[scheme.full_to_merged[c]] += pp[c];
    }
  }
  return q;
}

LossResult marginal_dice(const LogitField& logits, const LabelImage& target,
                         const PartialScheme& scheme, const LossConfig& cfg) {
  auto ctx = marginal_ctx(logits, scheme, "marginal_dice");
  const int m = scheme.num_merged();
  check_target(target, logits, m, "marginal_dice");

  std::vector<double> num(m, 0.0), ysum(m, 0.0), qsum(m, 0.0);
  for (int y = 0; y < logits.height; ++y)
    for (int x = 0; x < logits.width; ++x) {
      const double* qp = ctx.q.px(y, x);
      const int t = target.at(y, x);
      num[t] += qp[t];
      ysum[t] += 1.0;
      for (int k = 0; k < m; ++k) qsum[k] += qp[k];
    }

  // One batch-Dice term per merged class; smoothing in the denominator only
  // so zero overlap scores an exact 1 - 0.
  double value = 0.0;
  std::vector<double> dnum(m), dden(m);
  for (int k = 0; k < m; ++k) {
    const double den = ysum[k] + qsum[k] + cfg.dice_smooth;
    value += 1.0 - 2.0 * num[k] / den;
    dnum[k] = -2.0 / den;
    dden[k] = 2.0 * num[k] / (den * den);
  }

  Field dldq(logits.height, logits.width, m);
  for (int y = 0; y < logits.height; ++y)
    for (int x = 0; x < logits.width; ++x) {
      const int t = target.at(y, x);
      double* g = dldq.px(y, x);
      for (int k = 0; k < m; ++k) g[k] = dden[k];
      g[t] += dnum[t];
    }
  return finish_marginal(ctx, scheme, value, dldq);
}

LossResult marginal_ce(const LogitField& logits, const LabelImage& target,
                       const PartialScheme& scheme, const LossConfig& cfg) {
  (void)cfg;
  auto ctx = marginal_ctx(logits, scheme, "marginal_ce");
  const int m = scheme.num_merged();
  check_target(target, logits, m, "marginal_ce");
  const double inv_p = 1.0 / static_cast<double>(logits.pixel_count());

  double value = 0.0;
  Field dldq(logits.height, logits.width, m);
  for (int y = 0; y < logits.height; ++y)
    for (int x = 0; x < logits.width; ++x) {
      const int t = target.at(y, x);
      const double qt = std::max(ctx.q.px(y, x)[t], kTiny);
      value -= std::log(qt);
      dldq.px(y, x)[t] = -inv_p / qt;
    }
  return finish_marginal(ctx, scheme, value * inv_p, dldq);
}

LossResult marginal_focal(const LogitField& logits, const LabelImage& target,
                          const PartialScheme& scheme, const LossConfig& cfg) {
  if (cfg.gamma == 0.0) return marginal_ce(logits, target, scheme, cfg);
  auto ctx = marginal_ctx(logits, scheme, "marginal_focal");
  const int m = scheme.num_merged();
  check_target(target, logits, m, "marginal_focal");
  const double inv_p = 1.0 / static_cast<double>(logits.pixel_count());

  double value = 0.0;
  Field dldq(logits.height, logits.width, m);
  for (int y = 0; y < logits.height; ++y)
    for (int x = 0; x < logits.width; ++x) {
      const int t = target.at(y, x);
      const double qt = ctx.q.px(y, x)[t];
      // -(1-q)^gamma log q, via focal_log with zero offset
      double dg = 0.0;
      value -= focal_log(std::max(qt, kTiny), 0.0, cfg.gamma, dg);
      dldq.px(y, x)[t] = -inv_p * dg;
    }
  return finish_marginal(ctx, scheme, value * inv_p, dldq);
}

LossResult marginal_topk(const LogitField& logits, const LabelImage& target,
                         const PartialScheme& scheme, const LossConfig& cfg) {
  auto ctx = marginal_ctx(logits, scheme, "marginal_topk");
  const int m = scheme.num_merged();
  check_target(target, logits, m, "marginal_topk");
  const std::size_t pixels = logits.pixel_count();
  const int w = logits.width;

  std::vector<double> ce(pixels);
  for (int y = 0; y < logits.height; ++y)
    for (int x = 0; x < logits.width; ++x)
      ce[static_cast<std::size_t>(y) * w + x] =
          -std::log(std::max(ctx.q.px(y, x)[target.at(y, x)], kTiny));

  const auto order = order_desc(ce);
  const std::size_t k = topk_count(cfg.topk_fraction, pixels);

  double value = 0.0;
  Field dldq(logits.height, logits.width, m);
  for (std::size_t r = 0; r < k; ++r) {
    const std::size_t i = order[r];
    value += ce[i];
    const int y = static_cast<int>(i) / w;
    const int x = static_cast<int>(i) % w;
    const int t = target.at(y, x);
    dldq.px(y, x)[t] = -1.0 / (std::max(ctx.q.px(y, x)[t], kTiny) * static_cast<double>(k));
  }
  return finish_marginal(ctx, scheme, value / static_cast<double>(k), dldq);
}

LossResult marginal_lovasz(const LogitField& logits, const LabelImage& target,
                           const PartialScheme& scheme, const LossConfig& cfg) {
  (void)cfg;
  auto ctx = marginal_ctx(logits, scheme, "marginal_lovasz");
  const int m = scheme.num_merged();
  check_target(target, logits, m, "marginal_lovasz");
  const std::size_t pixels = logits.pixel_count();
  const int w = logits.width;

  std::vector<int> present_count(m, 0);
  for (std::uint8_t t : target.labels) present_count[t]++;
  int n_present = 0;
  for (int k = 0; k < m; ++k) n_present += present_count[k] > 0 ? 1 : 0;

  Field dldq(logits.height, logits.width, m);
  double value = 0.0;
  if (n_present == 0) return finish_marginal(ctx, scheme, 0.0, dldq);

  std::vector<double> errors(pixels), gt(pixels), sorted_gt(pixels);
  for (int cls = 0; cls < m; ++cls) {
    if (present_count[cls] == 0) continue;  // classes-present convention
    for (std::size_t i = 0; i < pixels; ++i) {
      const int y = static_cast<int>(i) / w;
      const int x = static_cast<int>(i) % w;
      const bool is_cls = target.at(y, x) == cls;
      gt[i] = is_cls ? 1.0 : 0.0;
      const double qv = ctx.q.px(y, x)[cls];
      errors[i] = is_cls ? 1.0 - qv : qv;
    }
    const auto order = order_desc(errors);
    for (std::size_t r = 0; r < pixels; ++r) sorted_gt[r] = gt[order[r]];
    const auto deltas = lovasz_jaccard_deltas(sorted_gt);

    double cls_loss = 0.0;
    for (std::size_t r = 0; r < pixels; ++r) {
      const std::size_t i = order[r];
      cls_loss += errors[i] * deltas[r];
      const int y = static_cast<int>(i) / w;
      const int x = static_cast<int>(i) % w;
      const double sign = gt[i] > 0.5 ? -1.0 : 1.0;  // de/dq
      dldq.px(y, x)[cls] += sign * deltas[r] / static_cast<double>(n_present);
    }
    value += cls_loss;
  }
  return finish_marginal(ctx, scheme, value / static_cast<double>(n_present), dldq);
}

LossResult exclusion_dice(const LogitField& logits, const Field& exclusion_field,
                          const LossConfig& cfg) {
  check_exclusion_field(logits, exclusion_field, "exclusion_dice");
  const ProbField p = softmax(logits);
  const int n = logits.channels;

  std::vector<double> num(n, 0.0), esum(n, 0.0), psum(n, 0.0);
  for (int y = 0; y < logits.height; ++y)
    for (int x = 0; x < logits.width; ++x) {
      const double* pp = p.px(y, x);
      const double* ep = exclusion_field.px(y, x);
      for (int k = 0; k < n; ++k) {
        num[k] += ep[k] * pp[k];
        esum[k] += ep[k];
        psum[k] += pp[k];
      }
    }

  double value = 0.0;
  std::vector<double> den(n);
  for (int k = 0; k < n; ++k) {
    den[k] = esum[k] + psum[k] + cfg.dice_smooth;
    value += 2.0 * num[k] / den[k];
  }

  Field dldp(logits.height, logits.width, n);
  for (int y = 0; y < logits.height; ++y)
    for (int x = 0; x < logits.width; ++x) {
      const double* ep = exclusion_field.px(y, x);
      double* g = dldp.px(y, x);
      for (int k = 0; k < n; ++k)
        g[k] = 2.0 * (ep[k] * den[k] - num[k]) / (den[k] * den[k]);
    }
  LossResult r;
  r.value = value;
  r.grad = softmax_backprop(p, dldp);
  return r;
}

LossResult exclusion_ce(const LogitField& logits, const Field& exclusion_field,
                        const LossConfig& cfg) {
  check_exclusion_field(logits, exclusion_field, "exclusion_ce");
  const ProbField p = softmax(logits);
  const int n = logits.channels;
  const double inv_p = 1.0 / static_cast<double>(logits.pixel_count());

  double value = 0.0;
  Field dldp(logits.height, logits.width, n);
  for (int y = 0; y < logits.height; ++y)
    for (int x = 0; x < logits.width; ++x) {
      const double* pp = p.px(y, x);
      const double* ep = exclusion_field.px(y, x);
      double* g = dldp.px(y, x);
      for (int k = 0; k < n; ++k) {
        if (ep[k] == 0.0) continue;
        value += ep[k] * std::log(pp[k] + cfg.epsilon);
        g[k] = inv_p * ep[k] / (pp[k] + cfg.epsilon);
      }
    }
  LossResult r;
  r.value = value * inv_p;
  r.grad = softmax_backprop(p, dldp);
  return r;
}

LossResult exclusion_focal(const LogitField& logits, const Field& exclusion_field,
                           const LossConfig& cfg) {
  if (cfg.gamma == 0.0) return exclusion_ce(logits, exclusion_field, cfg);
  check_exclusion_field(logits, exclusion_field, "exclusion_focal");
  const ProbField p = softmax(logits);
  const int n = logits.channels;
  const double inv_p = 1.0 / static_cast<double>(logits.pixel_count());

  double value = 0.0;
  Field dldp(logits.height, logits.width, n);
  for (int y = 0; y < logits.height; ++y)
    for (int x = 0; x < logits.width; ++x) {
      const double* pp = p.px(y, x);
      const double* ep = exclusion_field.px(y, x);
      double* g = dldp.px(y, x);
      for (int k = 0; k < n; ++k) {
        if (ep[k] == 0.0) continue;
        double dg = 0.0;
        value += ep[k] * focal_log(pp[k], cfg.epsilon, cfg.gamma, dg);
        g[k] = inv_p * ep[k] * dg;
      }
    }
  LossResult r;
  r.value = value * inv_p;
  r.grad = softmax_backprop(p, dldp);
  return r;
}

LossResult exclusion_topk(const LogitField& logits, const Field& exclusion_field,
                          const LossConfig& cfg) {
  check_exclusion_field(logits, exclusion_field, "exclusion_topk");
  const ProbField p = softmax(logits);
  const int n = logits.channels;
  const std::size_t pixels = logits.pixel_count();
  const int w = logits.width;

  std::vector<double> per_pixel(pixels, 0.0);
  for (int y = 0; y < logits.height; ++y)
    for (int x = 0; x < logits.width; ++x) {
      const double* pp = p.px(y, x);
      const double* ep = exclusion_field.px(y, x);
      double acc = 0.0;
      for (int k = 0; k < n; ++k)
        if (ep[k] != 0.0) acc += ep[k] * std::log(pp[k] + cfg.epsilon);
      per_pixel[static_cast<std::size_t>(y) * w + x] = acc;
    }

  const auto order = order_desc(per_pixel);
  const std::size_t k = topk_count(cfg.topk_fraction, pixels);

  double value = 0.0;
  Field dldp(logits.height, logits.width, n);
  for (std::size_t r = 0; r < k; ++r) {
    const std::size_t i = order[r];
    value += per_pixel[i];
    const int y = static_cast<int>(i) / w;
    const int x = static_cast<int>(i) % w;
    const double* pp = p.px(y, x);
    const double* ep = exclusion_field.px(y, x);
    double* g = dldp.px(y, x);
    for (int c = 0; c < n; ++c)
      if (ep[c] != 0.0) g[c] = ep[c] / ((pp[c] + cfg.epsilon) * static_cast<double>(k));
  }
  LossResult r;
  r.value = value / static_cast<double>(k);
  r.grad = softmax_backprop(p, dldp);
  return r;
}

LossResult exclusion_lovasz(const LogitField& logits, const Field& exclusion_field,
                            const LossConfig& cfg) {
  (void)cfg;
  check_exclusion_field(logits, exclusion_field, "exclusion_lovasz");
  const ProbField p = softmax(logits);
  const int n = logits.channels;
  const int w = logits.width;
  const std::size_t pixels = logits.pixel_count();

  // Ground truth for class k is its exclusion mask; the error on an excluded
  // pixel is the probability mass placed there. Pixels outside the mask
  // contribute nothing, so the extension runs on the masked subset.
  std::vector<std::vector<std::size_t>> masked(n);
  for (std::size_t i = 0; i < pixels; ++i) {
    const int y = static_cast<int>(i) / w;
    const int x = static_cast<int>(i) % w;
    const double* ep = exclusion_field.px(y, x);
    for (int k = 0; k < n; ++k)
      if (ep[k] != 0.0) masked[k].push_back(i);
  }
  int n_active = 0;
  for (int k = 0; k < n; ++k) n_active += masked[k].empty() ? 0 : 1;

  LossResult r;
  r.grad = Field(logits.height, logits.width, n);
  if (n_active == 0) {
    r.value = 0.0;
    return r;
  }

  double value = 0.0;
  Field dldp(logits.height, logits.width, n);
  for (int cls = 0; cls < n; ++cls) {
    const auto& idxs = masked[cls];
    if (idxs.empty()) continue;
    std::vector<double> errors(idxs.size());
    for (std::size_t j = 0; j < idxs.size(); ++j) {
      const std::size_t i = idxs[j];
      errors[j] = p.px(static_cast<int>(i) / w, static_cast<int>(i) % w)[cls];
    }
    const auto order = order_desc(errors);
    const std::vector<double> ones(idxs.size(), 1.0);
    const auto deltas = lovasz_jaccard_deltas(ones);
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
      const std::size_t i = idxs[order[pos]];
      value += errors[order[pos]] * deltas[pos];
      dldp.px(static_cast<int>(i) / w, static_cast<int>(i) % w)[cls] +=
          deltas[pos] / static_cast<double>(n_active);
    }
  }
  r.value = value / static_cast<double>(n_active);
  r.grad = softmax_backprop(p, dldp);
  return r;
}

Field build_exclusion_field(const LabelImage& merged_target,
                            const PartialScheme& scheme,
                            const ExclusionSets& excl) {
  const int n = scheme.num_full();
  if (excl.num_classes() != n)
    throw std::invalid_argument("build_exclusion_field: exclusion sets/scheme mismatch");
  Field out(merged_target.height, merged_target.width, n);

  // Per-full-label exclusion rows, precomputed.
  std::vector<std::vector<double>> rows(n);
  for (int label = 0; label < n; ++label) rows[label] = exclusion_vector(excl, label);

  for (int y = 0; y < merged_target.height; ++y)
    for (int x = 0; x < merged_target.width; ++x) {
      const int m = merged_target.at(y, x);
      if (m < 0 || m >= scheme.num_merged())
        throw std::invalid_argument("build_exclusion_field: label out of range");
      const auto& phi = scheme.merged_classes[m];
      if (phi.size() != 1) continue;  // full class unknown -> excludes nothing
      const auto& row = rows[phi[0]];
      double* e = out.px(y, x);
      for (int k = 0; k < n; ++k) e[k] = row[k];
    }
  return out;
}

LossResult eval_loss_term(LossTerm term, const LogitField& logits,
                          const LabelImage& merged_target,
                          const PartialScheme& scheme, const ExclusionSets& excl,
                          const LossConfig& cfg) {
  switch (term) {
    case LossTerm::marginal_dice: return marginal_dice(logits, merged_target, scheme, cfg);
    case LossTerm::marginal_ce: return marginal_ce(logits, merged_target, scheme, cfg);
    case LossTerm::marginal_focal: return marginal_focal(logits, merged_target, scheme, cfg);
    case LossTerm::marginal_topk: return marginal_topk(logits, merged_target, scheme, cfg);
    case LossTerm::marginal_lovasz: return marginal_lovasz(logits, merged_target, scheme, cfg);
    default: break;
  }
  const Field field = build_exclusion_field(merged_target, scheme, excl);
  switch (term) {
    case LossTerm::exclusion_dice: return exclusion_dice(logits, field, cfg);
    case LossTerm::exclusion_ce: return exclusion_ce(logits, field, cfg);
    case LossTerm::exclusion_focal: return exclusion_focal(logits, field, cfg);
    case LossTerm::exclusion_topk: return exclusion_topk(logits, field, cfg);
    case LossTerm::exclusion_lovasz: return exclusion_lovasz(logits, field, cfg);
    default: break;
  }
  throw std::invalid_argument("eval_loss_term: unknown term");
}

LossResult combined_loss(const LogitField& logits, const LabelImage& merged_target,
                         const PartialScheme& scheme, const ExclusionSets& excl,
                         const LossConfig& cfg) {
  cfg.validate();
  if (cfg.active_terms.empty())
    throw std::invalid_argument("combined_loss: no active terms");

  LossResult total;
  total.grad = Field(logits.height, logits.width, logits.channels);

  // The exclusion field is shared by all exclusion terms of the combination.
  Field excl_field;
  bool have_field = false;

  for (LossTerm term : cfg.active_terms) {
    const double weight = cfg.weight_of(term);
    LossResult r;
    switch (term) {
      case LossTerm::marginal_dice:
      case LossTerm::marginal_ce:
      case LossTerm::marginal_focal:
      case LossTerm::marginal_topk:
      case LossTerm::marginal_lovasz:
        r = eval_loss_term(term, logits, merged_target, scheme, excl, cfg);
        break;
      default: {
        if (!have_field) {
          excl_field = build_exclusion_field(merged_target, scheme, excl);
          have_field = true;
        }
        switch (term) {
          case LossTerm::exclusion_dice: r = exclusion_dice(logits, excl_field, cfg); break;
          case LossTerm::exclusion_ce: r = exclusion_ce(logits, excl_field, cfg); break;
          case LossTerm::exclusion_focal: r = exclusion_focal(logits, excl_field, cfg); break;
          case LossTerm::exclusion_topk: r = exclusion_topk(logits, excl_field, cfg); break;
          case LossTerm::exclusion_lovasz: r = exclusion_lovasz(logits, excl_field, cfg); break;
          default: throw std::invalid_argument("combined_loss: unknown term");
        }
      }
    }
    total.value += weight * r.value;
    for (std::size_t i = 0; i < total.grad.data.size(); ++i)
      total.grad.data[i] += weight * r.grad.data[i];
  }
  return total;
}

}  // namespace psfed
