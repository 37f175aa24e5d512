#include "psfed/evaluate.hpp"

#include <stdexcept>

#include "psfed/threads.hpp"

namespace psfed {

LabelImage predict_labels(const ModelParams& params, const Field& image) {
  const LogitField logits = forward(params, image);
  LabelImage out(logits.height, logits.width);
  for (int y = 0; y < logits.height; ++y)
    for (int x = 0; x < logits.width; ++x) {
      const double* f = logits.px(y, x);
      int best = 0;
      for (int c = 1; c < logits.channels; ++c)
        if (f[c] > f[best]) best = c;
      out.at(y, x) = static_cast<std::uint8_t>(best);
    }
  return out;
}

SiteEval evaluate_site(const ModelParams& params, const ClientDataset& ds,
                       bool test_split, int threads) {
  const auto& samples = test_split ? ds.test : ds.train;
  if (samples.empty()) throw std::invalid_argument("evaluate_site: empty split");
  const int n_classes = ds.scheme.num_full();

  struct PerImage {
    std::vector<double> dc;
    std::vector<std::optional<double>> hd;
  };
  std::vector<PerImage> per_image(samples.size());

  parallel_for(static_cast<int>(samples.size()), threads, [&](int i) {
    const Sample& s = samples[static_cast<std::size_t>(i)];
    const LabelImage pred = predict_labels(params, s.image);
    PerImage& r = per_image[static_cast<std::size_t>(i)];
    r.dc.resize(n_classes, 0.0);
    r.hd.resize(n_classes);
    for (int c = 1; c < n_classes; ++c) {
      const BinaryMask pm = class_mask(pred, c);
      const BinaryMask gm = class_mask(s.full_mask, c);
      r.dc[c] = dice(pm, gm);
      r.hd[c] = hd95(pm, gm);
    }
  });

  SiteEval eval;
  eval.site_id = ds.spec.site_id;
  for (int c = 1; c < n_classes; ++c) {
    OrganScore score;
    double hd_sum = 0.0;
    for (const PerImage& r : per_image) {
      score.dc += r.dc[c];
      score.images += 1;
      if (r.hd[c].has_value()) {
        hd_sum += *r.hd[c];
        score.hd95_defined += 1;
      }
    }
    score.dc /= score.images;
    if (score.hd95_defined > 0) score.hd95 = hd_sum / score.hd95_defined;
    eval.organs[c] = score;
  }
  return eval;
}

double mean_labeled_dc(const std::vector<SiteEval>& evals,
                       const std::vector<ClientDataset>& sites) {
  if (evals.size() != sites.size())
    throw std::invalid_argument("mean_labeled_dc: eval/site count mismatch");
  double sum = 0.0;
  int pairs = 0;
  for (std::size_t i = 0; i < sites.size(); ++i) {
    for (int organ : sites[i].spec.labeled) {
      sum += evals[i].organs.at(organ).dc;
      pairs += 1;
    }
  }
  if (pairs == 0) throw std::invalid_argument("mean_labeled_dc: no labeled pairs");
  return sum / pairs;
}

}  // namespace psfed
