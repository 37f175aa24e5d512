#pragma once

#include <map>
#include <optional>
#include <vector>

#include "psfed/metrics.hpp"
#include "psfed/segnet.hpp"
#include "psfed/synthdata.hpp"

namespace psfed {

// argmax class per pixel; ties resolve to the lowest class index
LabelImage predict_labels(const ModelParams& params, const Field& image);

struct OrganScore {
  double dc = 0.0;                // mean over images
  std::optional<double> hd95;     // mean over images where defined
  int images = 0;
  int hd95_defined = 0;
};

struct SiteEval {
  int site_id = 0;
  std::map<int, OrganScore> organs;  // full-class index -> score
};

SiteEval evaluate_site(const ModelParams& params, const ClientDataset& ds,
                       bool test_split, int threads = 1);

// Mean DC over the benchmark's labeled (site, organ) pairs: all organs on
// the fully-labeled site, each partial site's own organs elsewhere.
double mean_labeled_dc(const std::vector<SiteEval>& evals,
                       const std::vector<ClientDataset>& sites);

}  // namespace psfed
