#pragma once

#include <map>
#include <set>
#include <string>

#include "psfed/field.hpp"
#include "psfed/labelspace.hpp"

namespace psfed {

enum class LossTerm {
  marginal_dice,
  marginal_ce,
  marginal_focal,
  marginal_topk,
  marginal_lovasz,
  exclusion_dice,
  exclusion_ce,
  exclusion_focal,
  exclusion_topk,
  exclusion_lovasz,
};

const char* loss_term_name(LossTerm t);
LossTerm loss_term_from_name(const std::string& name);

struct LossConfig {
  double gamma = 2.0;           // focal focusing parameter
  double topk_fraction = 0.10;  // fraction of pixels kept by Top-K
  double epsilon = 1.0;         // exclusion-log offset
  double dice_smooth = 1e-5;    // soft-Dice denominator smoothing
  std::set<LossTerm> active_terms = {
      LossTerm::marginal_dice,   LossTerm::marginal_ce,
      LossTerm::marginal_lovasz, LossTerm::exclusion_dice,
      LossTerm::exclusion_ce,    LossTerm::exclusion_lovasz,
  };
  std::map<LossTerm, double> term_weights;  // absent => 1.0

  double weight_of(LossTerm t) const {
    auto it = term_weights.find(t);
    return it == term_weights.end() ? 1.0 : it->second;
  }
  void validate() const;
};

/// Scalar loss value plus its analytic gradient w.r.t. the input logits.
struct LossResult {
  double value = 0.0;
  Field grad;  // H x W x N
};

ProbField softmax(const LogitField& logits);
ProbField marginalize(const ProbField& p, const PartialScheme& scheme);

// Marginal losses: targets are merged-class labels in [0, M).
LossResult marginal_dice(const LogitField& logits, const LabelImage& target,
                         const PartialScheme& scheme, const LossConfig& cfg);
LossResult marginal_ce(const LogitField& logits, const LabelImage& target,
                       const PartialScheme& scheme, const LossConfig& cfg);
LossResult marginal_focal(const LogitField& logits, const LabelImage& target,
                          const PartialScheme& scheme, const LossConfig& cfg);
LossResult marginal_topk(const LogitField& logits, const LabelImage& target,
                         const PartialScheme& scheme, const LossConfig& cfg);
LossResult marginal_lovasz(const LogitField& logits, const LabelImage& target,
                           const PartialScheme& scheme, const LossConfig& cfg);

// Exclusion losses: exclusion_field is H x W x N with entry (i, n) = 1 when
// pixel i is known not to belong to class n.
LossResult exclusion_dice(const LogitField& logits, const Field& exclusion_field,
                          const LossConfig& cfg);
LossResult exclusion_ce(const LogitField& logits, const Field& exclusion_field,
                        const LossConfig& cfg);
LossResult exclusion_focal(const LogitField& logits, const Field& exclusion_field,
                           const LossConfig& cfg);
LossResult exclusion_topk(const LogitField& logits, const Field& exclusion_field,
                          const LossConfig& cfg);
LossResult exclusion_lovasz(const LogitField& logits, const Field& exclusion_field,
                            const LossConfig& cfg);

// Builds the per-pixel exclusion field from merged labels: a pixel carrying a
// labeled singleton class k gets exclusion_vector(k); merged-background
// pixels (full class unknown) exclude nothing.
Field build_exclusion_field(const LabelImage& merged_target,
                            const PartialScheme& scheme,
                            const ExclusionSets& excl);

LossResult combined_loss(const LogitField& logits, const LabelImage& merged_target,
                         const PartialScheme& scheme, const ExclusionSets& excl,
                         const LossConfig& cfg);

// Dispatch on term id; marginal terms ignore excl, exclusion terms use the
// field built from the target.
LossResult eval_loss_term(LossTerm term, const LogitField& logits,
                          const LabelImage& merged_target,
                          const PartialScheme& scheme, const ExclusionSets& excl,
                          const LossConfig& cfg);

}  // namespace psfed
