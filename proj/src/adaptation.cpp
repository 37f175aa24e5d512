#include "psfed/adaptation.hpp"

#include <stdexcept>

#include "psfed/rng.hpp"

namespace psfed {

const char* adapt_mode_name(AdaptMode m) {
  switch (m) {
    case AdaptMode::FTA: return "FTA";
    case AdaptMode::FTB: return "FTB";
    case AdaptMode::FTC: return "FTC";
  }
  return "?";
}

AdaptMode adapt_mode_from_name(const std::string& name) {
  if (name == "FTA") return AdaptMode::FTA;
  if (name == "FTB") return AdaptMode::FTB;
  if (name == "FTC") return AdaptMode::FTC;
  throw std::invalid_argument("unknown adaptation mode '" + name + "'");
}

ModelParams adapt(const ModelParams& fed_weights, const ClientState& site,
                  AdaptMode mode, int epochs, double lr, int batch_size) {
  if (site.sample_count < 1)
    throw std::invalid_argument("adapt: empty site dataset");
  if (epochs < 0) throw std::invalid_argument("adapt: negative epochs");

  const IndexRanges* freeze = nullptr;
  switch (mode) {
    case AdaptMode::FTA: break;
    case AdaptMode::FTB: freeze = &fed_weights.encoder_ranges; break;
    case AdaptMode::FTC: freeze = &fed_weights.decoder_ranges; break;
  }

  // Fresh sampling context; constant lr (no adaptation schedule is defined).
  ClientState phase;
  phase.client_id = site.client_id;
  phase.data = site.data;
  phase.scheme = site.scheme;
  phase.excl = site.excl;
  phase.sample_count = site.sample_count;
  phase.loss_cfg = site.loss_cfg;
  phase.sampler.reset(
      derive_seed(site.data.spec.seed, 0x61646170ULL,
                  static_cast<std::uint64_t>(site.client_id)),
      phase.sample_count);
  phase.lr = lr;

  ModelParams w = fed_weights;
  const int per_epoch = (phase.sample_count + batch_size - 1) / batch_size;
  local_sgd(phase, w, epochs * per_epoch, batch_size, freeze, false);
  return w;
}

}  // namespace psfed
