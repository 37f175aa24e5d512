#pragma once

#include <string>

#include "psfed/federation.hpp"

namespace psfed {

/// Site-adaptation fine-tuning modes. Naming follows the model zoo: FTA
/// tunes everything, FTB freezes the encoder and tunes the decoder, FTC
/// freezes the decoder and tunes the encoder.
enum class AdaptMode { FTA, FTB, FTC };

const char* adapt_mode_name(AdaptMode m);
AdaptMode adapt_mode_from_name(const std::string& name);

// Fine-tunes a copy of fed_weights on the site's local data under its own
// scheme; frozen coordinates come back bit-identical.
ModelParams adapt(const ModelParams& fed_weights, const ClientState& site,
                  AdaptMode mode, int epochs, double lr, int batch_size = 2);

}  // namespace psfed
