#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "psfed/field.hpp"

namespace psfed {

struct NetSpec {
  int in_channels = 1;
  int base_width = 8;
  int depth = 2;  // down/up levels
  int num_classes = 6;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TensorInfo {
  std::string name;
  std::vector<int> shape;  // conv: {cout, kh, kw, cin}; bias: {cout}
  std::size_t offset = 0;
  std::size_t size = 0;
};

using IndexRanges = std::vector<std::pair<std::size_t, std::size_t>>;  // [begin,end)

/// Flat parameter vector with a named tensor layout and the encoder/decoder
/// partition used for freezing. Value semantics: copies are snapshots.
struct ModelParams {
  NetSpec spec;
  std::vector<double> flat;
  std::vector<TensorInfo> layout;
  IndexRanges encoder_ranges;  // enc blocks + bottom block
  IndexRanges decoder_ranges;  // dec blocks + 1x1 head

  std::size_t size() const { return flat.size(); }
  bool same_layout(const ModelParams& o) const;
};

ModelParams init_params(const NetSpec& spec);

// Intermediate activations of one forward pass; lets the backward pass skip
// the recompute when the caller already ran forward.
struct ForwardTape;

LogitField forward(const ModelParams& params, const Field& image);

struct ForwardResult {
  LogitField logits;
  std::shared_ptr<ForwardTape> tape;
};
ForwardResult forward_with_tape(const ModelParams& params, const Field& image);

// d(sum(logits * upstream)) / d(params), same layout as flat.
std::vector<double> backward(const ModelParams& params, const Field& image,
                             const Field& upstream);
std::vector<double> backward_from_tape(const ModelParams& params,
                                       const ForwardTape& tape,
                                       const Field& upstream);

// params -= lr * grad outside the frozen ranges; frozen entries untouched.
void sgd_step(ModelParams& params, const std::vector<double>& grad, double lr,
              const IndexRanges* freeze = nullptr);

// Checkpoint file: "PSFEDCKPT1\n" magic, uint32 LE header length, JSON header
// (the NetSpec plus param_count), then param_count little-endian float32.
void save_checkpoint(const std::filesystem::path& path, const ModelParams& params);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace psfed
