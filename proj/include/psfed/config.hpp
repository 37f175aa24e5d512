#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "psfed/federation.hpp"
#include "psfed/losses.hpp"
#include "psfed/segnet.hpp"
#include "psfed/synthdata.hpp"

namespace psfed {

// Configuration problems exit the CLI with code 2; runtime/data problems
// with code 3.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataConfig {
  std::string root = "data";
  std::uint64_t seed = 0;  // 0 -> derived from the experiment seed
  std::vector<SiteSpec> sites;  // empty -> default benchmark
};

struct AdaptConfig {
  std::string mode = "FTB";
  int epochs = 2;
  double lr = 0.002;
};

struct EvalConfig {
  std::string split = "test";
};

struct AblateConfig {
  // Base-loss combinations; each name expands to its marginal + exclusion
  // pair. Defaults mirror the loss-combination study.
  std::vector<std::vector<std::string>> loss_combos = {
      {"dice", "ce"},          {"dice", "focal"},
      {"dice", "topk"},        {"lovasz", "ce"},
      {"dice", "ce", "focal"}, {"dice", "ce", "topk"},
      {"dice", "ce", "lovasz"},
  };
  int combo_iterations = 600;  // central iterations per combination
  // (client_iterations, global_rounds) at a fixed per-client total
  std::vector<std::pair<int, int>> schedule_splits = {{10, 40}, {20, 20}, {40, 10}};
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  int threads = 1;
  std::string output_dir = "out";
  DataConfig data;
  NetSpec net;
  LossConfig loss;
  FedConfig fed;
  AdaptConfig adapt;
  EvalConfig eval;
  int central_iterations = 0;  // 0 -> rounds * client_iterations * K
  AblateConfig ablate;

  static ExperimentConfig from_file(const std::filesystem::path& path);
  static ExperimentConfig from_json_text(const std::string& text);

  // Full echo with every default resolved; written next to outputs.
  std::string to_json_text() const;

  // Site specs with derived seeds resolved (benchmark when none are given).
  std::vector<SiteSpec> resolved_sites() const;
};

// Expands base-loss names ("dice", "ce", "focal", "topk", "lovasz") to the
// marginal&exclusion active-term set.
std::set<LossTerm> expand_base_losses(const std::vector<std::string>& bases);

}  // namespace psfed
