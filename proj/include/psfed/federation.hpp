#pragma once

#include <cstdint>
#include <vector>

#include "psfed/losses.hpp"
#include "psfed/segnet.hpp"
#include "psfed/synthdata.hpp"

namespace psfed {

struct FedConfig {
  int global_rounds = 20;      // R
  int client_iterations = 20;  // SGD iterations per client per round
  double lr = 0.01;
  int batch_size = 2;
  int warmstart_epochs = 0;  // local epochs on the fully-labeled client
  std::uint64_t seed = 0;

  void validate() const;
};

// Deterministic round-robin sampler: a fresh shuffle per epoch, consumed
// batch_size at a time. Epoch boundaries drive the lr-decay bookkeeping.
struct Sampler {
  std::uint64_t seed = 0;
  int n = 0;
  std::vector<int> order;
  std::size_t pos = 0;
  std::uint64_t epoch = 0;

  void reset(std::uint64_t s, int count);
  int next();  // next sample index; reshuffles at epoch end
};

// "learning rate decays by 20%" whenever the epoch-mean loss improves by
// less than 0.001 over 10 consecutive epochs.
struct LrDecay {
  double best = 0.0;
  bool has_best = false;
  int stall = 0;

  void observe_epoch(double epoch_mean_loss, double& lr);
};

struct ClientState {
  int client_id = 0;
  ClientDataset data;
  PartialScheme scheme;
  ExclusionSets excl;
  int sample_count = 0;
  LossConfig loss_cfg;

  // local training state, persistent across rounds
  Sampler sampler;
  double lr = 0.0;
  LrDecay decay;
  double epoch_loss_sum = 0.0;
  int epoch_loss_count = 0;
  double last_mean_loss = 0.0;

  static ClientState make(int client_id, ClientDataset data,
                          const LossConfig& loss_cfg, const FedConfig& fed);
};

struct ServerState {
  ModelParams weights;
  int round = 0;
  int total_samples = 0;
};

struct TraceRow {
  int round = 0;
  int client_id = 0;
  double mean_loss = 0.0;
  double lr = 0.0;
};

struct FedResult {
  ModelParams weights;
  std::vector<TraceRow> trace;
};

// One client's local phase: n_iter mini-batch SGD steps on a copy of w_in.
ModelParams client_update(ClientState& state, const ModelParams& w_in,
                          const FedConfig& cfg);

// Mini-batch SGD driven by the client's persistent sampler/lr state;
// building block behind client_update, central training and adaptation.
// Returns the mean batch loss over the executed iterations.
double local_sgd(ClientState& state, ModelParams& w, int iterations,
                 int batch_size, const IndexRanges* freeze, bool apply_decay);

struct ClientUpdateResult {
  int client_id = 0;
  int sample_count = 0;
  ModelParams weights;
};

// Sample-count-weighted coordinate mean, summed in ascending client order.
ModelParams aggregate(const std::vector<ClientUpdateResult>& updates);

FedResult run_federated(std::vector<ClientState>& clients, const ModelParams& init,
                        const FedConfig& cfg, int threads = 1);

// Pooled single-site training over all clients' samples, each sample scored
// under its own scheme and exclusion sets. One trace row per
// client_iterations block (client_id -1).
FedResult run_central(std::vector<ClientState>& clients, const ModelParams& init,
                      const FedConfig& cfg, int total_iterations);

}  // namespace psfed
