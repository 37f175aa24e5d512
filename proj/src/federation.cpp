#include "psfed/federation.hpp"

#include <algorithm>
#include <stdexcept>

#include "psfed/kernels.hpp"
#include "psfed/rng.hpp"
#include "psfed/threads.hpp"

namespace psfed {

void FedConfig::validate() const {
  if (global_rounds < 0) throw std::invalid_argument("FedConfig: global_rounds < 0");
  if (client_iterations < 0)
    throw std::invalid_argument("FedConfig: client_iterations < 0");
  if (batch_size < 1) throw std::invalid_argument("FedConfig: batch_size < 1");
  if (lr < 0.0) throw std::invalid_argument("FedConfig: negative lr");
  if (warmstart_epochs < 0)
    throw std::invalid_argument("FedConfig: warmstart_epochs < 0");
}

void Sampler::reset(std::uint64_t s, int count) {
  seed = s;
  n = count;
  epoch = 0;
  pos = 0;
  order.resize(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  Rng rng(derive_seed(seed, epoch));
  rng.shuffle(order);
}

int Sampler::next() {
  const int idx = order[pos++];
  if (pos == static_cast<std::size_t>(n)) {
    pos = 0;
    ++epoch;
    Rng rng(derive_seed(seed, epoch));
    rng.shuffle(order);
  }
  return idx;
}

void LrDecay::observe_epoch(double epoch_mean_loss, double& lr) {
  if (!has_best || epoch_mean_loss < best - 0.001) {
    best = epoch_mean_loss;
    has_best = true;
    stall = 0;
    return;
  }
  if (++stall >= 10) {
    lr *= 0.8;
    stall = 0;
  }
}

ClientState ClientState::make(int client_id, ClientDataset data,
                              const LossConfig& loss_cfg, const FedConfig& fed) {
  ClientState c;
  c.client_id = client_id;
  c.scheme = data.scheme;
  c.excl = default_exclusions(data.scheme);
  c.sample_count = data.sample_count();
  c.loss_cfg = loss_cfg;
  c.data = std::move(data);
  if (c.sample_count < 1)
    throw std::invalid_argument("ClientState: empty client dataset");
  c.sampler.reset(derive_seed(fed.seed, static_cast<std::uint64_t>(client_id)),
                  c.sample_count);
  c.lr = fed.lr;
  return c;
}

namespace {

struct TrainItem {
  const Sample* sample;
  const PartialScheme* scheme;
  const ExclusionSets* excl;
  const LossConfig* cfg;
};

// One mini-batch SGD step; per-sample losses are reported so epoch
// accounting can split batches at epoch boundaries.
void batch_step(ModelParams& w, const std::vector<TrainItem>& items, double lr,
                const IndexRanges* freeze, std::vector<double>& sample_losses) {
  const auto& K = kern::ops();
  std::vector<double> grad_sum(w.size(), 0.0);
  sample_losses.clear();
  for (const TrainItem& item : items) {
    const auto fwd = forward_with_tape(w, item.sample->image);
    const LossResult loss = combined_loss(fwd.logits, item.sample->visible_mask,
                                          *item.scheme, *item.excl, *item.cfg);
    sample_losses.push_back(loss.value);
    const auto grad = backward_from_tape(w, *fwd.tape, loss.grad);
    K.axpy(1.0, grad.data(), grad_sum.data(), grad_sum.size());
  }
  sgd_step(w, grad_sum, lr / static_cast<double>(items.size()), freeze);
}

// Client-local SGD loop with the persistent sampler / lr-decay state held in
// the ClientState. Returns the mean batch loss over the executed iterations.
double local_iterations(ClientState& c, ModelParams& w, int iterations,
                        int batch_size, const IndexRanges* freeze,
                        bool apply_decay) {
  double loss_acc = 0.0;
  std::vector<TrainItem> items;
  std::vector<bool> boundary;
  std::vector<double> sample_losses;
  for (int it = 0; it < iterations; ++it) {
    items.clear();
    boundary.clear();
    for (int b = 0; b < batch_size; ++b) {
      const std::uint64_t epoch_before = c.sampler.epoch;
      const int idx = c.sampler.next();
      items.push_back({&c.data.train[static_cast<std::size_t>(idx)], &c.scheme,
                       &c.excl, &c.loss_cfg});
      boundary.push_back(c.sampler.epoch != epoch_before);
    }
    batch_step(w, items, c.lr, freeze, sample_losses);
    double batch_loss = 0.0;
    for (std::size_t b = 0; b < sample_losses.size(); ++b) {
      batch_loss += sample_losses[b];
      c.epoch_loss_sum += sample_losses[b];
      c.epoch_loss_count += 1;
      if (boundary[b]) {
        const double epoch_mean = c.epoch_loss_sum / c.epoch_loss_count;
        if (apply_decay) c.decay.observe_epoch(epoch_mean, c.lr);
        c.epoch_loss_sum = 0.0;
        c.epoch_loss_count = 0;
      }
    }
    loss_acc += batch_loss / static_cast<double>(sample_losses.size());
  }
  return iterations > 0 ? loss_acc / iterations : 0.0;
}

int iterations_per_epoch(int samples, int batch) {
  return (samples + batch - 1) / batch;
}

ClientState* find_fully_labeled(std::vector<ClientState>& clients) {
  for (auto& c : clients)
    if (c.scheme.fully_labeled()) return &c;
  return nullptr;
}

// Warm start runs in its own sampling/lr context so the federation-proper
// client streams are the same whether or not it happened.
ModelParams warmstart_phase(std::vector<ClientState>& clients,
                            const ModelParams& init, const FedConfig& cfg,
                            std::vector<TraceRow>& trace) {
  ClientState* full = find_fully_labeled(clients);
  if (full == nullptr)
    throw std::runtime_error("warm start requires a fully-labeled client");

  ClientState phase;
  phase.client_id = full->client_id;
  phase.data = full->data;
  phase.scheme = full->scheme;
  phase.excl = full->excl;
  phase.sample_count = full->sample_count;
  phase.loss_cfg = full->loss_cfg;
  phase.sampler.reset(derive_seed(cfg.seed, 0x7761726dULL), phase.sample_count);
  phase.lr = cfg.lr;

  ModelParams w = init;
  const int per_epoch = iterations_per_epoch(phase.sample_count, cfg.batch_size);
  for (int e = 0; e < cfg.warmstart_epochs; ++e) {
    const double mean =
        local_iterations(phase, w, per_epoch, cfg.batch_size, nullptr, true);
    trace.push_back({0, phase.client_id, mean, phase.lr});
  }
  return w;
}

}  // namespace

double local_sgd(ClientState& state, ModelParams& w, int iterations,
                 int batch_size, const IndexRanges* freeze, bool apply_decay) {
  if (state.sample_count < 1)
    throw std::invalid_argument("local_sgd: empty client");
  return local_iterations(state, w, iterations, batch_size, freeze, apply_decay);
}

ModelParams client_update(ClientState& state, const ModelParams& w_in,
                          const FedConfig& cfg) {
  cfg.validate();
  if (state.sample_count < 1)
    throw std::invalid_argument("client_update: empty client");
  ModelParams w = w_in;  // broadcast isolation: local copy
  const double mean = local_iterations(state, w, cfg.client_iterations,
                                       cfg.batch_size, nullptr, true);
  state.last_mean_loss = mean;
  return w;
}

ModelParams aggregate(const std::vector<ClientUpdateResult>& updates) {
  if (updates.empty()) throw std::invalid_argument("aggregate: no updates");
  std::vector<const ClientUpdateResult*> sorted;
  sorted.reserve(updates.size());
  for (const auto& u : updates) sorted.push_back(&u);
  std::sort(sorted.begin(), sorted.end(),
            [](const auto* a, const auto* b) { return a->client_id < b->client_id; });

  if (sorted.size() == 1) return sorted[0]->weights;  // identity

  long long total = 0;
  for (const auto* u : sorted) {
    if (u->sample_count <= 0)
      throw std::invalid_argument("aggregate: nonpositive sample count");
    if (!u->weights.same_layout(sorted[0]->weights))
      throw std::invalid_argument("aggregate: layout mismatch");
    total += u->sample_count;
  }

  const auto& K = kern::ops();
  ModelParams out = sorted[0]->weights;
  std::fill(out.flat.begin(), out.flat.end(), 0.0);
  for (const auto* u : sorted) {
    const double weight =
        static_cast<double>(u->sample_count) / static_cast<double>(total);
    K.axpy(weight, u->weights.flat.data(), out.flat.data(), out.flat.size());
  }
  return out;
}

FedResult run_federated(std::vector<ClientState>& clients, const ModelParams& init,
                        const FedConfig& cfg, int threads) {
  cfg.validate();
  if (clients.empty()) throw std::invalid_argument("run_federated: no clients");

  FedResult result;
  result.weights = cfg.warmstart_epochs > 0
                       ? warmstart_phase(clients, init, cfg, result.trace)
                       : init;

  std::vector<ClientUpdateResult> updates(clients.size());
  for (int round = 1; round <= cfg.global_rounds; ++round) {
    const ModelParams& broadcast = result.weights;
    parallel_for(static_cast<int>(clients.size()), threads, [&](int i) {
      updates[static_cast<std::size_t>(i)] = {
          clients[static_cast<std::size_t>(i)].client_id,
          clients[static_cast<std::size_t>(i)].sample_count,
          client_update(clients[static_cast<std::size_t>(i)], broadcast, cfg)};
    });
    for (const auto& c : clients)
      result.trace.push_back({round, c.client_id, c.last_mean_loss, c.lr});
    result.weights = aggregate(updates);
  }
  return result;
}

FedResult run_central(std::vector<ClientState>& clients, const ModelParams& init,
                      const FedConfig& cfg, int total_iterations) {
  cfg.validate();
  if (clients.empty()) throw std::invalid_argument("run_central: no clients");
  if (total_iterations < 0)
    throw std::invalid_argument("run_central: negative iteration count");

  FedResult result;
  result.weights = cfg.warmstart_epochs > 0
                       ? warmstart_phase(clients, init, cfg, result.trace)
                       : init;

  // pooled sample list in ascending client order
  std::vector<const ClientState*> order;
  for (const auto& c : clients) order.push_back(&c);
  std::sort(order.begin(), order.end(),
            [](const auto* a, const auto* b) { return a->client_id < b->client_id; });

  struct PoolEntry {
    const Sample* sample;
    const ClientState* client;
  };
  std::vector<PoolEntry> pool;
  for (const auto* c : order)
    for (const auto& s : c->data.train) pool.push_back({&s, c});

  // With a single client the pooled stream must match that client's local
  // stream so central and one-client federated runs coincide.
  const std::uint64_t sampler_seed =
      clients.size() == 1
          ? derive_seed(cfg.seed, static_cast<std::uint64_t>(order[0]->client_id))
          : derive_seed(cfg.seed, 0x63656e74ULL);

  Sampler sampler;
  sampler.reset(sampler_seed, static_cast<int>(pool.size()));
  double lr = cfg.lr;
  LrDecay decay;
  double epoch_sum = 0.0;
  int epoch_count = 0;

  std::vector<TrainItem> items;
  std::vector<bool> boundary;
  std::vector<double> sample_losses;
  double block_acc = 0.0;
  int block_iters = 0;
  int block_index = 1;
  for (int it = 0; it < total_iterations; ++it) {
    items.clear();
    boundary.clear();
    for (int b = 0; b < cfg.batch_size; ++b) {
      const std::uint64_t before = sampler.epoch;
      const PoolEntry& entry = pool[static_cast<std::size_t>(sampler.next())];
      items.push_back({entry.sample, &entry.client->scheme, &entry.client->excl,
                       &entry.client->loss_cfg});
      boundary.push_back(sampler.epoch != before);
    }
    batch_step(result.weights, items, lr, nullptr, sample_losses);
    double batch_loss = 0.0;
    for (std::size_t b = 0; b < sample_losses.size(); ++b) {
      batch_loss += sample_losses[b];
      epoch_sum += sample_losses[b];
      epoch_count += 1;
      if (boundary[b]) {
        decay.observe_epoch(epoch_sum / epoch_count, lr);
        epoch_sum = 0.0;
        epoch_count = 0;
      }
    }
    block_acc += batch_loss / static_cast<double>(sample_losses.size());
    block_iters += 1;
    if (block_iters == cfg.client_iterations || it + 1 == total_iterations) {
      result.trace.push_back({block_index++, -1, block_acc / block_iters, lr});
      block_acc = 0.0;
      block_iters = 0;
    }
  }
  return result;
}

}  // namespace psfed
