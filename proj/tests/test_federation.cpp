#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "psfed/federation.hpp"
#include "psfed/kernels.hpp"
#include "support/testutil.hpp"

using namespace psfed;

namespace {

NetSpec tiny_net(int num_classes) {
  NetSpec spec;
  spec.base_width = 2;
  spec.depth = 1;
  spec.num_classes = num_classes;
  spec.seed = 31;
  return spec;
}

FedConfig tiny_fed() {
  FedConfig cfg;
  cfg.global_rounds = 2;
  cfg.client_iterations = 4;
  cfg.lr = 0.05;
  cfg.batch_size = 2;
  cfg.seed = 7;
  return cfg;
}

ClientState make_client(int id, std::uint64_t data_seed, const std::set<int>& labeled,
                        const FedConfig& fed, int n_train = 4) {
  LossConfig loss;
  return ClientState::make(
      id, testutil::tiny_dataset(data_seed, id, labeled, n_train, 1, 8, 8, 4),
      loss, fed);
}

ModelParams scalar_params(const NetSpec& spec, double value) {
  ModelParams p = init_params(spec);
  std::fill(p.flat.begin(), p.flat.end(), value);
  return p;
}

}  // namespace

TEST_CASE("aggregate: identity, equal weights, weighted hand case") {
  const auto spec = tiny_net(4);

  SUBCASE("identical updates reproduce the same vector") {
    const auto w = init_params(spec);
    std::vector<ClientUpdateResult> ups;
    for (int k = 1; k <= 3; ++k) ups.push_back({k, 5, w});
    const auto out = aggregate(ups);
    for (std::size_t i = 0; i < w.flat.size(); ++i)
      CHECK(out.flat[i] == doctest::Approx(w.flat[i]).epsilon(1e-15));
  }
  SUBCASE("two equal clients -> arithmetic mean") {
    const auto a = scalar_params(spec, 1.0);
    const auto b = scalar_params(spec, 3.0);
    const auto out = aggregate({{1, 7, a}, {2, 7, b}});
    for (double v : out.flat) CHECK(v == doctest::Approx(2.0).epsilon(1e-15));
  }
  SUBCASE("n=(1,2,3) with scalars (3,6,9) -> exactly 7") {
    const auto out = aggregate({{1, 1, scalar_params(spec, 3.0)},
                                {2, 2, scalar_params(spec, 6.0)},
                                {3, 3, scalar_params(spec, 9.0)}});
    for (double v : out.flat) CHECK(v == 7.0);
  }
  SUBCASE("order invariance") {
    const auto out_a = aggregate({{2, 2, scalar_params(spec, 6.0)},
                                  {1, 1, scalar_params(spec, 3.0)}});
    const auto out_b = aggregate({{1, 1, scalar_params(spec, 3.0)},
                                  {2, 2, scalar_params(spec, 6.0)}});
    CHECK(out_a.flat == out_b.flat);
  }
  SUBCASE("empty list rejected") {
    CHECK_THROWS_AS(aggregate({}), std::invalid_argument);
  }
}

TEST_CASE("client_update basics") {
  const auto fed = tiny_fed();
  const auto init = init_params(tiny_net(4));

  SUBCASE("zero iterations returns the input") {
    auto client = make_client(1, 11, {1, 2, 3}, fed);
    FedConfig cfg = fed;
    cfg.client_iterations = 0;
    const auto out = client_update(client, init, cfg);
    CHECK(out.flat == init.flat);
  }
  SUBCASE("lr=0 returns the input values") {
    auto client = make_client(1, 11, {1, 2, 3}, fed);
    FedConfig cfg = fed;
    cfg.lr = 0.0;
    ClientState fresh = make_client(1, 11, {1, 2, 3}, cfg);
    const auto out = client_update(fresh, init, cfg);
    CHECK(out.flat == init.flat);
  }
  SUBCASE("broadcast weights are not modified") {
    auto client = make_client(1, 11, {1, 2, 3}, fed);
    const auto snapshot = init.flat;
    (void)client_update(client, init, fed);
    CHECK(init.flat == snapshot);
  }
  SUBCASE("one iteration of batch one equals a manually scripted step") {
    FedConfig cfg = tiny_fed();
    cfg.client_iterations = 1;
    cfg.batch_size = 1;
    auto client = make_client(1, 13, {1}, cfg, 3);
    const auto out = client_update(client, init, cfg);

    // script the same step: the first drawn sample is order[0] of epoch 0
    Sampler probe;
    probe.reset(derive_seed(cfg.seed, 1), 3);
    const int idx = probe.next();
    const Sample& s = client.data.train[static_cast<std::size_t>(idx)];
    const auto fwd = forward_with_tape(init, s.image);
    const auto loss = combined_loss(fwd.logits, s.visible_mask, client.scheme,
                                    client.excl, client.loss_cfg);
    const auto grad = backward_from_tape(init, *fwd.tape, loss.grad);
    ModelParams manual = init;
    sgd_step(manual, grad, cfg.lr);
    CHECK(out.flat == manual.flat);
  }
}

TEST_CASE("federation identities") {
  const auto init = init_params(tiny_net(4));

  SUBCASE("K=1 federated equals continuous local SGD bit-for-bit") {
    FedConfig split = tiny_fed();
    split.global_rounds = 4;
    split.client_iterations = 3;
    FedConfig merged = tiny_fed();
    merged.global_rounds = 1;
    merged.client_iterations = 12;

    std::vector<ClientState> a{make_client(1, 17, {1, 2}, split)};
    std::vector<ClientState> b{make_client(1, 17, {1, 2}, merged)};
    const auto ra = run_federated(a, init, split);
    const auto rb = run_federated(b, init, merged);
    CHECK(ra.weights.flat == rb.weights.flat);
  }

  SUBCASE("R=0 returns the initial weights") {
    FedConfig cfg = tiny_fed();
    cfg.global_rounds = 0;
    std::vector<ClientState> clients{make_client(1, 17, {1, 2}, cfg)};
    const auto r = run_federated(clients, init, cfg);
    CHECK(r.weights.flat == init.flat);
  }

  SUBCASE("central with one client equals one-client federated") {
    FedConfig cfg = tiny_fed();
    std::vector<ClientState> a{make_client(1, 19, {1, 2}, cfg)};
    std::vector<ClientState> b{make_client(1, 19, {1, 2}, cfg)};
    const auto fed = run_federated(a, init, cfg);
    const auto central = run_central(b, init, cfg,
                                     cfg.global_rounds * cfg.client_iterations);
    CHECK(fed.weights.flat == central.weights.flat);
  }

  SUBCASE("determinism across thread counts") {
    FedConfig cfg = tiny_fed();
    std::vector<ClientState> a, b;
    for (int k = 1; k <= 3; ++k) {
      a.push_back(make_client(k, 100 + static_cast<std::uint64_t>(k), {1, 2}, cfg));
      b.push_back(make_client(k, 100 + static_cast<std::uint64_t>(k), {1, 2}, cfg));
    }
    const auto r1 = run_federated(a, init, cfg, 1);
    const auto r2 = run_federated(b, init, cfg, 3);
    CHECK(r1.weights.flat == r2.weights.flat);
    REQUIRE(r1.trace.size() == r2.trace.size());
    for (std::size_t i = 0; i < r1.trace.size(); ++i) {
      CHECK(r1.trace[i].client_id == r2.trace[i].client_id);
      CHECK(r1.trace[i].mean_loss == r2.trace[i].mean_loss);
    }
  }

  SUBCASE("trace structure: one row per client per round, loss decreases") {
    FedConfig cfg = tiny_fed();
    cfg.global_rounds = 3;
    std::vector<ClientState> clients;
    for (int k = 1; k <= 2; ++k)
      clients.push_back(make_client(k, 300 + static_cast<std::uint64_t>(k), {1}, cfg));
    const auto r = run_federated(clients, init, cfg);
    CHECK(r.trace.size() == 6);
    CHECK(r.trace[0].round == 1);
    CHECK(r.trace[5].round == 3);
  }
}

TEST_CASE("warm start seeds the server model from the fully-labeled client") {
  FedConfig cfg = tiny_fed();
  cfg.global_rounds = 0;
  cfg.warmstart_epochs = 2;
  const auto init = init_params(tiny_net(4));
  std::vector<ClientState> clients{make_client(1, 23, {1, 2, 3}, cfg),
                                   make_client(2, 24, {1}, cfg)};
  REQUIRE(clients[0].scheme.fully_labeled());
  const auto r = run_federated(clients, init, cfg);
  CHECK(r.weights.flat != init.flat);
  for (const TraceRow& row : r.trace) CHECK(row.round == 0);

  SUBCASE("no fully-labeled client -> error") {
    std::vector<ClientState> partial_only{make_client(2, 24, {1}, cfg)};
    CHECK_THROWS(run_federated(partial_only, init, cfg));
  }
}

TEST_CASE("lr decay rule") {
  LrDecay decay;
  double lr = 0.01;
  decay.observe_epoch(1.0, lr);
  CHECK(lr == 0.01);
  // nine stalls: no decay yet
  for (int i = 0; i < 9; ++i) decay.observe_epoch(1.0, lr);
  CHECK(lr == 0.01);
  // tenth consecutive stall triggers the 20% cut
  decay.observe_epoch(1.0, lr);
  CHECK(lr == doctest::Approx(0.008));
  // real improvement resets the counter
  decay.observe_epoch(0.5, lr);
  for (int i = 0; i < 9; ++i) decay.observe_epoch(0.5, lr);
  CHECK(lr == doctest::Approx(0.008));
}

TEST_CASE("central training decreases loss on a learnable task") {
  FedConfig cfg = tiny_fed();
  cfg.global_rounds = 1;
  cfg.client_iterations = 25;
  cfg.lr = 0.05;
  std::vector<ClientState> clients{make_client(1, 29, {1, 2, 3}, cfg, 6)};
  const auto init = init_params(tiny_net(4));
  const auto r = run_central(clients, init, cfg, 600);
  REQUIRE(r.trace.size() >= 2);
  CHECK(r.trace.back().mean_loss < 0.5 * r.trace.front().mean_loss);
}
