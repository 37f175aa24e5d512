#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "psfed/losses.hpp"
#include "support/standard_losses.hpp"
#include "support/testutil.hpp"

using namespace psfed;

namespace {

struct Instance {
  LogitField logits;
  LabelImage target;
  PartialScheme scheme;
  ExclusionSets excl;
};

// Random instance over N classes with a random partial scheme. Lovasz and
// Top-K values are piecewise linear; instances are resampled away from
// sort/selection ties so central differences see a smooth function.
Instance random_instance(Rng& rng, int n_classes, bool partial) {
  const LabelSpace space = LabelSpace::organs(n_classes - 1);
  for (int attempt = 0; attempt < 200; ++attempt) {
    std::set<int> labeled;
    if (partial) {
      for (int c = 1; c < n_classes; ++c)
        if (rng.uniform() < 0.6) labeled.insert(c);
      if (labeled.empty()) labeled.insert(1 + static_cast<int>(rng.uniform_int(
                               static_cast<std::uint64_t>(n_classes - 1))));
    } else {
      for (int c = 1; c < n_classes; ++c) labeled.insert(c);
    }
    Instance inst{testutil::random_logits(rng, 4, 4, n_classes),
                  LabelImage{},
                  make_scheme(space, labeled),
                  ExclusionSets{}};
    inst.target = testutil::random_labels(rng, 4, 4, inst.scheme.num_merged());
    inst.excl = default_exclusions(inst.scheme);

    // tie guards
    const auto q = marginalize(softmax(inst.logits), inst.scheme);
    bool ok = true;
    std::vector<double> ce(inst.logits.pixel_count());
    for (std::size_t i = 0; i < ce.size(); ++i)
      ce[i] = -std::log(q.data[i * q.channels + inst.target.labels[i]]);
    ok = ok && testutil::min_pairwise_gap(ce) > 1e-3;
    for (int m = 0; ok && m < inst.scheme.num_merged(); ++m) {
      std::vector<double> errors(ce.size());
      for (std::size_t i = 0; i < ce.size(); ++i) {
        const double qv = q.data[i * q.channels + m];
        errors[i] = inst.target.labels[i] == m ? 1.0 - qv : qv;
      }
      ok = ok && testutil::min_pairwise_gap(errors) > 1e-3;
    }
    if (!ok) continue;

    const auto p = softmax(inst.logits);
    std::vector<double> excl_pp(ce.size(), 0.0);
    const auto field = build_exclusion_field(inst.target, inst.scheme, inst.excl);
    for (std::size_t i = 0; i < ce.size(); ++i)
      for (int c = 0; c < n_classes; ++c)
        excl_pp[i] += field.data[i * n_classes + c] *
                      std::log(p.data[i * n_classes + c] + 1.0);
    if (testutil::selection_gap(excl_pp) <= 1e-3) continue;
    return inst;
  }
  throw std::runtime_error("could not sample a tie-free instance");
}

using LossFn = std::function<LossResult(const LogitField&, const Instance&,
                                        const LossConfig&)>;

void check_fd(const LossFn& fn, const char* name, bool partial_schemes,
              int instances_per_n = 6) {
  Rng rng(0xBEEF);
  LossConfig cfg;
  double worst = 0.0;
  for (int n_classes : {2, 3, 5}) {
    for (int k = 0; k < instances_per_n; ++k) {
      const Instance inst = random_instance(rng, n_classes, partial_schemes);
      const LossResult res = fn(inst.logits, inst, cfg);
      const auto fd = testutil::fd_gradient(
          inst.logits,
          [&](const LogitField& l) { return fn(l, inst, cfg).value; });
      worst = std::max(worst, testutil::max_rel_error(res.grad, fd));
    }
  }
  CHECK_MESSAGE(worst < 1e-4, name);
}

}  // namespace

TEST_CASE("finite-difference gradients, all loss terms") {
  check_fd([](const LogitField& l, const Instance& i, const LossConfig& c) {
    return marginal_dice(l, i.target, i.scheme, c);
  }, "marginal_dice", true);
  check_fd([](const LogitField& l, const Instance& i, const LossConfig& c) {
    return marginal_ce(l, i.target, i.scheme, c);
  }, "marginal_ce", true);
  check_fd([](const LogitField& l, const Instance& i, const LossConfig& c) {
    return marginal_focal(l, i.target, i.scheme, c);
  }, "marginal_focal", true);
  check_fd([](const LogitField& l, const Instance& i, const LossConfig& c) {
    return marginal_topk(l, i.target, i.scheme, c);
  }, "marginal_topk", true);
  check_fd([](const LogitField& l, const Instance& i, const LossConfig& c) {
    return marginal_lovasz(l, i.target, i.scheme, c);
  }, "marginal_lovasz", true);

  auto with_field = [](LossResult (*term)(const LogitField&, const Field&,
                                          const LossConfig&)) {
    return [term](const LogitField& l, const Instance& i, const LossConfig& c) {
      return term(l, build_exclusion_field(i.target, i.scheme, i.excl), c);
    };
  };
  check_fd(with_field(&exclusion_dice), "exclusion_dice", true);
  check_fd(with_field(&exclusion_ce), "exclusion_ce", true);
  check_fd(with_field(&exclusion_focal), "exclusion_focal", true);
  check_fd(with_field(&exclusion_topk), "exclusion_topk", true);
  check_fd(with_field(&exclusion_lovasz), "exclusion_lovasz", true);

  check_fd([](const LogitField& l, const Instance& i, const LossConfig& c) {
    return combined_loss(l, i.target, i.scheme, i.excl, c);
  }, "combined_loss", true);
}

TEST_CASE("reduction: fully-labeled marginal equals the standard loss") {
  Rng rng(0xFACE);
  LossConfig cfg;
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform_int(3));  // 2..4 classes
    const Instance inst = random_instance(rng, n, false);
    REQUIRE(inst.scheme.fully_labeled());

    const auto pairs = std::vector<std::pair<LossResult, LossResult>>{
        {marginal_dice(inst.logits, inst.target, inst.scheme, cfg),
         standard_losses::dice(inst.logits, inst.target, cfg.dice_smooth)},
        {marginal_ce(inst.logits, inst.target, inst.scheme, cfg),
         standard_losses::ce(inst.logits, inst.target)},
        {marginal_focal(inst.logits, inst.target, inst.scheme, cfg),
         standard_losses::focal(inst.logits, inst.target, cfg.gamma)},
        {marginal_topk(inst.logits, inst.target, inst.scheme, cfg),
         standard_losses::topk(inst.logits, inst.target, cfg.topk_fraction)},
        {marginal_lovasz(inst.logits, inst.target, inst.scheme, cfg),
         standard_losses::lovasz(inst.logits, inst.target)},
    };
    for (const auto& [marginal, standard] : pairs) {
      CHECK(std::abs(marginal.value - standard.value) < 1e-12);
      for (std::size_t i = 0; i < marginal.grad.data.size(); ++i)
        CHECK(std::abs(marginal.grad.data[i] - standard.grad.data[i]) < 1e-12);
    }
  }
}

TEST_CASE("nonnegativity of exclusion losses") {
  Rng rng(0xD1CE);
  LossConfig cfg;
  for (int trial = 0; trial < 30; ++trial) {
    const Instance inst = random_instance(rng, 3, true);
    const auto field = build_exclusion_field(inst.target, inst.scheme, inst.excl);
    CHECK(exclusion_dice(inst.logits, field, cfg).value >= 0.0);
    CHECK(exclusion_ce(inst.logits, field, cfg).value >= 0.0);
    CHECK(exclusion_focal(inst.logits, field, cfg).value >= 0.0);
    CHECK(exclusion_topk(inst.logits, field, cfg).value >= 0.0);
    CHECK(exclusion_lovasz(inst.logits, field, cfg).value >= 0.0);
  }
}

TEST_CASE("permutation equivariance") {
  Rng rng(0xFEED);
  LossConfig cfg;
  const Instance inst = random_instance(rng, 3, true);
  const std::size_t pixels = inst.logits.pixel_count();
  std::vector<int> perm(pixels);
  for (std::size_t i = 0; i < pixels; ++i) perm[i] = static_cast<int>(i);
  rng.shuffle(perm);

  Instance permuted = inst;
  const int n = inst.logits.channels;
  for (std::size_t i = 0; i < pixels; ++i) {
    const std::size_t j = static_cast<std::size_t>(perm[i]);
    for (int c = 0; c < n; ++c)
      permuted.logits.data[i * n + c] = inst.logits.data[j * n + c];
    permuted.target.labels[i] = inst.target.labels[j];
  }

  const auto check_pair = [&](const LossResult& base, const LossResult& moved) {
    CHECK(std::abs(base.value - moved.value) < 1e-12);
    for (std::size_t i = 0; i < pixels; ++i) {
      const std::size_t j = static_cast<std::size_t>(perm[i]);
      for (int c = 0; c < n; ++c)
        CHECK(std::abs(moved.grad.data[i * n + c] - base.grad.data[j * n + c]) <
              1e-12);
    }
  };
  check_pair(marginal_ce(inst.logits, inst.target, inst.scheme, cfg),
             marginal_ce(permuted.logits, permuted.target, permuted.scheme, cfg));
  check_pair(marginal_dice(inst.logits, inst.target, inst.scheme, cfg),
             marginal_dice(permuted.logits, permuted.target, permuted.scheme, cfg));
  check_pair(marginal_topk(inst.logits, inst.target, inst.scheme, cfg),
             marginal_topk(permuted.logits, permuted.target, permuted.scheme, cfg));
  check_pair(marginal_lovasz(inst.logits, inst.target, inst.scheme, cfg),
             marginal_lovasz(permuted.logits, permuted.target, permuted.scheme, cfg));
  check_pair(
      combined_loss(inst.logits, inst.target, inst.scheme, inst.excl, cfg),
      combined_loss(permuted.logits, permuted.target, permuted.scheme,
                    permuted.excl, cfg));
}
