#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "psfed/adaptation.hpp"
#include "support/testutil.hpp"

using namespace psfed;

namespace {

ClientState site_state(std::uint64_t seed) {
  FedConfig fed;
  fed.seed = 3;
  LossConfig loss;
  return ClientState::make(
      2, testutil::tiny_dataset(seed, 2, {1, 2}, 4, 2, 8, 8, 4), loss, fed);
}

ModelParams fed_model() {
  NetSpec spec;
  spec.base_width = 2;
  spec.depth = 1;
  spec.num_classes = 4;
  spec.seed = 55;
  return init_params(spec);
}

}  // namespace

TEST_CASE("adapt: epochs=0 is the identity") {
  const auto w = fed_model();
  const auto site = site_state(41);
  const auto out = adapt(w, site, AdaptMode::FTB, 0, 0.01);
  CHECK(out.flat == w.flat);
}

TEST_CASE("adapt: FTA with lr=0 is the identity") {
  const auto w = fed_model();
  const auto site = site_state(42);
  const auto out = adapt(w, site, AdaptMode::FTA, 2, 0.0);
  CHECK(out.flat == w.flat);
}

TEST_CASE("freeze contracts are bitwise") {
  const auto w = fed_model();
  const auto site = site_state(43);

  SUBCASE("FTB: encoder frozen, decoder moves") {
    const auto out = adapt(w, site, AdaptMode::FTB, 2, 0.05);
    const auto [eb, ee] = w.encoder_ranges[0];
    for (std::size_t i = eb; i < ee; ++i) CHECK(out.flat[i] == w.flat[i]);
    bool decoder_moved = false;
    const auto [db, de] = w.decoder_ranges[0];
    for (std::size_t i = db; i < de; ++i)
      decoder_moved = decoder_moved || out.flat[i] != w.flat[i];
    CHECK(decoder_moved);
  }
  SUBCASE("FTC: decoder frozen, encoder moves") {
    const auto out = adapt(w, site, AdaptMode::FTC, 2, 0.05);
    const auto [db, de] = w.decoder_ranges[0];
    for (std::size_t i = db; i < de; ++i) CHECK(out.flat[i] == w.flat[i]);
    bool encoder_moved = false;
    const auto [eb, ee] = w.encoder_ranges[0];
    for (std::size_t i = eb; i < ee; ++i)
      encoder_moved = encoder_moved || out.flat[i] != w.flat[i];
    CHECK(encoder_moved);
  }
}

TEST_CASE("adapt determinism") {
  const auto w = fed_model();
  const auto site_a = site_state(44);
  const auto site_b = site_state(44);
  const auto out_a = adapt(w, site_a, AdaptMode::FTA, 2, 0.02);
  const auto out_b = adapt(w, site_b, AdaptMode::FTA, 2, 0.02);
  CHECK(out_a.flat == out_b.flat);
}

TEST_CASE("mode names round trip") {
  for (AdaptMode m : {AdaptMode::FTA, AdaptMode::FTB, AdaptMode::FTC})
    CHECK(adapt_mode_from_name(adapt_mode_name(m)) == m);
  CHECK_THROWS_AS(adapt_mode_from_name("FTX"), std::invalid_argument);
}

TEST_CASE("empty site rejected") {
  const auto w = fed_model();
  ClientState empty;
  CHECK_THROWS_AS(adapt(w, empty, AdaptMode::FTA, 1, 0.01), std::invalid_argument);
}
