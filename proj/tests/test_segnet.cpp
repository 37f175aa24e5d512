#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>

#include "psfed/losses.hpp"
#include "psfed/segnet.hpp"
#include "support/testutil.hpp"

using namespace psfed;

namespace {

Field random_image(Rng& rng, int h, int w, int c = 1) {
  Field img(h, w, c);
  for (double& v : img.data) v = rng.uniform(0.0, 1.0);
  return img;
}

// Fully naive reference forward pass, reading tensors by layout name.
struct NaiveNet {
  const ModelParams& params;
  std::map<std::string, const TensorInfo*> by_name;

  explicit NaiveNet(const ModelParams& p) : params(p) {
    for (const TensorInfo& t : p.layout) by_name[t.name] = &t;
  }

  const double* tensor(const std::string& name, std::vector<int>* shape = nullptr) const {
    const TensorInfo* t = by_name.at(name);
    if (shape != nullptr) *shape = t->shape;
    return params.flat.data() + t->offset;
  }

  static double at(const Field& f, int y, int x, int c) {
    if (y < 0 || y >= f.height || x < 0 || x >= f.width) return 0.0;
    return f.px(y, x)[c];
  }

  Field conv(const Field& in, const std::string& name, bool relu) const {
    std::vector<int> shape;
    const double* w = tensor(name + ".weight", &shape);
    const double* b = tensor(name + ".bias");
    const int cout = shape[0], k = shape[1], cin = shape[3];
    Field out(in.height, in.width, cout);
    const int r = k / 2;
    for (int y = 0; y < in.height; ++y)
      for (int x = 0; x < in.width; ++x)
        for (int co = 0; co < cout; ++co) {
          double acc = b[co];
          for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx)
              for (int ci = 0; ci < cin; ++ci)
                acc += at(in, y + ky - r, x + kx - r, ci) *
                       w[((static_cast<std::size_t>(co) * k + ky) * k + kx) * cin + ci];
          out.px(y, x)[co] = relu ? std::max(acc, 0.0) : acc;
        }
    return out;
  }

  static Field pool(const Field& in) {
    Field out(in.height / 2, in.width / 2, in.channels);
    for (int y = 0; y < out.height; ++y)
      for (int x = 0; x < out.width; ++x)
        for (int c = 0; c < in.channels; ++c) {
          double best = in.px(2 * y, 2 * x)[c];
          best = std::max(best, in.px(2 * y, 2 * x + 1)[c]);
          best = std::max(best, in.px(2 * y + 1, 2 * x)[c]);
          best = std::max(best, in.px(2 * y + 1, 2 * x + 1)[c]);
          out.px(y, x)[c] = best;
        }
    return out;
  }

  static Field up_concat(const Field& below, const Field& skip) {
    Field out(skip.height, skip.width, below.channels + skip.channels);
    for (int y = 0; y < out.height; ++y)
      for (int x = 0; x < out.width; ++x) {
        for (int c = 0; c < below.channels; ++c)
          out.px(y, x)[c] = below.px(y / 2, x / 2)[c];
        for (int c = 0; c < skip.channels; ++c)
          out.px(y, x)[below.channels + c] = skip.px(y, x)[c];
      }
    return out;
  }

  LogitField run(const Field& image) const {
    const int depth = params.spec.depth;
    std::vector<Field> skips;
    Field cur = image;
    for (int l = 0; l < depth; ++l) {
      cur = conv(cur, "enc" + std::to_string(l) + ".conv1", true);
      cur = conv(cur, "enc" + std::to_string(l) + ".conv2", true);
      skips.push_back(cur);
      cur = pool(cur);
    }
    cur = conv(cur, "bottom.conv1", true);
    cur = conv(cur, "bottom.conv2", true);
    for (int l = depth - 1; l >= 0; --l) {
      cur = up_concat(cur, skips[static_cast<std::size_t>(l)]);
      cur = conv(cur, "dec" + std::to_string(l) + ".conv1", true);
      cur = conv(cur, "dec" + std::to_string(l) + ".conv2", true);
    }
    return conv(cur, "head", false);
  }
};

}  // namespace

TEST_CASE("init_params determinism and layout") {
  NetSpec spec;
  spec.num_classes = 6;
  spec.seed = 77;
  const auto a = init_params(spec);
  const auto b = init_params(spec);
  CHECK(a.flat == b.flat);

  NetSpec other = spec;
  other.seed = 78;
  CHECK(init_params(other).flat != a.flat);

  SUBCASE("parameter count matches the analytic formula") {
    // depth 2, width 8, in 1, N 6
    auto conv_params = [](int cout, int k, int cin) {
      return static_cast<std::size_t>(cout) * k * k * cin + cout;
    };
    std::size_t expected = 0;
    expected += conv_params(8, 3, 1) + conv_params(8, 3, 8);        // enc0
    expected += conv_params(16, 3, 8) + conv_params(16, 3, 16);     // enc1
    expected += conv_params(32, 3, 16) + conv_params(32, 3, 32);    // bottom
    expected += conv_params(16, 3, 48) + conv_params(16, 3, 16);    // dec1
    expected += conv_params(8, 3, 24) + conv_params(8, 3, 8);       // dec0
    expected += conv_params(6, 1, 8);                               // head
    CHECK(a.flat.size() == expected);
  }

  SUBCASE("encoder/decoder ranges partition the vector") {
    REQUIRE(a.encoder_ranges.size() == 1);
    REQUIRE(a.decoder_ranges.size() == 1);
    CHECK(a.encoder_ranges[0].first == 0);
    CHECK(a.encoder_ranges[0].second == a.decoder_ranges[0].first);
    CHECK(a.decoder_ranges[0].second == a.flat.size());
  }

  SUBCASE("biases start at zero") {
    for (const TensorInfo& t : a.layout) {
      if (t.shape.size() != 1) continue;
      for (std::size_t i = 0; i < t.size; ++i) CHECK(a.flat[t.offset + i] == 0.0);
    }
  }
}

TEST_CASE("forward: shapes, zero weights, divisibility error") {
  NetSpec spec;
  spec.num_classes = 4;
  spec.seed = 5;
  auto params = init_params(spec);
  Rng rng(1);
  const auto img = random_image(rng, 16, 8);

  const auto logits = forward(params, img);
  CHECK(logits.height == 16);
  CHECK(logits.width == 8);
  CHECK(logits.channels == 4);

  SUBCASE("all-zero weights give all-zero logits") {
    std::fill(params.flat.begin(), params.flat.end(), 0.0);
    const auto z = forward(params, img);
    for (double v : z.data) CHECK(v == 0.0);
  }
  SUBCASE("bad spatial size") {
    const auto bad = random_image(rng, 10, 8);  // 10 % 4 != 0
    CHECK_THROWS_AS(forward(params, bad), std::invalid_argument);
  }
}

TEST_CASE("forward matches the naive reference") {
  NetSpec spec;
  spec.num_classes = 3;
  spec.base_width = 4;
  spec.depth = 2;
  spec.seed = 1234;
  const auto params = init_params(spec);
  Rng rng(2);
  const auto img = random_image(rng, 8, 8);
  const auto fast = forward(params, img);
  const auto naive = NaiveNet(params).run(img);
  REQUIRE(fast.data.size() == naive.data.size());
  for (std::size_t i = 0; i < fast.data.size(); ++i)
    CHECK(fast.data[i] == doctest::Approx(naive.data[i]).epsilon(1e-9));
}

TEST_CASE("backward: zero upstream, finite differences") {
  NetSpec spec;
  spec.num_classes = 3;
  spec.base_width = 2;
  spec.depth = 1;
  spec.seed = 99;
  const auto params = init_params(spec);
  Rng rng(3);
  const auto img = random_image(rng, 8, 8);

  SUBCASE("zero upstream -> zero parameter grad") {
    const Field upstream(8, 8, 3, 0.0);
    const auto grad = backward(params, img, upstream);
    for (double g : grad) CHECK(g == 0.0);
  }

  SUBCASE("contraction gradient matches finite differences") {
    Field upstream(8, 8, 3);
    for (double& v : upstream.data) v = rng.uniform(-1.0, 1.0);
    const auto grad = backward(params, img, upstream);

    auto objective = [&](const ModelParams& p) {
      const auto logits = forward(p, img);
      double acc = 0.0;
      for (std::size_t i = 0; i < logits.data.size(); ++i)
        acc += logits.data[i] * upstream.data[i];
      return acc;
    };

    ModelParams probe = params;
    const double step = 1e-6;
    Rng pick(4);
    for (int k = 0; k < 20; ++k) {
      const std::size_t i = static_cast<std::size_t>(
          pick.uniform_int(static_cast<std::uint64_t>(probe.flat.size())));
      const double orig = probe.flat[i];
      probe.flat[i] = orig + step;
      const double hi = objective(probe);
      probe.flat[i] = orig - step;
      const double lo = objective(probe);
      probe.flat[i] = orig;
      const double fd = (hi - lo) / (2.0 * step);
      if (std::abs(fd) > 1e-8 || std::abs(grad[i]) > 1e-8)
        CHECK(std::abs(grad[i] - fd) / std::max(std::abs(fd), std::abs(grad[i])) <
              1e-4);
    }
  }

  SUBCASE("end-to-end loss gradient matches finite differences") {
    const auto scheme = make_scheme(LabelSpace::organs(2), {1, 2});
    const auto excl = default_exclusions(scheme);
    LossConfig cfg;
    Rng lrng(6);
    const auto target = testutil::random_labels(lrng, 8, 8, 3);

    auto loss_of = [&](const ModelParams& p) {
      return combined_loss(forward(p, img), target, scheme, excl, cfg).value;
    };
    const auto fwd = forward_with_tape(params, img);
    const auto loss = combined_loss(fwd.logits, target, scheme, excl, cfg);
    const auto grad = backward_from_tape(params, *fwd.tape, loss.grad);

    ModelParams probe = params;
    const double step = 1e-5;
    Rng pick(7);
    for (int k = 0; k < 20; ++k) {
      const std::size_t i = static_cast<std::size_t>(
          pick.uniform_int(static_cast<std::uint64_t>(probe.flat.size())));
      const double orig = probe.flat[i];
      probe.flat[i] = orig + step;
      const double hi = loss_of(probe);
      probe.flat[i] = orig - step;
      const double lo = loss_of(probe);
      probe.flat[i] = orig;
      const double fd = (hi - lo) / (2.0 * step);
      if (std::abs(fd) > 1e-8 || std::abs(grad[i]) > 1e-8)
        CHECK(std::abs(grad[i] - fd) / std::max(std::abs(fd), std::abs(grad[i])) <
              1e-4);
    }
  }
}

TEST_CASE("sgd_step and freezing") {
  NetSpec spec;
  spec.num_classes = 3;
  spec.base_width = 2;
  spec.depth = 1;
  spec.seed = 11;
  auto params = init_params(spec);
  std::vector<double> grad(params.flat.size(), 1.0);

  SUBCASE("lr=0 leaves params unchanged") {
    const auto before = params.flat;
    sgd_step(params, grad, 0.0);
    CHECK(params.flat == before);
  }
  SUBCASE("freeze everything leaves params bit-unchanged") {
    const auto before = params.flat;
    const IndexRanges all{{0, params.flat.size()}};
    sgd_step(params, grad, 0.5, &all);
    CHECK(params.flat == before);
  }
  SUBCASE("single scalar update is exact") {
    const double w0 = params.flat[3];
    IndexRanges freeze{{0, 3}, {4, params.flat.size()}};
    sgd_step(params, grad, 0.25, &freeze);
    CHECK(params.flat[3] == w0 - 0.25 * 1.0);
  }
  SUBCASE("frozen encoder entries stay put, decoder moves") {
    const auto before = params.flat;
    sgd_step(params, grad, 0.1, &params.encoder_ranges);
    const auto [eb, ee] = params.encoder_ranges[0];
    for (std::size_t i = eb; i < ee; ++i) CHECK(params.flat[i] == before[i]);
    const auto [db, de] = params.decoder_ranges[0];
    for (std::size_t i = db; i < de; ++i) CHECK(params.flat[i] == before[i] - 0.1);
  }
}

TEST_CASE("checkpoint round trip") {
  NetSpec spec;
  spec.num_classes = 5;
  spec.seed = 21;
  const auto params = init_params(spec);
  const auto path = std::filesystem::temp_directory_path() / "psfed_ckpt_test.ckpt";
  save_checkpoint(path, params);
  const auto loaded = load_checkpoint(path);
  CHECK(loaded.spec.num_classes == 5);
  CHECK(loaded.flat.size() == params.flat.size());
  // f32 storage: values agree to float precision and re-saving is stable
  for (std::size_t i = 0; i < params.flat.size(); ++i)
    CHECK(loaded.flat[i] == doctest::Approx(params.flat[i]).epsilon(1e-6));
  const auto path2 = std::filesystem::temp_directory_path() / "psfed_ckpt_test2.ckpt";
  save_checkpoint(path2, loaded);
  const auto reloaded = load_checkpoint(path2);
  CHECK(reloaded.flat == loaded.flat);
  std::filesystem::remove(path);
  std::filesystem::remove(path2);
}
