#include "psfed/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "psfed/pgm.hpp"
#include "psfed/rng.hpp"

namespace psfed {

namespace {

constexpr int kForegroundClasses = 5;
constexpr double kPi = 3.14159265358979323846;

// background + five organ-like classes, well separated in intensity
constexpr double kBaseIntensity[6] = {0.12, 0.30, 0.46, 0.60, 0.74, 0.88};

struct ShapeSet {
  // disk
  double d_cy, d_cx, d_r;
  // ellipse (axis-aligned)
  double e_cy, e_cx, e_a, e_b;
  // rectangle
  double r_cy, r_cx, r_hx, r_hy;
  // annulus
  double a_cy, a_cx, a_ro, a_ri;
  // triangle
  double t_cy, t_cx, t_h;
};

ShapeSet draw_shapes(Rng& rng) {
  ShapeSet s{};
  auto jit = [&] { return rng.uniform(-2.0, 2.0); };
  s.d_cy = 14 + jit(); s.d_cx = 14 + jit(); s.d_r = rng.uniform(6.5, 8.5);
  s.e_cy = 14 + jit(); s.e_cx = 48 + jit();
  s.e_a = rng.uniform(8.5, 10.5); s.e_b = rng.uniform(4.5, 6.0);
  s.r_cy = 34 + jit(); s.r_cx = 34 + jit();
  s.r_hx = rng.uniform(5.0, 7.0); s.r_hy = rng.uniform(5.0, 7.0);
  s.a_cy = 48 + jit(); s.a_cx = 14 + jit();
  s.a_ro = rng.uniform(7.5, 9.5); s.a_ri = s.a_ro - 3.5;
  s.t_cy = 48 + jit(); s.t_cx = 48 + jit(); s.t_h = rng.uniform(7.5, 9.5);
  return s;
}

// class id at a continuous point, 0 when no shape contains it
int class_at(const ShapeSet& s, double y, double x) {
  int hits = 0, cls = 0;
  {
    const double dy = y - s.d_cy, dx = x - s.d_cx;
    if (dy * dy + dx * dx <= s.d_r * s.d_r) { hits++; cls = 1; }
  }
  {
    const double dy = (y - s.e_cy) / s.e_b, dx = (x - s.e_cx) / s.e_a;
    if (dy * dy + dx * dx <= 1.0) { hits++; cls = 2; }
  }
  if (std::abs(y - s.r_cy) <= s.r_hy && std::abs(x - s.r_cx) <= s.r_hx) {
    hits++;
    cls = 3;
  }
  {
    const double dy = y - s.a_cy, dx = x - s.a_cx;
    const double d2 = dy * dy + dx * dx;
    if (d2 <= s.a_ro * s.a_ro && d2 >= s.a_ri * s.a_ri) { hits++; cls = 4; }
  }
  {
    // isoceles triangle: apex up, half-base 1.1*h
    const double dy = y - s.t_cy, dx = x - s.t_cx;
    if (dy >= -s.t_h && dy <= s.t_h) {
      const double half_w = 1.1 * (dy + s.t_h) / 2.0;
      if (std::abs(dx) <= half_w) { hits++; cls = 5; }
    }
  }
  if (hits > 1) return -1;  // overlap marker
  return hits == 1 ? cls : 0;
}

struct Warp {
  double amp, fy1, fx1, ph1, fy2, fx2, ph2;
};

Warp draw_warp(Rng& rng, double amp) {
  Warp w{};
  w.amp = amp;
  w.fy1 = rng.uniform(0.5, 1.5); w.fx1 = rng.uniform(0.5, 1.5);
  w.ph1 = rng.uniform(0.0, 2.0 * kPi);
  w.fy2 = rng.uniform(0.5, 1.5); w.fx2 = rng.uniform(0.5, 1.5);
  w.ph2 = rng.uniform(0.0, 2.0 * kPi);
  return w;
}

// Attempts one image; returns false when shapes overlap or a class leaves
// its size bounds.
bool try_make_sample(const SiteSpec& spec, Rng& rng, Sample& out) {
  const int h = spec.height, w = spec.width;
  const ShapeSet shapes = draw_shapes(rng);
  const Warp warp = draw_warp(rng, spec.deform_amp);

  LabelImage full(h, w);
  std::vector<int> counts(kForegroundClasses + 1, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double dy =
          warp.amp * std::sin(2.0 * kPi * (warp.fy1 * y / h + warp.fx1 * x / w) + warp.ph1);
      const double dx =
          warp.amp * std::sin(2.0 * kPi * (warp.fy2 * y / h + warp.fx2 * x / w) + warp.ph2);
      const int cls = class_at(shapes, y + dy, x + dx);
      if (cls < 0) return false;
      full.at(y, x) = static_cast<std::uint8_t>(cls);
      counts[cls]++;
    }

  const double pixels = static_cast<double>(h) * w;
  for (int c = 1; c <= kForegroundClasses; ++c) {
    const double frac = counts[c] / pixels;
    if (frac < 0.01 || frac > 0.20) return false;
  }

  // image: class intensity + site shift + noise, quantized to 8 bits so the
  // on-disk dataset round-trips exactly
  Field image(h, w, 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double v = kBaseIntensity[full.at(y, x)] + spec.intensity_shift +
                 spec.noise_sigma * rng.normal();
      v = std::clamp(v, 0.0, 1.0);
      const auto q = static_cast<int>(std::lround(v * 255.0));
      image.px(y, x)[0] = q / 255.0;
    }

  // learnability check: every class mean separated from background mean
  std::vector<double> sums(kForegroundClasses + 1, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) sums[full.at(y, x)] += image.px(y, x)[0];
  const double bg_mean = sums[0] / counts[0];
  for (int c = 1; c <= kForegroundClasses; ++c) {
    const double mean = sums[c] / counts[c];
    if (std::abs(mean - bg_mean) < spec.noise_sigma) return false;
  }

  out.image = std::move(image);
  out.full_mask = std::move(full);
  return true;
}

Sample make_sample(const SiteSpec& spec, const PartialScheme& scheme,
                   std::uint64_t image_index) {
  for (std::uint64_t attempt = 0; attempt < 64; ++attempt) {
    Rng rng(derive_seed(spec.seed, image_index, attempt));
    Sample s;
    if (try_make_sample(spec, rng, s)) {
      s.visible_mask = map_to_merged(s.full_mask, scheme);
      return s;
    }
  }
  throw std::runtime_error("generate_site: placement retry budget exhausted");
}

}  // namespace

void SiteSpec::validate() const {
  if (n_train < 1 || n_test < 1)
    throw std::invalid_argument("SiteSpec: counts must be >= 1");
  if (noise_sigma < 0.0)
    throw std::invalid_argument("SiteSpec: noise_sigma must be >= 0");
  if (height < 8 || width < 8)
    throw std::invalid_argument("SiteSpec: image too small");
  if (labeled.empty())
    throw std::invalid_argument("SiteSpec: need at least one labeled class");
}

ClientDataset generate_site(const SiteSpec& spec, const LabelSpace& space) {
  spec.validate();
  ClientDataset ds;
  ds.spec = spec;
  ds.scheme = make_scheme(space, spec.labeled);
  ds.train.reserve(spec.n_train);
  ds.test.reserve(spec.n_test);
  for (int i = 0; i < spec.n_train; ++i)
    ds.train.push_back(make_sample(spec, ds.scheme, static_cast<std::uint64_t>(i)));
  for (int i = 0; i < spec.n_test; ++i)
    ds.test.push_back(make_sample(spec, ds.scheme,
                                  0x10000ULL + static_cast<std::uint64_t>(i)));
  return ds;
}

std::vector<SiteSpec> default_benchmark_specs(std::uint64_t seed) {
  std::vector<SiteSpec> specs(5);
  specs[0] = {1, {1, 2, 3, 4, 5}, 24, 6, 0.00, 0.020, 0.6, derive_seed(seed, 1)};
  specs[1] = {2, {1}, 40, 10, 0.05, 0.030, 1.2, derive_seed(seed, 2)};
  specs[2] = {3, {2}, 16, 4, -0.05, 0.025, 0.9, derive_seed(seed, 3)};
  specs[3] = {4, {3}, 48, 12, 0.03, 0.035, 1.5, derive_seed(seed, 4)};
  specs[4] = {5, {4, 5}, 40, 10, -0.03, 0.030, 1.0, derive_seed(seed, 5)};
  return specs;
}

std::vector<ClientDataset> default_benchmark(std::uint64_t seed) {
  const LabelSpace space = LabelSpace::organs(kForegroundClasses);
  std::vector<ClientDataset> out;
  for (const SiteSpec& spec : default_benchmark_specs(seed))
    out.push_back(generate_site(spec, space));
  return out;
}

namespace {

std::string sample_name(const char* split, int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%03d.pgm", split, i);
  return buf;
}

std::vector<std::uint8_t> image_to_bytes(const Field& img) {
  std::vector<std::uint8_t> bytes(img.pixel_count());
  for (std::size_t i = 0; i < bytes.size(); ++i)
    bytes[i] = static_cast<std::uint8_t>(std::lround(img.data[i] * 255.0));
  return bytes;
}

void save_sample(const std::filesystem::path& dir, const char* split, int i,
                 const Sample& s) {
  write_pgm(dir / "images" / sample_name(split, i), s.image.height,
            s.image.width, image_to_bytes(s.image));
  write_pgm(dir / "masks_full" / sample_name(split, i), s.full_mask.height,
            s.full_mask.width, s.full_mask.labels);
  write_pgm(dir / "masks_visible" / sample_name(split, i), s.visible_mask.height,
            s.visible_mask.width, s.visible_mask.labels);
}

Sample load_sample(const std::filesystem::path& dir, const char* split, int i,
                   const PartialScheme& scheme) {
  Sample s;
  const PgmImage img = read_pgm(dir / "images" / sample_name(split, i));
  s.image = Field(img.height, img.width, 1);
  for (std::size_t k = 0; k < img.pixels.size(); ++k)
    s.image.data[k] = img.pixels[k] / 255.0;

  const PgmImage full = read_pgm(dir / "masks_full" / sample_name(split, i));
  s.full_mask = LabelImage(full.height, full.width);
  s.full_mask.labels = full.pixels;

  const PgmImage vis = read_pgm(dir / "masks_visible" / sample_name(split, i));
  s.visible_mask = LabelImage(vis.height, vis.width);
  s.visible_mask.labels = vis.pixels;

  const LabelImage expected = map_to_merged(s.full_mask, scheme);
  if (expected.labels != s.visible_mask.labels)
    throw std::runtime_error("dataset corrupt: visible mask does not match scheme");
  return s;
}

}  // namespace

void save_dataset(const std::filesystem::path& root, const ClientDataset& ds) {
  const auto dir = root / ("site" + std::to_string(ds.spec.site_id));
  std::filesystem::create_directories(dir / "images");
  std::filesystem::create_directories(dir / "masks_full");
  std::filesystem::create_directories(dir / "masks_visible");

  nlohmann::json manifest;
  manifest["site_id"] = ds.spec.site_id;
  manifest["height"] = ds.spec.height;
  manifest["width"] = ds.spec.width;
  manifest["n_train"] = ds.spec.n_train;
  manifest["n_test"] = ds.spec.n_test;
  manifest["intensity_shift"] = ds.spec.intensity_shift;
  manifest["noise_sigma"] = ds.spec.noise_sigma;
  manifest["deform_amp"] = ds.spec.deform_amp;
  manifest["seed"] = ds.spec.seed;
  manifest["scheme"] = nlohmann::json::parse(scheme_to_json(ds.scheme));
  std::ofstream mf(dir / "manifest.json");
  mf << manifest.dump(2) << "\n";
  if (!mf) throw std::runtime_error("cannot write manifest for site " +
                                    std::to_string(ds.spec.site_id));
  mf.close();

  for (int i = 0; i < ds.spec.n_train; ++i) save_sample(dir, "train", i, ds.train[i]);
  for (int i = 0; i < ds.spec.n_test; ++i) save_sample(dir, "test", i, ds.test[i]);
}

ClientDataset load_dataset(const std::filesystem::path& site_dir) {
  std::ifstream mf(site_dir / "manifest.json");
  if (!mf) throw std::runtime_error("missing manifest: " + site_dir.string());
  nlohmann::json manifest;
  mf >> manifest;

  ClientDataset ds;
  ds.spec.site_id = manifest.at("site_id").get<int>();
  ds.spec.height = manifest.at("height").get<int>();
  ds.spec.width = manifest.at("width").get<int>();
  ds.spec.n_train = manifest.at("n_train").get<int>();
  ds.spec.n_test = manifest.at("n_test").get<int>();
  ds.spec.intensity_shift = manifest.at("intensity_shift").get<double>();
  ds.spec.noise_sigma = manifest.at("noise_sigma").get<double>();
  ds.spec.deform_amp = manifest.at("deform_amp").get<double>();
  ds.spec.seed = manifest.at("seed").get<std::uint64_t>();

  const auto& scheme_json = manifest.at("scheme");
  const int n = scheme_json.at("num_classes").get<int>();
  for (const auto& c : scheme_json.at("labeled"))
    ds.spec.labeled.insert(c.get<int>());
  ds.scheme = make_scheme(LabelSpace::organs(n - 1), ds.spec.labeled);

  for (int i = 0; i < ds.spec.n_train; ++i)
    ds.train.push_back(load_sample(site_dir, "train", i, ds.scheme));
  for (int i = 0; i < ds.spec.n_test; ++i)
    ds.test.push_back(load_sample(site_dir, "test", i, ds.scheme));
  return ds;
}

std::vector<ClientDataset> load_all_sites(const std::filesystem::path& root) {
  std::vector<ClientDataset> out;
  for (int k = 1;; ++k) {
    const auto dir = root / ("site" + std::to_string(k));
    if (!std::filesystem::exists(dir / "manifest.json")) break;
    out.push_back(load_dataset(dir));
  }
  if (out.empty())
    throw std::runtime_error("no site directories under " + root.string());
  return out;
}

}  // namespace psfed
