#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <vector>

#include "psfed/field.hpp"
#include "psfed/labelspace.hpp"

namespace psfed {

struct SiteSpec {
  int site_id = 0;
  std::set<int> labeled;  // foreground classes annotated at this site
  int n_train = 1;
  int n_test = 1;
  double intensity_shift = 0.0;
  double noise_sigma = 0.0;
  double deform_amp = 0.0;
  std::uint64_t seed = 0;
  int height = 64;
  int width = 64;

  void validate() const;
};

struct Sample {
  Field image;              // single channel, values in [0,1] (8-bit quantized)
  LabelImage full_mask;     // ground truth over all N classes (evaluation only)
  LabelImage visible_mask;  // merged labels under the site's scheme (training)
};

struct ClientDataset {
  SiteSpec spec;
  PartialScheme scheme;
  std::vector<Sample> train;
  std::vector<Sample> test;

  int sample_count() const { return static_cast<int>(train.size()); }
};

// Five organ-like shapes (disk, ellipse, rectangle, annulus, triangle) on a
// 64x64 canvas with per-site intensity shift, Gaussian noise and a smooth
// random warp. Deterministic per spec.
ClientDataset generate_site(const SiteSpec& spec, const LabelSpace& space);

// Five sites mirroring the benchmark structure: one small fully-annotated
// site, three single-organ sites, one two-organ site, each with its own
// domain-shift parameters.
std::vector<SiteSpec> default_benchmark_specs(std::uint64_t seed);
std::vector<ClientDataset> default_benchmark(std::uint64_t seed);

// On-disk layout: <root>/site<k>/manifest.json + images/*.pgm +
// masks_full/*.pgm + masks_visible/*.pgm (class indices as pixel values).
void save_dataset(const std::filesystem::path& root, const ClientDataset& ds);
ClientDataset load_dataset(const std::filesystem::path& site_dir);
std::vector<ClientDataset> load_all_sites(const std::filesystem::path& root);

}  // namespace psfed
