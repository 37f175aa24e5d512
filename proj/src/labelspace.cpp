#include "psfed/labelspace.hpp"

#include <algorithm>
#include <stdexcept>

#include <json.hpp>

namespace psfed {

LabelSpace LabelSpace::organs(int n_foreground) {
  LabelSpace s;
  s.num_classes = n_foreground + 1;
  s.class_names.push_back("background");
  for (int i = 1; i <= n_foreground; ++i)
    s.class_names.push_back("organ" + std::to_string(i));
  s.validate();
  return s;
}

void LabelSpace::validate() const {
  if (num_classes < 2) throw std::invalid_argument("LabelSpace: need N >= 2");
  if (static_cast<int>(class_names.size()) != num_classes)
    throw std::invalid_argument("LabelSpace: name count != N");
  if (class_names[0] != "background")
    throw std::invalid_argument("LabelSpace: class 0 must be background");
  std::set<std::string> uniq(class_names.begin(), class_names.end());
  if (static_cast<int>(uniq.size()) != num_classes)
    throw std::invalid_argument("LabelSpace: duplicate class names");
}

void PartialScheme::validate() const {
  space.validate();
  const int n = space.num_classes;
  std::vector<int> seen(n, 0);
  std::size_t total = 0;
  for (const auto& phi : merged_classes) {
    if (phi.empty()) throw std::invalid_argument("PartialScheme: empty merged class");
    total += phi.size();
    for (int c : phi) {
      if (c < 0 || c >= n) throw std::invalid_argument("PartialScheme: class out of range");
      if (seen[c]++) throw std::invalid_argument("PartialScheme: class in two merged classes");
    }
  }
  if (total != static_cast<std::size_t>(n))
    throw std::invalid_argument("PartialScheme: merged classes do not partition the label set");
  // background lives in the first merged class by construction
  const auto& bg = merged_classes.front();
  if (std::find(bg.begin(), bg.end(), 0) == bg.end())
    throw std::invalid_argument("PartialScheme: first merged class must contain background");
  for (int c : labeled_foreground) {
    bool singleton = false;
    for (const auto& phi : merged_classes)
      if (phi.size() == 1 && phi[0] == c) singleton = true;
    if (!singleton)
      throw std::invalid_argument("PartialScheme: labeled class is not a singleton");
  }
  if (full_to_merged.size() != static_cast<std::size_t>(n))
    throw std::invalid_argument("PartialScheme: bad full->merged map");
}

PartialScheme make_scheme(const LabelSpace& space, const std::set<int>& labeled) {
  space.validate();
  const int n = space.num_classes;
  for (int c : labeled)
    if (c <= 0 || c >= n)
      throw std::invalid_argument("make_scheme: labeled class out of range (got " +
                                  std::to_string(c) + ")");

  PartialScheme scheme;
  scheme.space = space;
  scheme.labeled_foreground = labeled;

  std::vector<int> background_merged{0};
  for (int c = 1; c < n; ++c)
    if (!labeled.count(c)) background_merged.push_back(c);
  scheme.merged_classes.push_back(std::move(background_merged));
  for (int c = 1; c < n; ++c)
    if (labeled.count(c)) scheme.merged_classes.push_back({c});

  scheme.full_to_merged.assign(n, -1);
  for (int m = 0; m < scheme.num_merged(); ++m)
    for (int c : scheme.merged_classes[m]) scheme.full_to_merged[c] = m;

  scheme.validate();
  return scheme;
}

void ExclusionSets::validate() const {
  const int n = num_classes();
  if (n < 2) throw std::invalid_argument("ExclusionSets: need N >= 2");
  if (!per_class[0].empty())
    throw std::invalid_argument("ExclusionSets: E_0 must be empty");
  for (int c = 0; c < n; ++c)
    for (int e : per_class[c]) {
      if (e < 0 || e >= n) throw std::invalid_argument("ExclusionSets: class out of range");
      if (e == c) throw std::invalid_argument("ExclusionSets: class excludes itself");
    }
}

ExclusionSets default_exclusions(const PartialScheme& scheme) {
  const int n = scheme.num_full();
  ExclusionSets excl;
  excl.per_class.resize(n);
  for (int c = 1; c < n; ++c)
    for (int l : scheme.labeled_foreground)
      if (l != c) excl.per_class[c].push_back(l);
  excl.validate();
  return excl;
}

std::vector<double> merge_onehot(const PartialScheme& scheme, int merged_label) {
  const int m = scheme.num_merged();
  if (merged_label < 0 || merged_label >= m)
    throw std::invalid_argument("merge_onehot: label out of range");
  std::vector<double> v(m, 0.0);
  v[merged_label] = 1.0;
  return v;
}

std::vector<double> exclusion_vector(const ExclusionSets& excl, int full_label) {
  const int n = excl.num_classes();
  if (full_label < 0 || full_label >= n)
    throw std::invalid_argument("exclusion_vector: label out of range");
  std::vector<double> e(n, 0.0);
  for (int c = 0; c < n; ++c)
    for (int member : excl.per_class[c])
      if (member == full_label) e[c] = 1.0;
  return e;
}

std::string scheme_to_json(const PartialScheme& scheme) {
  nlohmann::json j;
  j["num_classes"] = scheme.num_full();
  j["labeled"] = std::vector<int>(scheme.labeled_foreground.begin(),
                                  scheme.labeled_foreground.end());
  return j.dump();
}

PartialScheme scheme_from_json(const std::string& json_text) {
  const auto j = nlohmann::json::parse(json_text);
  const int n = j.at("num_classes").get<int>();
  std::set<int> labeled;
  for (const auto& c : j.at("labeled")) labeled.insert(c.get<int>());
  return make_scheme(LabelSpace::organs(n - 1), labeled);
}

LabelImage map_to_merged(const LabelImage& full, const PartialScheme& scheme) {
  LabelImage merged(full.height, full.width);
  for (std::size_t i = 0; i < full.labels.size(); ++i) {
    const int c = full.labels[i];
    if (c < 0 || c >= scheme.num_full())
      throw std::invalid_argument("map_to_merged: label out of range");
    merged.labels[i] = static_cast<std::uint8_t>(scheme.full_to_merged[c]);
  }
  return merged;
}

}  // namespace psfed
