#pragma once

#include <set>
#include <string>
#include <vector>

#include "psfed/field.hpp"

namespace psfed {

/// Full label set: class 0 is always "background", classes 1..N-1 are organs.
struct LabelSpace {
  int num_classes = 0;
  std::vector<std::string> class_names;

  static LabelSpace organs(int n_foreground);
  void validate() const;
};

/// A site's merged label structure: a partition of the full classes into
/// merged classes. The merged class containing class 0 absorbs every
/// unlabeled organ; every labeled organ stays a singleton.
struct PartialScheme {
  LabelSpace space;
  std::vector<std::vector<int>> merged_classes;  // background-merged first
  std::set<int> labeled_foreground;
  std::vector<int> full_to_merged;  // size N

  int num_merged() const { return static_cast<int>(merged_classes.size()); }
  int num_full() const { return space.num_classes; }
  bool fully_labeled() const { return num_merged() == num_full(); }
  void validate() const;
};

PartialScheme make_scheme(const LabelSpace& space, const std::set<int>& labeled);

/// Per-class exclusive subsets: E[n] lists the classes whose presence at a
/// pixel certifies "this pixel is not class n". E[0] is always empty.
struct ExclusionSets {
  std::vector<std::vector<int>> per_class;

  int num_classes() const { return static_cast<int>(per_class.size()); }
  void validate() const;
};

// Default construction: E_n = labeled foreground of the scheme minus {n}
// for n >= 1; E_0 empty.
ExclusionSets default_exclusions(const PartialScheme& scheme);

std::vector<double> merge_onehot(const PartialScheme& scheme, int merged_label);
std::vector<double> exclusion_vector(const ExclusionSets& excl, int full_label);

// JSON wire format: {"num_classes": N, "labeled": [..]}
std::string scheme_to_json(const PartialScheme& scheme);
PartialScheme scheme_from_json(const std::string& json_text);

// Maps a full-class label image through the scheme's full->merged map.
LabelImage map_to_merged(const LabelImage& full, const PartialScheme& scheme);

}  // namespace psfed
