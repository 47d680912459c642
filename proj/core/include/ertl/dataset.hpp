#pragma once

#include <string>
#include <vector>

#include "ertl/types.hpp"

namespace ertl {

/// A labeled pairwise dataset. Source indices in examples refer to
/// positions in `sources`; every example shares dimension `dim`.
struct Dataset {
  std::vector<std::string> sources;
  std::vector<std::string> feature_names;
  int dim = 0;
  std::vector<LabeledExample> examples;

  int n_sources() const { return static_cast<int>(sources.size()); }
  int size() const { return static_cast<int>(examples.size()); }

  /// Checks dimensions, source indices, labels and finiteness.
  /// Throws ValidationError on the first violation found.
  void validate() const;
};

}  // namespace ertl
