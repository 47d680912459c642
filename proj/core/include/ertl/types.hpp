#pragma once

#include <string>
#include <vector>

namespace ertl {

/// Dense index plus human-readable name of a data source. Indices are
/// assigned by position in a dataset's (or model's) source list.
struct SourceId {
  int index = -1;
  std::string name;
};

/// Unordered pair of distinct source indices, stored canonically with
/// a < b so that (i,j) and (j,i) compare and hash identically.
struct SourcePair {
  int a = 0;
  int b = 1;

  /// Builds the canonical pair. Throws std::invalid_argument when i == j
  /// or either index is negative.
  static SourcePair of(int i, int j);

  friend bool operator==(const SourcePair&, const SourcePair&) = default;
  friend auto operator<=>(const SourcePair&, const SourcePair&) = default;
};

using FeatureVector = std::vector<double>;

/// One training unit: pairwise feature scores, the source pair the two
/// records came from, and a ±1 match label.
struct LabeledExample {
  FeatureVector x;
  SourcePair pair;
  int y = 1;  // +1 match, -1 non-match
};

/// Maps a raw I/O label (accepts 0/1 and -1/+1) to the internal ±1 form.
int canonical_label(int raw);

}  // namespace ertl
