#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ertl/types.hpp"

namespace ertl {

/// A raw entity record. Movie-style records carry title/cast/etc; records
/// produced by the synthetic generator instead carry a numeric attribute
/// vector in `attrs`. Absent optionals mean the attribute is missing.
struct RawRecord {
  int source = -1;
  std::string id;
  std::string title;
  std::vector<std::string> alt_titles;
  std::optional<int> year;
  std::optional<int> runtime;  // minutes
  std::vector<std::string> cast;
  std::vector<std::string> directors;
  std::vector<double> attrs;  // numeric attributes (synthetic records)
};

enum class FeatureKind {
  kJaccardTitle,      // token sets of title plus alt titles
  kJaccardCast,
  kJaccardDirectors,
  kAbsDiffYear,       // -|a-b|, 0 when either side missing
  kAbsDiffRuntime,
  kAbsDiffAttr,       // -|attrs[attr_index] difference|
};

struct FeatureDef {
  std::string name;
  FeatureKind kind;
  int attr_index = -1;  // only for kAbsDiffAttr
};

/// Ordered feature definitions; dimension and names of the produced
/// feature vectors.
struct FeatureSpec {
  std::vector<FeatureDef> features;

  int dim() const { return static_cast<int>(features.size()); }
  std::vector<std::string> names() const;

  /// The movie default: jaccard(title), jaccard(cast), jaccard(directors),
  /// absdiff(year), absdiff(runtime).
  static FeatureSpec movie();
  /// One -|difference| feature per numeric attribute.
  static FeatureSpec numeric(int n_attrs);
};

/// Lowercases, strips punctuation (replaced by spaces), collapses runs of
/// whitespace and trims every string field. Idempotent. Empty list entries
/// are dropped; an empty title after cleanup is a ValidationError.
RawRecord normalize_record(const RawRecord& r);

/// Whitespace tokens of the (normalized) title and alt titles, sorted and
/// deduplicated.
std::vector<std::string> title_tokens(const RawRecord& r);

/// |a∩b| / |a∪b| on sorted, deduplicated token lists. Two empty sets give
/// 1.0: both entities lacking an attribute is not evidence of mismatch.
double jaccard(std::span<const std::string> a, std::span<const std::string> b);

/// -|a-b| when both present (negated so that larger means more similar),
/// 0 when either side is missing.
double absdiff_score(std::optional<double> a, std::optional<double> b);

/// Pairwise feature scores under `spec`. Records must be normalized.
/// Symmetric: featurize_pair(r1, r2) == featurize_pair(r2, r1).
FeatureVector featurize_pair(const RawRecord& r1, const RawRecord& r2,
                             const FeatureSpec& spec);

/// Per-feature location/scale transform fitted on training vectors only.
struct Standardizer {
  std::vector<double> means;
  std::vector<double> stds;  // population formula; zero-variance columns get 1

  int dim() const { return static_cast<int>(means.size()); }
  FeatureVector apply(std::span<const double> v) const;
  FeatureVector unapply(std::span<const double> v) const;
};

/// Fits means and population standard deviations. Throws
/// std::invalid_argument on an empty fit set.
Standardizer fit_standardizer(std::span<const FeatureVector> vectors);

}  // namespace ertl
