#pragma once

#include <span>
#include <string>
#include <vector>

#include "ertl/types.hpp"

namespace ertl {

/// Linear similarity model with pairwise task structure: a shared weight
/// vector w0 plus one per-source vector w[i]. The scoring weight for a
/// source pair (i,j) is w0 + (w[i] + w[j]) / 2, so scores are symmetric
/// in the pair by construction.
///
/// Immutable after fitting; concurrent read-only scoring is safe.
struct TransferModel {
  int dim = 0;
  std::vector<std::string> feature_names;  // size dim
  std::vector<std::string> sources;        // size N, index = source id
  std::vector<double> w0;                  // size dim
  std::vector<std::vector<double>> w;      // N vectors of size dim
  double lambda_a = 0.0;                   // l1 weight used at fit time

  int n_sources() const { return static_cast<int>(sources.size()); }

  /// w0 + (w[pair.a] + w[pair.b]) / 2. Throws std::out_of_range when a
  /// pair index is >= n_sources().
  std::vector<double> combined_weight(SourcePair pair) const;

  /// Inner product of combined_weight(pair) with x. Throws ValidationError
  /// on dimension mismatch.
  double score(SourcePair pair, std::span<const double> x) const;

  /// Dimensions consistent and all entries finite, else ValidationError.
  void validate() const;
};

/// Thresholded decision: +1 when s - tau >= 0, else -1. The boundary
/// counts as a match.
inline int classify(double s, double tau) { return s - tau >= 0 ? +1 : -1; }

/// Writes the model as a single JSON document with fixed field order
/// (d, feature_names, sources, w0, w, lambda_a). Weights round-trip
/// bit-exactly.
void save_model(const TransferModel& model, const std::string& path);

/// Parses and validates a model file. Throws IoError when the file is
/// unreadable and ValidationError (naming the offending field) when the
/// document is malformed or inconsistent.
TransferModel load_model(const std::string& path);

}  // namespace ertl
