#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ertl/types.hpp"

namespace ertl {

struct ScoredExample {
  double score = 0.0;
  int y = 1;  // ±1
  SourcePair pair;
};

struct ConfusionCounts {
  std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::int64_t total() const { return tp + fp + fn + tn; }
};

/// Counts at threshold tau with prediction sign(score - tau), boundary
/// counting as a match.
ConfusionCounts confusion(std::span<const ScoredExample> scored, double tau);

/// Precision |TP|/(|TP|+|FP|) and recall |TP|/(|TP|+|FN|). Degenerate 0/0
/// cases are defined as 1.0 (no positive predictions / no positives).
struct PrecisionRecall {
  double precision = 1.0;
  double recall = 1.0;
};
PrecisionRecall precision_recall(const ConfusionCounts& counts);

/// Fraction of examples with y != sign(score - tau).
double test_error(std::span<const ScoredExample> scored, double tau);

struct PRPoint {
  double tau = 0.0;
  double precision = 1.0;
  double recall = 0.0;
  std::int64_t tp = 0, fp = 0, fn = 0;
};

/// Step precision-recall curve: one point per distinct score, thresholds
/// swept descending, no interpolation. Recall is nondecreasing along the
/// points. Requires at least one positive label (else ValidationError).
struct PRCurve {
  std::vector<PRPoint> points;

  /// CSV with header tau,precision,recall,tp,fp,fn.
  std::string to_csv() const;
};
PRCurve pr_curve(std::span<const ScoredExample> scored);

/// Best precision among curve points with recall >= r0; 0 when no point
/// qualifies (achieved set to false in that case).
double precision_at_recall(const PRCurve& curve, double r0, bool* achieved = nullptr);

/// Pointwise mean and 95% normal-approximation band over per-trial curves,
/// evaluated on a fixed recall grid (population stddev over trials).
struct BandedCurve {
  std::vector<double> recall_grid;
  std::vector<double> mean_precision;
  std::vector<double> lo;
  std::vector<double> hi;

  /// CSV with header recall,mean_precision,lo,hi.
  std::string to_csv() const;
};
BandedCurve band_curves(std::span<const PRCurve> curves,
                        std::span<const double> recall_grid);

/// Band for a single dataset: bootstrap resampling of the scored examples
/// (n_resamples curves), then band_curves over the resampled curves.
BandedCurve bootstrap_band(std::span<const ScoredExample> scored,
                           std::span<const double> recall_grid,
                           int n_resamples, std::uint64_t seed);

}  // namespace ertl
