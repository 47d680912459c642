#include "ertl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ertl/errors.hpp"
#include "ertl/io.hpp"
#include "ertl/model.hpp"
#include "ertl/rng.hpp"

namespace ertl {

ConfusionCounts confusion(std::span<const ScoredExample> scored, double tau) {
  ConfusionCounts c;
  for (const auto& e : scored) {
    const bool pred_match = classify(e.score, tau) == 1;
    const bool is_match = e.y == 1;
    if (pred_match && is_match) ++c.tp;
    else if (pred_match) ++c.fp;
    else if (is_match) ++c.fn;
    else ++c.tn;
  }
  return c;
}

PrecisionRecall precision_recall(const ConfusionCounts& c) {
  PrecisionRecall pr;
  if (c.tp + c.fp > 0) pr.precision = static_cast<double>(c.tp) / (c.tp + c.fp);
  if (c.tp + c.fn > 0) pr.recall = static_cast<double>(c.tp) / (c.tp + c.fn);
  return pr;
}

double test_error(std::span<const ScoredExample> scored, double tau) {
  if (scored.empty()) throw ValidationError("test_error: empty example set");
  std::int64_t wrong = 0;
  for (const auto& e : scored) {
    if (classify(e.score, tau) != e.y) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(scored.size());
}

std::string PRCurve::to_csv() const {
  std::ostringstream out;
  out << "tau,precision,recall,tp,fp,fn\n";
  for (const auto& p : points) {
    out << format_double(p.tau) << ',' << format_double(p.precision) << ','
        << format_double(p.recall) << ',' << p.tp << ',' << p.fp << ',' << p.fn
        << '\n';
  }
  return out.str();
}

PRCurve pr_curve(std::span<const ScoredExample> scored) {
  std::int64_t positives = 0;
  for (const auto& e : scored) positives += e.y == 1;
  if (positives == 0) {
    throw ValidationError("pr_curve: no positive labels in the example set");
  }
  std::vector<const ScoredExample*> order(scored.size());
  for (std::size_t k = 0; k < scored.size(); ++k) order[k] = &scored[k];
  std::stable_sort(order.begin(), order.end(),
                   [](const auto* a, const auto* b) { return a->score > b->score; });

  PRCurve curve;
  std::int64_t tp = 0, fp = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (order[k]->y == 1) ++tp;
    else ++fp;
    // emit once per distinct score, after consuming all examples tied at it
    if (k + 1 < order.size() && order[k + 1]->score == order[k]->score) continue;
    PRPoint p;
    p.tau = order[k]->score;
    p.tp = tp;
    p.fp = fp;
    p.fn = positives - tp;
    p.precision = static_cast<double>(tp) / (tp + fp);
    p.recall = static_cast<double>(tp) / positives;
    curve.points.push_back(p);
  }
  return curve;
}

double precision_at_recall(const PRCurve& curve, double r0, bool* achieved) {
  double best = 0.0;
  bool found = false;
  for (const auto& p : curve.points) {
    if (p.recall >= r0) {
      found = true;
      best = std::max(best, p.precision);
    }
  }
  if (achieved) *achieved = found;
  return found ? best : 0.0;
}

std::string BandedCurve::to_csv() const {
  std::ostringstream out;
  out << "recall,mean_precision,lo,hi\n";
  for (std::size_t k = 0; k < recall_grid.size(); ++k) {
    out << format_double(recall_grid[k]) << ',' << format_double(mean_precision[k])
        << ',' << format_double(lo[k]) << ',' << format_double(hi[k]) << '\n';
  }
  return out.str();
}

BandedCurve band_curves(std::span<const PRCurve> curves,
                        std::span<const double> recall_grid) {
  if (curves.size() < 2) throw ValidationError("band_curves: need at least 2 curves");
  BandedCurve band;
  band.recall_grid.assign(recall_grid.begin(), recall_grid.end());
  const double n = static_cast<double>(curves.size());
  for (double r : recall_grid) {
    double mean = 0.0;
    std::vector<double> vals;
    vals.reserve(curves.size());
    for (const auto& c : curves) {
      vals.push_back(precision_at_recall(c, r));
      mean += vals.back();
    }
    mean /= n;
    double var = 0.0;
    for (double v : vals) var += (v - mean) * (v - mean);
    const double half = 1.96 * std::sqrt(var / n) / std::sqrt(n);
    band.mean_precision.push_back(mean);
    band.lo.push_back(mean - half);
    band.hi.push_back(mean + half);
  }
  return band;
}

BandedCurve bootstrap_band(std::span<const ScoredExample> scored,
                           std::span<const double> recall_grid,
                           int n_resamples, std::uint64_t seed) {
  if (scored.empty()) throw ValidationError("bootstrap_band: empty example set");
  if (n_resamples <= 0) throw ValidationError("bootstrap_band: n_resamples must be positive");
  Rng rng(derive_seed(seed, stream::kBootstrap));
  std::vector<PRCurve> curves;
  curves.reserve(n_resamples);
  std::vector<ScoredExample> resample(scored.size());
  for (int r = 0; r < n_resamples; ++r) {
    for (int attempt = 0;; ++attempt) {
      bool any_positive = false;
      for (auto& e : resample) {
        e = scored[rng.below(scored.size())];
        any_positive |= e.y == 1;
      }
      if (any_positive) break;
      if (attempt >= 1000) {
        throw ValidationError("bootstrap_band: resamples keep missing positive labels");
      }
    }
    curves.push_back(pr_curve(resample));
  }
  return band_curves(curves, recall_grid);
}

}  // namespace ertl
