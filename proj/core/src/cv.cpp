#include "ertl/cv.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <utility>

#include "ertl/errors.hpp"
#include "ertl/io.hpp"
#include "ertl/metrics.hpp"
#include "ertl/rng.hpp"

namespace ertl {

namespace {

Dataset like(const Dataset& data) {
  Dataset out;
  out.sources = data.sources;
  out.feature_names = data.feature_names;
  out.dim = data.dim;
  return out;
}

/// Example indices per (source pair, label), keys in deterministic order.
std::map<std::pair<SourcePair, int>, std::vector<std::size_t>> strata(
    const Dataset& data) {
  std::map<std::pair<SourcePair, int>, std::vector<std::size_t>> out;
  for (std::size_t k = 0; k < data.examples.size(); ++k) {
    out[{data.examples[k].pair, data.examples[k].y}].push_back(k);
  }
  return out;
}

std::string stratum_name(const Dataset& data, const std::pair<SourcePair, int>& key) {
  return "pair " + data.sources[key.first.a] + "-" +
         data.sources[key.first.b] + " label " +
         (key.second == 1 ? std::string("+1") : std::string("-1"));
}

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t t = v.size(); t > 1; --t) {
    std::swap(v[t - 1], v[rng.below(t)]);
  }
}

std::vector<ScoredExample> score_all(const TransferModel& model, const Dataset& data) {
  std::vector<ScoredExample> out;
  out.reserve(data.examples.size());
  for (const auto& ex : data.examples) {
    out.push_back({model.score(ex.pair, ex.x), ex.y, ex.pair});
  }
  return out;
}

}  // namespace

void ParamGrid::validate() const {
  if (lambdas.empty()) throw ValidationError("grid: no lambdas");
  double prev = 0.0;
  for (double l : lambdas) {
    if (!std::isfinite(l) || l <= 0) {
      throw ValidationError("grid: lambdas must be positive finite values");
    }
    if (l <= prev) throw ValidationError("grid: lambdas must be strictly increasing");
    prev = l;
  }
}

ParamGrid ParamGrid::log_spaced(double lambda_max, int n_points, double lo_fraction) {
  if (!std::isfinite(lambda_max) || lambda_max <= 0) {
    throw ValidationError("grid: lambda_max must be positive (is the loss already zero?)");
  }
  if (n_points < 1) throw ValidationError("grid: n_points must be positive");
  if (!(lo_fraction > 0 && lo_fraction < 1)) {
    throw ValidationError("grid: lo_fraction must lie in (0, 1)");
  }
  ParamGrid grid;
  if (n_points == 1) {
    grid.lambdas = {lambda_max};
    return grid;
  }
  const double lo = std::log(lo_fraction * lambda_max);
  const double hi = std::log(lambda_max);
  for (int k = 0; k < n_points; ++k) {
    grid.lambdas.push_back(std::exp(lo + (hi - lo) * k / (n_points - 1)));
  }
  grid.lambdas.back() = lambda_max;
  grid.validate();
  return grid;
}

SplitResult holdout_split(const Dataset& data, double fraction, std::uint64_t seed) {
  data.validate();
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw ValidationError("split: fraction must lie in (0, 1)");
  }
  SplitResult res;
  res.train = like(data);
  res.holdout = like(data);
  Rng rng(derive_seed(seed, stream::kSplit));
  std::vector<bool> in_holdout(data.examples.size(), false);
  for (auto& [key, idx] : strata(data)) {
    if (idx.size() < 2) {
      res.warnings.push_back("stratum " + stratum_name(data, key) + " has " +
                             std::to_string(idx.size()) +
                             " example(s); kept entirely in train");
      continue;
    }
    shuffle(idx, rng);
    auto n_hold = static_cast<std::size_t>(
        std::llround(fraction * static_cast<double>(idx.size())));
    n_hold = std::min(n_hold, idx.size() - 1);
    for (std::size_t t = 0; t < n_hold; ++t) in_holdout[idx[t]] = true;
  }
  for (std::size_t k = 0; k < data.examples.size(); ++k) {
    (in_holdout[k] ? res.holdout : res.train).examples.push_back(data.examples[k]);
  }
  return res;
}

std::vector<SplitResult> kfold_splits(const Dataset& data, int k, std::uint64_t seed) {
  data.validate();
  if (k < 2) throw ValidationError("split: need at least 2 folds");
  Rng rng(derive_seed(seed, stream::kSplit));
  std::vector<int> fold_of(data.examples.size(), 0);
  std::vector<std::string> warnings;
  for (auto& [key, idx] : strata(data)) {
    if (idx.size() < static_cast<std::size_t>(k)) {
      warnings.push_back("stratum " + stratum_name(data, key) + " has " +
                         std::to_string(idx.size()) + " example(s) for " +
                         std::to_string(k) + " folds");
    }
    shuffle(idx, rng);
    for (std::size_t t = 0; t < idx.size(); ++t) {
      fold_of[idx[t]] = static_cast<int>(t % k);
    }
  }
  std::vector<SplitResult> out(k);
  for (int f = 0; f < k; ++f) {
    out[f].train = like(data);
    out[f].holdout = like(data);
    out[f].warnings = warnings;
    for (std::size_t i = 0; i < data.examples.size(); ++i) {
      (fold_of[i] == f ? out[f].holdout : out[f].train)
          .examples.push_back(data.examples[i]);
    }
  }
  return out;
}

Standardizer fit_standardizer(const Dataset& data) {
  std::vector<FeatureVector> vectors;
  vectors.reserve(data.examples.size());
  for (const auto& ex : data.examples) vectors.push_back(ex.x);
  return fit_standardizer(vectors);
}

Dataset standardize_dataset(const Dataset& data, const Standardizer& s) {
  Dataset out = data;
  for (auto& ex : out.examples) ex.x = s.apply(ex.x);
  return out;
}

std::string CVResult::to_csv() const {
  std::ostringstream out;
  out << "lambda,holdout_error\n";
  for (std::size_t k = 0; k < lambdas.size(); ++k) {
    out << format_double(lambdas[k]) << ',' << format_double(errors[k]) << '\n';
  }
  return out.str();
}

CVResult select_lambda(const Dataset& data, const ParamGrid& grid,
                       const SolverConfig& solver_cfg, const CvOptions& cv) {
  data.validate();
  grid.validate();
  solver_cfg.validate();
  if (cv.folds < 1) throw ValidationError("cv: folds must be positive");

  std::vector<SplitResult> splits;
  if (cv.folds == 1) {
    splits.push_back(holdout_split(data, cv.holdout_fraction, cv.seed));
  } else {
    splits = kfold_splits(data, cv.folds, cv.seed);
  }
  CVResult res;
  res.warnings = splits.front().warnings;
  for (auto& split : splits) {
    if (split.holdout.examples.empty()) {
      throw ValidationError("cv: a holdout fold is empty; too few examples per stratum");
    }
    if (split.train.examples.empty()) {
      throw ValidationError("cv: a train fold is empty");
    }
  }

  struct PreparedSplit {
    Dataset train;
    Dataset holdout;
  };
  std::vector<PreparedSplit> prepared;
  prepared.reserve(splits.size());
  for (const auto& split : splits) {
    if (cv.standardize) {
      const Standardizer s = fit_standardizer(split.train);
      prepared.push_back({standardize_dataset(split.train, s),
                          standardize_dataset(split.holdout, s)});
    } else {
      prepared.push_back({split.train, split.holdout});
    }
  }

  res.lambdas = grid.lambdas;
  res.errors.assign(grid.lambdas.size(), std::numeric_limits<double>::quiet_NaN());
  bool any_ok = false;
  std::size_t best = 0;
  for (std::size_t k = 0; k < grid.lambdas.size(); ++k) {
    SolverConfig cfg = solver_cfg;
    cfg.lambda_a = grid.lambdas[k];
    double err_sum = 0.0;
    bool ok = true;
    for (const auto& split : prepared) {
      try {
        auto [model, trace] = fit_transfer(split.train, cfg);
        err_sum += test_error(score_all(model, split.holdout), 0.0);
      } catch (const NumericalError& e) {
        res.warnings.push_back("lambda " + format_double(grid.lambdas[k]) +
                               " skipped: " + e.what());
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    res.errors[k] = err_sum / static_cast<double>(prepared.size());
    if (!any_ok || res.errors[k] <= res.errors[best]) {
      best = k;  // <= prefers the larger lambda on ties
      any_ok = true;
    }
  }
  if (!any_ok) {
    throw NumericalError("cv: every lambda in the grid diverged");
  }
  res.chosen_lambda = grid.lambdas[best];

  SolverConfig cfg = solver_cfg;
  cfg.lambda_a = res.chosen_lambda;
  if (cv.standardize) {
    res.scaler = fit_standardizer(data);
  } else {
    res.scaler.means.assign(data.dim, 0.0);
    res.scaler.stds.assign(data.dim, 1.0);
  }
  auto [model, trace] = fit_transfer(standardize_dataset(data, res.scaler), cfg);
  res.model = std::move(model);
  return res;
}

}  // namespace ertl
