#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ertl/dataset.hpp"
#include "ertl/features.hpp"
#include "ertl/solver.hpp"

namespace ertl {

/// Strictly increasing positive lambda grid.
struct ParamGrid {
  std::vector<double> lambdas;

  void validate() const;
  /// n_points log-spaced on [lo_fraction * lambda_max, lambda_max].
  static ParamGrid log_spaced(double lambda_max, int n_points = 10,
                              double lo_fraction = 1e-4);
};

struct SplitResult {
  Dataset train;
  Dataset holdout;
  std::vector<std::string> warnings;
};

/// Deterministic stratified split: within every (source pair, label)
/// stratum, round(fraction * size) examples go to the holdout (at least
/// one always stays in train). Strata with fewer than two examples go
/// wholly to train with a warning.
SplitResult holdout_split(const Dataset& data, double fraction, std::uint64_t seed);

/// K disjoint, exhaustive folds with the same stratification; fold k is
/// the holdout of split k.
std::vector<SplitResult> kfold_splits(const Dataset& data, int k, std::uint64_t seed);

/// Scaler fitted on a dataset's feature vectors.
Standardizer fit_standardizer(const Dataset& data);

/// The same dataset with every feature vector passed through the scaler.
Dataset standardize_dataset(const Dataset& data, const Standardizer& s);

struct CvOptions {
  double holdout_fraction = 0.2;
  int folds = 1;  // 1 = single holdout split, >1 = k-fold averaging
  std::uint64_t seed = 0;
  bool standardize = true;  // fit the scaler on the train portion only
};

struct CVResult {
  std::vector<double> lambdas;
  std::vector<double> errors;  // holdout test error at tau = 0 per lambda
  double chosen_lambda = 0.0;
  TransferModel model;     // refit on all data at chosen_lambda
  Standardizer scaler;     // fitted on all data for the final refit
  std::vector<std::string> warnings;

  /// CSV with header lambda,holdout_error.
  std::string to_csv() const;
};

/// Fits on the train portion for every grid lambda, evaluates holdout test
/// error at tau = 0, picks the argmin (ties resolved toward the larger
/// lambda) and refits on all data. Lambdas whose fit diverges are skipped
/// with a warning; if all diverge a NumericalError is thrown.
CVResult select_lambda(const Dataset& data, const ParamGrid& grid,
                       const SolverConfig& solver_cfg, const CvOptions& cv = {});

}  // namespace ertl
