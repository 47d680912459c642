#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ertl/dataset.hpp"
#include "ertl/model.hpp"

namespace ertl {

enum class StepPolicy {
  kBacktracking,  // halve from the initial step until sufficient decrease
  kFixed,         // constant step; may diverge (reported as NumericalError)
};

struct SolverConfig {
  double lambda_a = 0.0;  // l1 weight on the per-source vectors
  int max_iters = 10000;
  double tol = 1e-8;      // relative objective-change stopping rule
  StepPolicy step_policy = StepPolicy::kBacktracking;
  double step_size = 0.0;        // fixed step or backtracking start; 0 = 1/L estimate
  double backtrack_shrink = 0.5; // in (0,1)
  double indep_ridge_scale = 1e-6;  // ridge = scale * trace(X'X)/d per pair
  std::uint64_t seed = 0;  // reserved; initialization is deterministic zeros

  void validate() const;
};

/// Per-iteration objective record. Iteration 0 is the initial (zero) model.
struct IterRecord {
  int iter = 0;
  double objective = 0.0;
  double step_size = 0.0;
  double elapsed_seconds = 0.0;  // cumulative solve time, observers excluded
};

struct SolverTrace {
  std::vector<IterRecord> iters;

  double final_objective() const { return iters.back().objective; }
  /// CSV with header iter,objective,step_size,elapsed_seconds.
  std::string to_csv() const;
};

/// Independent per-pair linear model: one weight vector per canonical
/// source pair seen in training. Pairs without training examples score 0
/// for every input and are listed in `unseen`.
struct IndepModel {
  int dim = 0;
  std::vector<std::string> feature_names;
  std::vector<std::string> sources;
  std::map<SourcePair, std::vector<double>> weights;
  std::vector<SourcePair> unseen;
  std::vector<std::string> warnings;

  double score(SourcePair pair, std::span<const double> x) const;
};

struct LossGradient {
  std::vector<double> w0;               // d
  std::vector<std::vector<double>> w;   // N x d
};

/// Squared-error data loss plus lambda_a * sum_i ||w_i||_1.
double objective(const TransferModel& model, const Dataset& data, double lambda_a);

/// Analytic gradient of the data loss (regularizer excluded):
/// grad_w0 = -sum_k r_k x_k, grad_wi = -1/2 sum_{k: i in pair(k)} r_k x_k,
/// with residual r_k = y_k - score_k.
LossGradient loss_gradient(const TransferModel& model, const Dataset& data);

/// Soft-thresholding S_tau(v): sign(v) * max(|v| - tau, 0) per coordinate.
/// Throws std::invalid_argument for tau < 0.
std::vector<double> soft_threshold(std::span<const double> v, double tau);

/// One composite update at step size gamma: gradient step on w0, gradient
/// step plus soft-threshold (tau = gamma * lambda_a) on each w_i. With
/// update_sources=false the per-source vectors stay fixed at zero.
TransferModel transfer_step(const TransferModel& model, const Dataset& data,
                            double gamma, double lambda_a,
                            bool update_sources = true);

/// Called with the initial iterate (iter 0) and after every accepted
/// iteration; time spent inside the observer is excluded from trace timing.
using FitObserver = std::function<void(int iter, const TransferModel& current)>;

/// Fits the transfer model by composite gradient descent from a zero
/// initialization. Stops when the relative objective change drops below
/// cfg.tol or after cfg.max_iters iterations. Throws NumericalError
/// (naming the iteration) if the objective becomes non-finite.
std::pair<TransferModel, SolverTrace> fit_transfer(const Dataset& data,
                                                   const SolverConfig& cfg,
                                                   const FitObserver& observer = {});

/// Maximum-transfer baseline: w_i constrained to zero, only w0 is learned.
std::pair<TransferModel, SolverTrace> fit_pooled(const Dataset& data,
                                                 const SolverConfig& cfg,
                                                 const FitObserver& observer = {});

/// Zero-transfer baseline: an independent ridge solve per source pair.
IndepModel fit_indep(const Dataset& data, const SolverConfig& cfg);

/// Closed-form solve of (X'X + ridge*I) w = X'y for one pair's examples.
std::vector<double> ridge_solve(const std::vector<const LabeledExample*>& examples,
                                int dim, double ridge);

/// Smallest l1 weight at which every w_i stays zero: the max over sources
/// of ||grad_wi L||_inf evaluated at the exact pooled least-squares solution.
double lambda_max(const Dataset& data);

/// Power-iteration estimate (20 rounds) of the largest Hessian eigenvalue
/// of the quadratic loss; 1/L is the default step size. with_source_blocks
/// selects the transfer parameterization, otherwise the pooled one.
double estimate_lipschitz(const Dataset& data, bool with_source_blocks);

}  // namespace ertl
