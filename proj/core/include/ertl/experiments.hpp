#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ertl/cv.hpp"
#include "ertl/metrics.hpp"
#include "ertl/solver.hpp"
#include "ertl/synth.hpp"

namespace ertl {

enum class ExperimentFamily {
  kPRGrid,
  kSummary,            // precision-at-recall table only
  kSampleComplexity,
  kSourceComplexity,
  kRuntime,
};

std::string family_name(ExperimentFamily family);

/// One budget row of the PR grid: how a training budget is counted
/// (per source pair, per source, or in total) and the budgets to sweep.
struct GridRow {
  std::string mode;  // "per_pair" | "per_source" | "total"
  std::vector<int> budgets;
};

struct ExperimentPlan {
  ExperimentFamily family = ExperimentFamily::kSampleComplexity;
  SynthConfig synth;  // generator config for the synthetic families
  std::vector<std::string> methods = {"transfer", "pooled", "indep"};
  int trials = 20;
  std::uint64_t seed = 0;
  int threads = 1;

  SolverConfig solver;
  bool cv_lambda = true;  // select transfer's lambda by holdout CV per trial
  int cv_grid_points = 10;

  // sample complexity: training examples per source pair
  std::vector<int> budgets = {10, 25, 50, 100, 200};

  // source complexity: source counts and the per-source label budget
  std::vector<int> n_list = {2, 4, 6, 8, 10};
  int labels_per_source = 400;

  // runtime: examples per source pair for the two panels
  std::vector<int> runtime_budgets = {20, 100};

  // pr grid / summary: ingested dataset plus the designated eval pair
  std::string records_path;
  std::string labels_path;
  std::string eval_source_a, eval_source_b;
  double eval_test_fraction = 0.5;  // eval-pair labels held out for testing
  std::vector<GridRow> grid_rows;   // defaults filled by run_pr_grid
  double at_recall = 0.85;
  std::vector<double> recall_grid;  // default 0.05..1.0 step 0.05
  int bootstrap_resamples = 200;

  void validate() const;
};

/// One (x, method, trial) measurement; x is the family's sweep variable
/// (budget or source count). Failed trials are kept with ok = false.
struct TrialCell {
  int x = 0;
  std::string method;
  int trial = 0;
  bool ok = true;
  double error = 0.0;
};

/// Point on an error-vs-time trajectory (runtime family).
struct RuntimePoint {
  int budget = 0;
  std::string method;
  int trial = 0;
  double elapsed_seconds = 0.0;
  double test_error = 0.0;
};

/// Banded PR curve plus its precision-at-recall summary for one grid cell.
struct GridCell {
  std::string mode;
  int budget = 0;
  std::string method;
  BandedCurve band;
  double precision_at_r0 = 0.0;
  bool r0_achieved = true;
};

struct AggRow {
  int x = 0;
  std::string method;
  double mean = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  int n_ok = 0;
  int n_failed = 0;
};

struct ExperimentReport {
  ExperimentFamily family = ExperimentFamily::kSampleComplexity;
  std::vector<TrialCell> cells;
  std::vector<RuntimePoint> trajectories;
  std::vector<GridCell> grid;
  std::vector<std::string> warnings;

  /// Mean error over successful trials for (x, method).
  double mean_error(const std::string& method, int x) const;
  /// 95% normal bands per (x, method), ordered by (x, method).
  std::vector<AggRow> aggregate() const;
};

ExperimentReport run_sample_complexity(const ExperimentPlan& plan);
ExperimentReport run_source_complexity(const ExperimentPlan& plan);
ExperimentReport run_runtime(const ExperimentPlan& plan);
ExperimentReport run_pr_grid(const ExperimentPlan& plan);

/// Dispatches on plan.family.
ExperimentReport run_experiment(const ExperimentPlan& plan);

/// plan.json echo of the fully-resolved plan (no timestamps).
std::string plan_to_json(const ExperimentPlan& plan);

/// Writes plan.json, the family's plot-ready CSVs and warnings.log into
/// out_dir. Timing columns aside, outputs are byte-identical for identical
/// plans and seeds.
void write_report(const ExperimentReport& report, const ExperimentPlan& plan,
                  const std::string& out_dir);

}  // namespace ertl
