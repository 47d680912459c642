#include "ertl/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "ertl/errors.hpp"
#include "ertl/io.hpp"
#include "ertl/rng.hpp"

namespace ertl {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const std::set<std::string>& known_methods() {
  static const std::set<std::string> methods = {"transfer", "pooled", "indep"};
  return methods;
}

void check_increasing(const std::vector<int>& v, int at_least, const std::string& what) {
  if (v.empty()) throw ValidationError("plan: " + what + " must not be empty");
  int prev = at_least - 1;
  for (int x : v) {
    if (x < at_least) {
      throw ValidationError("plan: " + what + " entries must be at least " +
                            std::to_string(at_least));
    }
    if (x <= prev) {
      throw ValidationError("plan: " + what + " must be strictly increasing");
    }
    prev = x;
  }
}

ExperimentPlan resolve_plan(const ExperimentPlan& plan) {
  ExperimentPlan out = plan;
  if (out.recall_grid.empty()) {
    for (int k = 1; k <= 20; ++k) out.recall_grid.push_back(k / 20.0);
  }
  const bool grid_family = out.family == ExperimentFamily::kPRGrid ||
                           out.family == ExperimentFamily::kSummary;
  if (grid_family && out.grid_rows.empty()) {
    out.grid_rows = {{"per_pair", {10, 40, 140}},
                     {"per_source", {15, 60, 150}},
                     {"total", {24, 200, 700}}};
  }
  return out;
}

/// Runs fn(0..n-1) on up to `threads` workers; rethrows the first failure.
void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  auto worker = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        const std::lock_guard<std::mutex> lock(mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const int n_workers = std::min(threads, n);
  pool.reserve(n_workers);
  for (int t = 0; t < n_workers; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::vector<ScoredExample> score_dataset(const Dataset& data, const Standardizer& s,
                                         const TransferModel* transfer,
                                         const IndepModel* indep) {
  std::vector<ScoredExample> out;
  out.reserve(data.examples.size());
  for (const auto& ex : data.examples) {
    const FeatureVector x = s.apply(ex.x);
    const double score = transfer ? transfer->score(ex.pair, x) : indep->score(ex.pair, x);
    out.push_back({score, ex.y, ex.pair});
  }
  return out;
}

struct MethodOutcome {
  bool ok = true;
  double error = kNaN;
  std::vector<std::string> warnings;
  std::vector<ScoredExample> scored;  // standardized test scores
};

/// Fits one method on train and evaluates the tau=0 test error. The scaler
/// is fitted on the training examples only.
MethodOutcome evaluate_method(const std::string& method, const Dataset& train,
                              const Dataset& test, const ExperimentPlan& plan,
                              std::uint64_t trial_seed) {
  MethodOutcome out;
  try {
    if (method == "transfer" && plan.cv_lambda) {
      const Standardizer probe = fit_standardizer(train);
      const double lam_max = lambda_max(standardize_dataset(train, probe));
      const ParamGrid grid = ParamGrid::log_spaced(lam_max, plan.cv_grid_points);
      CvOptions cv;
      cv.seed = trial_seed;
      const CVResult res = select_lambda(train, grid, plan.solver, cv);
      out.warnings = res.warnings;
      out.scored = score_dataset(test, res.scaler, &res.model, nullptr);
    } else {
      const Standardizer scaler = fit_standardizer(train);
      const Dataset std_train = standardize_dataset(train, scaler);
      if (method == "indep") {
        const IndepModel model = fit_indep(std_train, plan.solver);
        out.scored = score_dataset(test, scaler, nullptr, &model);
      } else if (method == "pooled") {
        auto [model, trace] = fit_pooled(std_train, plan.solver);
        out.scored = score_dataset(test, scaler, &model, nullptr);
      } else {
        auto [model, trace] = fit_transfer(std_train, plan.solver);
        out.scored = score_dataset(test, scaler, &model, nullptr);
      }
    }
    out.error = test_error(out.scored, 0.0);
  } catch (const std::exception& e) {
    out.ok = false;
    out.error = kNaN;
    out.warnings.push_back(std::string(e.what()));
  }
  return out;
}

struct TrialSlot {
  std::vector<TrialCell> cells;
  std::vector<RuntimePoint> trajectories;
  std::vector<std::string> warnings;
};

void merge_slots(ExperimentReport& report, std::vector<TrialSlot>& slots) {
  for (auto& slot : slots) {
    report.cells.insert(report.cells.end(), slot.cells.begin(), slot.cells.end());
    report.trajectories.insert(report.trajectories.end(), slot.trajectories.begin(),
                               slot.trajectories.end());
    report.warnings.insert(report.warnings.end(), slot.warnings.begin(),
                           slot.warnings.end());
  }
}

void sort_cells(ExperimentReport& report, const std::vector<std::string>& methods) {
  auto method_rank = [&](const std::string& m) {
    return std::find(methods.begin(), methods.end(), m) - methods.begin();
  };
  std::stable_sort(report.cells.begin(), report.cells.end(),
                   [&](const TrialCell& a, const TrialCell& b) {
                     if (a.x != b.x) return a.x < b.x;
                     const auto ra = method_rank(a.method), rb = method_rank(b.method);
                     if (ra != rb) return ra < rb;
                     return a.trial < b.trial;
                   });
}

void run_trial_methods(TrialSlot& slot, int x, int trial, const Dataset& train,
                       const Dataset& test, const ExperimentPlan& plan,
                       std::uint64_t trial_seed) {
  for (const auto& method : plan.methods) {
    MethodOutcome res = evaluate_method(method, train, test, plan, trial_seed);
    slot.cells.push_back({x, method, trial, res.ok, res.error});
    for (const auto& w : res.warnings) {
      slot.warnings.push_back(method + " x=" + std::to_string(x) + " trial " +
                              std::to_string(trial) + ": " + w);
    }
  }
}

// ---------------------------------------------------------------------------
// pr grid support

struct LabeledRow {
  SourcePair pair;
  FeatureVector x;
  int y = 1;
};

struct GridInputs {
  std::vector<std::string> source_names;
  std::vector<std::string> feature_names;
  SourcePair eval_pair;
  std::vector<LabeledRow> pool;  // training candidates
  Dataset test;                  // held-out eval-pair examples
};

Dataset rows_to_dataset(const std::vector<LabeledRow>& rows,
                        const std::vector<std::size_t>& picked,
                        const GridInputs& inputs) {
  Dataset data;
  data.dim = static_cast<int>(inputs.feature_names.size());
  data.feature_names = inputs.feature_names;
  data.sources = inputs.source_names;
  for (std::size_t k : picked) {
    data.examples.push_back({rows[k].x, rows[k].pair, rows[k].y});
  }
  return data;
}

GridInputs load_grid_inputs(const ExperimentPlan& plan) {
  GridInputs inputs;
  SourceRegistry registry;
  auto records = read_records_jsonl(plan.records_path, registry);
  if (records.empty()) throw ValidationError(plan.records_path + ": no records");
  for (auto& r : records) r = normalize_record(r);

  bool has_attrs = !records.front().attrs.empty();
  FeatureSpec spec = has_attrs
                         ? FeatureSpec::numeric(static_cast<int>(records.front().attrs.size()))
                         : FeatureSpec::movie();
  inputs.feature_names = spec.names();

  std::map<std::pair<int, std::string>, const RawRecord*> by_key;
  for (const auto& r : records) by_key[{r.source, r.id}] = &r;

  const int ea = registry.find(plan.eval_source_a);
  const int eb = registry.find(plan.eval_source_b);
  if (ea < 0 || eb < 0) {
    throw ValidationError("eval pair names a source absent from the records: " +
                          plan.eval_source_a + ", " + plan.eval_source_b);
  }
  inputs.eval_pair = SourcePair::of(ea, eb);
  inputs.source_names = registry.names();

  const auto label_rows = read_pairs_csv(plan.labels_path);
  std::vector<LabeledRow> eval_rows;
  for (std::size_t k = 0; k < label_rows.size(); ++k) {
    const auto& row = label_rows[k];
    const std::string where =
        plan.labels_path + " row " + std::to_string(k + 1) + ": ";
    if (!row.label) throw ValidationError(where + "missing label");
    const int sa = registry.find(row.source_a);
    const int sb = registry.find(row.source_b);
    if (sa < 0) throw ValidationError(where + "unknown source '" + row.source_a + "'");
    if (sb < 0) throw ValidationError(where + "unknown source '" + row.source_b + "'");
    const auto ra = by_key.find({sa, row.id_a});
    const auto rb = by_key.find({sb, row.id_b});
    if (ra == by_key.end()) {
      throw ValidationError(where + "no record " + row.source_a + "/" + row.id_a);
    }
    if (rb == by_key.end()) {
      throw ValidationError(where + "no record " + row.source_b + "/" + row.id_b);
    }
    LabeledRow out;
    try {
      out.pair = SourcePair::of(sa, sb);
      out.y = canonical_label(*row.label);
    } catch (const std::invalid_argument& e) {
      throw ValidationError(where + e.what());
    }
    out.x = featurize_pair(*ra->second, *rb->second, spec);
    (out.pair == inputs.eval_pair ? eval_rows : inputs.pool).push_back(std::move(out));
  }
  if (eval_rows.empty()) {
    throw ValidationError("labels contain no examples for the eval pair " +
                          plan.eval_source_a + "-" + plan.eval_source_b);
  }

  // Stratified eval-pair holdout, fixed across trials.
  inputs.test.dim = static_cast<int>(inputs.feature_names.size());
  inputs.test.feature_names = inputs.feature_names;
  inputs.test.sources = inputs.source_names;
  Rng rng(derive_seed(plan.seed, stream::kSplit));
  for (const int label : {+1, -1}) {
    std::vector<std::size_t> idx;
    for (std::size_t k = 0; k < eval_rows.size(); ++k) {
      if (eval_rows[k].y == label) idx.push_back(k);
    }
    for (std::size_t t = idx.size(); t > 1; --t) {
      std::swap(idx[t - 1], idx[rng.below(t)]);
    }
    auto n_test = static_cast<std::size_t>(
        std::llround(plan.eval_test_fraction * static_cast<double>(idx.size())));
    n_test = std::min(n_test, idx.size());
    for (std::size_t t = 0; t < idx.size(); ++t) {
      const auto& row = eval_rows[idx[t]];
      if (t < n_test) {
        inputs.test.examples.push_back({row.x, row.pair, row.y});
      } else {
        inputs.pool.push_back(row);
      }
    }
  }
  bool any_positive = false;
  for (const auto& ex : inputs.test.examples) any_positive |= ex.y == 1;
  if (inputs.test.examples.empty() || !any_positive) {
    throw ValidationError("eval-pair test split has no positive examples; "
                          "lower eval_test_fraction or add labels");
  }
  return inputs;
}

std::vector<std::size_t> sample_budget(const GridInputs& inputs, const std::string& mode,
                                       int budget, Rng& rng,
                                       std::vector<std::string>* warnings) {
  const auto& pool = inputs.pool;
  auto shuffled = [&rng](std::vector<std::size_t> idx) {
    for (std::size_t t = idx.size(); t > 1; --t) {
      std::swap(idx[t - 1], idx[rng.below(t)]);
    }
    return idx;
  };
  std::vector<std::size_t> picked;
  if (mode == "total") {
    std::vector<std::size_t> idx(pool.size());
    std::iota(idx.begin(), idx.end(), 0);
    idx = shuffled(std::move(idx));
    if (static_cast<int>(idx.size()) < budget && warnings) {
      warnings->push_back("total budget " + std::to_string(budget) + " clamped to " +
                          std::to_string(idx.size()) + " pool labels");
    }
    idx.resize(std::min<std::size_t>(idx.size(), budget));
    picked = std::move(idx);
  } else if (mode == "per_pair") {
    std::map<SourcePair, std::vector<std::size_t>> by_pair;
    for (std::size_t k = 0; k < pool.size(); ++k) by_pair[pool[k].pair].push_back(k);
    for (auto& [pair, idx] : by_pair) {
      auto order = shuffled(std::move(idx));
      if (static_cast<int>(order.size()) < budget && warnings) {
        warnings->push_back("per_pair budget " + std::to_string(budget) +
                            " clamped to " + std::to_string(order.size()) +
                            " labels for one pair");
      }
      order.resize(std::min<std::size_t>(order.size(), budget));
      picked.insert(picked.end(), order.begin(), order.end());
    }
  } else {  // per_source
    std::set<std::size_t> chosen;
    std::set<int> sources;
    for (const auto& row : pool) {
      sources.insert(row.pair.a);
      sources.insert(row.pair.b);
    }
    for (int s : sources) {
      std::vector<std::size_t> idx;
      for (std::size_t k = 0; k < pool.size(); ++k) {
        if (pool[k].pair.a == s || pool[k].pair.b == s) idx.push_back(k);
      }
      idx = shuffled(std::move(idx));
      int taken = 0;
      for (std::size_t k : idx) {
        if (taken == budget) break;
        if (chosen.insert(k).second) ++taken;
      }
      if (taken < budget && warnings) {
        warnings->push_back("per_source budget " + std::to_string(budget) +
                            " clamped to " + std::to_string(taken) +
                            " labels for one source");
      }
    }
    picked.assign(chosen.begin(), chosen.end());
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

}  // namespace

std::string family_name(ExperimentFamily family) {
  switch (family) {
    case ExperimentFamily::kPRGrid: return "pr_grid";
    case ExperimentFamily::kSummary: return "summary";
    case ExperimentFamily::kSampleComplexity: return "sample_complexity";
    case ExperimentFamily::kSourceComplexity: return "source_complexity";
    case ExperimentFamily::kRuntime: return "runtime";
  }
  throw std::out_of_range("unknown experiment family");
}

void ExperimentPlan::validate() const {
  if (methods.empty()) throw ValidationError("plan: methods must not be empty");
  std::set<std::string> seen;
  for (const auto& m : methods) {
    if (!known_methods().contains(m)) {
      throw ValidationError("plan: unknown method '" + m + "'");
    }
    if (!seen.insert(m).second) {
      throw ValidationError("plan: duplicate method '" + m + "'");
    }
  }
  if (trials < 1) throw ValidationError("plan: trials must be positive");
  if (threads < 1) throw ValidationError("plan: threads must be positive");
  if (cv_grid_points < 1) throw ValidationError("plan: cv_grid_points must be positive");
  synth.validate();
  solver.validate();
  if (!recall_grid.empty()) {
    double prev = 0.0;
    for (double r : recall_grid) {
      if (!(r > 0.0 && r <= 1.0) || r <= prev) {
        throw ValidationError("plan: recall_grid must be strictly increasing in (0, 1]");
      }
      prev = r;
    }
  }
  switch (family) {
    case ExperimentFamily::kSampleComplexity:
      check_increasing(budgets, 1, "budgets");
      break;
    case ExperimentFamily::kSourceComplexity:
      check_increasing(n_list, 2, "n_list");
      if (labels_per_source < 1) {
        throw ValidationError("plan: labels_per_source must be positive");
      }
      break;
    case ExperimentFamily::kRuntime:
      check_increasing(runtime_budgets, 1, "runtime_budgets");
      break;
    case ExperimentFamily::kPRGrid:
    case ExperimentFamily::kSummary:
      if (records_path.empty() || labels_path.empty()) {
        throw ValidationError("plan: pr grid needs records_path and labels_path");
      }
      if (eval_source_a.empty() || eval_source_b.empty() ||
          eval_source_a == eval_source_b) {
        throw ValidationError("plan: pr grid needs two distinct eval sources");
      }
      if (!(eval_test_fraction > 0.0 && eval_test_fraction < 1.0)) {
        throw ValidationError("plan: eval_test_fraction must lie in (0, 1)");
      }
      if (!(at_recall > 0.0 && at_recall <= 1.0)) {
        throw ValidationError("plan: at_recall must lie in (0, 1]");
      }
      if (bootstrap_resamples < 1) {
        throw ValidationError("plan: bootstrap_resamples must be positive");
      }
      for (const auto& row : grid_rows) {
        if (row.mode != "per_pair" && row.mode != "per_source" && row.mode != "total") {
          throw ValidationError("plan: unknown budget mode '" + row.mode + "'");
        }
        check_increasing(row.budgets, 1, "grid budgets");
      }
      break;
  }
}

double ExperimentReport::mean_error(const std::string& method, int x) const {
  double sum = 0.0;
  int n = 0;
  for (const auto& c : cells) {
    if (c.ok && c.method == method && c.x == x) {
      sum += c.error;
      ++n;
    }
  }
  if (n == 0) throw ValidationError("no successful trials for " + method + " at x=" +
                                    std::to_string(x));
  return sum / n;
}

std::vector<AggRow> ExperimentReport::aggregate() const {
  std::map<std::pair<int, std::string>, std::vector<const TrialCell*>> groups;
  for (const auto& c : cells) groups[{c.x, c.method}].push_back(&c);
  std::vector<AggRow> rows;
  for (const auto& [key, group] : groups) {
    AggRow row;
    row.x = key.first;
    row.method = key.second;
    double sum = 0.0;
    for (const auto* c : group) {
      if (c->ok) {
        sum += c->error;
        ++row.n_ok;
      } else {
        ++row.n_failed;
      }
    }
    if (row.n_ok > 0) {
      row.mean = sum / row.n_ok;
      double var = 0.0;
      for (const auto* c : group) {
        if (c->ok) var += (c->error - row.mean) * (c->error - row.mean);
      }
      const double half = 1.96 * std::sqrt(var / row.n_ok) / std::sqrt(row.n_ok);
      row.lo = row.mean - half;
      row.hi = row.mean + half;
    } else {
      row.mean = row.lo = row.hi = kNaN;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

ExperimentReport run_sample_complexity(const ExperimentPlan& raw_plan) {
  const ExperimentPlan plan = resolve_plan(raw_plan);
  plan.validate();
  ExperimentReport report;
  report.family = ExperimentFamily::kSampleComplexity;
  const int n_budgets = static_cast<int>(plan.budgets.size());
  const int n_tasks = n_budgets * plan.trials;
  std::vector<TrialSlot> slots(n_tasks);
  parallel_for(n_tasks, plan.threads, [&](int task) {
    const int budget = plan.budgets[task / plan.trials];
    const int trial = task % plan.trials;
    const std::uint64_t trial_seed = derive_seed(plan.seed, stream::kTrial, trial);
    SynthConfig cfg = plan.synth;
    cfg.pairs_per_source_pair = budget;
    cfg.seed = trial_seed;
    const SynthDataset ds = generate(cfg);
    run_trial_methods(slots[task], budget, trial, ds.train, ds.test, plan, trial_seed);
  });
  merge_slots(report, slots);
  sort_cells(report, plan.methods);
  return report;
}

ExperimentReport run_source_complexity(const ExperimentPlan& raw_plan) {
  const ExperimentPlan plan = resolve_plan(raw_plan);
  plan.validate();
  ExperimentReport report;
  report.family = ExperimentFamily::kSourceComplexity;
  std::vector<TrialSlot> slots(plan.trials);
  parallel_for(plan.trials, plan.threads, [&](int trial) {
    const std::uint64_t trial_seed = derive_seed(plan.seed, stream::kTrial, trial);
    SynthConfig cfg = plan.synth;
    cfg.seed = trial_seed;
    const auto datasets = sweep_sources(cfg, plan.n_list, plan.labels_per_source);
    for (std::size_t k = 0; k < plan.n_list.size(); ++k) {
      run_trial_methods(slots[trial], plan.n_list[k], trial, datasets[k].train,
                        datasets[k].test, plan, trial_seed);
    }
  });
  merge_slots(report, slots);
  sort_cells(report, plan.methods);
  return report;
}

ExperimentReport run_runtime(const ExperimentPlan& raw_plan) {
  const ExperimentPlan plan = resolve_plan(raw_plan);
  plan.validate();
  ExperimentReport report;
  report.family = ExperimentFamily::kRuntime;
  const int n_budgets = static_cast<int>(plan.runtime_budgets.size());
  const int n_tasks = n_budgets * plan.trials;
  std::vector<TrialSlot> slots(n_tasks);
  parallel_for(n_tasks, plan.threads, [&](int task) {
    TrialSlot& slot = slots[task];
    const int budget = plan.runtime_budgets[task / plan.trials];
    const int trial = task % plan.trials;
    const std::uint64_t trial_seed = derive_seed(plan.seed, stream::kTrial, trial);
    SynthConfig cfg = plan.synth;
    cfg.pairs_per_source_pair = budget;
    cfg.seed = trial_seed;
    const SynthDataset ds = generate(cfg);
    const Standardizer scaler = fit_standardizer(ds.train);
    const Dataset train = standardize_dataset(ds.train, scaler);
    const Dataset test = standardize_dataset(ds.test, scaler);

    auto test_error_of = [&](auto&& score_fn) {
      std::vector<ScoredExample> scored;
      scored.reserve(test.examples.size());
      for (const auto& ex : test.examples) {
        scored.push_back({score_fn(ex), ex.y, ex.pair});
      }
      return test_error(scored, 0.0);
    };
    auto keep = [](int iter, int last) {
      return iter <= 100 || iter % 25 == 0 || iter == last;
    };

    for (const auto& method : plan.methods) {
      try {
        if (method == "indep") {
          // one closed-form solve per pair, error measured after each
          std::map<SourcePair, std::vector<const LabeledExample*>> groups;
          for (const auto& ex : train.examples) groups[ex.pair].push_back(&ex);
          IndepModel partial;
          partial.dim = train.dim;
          partial.feature_names = train.feature_names;
          partial.sources = train.sources;
          double elapsed = 0.0;
          for (const auto& [pair, examples] : groups) {
            const auto t0 = std::chrono::steady_clock::now();
            double trace_xx = 0.0;
            for (const auto* ex : examples) {
              for (double v : ex->x) trace_xx += v * v;
            }
            const double ridge = plan.solver.indep_ridge_scale * trace_xx / train.dim;
            auto w = ridge_solve(examples, train.dim, ridge);
            elapsed += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                           .count();
            partial.weights.emplace(pair, std::move(w));
            slot.trajectories.push_back(
                {budget, method, trial, elapsed,
                 test_error_of([&](const LabeledExample& ex) {
                   return partial.score(ex.pair, ex.x);
                 })});
          }
          slot.cells.push_back({budget, method, trial, true,
                                slot.trajectories.back().test_error});
        } else {
          SolverConfig cfg_fit = plan.solver;
          if (method == "transfer" && plan.cv_lambda) {
            const ParamGrid grid =
                ParamGrid::log_spaced(lambda_max(train), plan.cv_grid_points);
            CvOptions cv;
            cv.seed = trial_seed;
            cv.standardize = false;  // inputs are standardized already
            const CVResult res = select_lambda(train, grid, plan.solver, cv);
            cfg_fit.lambda_a = res.chosen_lambda;
          }
          std::vector<double> errors;  // per accepted iteration
          FitObserver observer = [&](int iter, const TransferModel& m) {
            (void)iter;
            errors.push_back(test_error_of(
                [&](const LabeledExample& ex) { return m.score(ex.pair, ex.x); }));
          };
          auto [model, trace] = method == "pooled"
                                    ? fit_pooled(train, cfg_fit, observer)
                                    : fit_transfer(train, cfg_fit, observer);
          const int last = trace.iters.back().iter;
          for (const auto& rec : trace.iters) {
            if (!keep(rec.iter, last)) continue;
            slot.trajectories.push_back(
                {budget, method, trial, rec.elapsed_seconds, errors[rec.iter]});
          }
          slot.cells.push_back({budget, method, trial, true, errors[last]});
        }
      } catch (const std::exception& e) {
        slot.cells.push_back({budget, method, trial, false, kNaN});
        slot.warnings.push_back(method + " budget " + std::to_string(budget) +
                                " trial " + std::to_string(trial) + ": " + e.what());
      }
    }
  });
  merge_slots(report, slots);
  sort_cells(report, plan.methods);
  return report;
}

ExperimentReport run_pr_grid(const ExperimentPlan& raw_plan) {
  const ExperimentPlan plan = resolve_plan(raw_plan);
  plan.validate();
  ExperimentReport report;
  report.family = plan.family;
  const GridInputs inputs = load_grid_inputs(plan);

  struct Cell {
    int mode_idx;
    int budget;
  };
  std::vector<Cell> cell_list;
  for (std::size_t m = 0; m < plan.grid_rows.size(); ++m) {
    for (int b : plan.grid_rows[m].budgets) {
      cell_list.push_back({static_cast<int>(m), b});
    }
  }
  struct CellSlot {
    std::vector<GridCell> out;
    std::vector<std::string> warnings;
  };
  std::vector<CellSlot> slots(cell_list.size());
  parallel_for(static_cast<int>(cell_list.size()), plan.threads, [&](int ci) {
    const auto& cell = cell_list[ci];
    const std::string& mode = plan.grid_rows[cell.mode_idx].mode;
    CellSlot& slot = slots[ci];
    std::map<std::string, std::vector<PRCurve>> curves;
    std::map<std::string, std::vector<double>> p_at_r0;
    std::map<std::string, std::vector<ScoredExample>> last_scored;
    std::set<std::string> clamp_warned;
    for (int trial = 0; trial < plan.trials; ++trial) {
      const std::uint64_t cell_seed = derive_seed(
          plan.seed, stream::kTrial,
          (static_cast<std::uint64_t>(ci) << 32) | static_cast<std::uint32_t>(trial));
      Rng rng(cell_seed);
      std::vector<std::string> clamps;
      const auto picked = sample_budget(inputs, mode, cell.budget, rng, &clamps);
      for (const auto& w : clamps) clamp_warned.insert(w);
      if (picked.empty()) {
        slot.warnings.push_back(mode + " budget " + std::to_string(cell.budget) +
                                " trial " + std::to_string(trial) +
                                ": empty training sample");
        continue;
      }
      const Dataset train = rows_to_dataset(inputs.pool, picked, inputs);
      for (const auto& method : plan.methods) {
        MethodOutcome res = evaluate_method(method, train, inputs.test, plan, cell_seed);
        if (!res.ok) {
          slot.warnings.push_back(method + " " + mode + " budget " +
                                  std::to_string(cell.budget) + " trial " +
                                  std::to_string(trial) + ": " + res.warnings.back());
          continue;
        }
        try {
          curves[method].push_back(pr_curve(res.scored));
          p_at_r0[method].push_back(
              precision_at_recall(curves[method].back(), plan.at_recall));
          last_scored[method] = std::move(res.scored);
        } catch (const ValidationError& e) {
          slot.warnings.push_back(method + " " + mode + " budget " +
                                  std::to_string(cell.budget) + " trial " +
                                  std::to_string(trial) + ": " + e.what());
        }
      }
    }
    for (const auto& w : clamp_warned) {
      slot.warnings.push_back(mode + " budget " + std::to_string(cell.budget) + ": " + w);
    }
    for (const auto& method : plan.methods) {
      const auto it = curves.find(method);
      if (it == curves.end() || it->second.empty()) {
        slot.warnings.push_back(method + " " + mode + " budget " +
                                std::to_string(cell.budget) +
                                ": no successful trials; cell skipped");
        continue;
      }
      GridCell out;
      out.mode = mode;
      out.budget = cell.budget;
      out.method = method;
      if (it->second.size() > 1) {
        out.band = band_curves(it->second, plan.recall_grid);
      } else {
        out.band = bootstrap_band(last_scored[method], plan.recall_grid,
                                  plan.bootstrap_resamples,
                                  derive_seed(plan.seed, stream::kTrial, ci));
      }
      double sum = 0.0;
      bool achieved = true;
      for (double p : p_at_r0[method]) {
        sum += p;
        achieved = achieved && p > 0.0;
      }
      out.precision_at_r0 = sum / static_cast<double>(p_at_r0[method].size());
      out.r0_achieved = achieved;
      slot.out.push_back(std::move(out));
    }
  });
  for (auto& slot : slots) {
    report.grid.insert(report.grid.end(), slot.out.begin(), slot.out.end());
    report.warnings.insert(report.warnings.end(), slot.warnings.begin(),
                           slot.warnings.end());
  }
  return report;
}

ExperimentReport run_experiment(const ExperimentPlan& plan) {
  switch (plan.family) {
    case ExperimentFamily::kSampleComplexity: return run_sample_complexity(plan);
    case ExperimentFamily::kSourceComplexity: return run_source_complexity(plan);
    case ExperimentFamily::kRuntime: return run_runtime(plan);
    case ExperimentFamily::kPRGrid:
    case ExperimentFamily::kSummary: return run_pr_grid(plan);
  }
  throw std::out_of_range("unknown experiment family");
}

std::string plan_to_json(const ExperimentPlan& raw_plan) {
  const ExperimentPlan plan = resolve_plan(raw_plan);
  ordered_json j;
  j["family"] = family_name(plan.family);
  j["seed"] = plan.seed;
  j["trials"] = plan.trials;
  j["threads"] = plan.threads;
  j["methods"] = plan.methods;
  j["synth"] = {{"n_sources", plan.synth.n_sources},
                {"n_entities", plan.synth.n_entities},
                {"dim", plan.synth.dim},
                {"noise_min", plan.synth.noise_min},
                {"noise_max", plan.synth.noise_max},
                {"heterogeneity", plan.synth.heterogeneity},
                {"pairs_per_source_pair", plan.synth.pairs_per_source_pair},
                {"match_fraction", plan.synth.match_fraction},
                {"test_pairs_total", plan.synth.test_pairs_total}};
  j["solver"] = {{"lambda_a", plan.solver.lambda_a},
                 {"max_iters", plan.solver.max_iters},
                 {"tol", plan.solver.tol},
                 {"step_policy", plan.solver.step_policy == StepPolicy::kBacktracking
                                     ? "backtracking"
                                     : "fixed"},
                 {"step_size", plan.solver.step_size},
                 {"backtrack_shrink", plan.solver.backtrack_shrink},
                 {"indep_ridge_scale", plan.solver.indep_ridge_scale}};
  j["cv_lambda"] = plan.cv_lambda;
  j["cv_grid_points"] = plan.cv_grid_points;
  switch (plan.family) {
    case ExperimentFamily::kSampleComplexity:
      j["budgets"] = plan.budgets;
      break;
    case ExperimentFamily::kSourceComplexity:
      j["n_list"] = plan.n_list;
      j["labels_per_source"] = plan.labels_per_source;
      break;
    case ExperimentFamily::kRuntime:
      j["runtime_budgets"] = plan.runtime_budgets;
      break;
    case ExperimentFamily::kPRGrid:
    case ExperimentFamily::kSummary: {
      j["records_path"] = plan.records_path;
      j["labels_path"] = plan.labels_path;
      j["eval_pair"] = {plan.eval_source_a, plan.eval_source_b};
      j["eval_test_fraction"] = plan.eval_test_fraction;
      j["grid_rows"] = ordered_json::array();
      for (const auto& row : plan.grid_rows) {
        j["grid_rows"].push_back({{"mode", row.mode}, {"budgets", row.budgets}});
      }
      j["at_recall"] = plan.at_recall;
      j["recall_grid"] = plan.recall_grid;
      j["bootstrap_resamples"] = plan.bootstrap_resamples;
      break;
    }
  }
  return j.dump(2) + "\n";
}

void write_report(const ExperimentReport& report, const ExperimentPlan& raw_plan,
                  const std::string& out_dir) {
  const ExperimentPlan plan = resolve_plan(raw_plan);
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());
  const auto path = [&](const std::string& name) {
    return (fs::path(out_dir) / name).string();
  };

  write_text_file(path("plan.json"), plan_to_json(plan));
  std::ostringstream warn;
  for (const auto& w : report.warnings) warn << w << '\n';
  write_text_file(path("warnings.log"), warn.str());

  const std::string fam = family_name(report.family);
  if (report.family == ExperimentFamily::kSampleComplexity ||
      report.family == ExperimentFamily::kSourceComplexity ||
      report.family == ExperimentFamily::kRuntime) {
    const std::string x_name =
        report.family == ExperimentFamily::kSourceComplexity ? "n_sources" : "budget";
    std::ostringstream agg;
    agg << x_name << ",method,mean_error,lo,hi,n_ok,n_failed\n";
    for (const auto& row : report.aggregate()) {
      agg << row.x << ',' << row.method << ',' << format_double(row.mean) << ','
          << format_double(row.lo) << ',' << format_double(row.hi) << ',' << row.n_ok
          << ',' << row.n_failed << '\n';
    }
    const std::string base = report.family == ExperimentFamily::kRuntime
                                 ? "runtime_final"
                                 : fam;
    write_text_file(path(base + ".csv"), agg.str());

    std::ostringstream trials;
    trials << x_name << ",method,trial,ok,error\n";
    for (const auto& c : report.cells) {
      trials << c.x << ',' << c.method << ',' << c.trial << ',' << (c.ok ? 1 : 0) << ','
             << format_double(c.error) << '\n';
    }
    write_text_file(path(base + "_trials.csv"), trials.str());
  }
  if (report.family == ExperimentFamily::kRuntime) {
    std::ostringstream traj;
    traj << "budget,method,trial,elapsed_seconds,test_error\n";
    for (const auto& p : report.trajectories) {
      traj << p.budget << ',' << p.method << ',' << p.trial << ','
           << format_double(p.elapsed_seconds) << ',' << format_double(p.test_error)
           << '\n';
    }
    write_text_file(path("runtime_trajectories.csv"), traj.str());
  }
  if (report.family == ExperimentFamily::kPRGrid ||
      report.family == ExperimentFamily::kSummary) {
    std::ostringstream summary;
    summary << "mode,budget,method,precision_at_recall,achieved\n";
    for (const auto& cell : report.grid) {
      summary << cell.mode << ',' << cell.budget << ',' << cell.method << ','
              << format_double(cell.precision_at_r0) << ','
              << (cell.r0_achieved ? 1 : 0) << '\n';
    }
    write_text_file(path("summary.csv"), summary.str());
    if (report.family == ExperimentFamily::kPRGrid) {
      for (const auto& cell : report.grid) {
        write_text_file(path("pr_" + cell.mode + "_" + std::to_string(cell.budget) +
                             "_" + cell.method + ".csv"),
                        cell.band.to_csv());
      }
    }
  }
}

}  // namespace ertl
