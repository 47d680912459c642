#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "ertl/cv.hpp"
#include "ertl/errors.hpp"
#include "ertl/rng.hpp"
#include "ertl/solver.hpp"
#include "support/oracles.hpp"

using namespace ertl;

namespace {

SolverConfig tight_config(double lambda_a = 0.0) {
  SolverConfig cfg;
  cfg.lambda_a = lambda_a;
  cfg.tol = 1e-12;
  cfg.max_iters = 20000;
  return cfg;
}

TransferModel zero_model(const Dataset& data) {
  TransferModel m;
  m.dim = data.dim;
  m.feature_names = data.feature_names;
  m.sources = data.sources;
  m.w0.assign(data.dim, 0.0);
  m.w.assign(data.sources.size(), std::vector<double>(data.dim, 0.0));
  return m;
}

// A two-source dataset with deterministic +/-1 features whose labels are
// reproduced exactly by w0 = (1, 0, ...): an exact-fit witness.
Dataset exact_fit_dataset(int dim, int n) {
  Dataset data;
  data.sources = {"s0", "s1"};
  data.dim = dim;
  for (int t = 0; t < dim; ++t) data.feature_names.push_back("f" + std::to_string(t));
  Rng rng(4242);
  for (int k = 0; k < n; ++k) {
    LabeledExample ex;
    ex.pair = SourcePair::of(0, 1);
    ex.x.assign(dim, 0.0);
    ex.x[0] = k % 2 ? 1.0 : -1.0;
    for (int t = 1; t < dim; ++t) ex.x[t] = rng.gaussian();
    ex.y = k % 2 ? 1 : -1;  // equals <e_1, x>
    data.examples.push_back(std::move(ex));
  }
  return data;
}

TransferModel exact_fit_model(const Dataset& data) {
  auto m = zero_model(data);
  m.w0[0] = 1.0;
  return m;
}

}  // namespace

TEST_SUITE("solver") {

TEST_CASE("objective on the zero model is half the example count") {
  const auto data = oracle::random_dataset(3, 3, 4, 60, 0.0);
  const auto zero = zero_model(data);
  // Labels are +/-1, so every residual is 1 and the loss is n/2.
  CHECK(objective(zero, data, 0.0) == doctest::Approx(0.5 * data.size()));
  CHECK(objective(zero, data, 100.0) == doctest::Approx(0.5 * data.size()));
}

TEST_CASE("the l1 penalty prices per-source weights but never w0") {
  const auto data = oracle::random_dataset(4, 3, 4, 50, 0.2);
  auto m = oracle::random_model(5, 3, 4);
  double l1 = 0.0;
  for (const auto& wi : m.w) l1 += oracle::l1_norm(wi);
  const double base = objective(m, data, 0.0);
  CHECK(objective(m, data, 10.0) == doctest::Approx(base + 10.0 * l1));
  // Zero out the per-source vectors: lambda no longer matters.
  for (auto& wi : m.w) wi.assign(4, 0.0);
  CHECK(objective(m, data, 10.0) == doctest::Approx(objective(m, data, 0.0)));
}

TEST_CASE("objective is zero for an exact fit") {
  const auto data = exact_fit_dataset(4, 50);
  const auto model = exact_fit_model(data);
  CHECK(objective(model, data, 0.0) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("objective matches a term-by-term oracle on random inputs") {
  Rng rng(7);
  for (int rep = 0; rep < 10; ++rep) {
    const int n_sources = 2 + static_cast<int>(rng.below(4));
    const int dim = 1 + static_cast<int>(rng.below(5));
    const auto data =
        oracle::random_dataset(100 + rep, n_sources, dim, 40, 0.2);
    const auto model = oracle::random_model(200 + rep, n_sources, dim);
    const double lambda = rng.uniform01();
    const double got = objective(model, data, lambda);
    const double want = oracle::objective_bruteforce(model, data, lambda);
    CHECK(got == doctest::Approx(want).epsilon(1e-10));
  }
}

TEST_CASE("loss gradient vanishes at an exact fit") {
  const auto data = exact_fit_dataset(3, 40);
  const auto model = exact_fit_model(data);
  const auto g = loss_gradient(model, data);
  for (double v : g.w0) CHECK(std::fabs(v) < 1e-12);
  for (const auto& gi : g.w)
    for (double v : gi) CHECK(std::fabs(v) < 1e-12);
}

TEST_CASE("loss gradient single-example hand case") {
  // One example between sources 0 and 1 with the zero model: the residual
  // is -y, so grad_w0 = -y x and grad_{w_0} = grad_{w_1} = -y x / 2;
  // source 2 is untouched.
  Dataset data;
  data.sources = {"a", "b", "c"};
  data.feature_names = {"f0", "f1"};
  data.dim = 2;
  LabeledExample ex;
  ex.pair = SourcePair::of(0, 1);
  ex.x = {3.0, -2.0};
  ex.y = 1;
  data.examples.push_back(ex);
  const auto zero = zero_model(data);
  const auto g = loss_gradient(zero, data);
  CHECK(g.w0[0] == doctest::Approx(-3.0));
  CHECK(g.w0[1] == doctest::Approx(2.0));
  CHECK(g.w[0][0] == doctest::Approx(-1.5));
  CHECK(g.w[0][1] == doctest::Approx(1.0));
  CHECK(g.w[1][0] == doctest::Approx(-1.5));
  CHECK(g.w[1][1] == doctest::Approx(1.0));
  CHECK(g.w[2][0] == 0.0);
  CHECK(g.w[2][1] == 0.0);
}

TEST_CASE("loss gradient agrees with central finite differences") {
  // 20 random instances; per-coordinate relative error below 1e-6 with
  // step h = 1e-5.
  for (int rep = 0; rep < 20; ++rep) {
    const int n_sources = 2 + (rep % 3);
    const int dim = 2 + (rep % 4);
    const auto data =
        oracle::random_dataset(300 + rep, n_sources, dim, 25, 0.3);
    const auto model = oracle::random_model(400 + rep, n_sources, dim);
    const auto g = loss_gradient(model, data);
    for (int t = 0; t < dim; ++t) {
      const double fd = oracle::fd_loss_derivative(model, data, -1, t);
      const double denom = std::max({std::fabs(fd), std::fabs(g.w0[t]), 1.0});
      CHECK(std::fabs(g.w0[t] - fd) / denom < 1e-6);
    }
    for (int s = 0; s < n_sources; ++s) {
      for (int t = 0; t < dim; ++t) {
        const double fd = oracle::fd_loss_derivative(model, data, s, t);
        const double denom =
            std::max({std::fabs(fd), std::fabs(g.w[s][t]), 1.0});
        CHECK(std::fabs(g.w[s][t] - fd) / denom < 1e-6);
      }
    }
  }
}

TEST_CASE("soft threshold hand case and edge cases") {
  const std::vector<double> v = {1.0, -0.2, 0.3};
  const auto out = soft_threshold(v, 0.5);
  REQUIRE(out.size() == 3);
  CHECK(out[0] == doctest::Approx(0.5));
  CHECK(out[1] == 0.0);
  CHECK(out[2] == 0.0);

  const auto ident = soft_threshold(v, 0.0);
  CHECK(ident == v);

  const std::vector<double> zeros(4, 0.0);
  CHECK(soft_threshold(zeros, 1.0) == zeros);

  CHECK_THROWS_AS(soft_threshold(v, -0.1), std::invalid_argument);
}

TEST_CASE("soft threshold matches the closed form on random vectors") {
  Rng rng(21);
  for (int rep = 0; rep < 1000; ++rep) {
    const int d = 1 + static_cast<int>(rng.below(8));
    std::vector<double> v(d);
    for (auto& x : v) x = 4.0 * rng.gaussian();
    const double tau = rng.uniform01();
    const auto out = soft_threshold(v, tau);
    for (int t = 0; t < d; ++t) {
      const double want =
          (v[t] > tau) ? v[t] - tau : (v[t] < -tau ? v[t] + tau : 0.0);
      CHECK(out[t] == want);  // closed form, exact
      CHECK(std::fabs(out[t]) <= std::fabs(v[t]));  // shrinkage
      if (std::fabs(v[t]) <= tau) CHECK(out[t] == 0.0);
    }
  }
}

TEST_CASE("unregularized composite fit matches the least-squares oracle") {
  const auto data = oracle::random_dataset(501, 2, 4, 120, 0.05);
  // With one source pair, the prediction is <w0 + (w_0+w_1)/2, x>: the
  // per-pair OLS solution gives the attainable minimum loss.
  std::vector<std::vector<double>> rows;
  std::vector<double> y;
  for (const auto& ex : data.examples) {
    rows.push_back(ex.x);
    y.push_back(ex.y);
  }
  const auto wls = oracle::least_squares(rows, y);
  double best = 0.0;
  for (size_t k = 0; k < rows.size(); ++k) {
    double pred = 0.0;
    for (int t = 0; t < data.dim; ++t) pred += wls[t] * rows[k][t];
    best += 0.5 * (y[k] - pred) * (y[k] - pred);
  }
  auto cfg = tight_config(0.0);
  const auto [model, trace] = fit_transfer(data, cfg);
  CHECK(trace.final_objective() == doctest::Approx(best).epsilon(1e-6));
  // The combined weight for the observed pair reproduces the OLS vector.
  const auto cw = model.combined_weight(SourcePair::of(0, 1));
  CHECK(oracle::max_abs_diff(cw, wls) < 1e-4);
}

TEST_CASE("lambda at or above lambda_max kills every per-source vector") {
  const auto data = oracle::random_dataset(601, 4, 5, 200, 0.2);
  const double lmax = lambda_max(data);
  CHECK(lmax > 0.0);
  auto cfg = tight_config(lmax * 1.000001);
  const auto [model, trace] = fit_transfer(data, cfg);
  for (const auto& wi : model.w)
    for (double v : wi) CHECK(v == 0.0);
  // And the shared part coincides with the pooled fit.
  auto pooled_cfg = tight_config(0.0);
  const auto [pooled, ptrace] = fit_pooled(data, pooled_cfg);
  CHECK(oracle::max_abs_diff(model.w0, pooled.w0) < 1e-8);
}

TEST_CASE("homogeneous data leaves per-source vectors near zero at a cv lambda") {
  // All pairs share one true weight vector; after selecting lambda by
  // holdout, the per-source l1 mass is a small fraction of the shared mass.
  Dataset data;
  data.sources = {"s0", "s1", "s2", "s3"};
  data.feature_names = {"f0", "f1", "f2"};
  data.dim = 3;
  Rng rng(611);
  const std::vector<double> truth = {1.0, -0.7, 0.4};
  for (int k = 0; k < 400; ++k) {
    const int a = static_cast<int>(rng.below(4));
    int b = static_cast<int>(rng.below(3));
    if (b >= a) ++b;
    LabeledExample ex;
    ex.pair = SourcePair::of(a, b);
    ex.x = {rng.gaussian(), rng.gaussian(), rng.gaussian()};
    double s = 0.0;
    for (int t = 0; t < 3; ++t) s += truth[t] * ex.x[t];
    ex.y = s + 0.05 * rng.gaussian() >= 0.0 ? 1 : -1;
    data.examples.push_back(std::move(ex));
  }
  SolverConfig cfg = tight_config(0.0);
  cfg.tol = 1e-10;
  const auto grid = ParamGrid::log_spaced(lambda_max(data), 8, 1e-4);
  CvOptions cv;
  cv.seed = 614;
  cv.standardize = false;
  const auto res = select_lambda(data, grid, cfg, cv);
  double shared = oracle::l1_norm(res.model.w0);
  double specific = 0.0;
  for (const auto& wi : res.model.w) specific += oracle::l1_norm(wi);
  CHECK(specific <= 0.1 * shared);
}

TEST_CASE("pooled fit matches the pooled normal equations") {
  const auto data = oracle::random_dataset(621, 3, 4, 150, 0.3);
  auto cfg = tight_config(0.0);
  const auto [model, trace] = fit_pooled(data, cfg);
  for (const auto& wi : model.w)
    for (double v : wi) CHECK(v == 0.0);
  const auto wls = oracle::pooled_least_squares(data);
  CHECK(oracle::max_abs_diff(model.w0, wls) < 1e-6);
}

TEST_CASE("transfer beats pooled on deliberately heterogeneous pairs") {
  // Pair (0,1) labels follow +x, pair (2,3) labels follow -x: a single
  // shared vector cannot fit both, per-source corrections can (exactly).
  Dataset data;
  data.sources = {"a", "b", "c", "d"};
  data.feature_names = {"f0"};
  data.dim = 1;
  for (int k = 0; k < 200; ++k) {
    const double x = k % 2 ? 1.0 : -1.0;
    LabeledExample pos;
    pos.pair = SourcePair::of(0, 1);
    pos.x = {x};
    pos.y = x > 0 ? 1 : -1;
    data.examples.push_back(pos);
    LabeledExample neg;
    neg.pair = SourcePair::of(2, 3);
    neg.x = {x};
    neg.y = x > 0 ? -1 : 1;
    data.examples.push_back(neg);
  }
  auto cfg = tight_config(1e-4);
  const auto [tm, ttrace] = fit_transfer(data, cfg);
  auto pooled_cfg = tight_config(0.0);
  const auto [pm, ptrace] = fit_pooled(data, pooled_cfg);
  const double terr = objective(tm, data, 0.0);
  const double perr = objective(pm, data, 0.0);
  CHECK(terr < 0.05 * perr);
}

TEST_CASE("independent ridge approaches per-pair least squares as ridge vanishes") {
  const auto data = oracle::random_dataset(641, 3, 3, 240, 0.2);
  SolverConfig cfg;
  cfg.indep_ridge_scale = 1e-14;
  const auto indep = fit_indep(data, cfg);
  // Compare each pair's weights against an OLS oracle on that pair alone.
  for (const auto& [pair, w] : indep.weights) {
    std::vector<std::vector<double>> rows;
    std::vector<double> y;
    for (const auto& ex : data.examples) {
      if (ex.pair == pair) {
        rows.push_back(ex.x);
        y.push_back(ex.y);
      }
    }
    REQUIRE(!rows.empty());
    const auto wls = oracle::least_squares(rows, y);
    CHECK(oracle::max_abs_diff(w, wls) < 1e-6);
  }
}

TEST_CASE("independent fits are decoupled across pairs") {
  // Adding examples for one pair must not perturb another pair's weights.
  const auto base = oracle::random_dataset(651, 4, 3, 200, 0.2);
  Dataset augmented = base;
  Rng rng(652);
  for (int k = 0; k < 50; ++k) {
    LabeledExample ex;
    ex.pair = SourcePair::of(2, 3);
    ex.x = {rng.gaussian(), rng.gaussian(), rng.gaussian()};
    ex.y = rng.uniform01() < 0.5 ? 1 : -1;
    augmented.examples.push_back(std::move(ex));
  }
  SolverConfig cfg;
  const auto m1 = fit_indep(base, cfg);
  const auto m2 = fit_indep(augmented, cfg);
  const auto pair01 = SourcePair::of(0, 1);
  REQUIRE(m1.weights.count(pair01) == 1);
  REQUIRE(m2.weights.count(pair01) == 1);
  CHECK(m1.weights.at(pair01) == m2.weights.at(pair01));  // bitwise equal
}

TEST_CASE("independent model scores unseen pairs as zero with a warning") {
  auto data = oracle::random_dataset(661, 4, 3, 100, 0.2);
  // Remove every example touching the pair (2,3).
  std::erase_if(data.examples, [](const LabeledExample& ex) {
    return ex.pair == SourcePair::of(2, 3);
  });
  SolverConfig cfg;
  const auto indep = fit_indep(data, cfg);
  const auto unseen = SourcePair::of(2, 3);
  CHECK(std::find(indep.unseen.begin(), indep.unseen.end(), unseen) !=
        indep.unseen.end());
  CHECK(!indep.warnings.empty());
  CHECK(indep.score(unseen, std::vector<double>{1.0, 2.0, 3.0}) == 0.0);
}

TEST_CASE("backtracking trace is monotonically nonincreasing") {
  const auto data = oracle::random_dataset(671, 4, 5, 300, 0.4);
  SolverConfig cfg = tight_config(0.5);
  cfg.max_iters = 500;
  const auto [model, trace] = fit_transfer(data, cfg);
  REQUIRE(trace.iters.size() >= 2);
  for (size_t k = 1; k < trace.iters.size(); ++k) {
    CHECK(trace.iters[k].objective <= trace.iters[k - 1].objective + 1e-12);
  }
  CHECK(trace.iters.front().iter == 0);
}

TEST_CASE("solution is a fixed point of the proximal step") {
  const auto data = oracle::random_dataset(681, 3, 4, 150, 0.3);
  SolverConfig cfg = tight_config(0.2);
  cfg.tol = 1e-12;
  const auto [model, trace] = fit_transfer(data, cfg);
  const double step = 1.0 / estimate_lipschitz(data, true);
  const auto stepped = transfer_step(model, data, step, cfg.lambda_a);
  CHECK(oracle::max_abs_diff(stepped.w0, model.w0) < 1e-6);
  for (size_t s = 0; s < model.w.size(); ++s) {
    CHECK(oracle::max_abs_diff(stepped.w[s], model.w[s]) < 1e-6);
  }
}

TEST_CASE("sparsity is nonincreasing along an increasing lambda path") {
  const auto data = oracle::random_dataset(691, 4, 6, 250, 0.3);
  const double lmax = lambda_max(data);
  std::vector<double> lambdas;
  for (int k = 0; k < 5; ++k)
    lambdas.push_back(lmax * std::pow(10.0, -3.0 + 0.75 * k));
  int prev_nnz = -1;
  for (size_t k = 0; k < lambdas.size(); ++k) {
    auto cfg = tight_config(lambdas[k]);
    cfg.tol = 1e-11;
    const auto [model, trace] = fit_transfer(data, cfg);
    int nnz = 0;
    for (const auto& wi : model.w)
      for (double v : wi)
        if (std::fabs(v) > 1e-7) ++nnz;
    if (prev_nnz >= 0) CHECK(nnz <= prev_nnz);
    prev_nnz = nnz;
  }
}

TEST_CASE("objective gap decays geometrically on a well-conditioned problem") {
  const auto data = oracle::random_dataset(701, 3, 4, 200, 0.2);
  SolverConfig cfg = tight_config(0.05);
  cfg.tol = 0.0;  // run a fixed horizon
  cfg.max_iters = 160;
  const auto [model, trace] = fit_transfer(data, cfg);
  // Reference optimum from a much longer run.
  SolverConfig ref_cfg = tight_config(0.05);
  ref_cfg.tol = 1e-14;
  ref_cfg.max_iters = 100000;
  const auto [ref_model, ref_trace] = fit_transfer(data, ref_cfg);
  const double fstar = ref_trace.final_objective();
  std::vector<double> xs, ys;
  for (size_t k = 0; k < std::min<size_t>(100, trace.iters.size()); ++k) {
    const double gap = trace.iters[k].objective - fstar;
    if (gap <= 1e-14) break;
    xs.push_back(static_cast<double>(k));
    ys.push_back(std::log(gap));
  }
  REQUIRE(xs.size() >= 20);
  const auto [slope, r2] = oracle::regress(xs, ys);
  CHECK(slope < 0.0);
  CHECK(r2 > 0.9);
}

TEST_CASE("oversized fixed steps are reported as numerical failure") {
  const auto data = oracle::random_dataset(711, 3, 4, 200, 0.2);
  SolverConfig cfg;
  cfg.lambda_a = 0.1;
  cfg.step_policy = StepPolicy::kFixed;
  cfg.step_size = 50.0 / estimate_lipschitz(data, true);  // 50x the safe step
  cfg.max_iters = 2000;
  bool threw = false;
  try {
    fit_transfer(data, cfg);
  } catch (const NumericalError& e) {
    threw = true;
    CHECK(std::string(e.what()).find("iter") != std::string::npos);
  }
  CHECK(threw);
}

TEST_CASE("solver config validation rejects bad values") {
  SolverConfig cfg;
  cfg.lambda_a = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = SolverConfig{};
  cfg.backtrack_shrink = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = SolverConfig{};
  cfg.max_iters = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("trace csv has the documented header and row count") {
  const auto data = oracle::random_dataset(721, 2, 3, 80, 0.2);
  SolverConfig cfg = tight_config(0.1);
  cfg.max_iters = 50;
  cfg.tol = 0.0;
  const auto [model, trace] = fit_transfer(data, cfg);
  const auto csv = trace.to_csv();
  CHECK(csv.rfind("iter,objective,step_size,elapsed_seconds", 0) == 0);
  const auto newlines = std::count(csv.begin(), csv.end(), '\n');
  CHECK(newlines == static_cast<long>(trace.iters.size()) + 1);
}

TEST_CASE("the observer sees iteration zero and every accepted iterate") {
  const auto data = oracle::random_dataset(731, 3, 3, 100, 0.2);
  SolverConfig cfg = tight_config(0.1);
  cfg.max_iters = 40;
  cfg.tol = 0.0;
  std::vector<int> seen;
  const auto [model, trace] =
      fit_transfer(data, cfg, [&](int iter, const TransferModel&) {
        seen.push_back(iter);
      });
  REQUIRE(!seen.empty());
  CHECK(seen.front() == 0);
  for (size_t k = 0; k < seen.size(); ++k) {
    CHECK(seen[k] == static_cast<int>(k));
  }
  CHECK(seen.size() == trace.iters.size());
}

}  // TEST_SUITE
