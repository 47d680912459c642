#include "ertl/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>

#include "ertl/errors.hpp"
#include "ertl/io.hpp"
#include "ertl/rng.hpp"

namespace ertl {

namespace {

using Clock = std::chrono::steady_clock;

double l1_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += std::fabs(x);
  return s;
}

double penalty(const TransferModel& model, double lambda_a) {
  if (lambda_a == 0.0) return 0.0;
  double s = 0.0;
  for (const auto& wi : model.w) s += l1_norm(wi);
  return lambda_a * s;
}

double data_loss(const TransferModel& model, const Dataset& data) {
  const int d = model.dim;
  double loss = 0.0;
  for (const auto& ex : data.examples) {
    const auto& wi = model.w[ex.pair.a];
    const auto& wj = model.w[ex.pair.b];
    double s = 0.0;
    for (int t = 0; t < d; ++t) s += (model.w0[t] + 0.5 * (wi[t] + wj[t])) * ex.x[t];
    const double r = ex.y - s;
    loss += 0.5 * r * r;
  }
  return loss;
}

TransferModel zero_model(const Dataset& data, double lambda_a) {
  TransferModel m;
  m.dim = data.dim;
  m.feature_names = data.feature_names;
  m.sources = data.sources;
  m.w0.assign(data.dim, 0.0);
  m.w.assign(data.sources.size(), std::vector<double>(data.dim, 0.0));
  m.lambda_a = lambda_a;
  return m;
}

/// Composite update from a precomputed loss gradient.
TransferModel apply_step(const TransferModel& model, const LossGradient& grad,
                         double gamma, double lambda_a, bool update_sources) {
  TransferModel next = model;
  const int d = model.dim;
  for (int t = 0; t < d; ++t) next.w0[t] = model.w0[t] - gamma * grad.w0[t];
  if (update_sources) {
    const double tau = gamma * lambda_a;
    for (std::size_t i = 0; i < model.w.size(); ++i) {
      std::vector<double> step(d);
      for (int t = 0; t < d; ++t) step[t] = model.w[i][t] - gamma * grad.w[i][t];
      next.w[i] = soft_threshold(step, tau);
    }
  }
  return next;
}

/// <grad, next - cur> and ||next - cur||^2 over all parameter blocks.
void step_products(const TransferModel& cur, const TransferModel& next,
                   const LossGradient& grad, double* inner, double* sqnorm) {
  double ip = 0.0, sq = 0.0;
  const int d = cur.dim;
  for (int t = 0; t < d; ++t) {
    const double dt = next.w0[t] - cur.w0[t];
    ip += grad.w0[t] * dt;
    sq += dt * dt;
  }
  for (std::size_t i = 0; i < cur.w.size(); ++i) {
    for (int t = 0; t < d; ++t) {
      const double dt = next.w[i][t] - cur.w[i][t];
      ip += grad.w[i][t] * dt;
      sq += dt * dt;
    }
  }
  *inner = ip;
  *sqnorm = sq;
}

std::pair<TransferModel, SolverTrace> fit_composite(const Dataset& data,
                                                    const SolverConfig& cfg,
                                                    const FitObserver& observer,
                                                    bool update_sources) {
  data.validate();
  cfg.validate();
  const auto t0 = Clock::now();
  Clock::duration excluded{0};
  auto elapsed = [&] {
    return std::chrono::duration<double>(Clock::now() - t0 - excluded).count();
  };
  auto observe = [&](int iter, const TransferModel& m) {
    if (!observer) return;
    const auto pause = Clock::now();
    observer(iter, m);
    excluded += Clock::now() - pause;
  };

  double gamma = cfg.step_size;
  if (gamma <= 0.0) {
    const double lip = estimate_lipschitz(data, update_sources);
    gamma = lip > 0.0 ? 1.0 / lip : 1.0;
  }

  TransferModel model = zero_model(data, cfg.lambda_a);
  double f_cur = data_loss(model, data);
  double obj_cur = f_cur + penalty(model, cfg.lambda_a);

  SolverTrace trace;
  trace.iters.push_back({0, obj_cur, 0.0, elapsed()});
  observe(0, model);

  for (int iter = 1; iter <= cfg.max_iters; ++iter) {
    const LossGradient grad = loss_gradient(model, data);
    TransferModel next;
    double f_next = 0.0;
    if (cfg.step_policy == StepPolicy::kBacktracking) {
      for (;;) {
        next = apply_step(model, grad, gamma, cfg.lambda_a, update_sources);
        f_next = data_loss(next, data);
        if (std::isfinite(f_next)) {
          double inner = 0.0, sqnorm = 0.0;
          step_products(model, next, grad, &inner, &sqnorm);
          const double bound = f_cur + inner + sqnorm / (2.0 * gamma);
          if (f_next <= bound + 1e-12 * std::max(1.0, std::fabs(f_cur))) break;
        }
        gamma *= cfg.backtrack_shrink;
        if (gamma < 1e-300) {
          throw NumericalError("step size underflowed during backtracking at iteration " +
                               std::to_string(iter));
        }
      }
    } else {
      next = apply_step(model, grad, gamma, cfg.lambda_a, update_sources);
      f_next = data_loss(next, data);
    }
    const double obj_next = f_next + penalty(next, cfg.lambda_a);
    if (!std::isfinite(obj_next)) {
      throw NumericalError("objective became non-finite at iteration " +
                           std::to_string(iter));
    }
    if (cfg.step_policy == StepPolicy::kBacktracking && obj_next > obj_cur) {
      break;  // progress below machine precision; keep the trace monotone
    }
    model = std::move(next);
    trace.iters.push_back({iter, obj_next, gamma, elapsed()});
    observe(iter, model);
    const bool converged =
        std::fabs(obj_cur - obj_next) <= cfg.tol * std::max(1.0, std::fabs(obj_cur));
    f_cur = f_next;
    obj_cur = obj_next;
    if (converged) break;
  }
  return {std::move(model), std::move(trace)};
}

}  // namespace

void SolverConfig::validate() const {
  if (!std::isfinite(lambda_a) || lambda_a < 0) {
    throw ValidationError("solver: lambda_a must be a nonnegative finite value");
  }
  if (max_iters <= 0) throw ValidationError("solver: max_iters must be positive");
  if (!std::isfinite(tol) || tol < 0) {
    throw ValidationError("solver: tol must be a nonnegative finite value");
  }
  if (!std::isfinite(step_size) || step_size < 0) {
    throw ValidationError("solver: step_size must be a nonnegative finite value");
  }
  if (!(backtrack_shrink > 0.0 && backtrack_shrink < 1.0)) {
    throw ValidationError("solver: backtrack_shrink must lie in (0, 1)");
  }
  if (!std::isfinite(indep_ridge_scale) || indep_ridge_scale < 0) {
    throw ValidationError("solver: indep_ridge_scale must be a nonnegative finite value");
  }
}

std::string SolverTrace::to_csv() const {
  std::ostringstream out;
  out << "iter,objective,step_size,elapsed_seconds\n";
  for (const auto& r : iters) {
    out << r.iter << ',' << format_double(r.objective) << ','
        << format_double(r.step_size) << ',' << format_double(r.elapsed_seconds)
        << '\n';
  }
  return out.str();
}

double IndepModel::score(SourcePair pair, std::span<const double> x) const {
  if (static_cast<int>(x.size()) != dim) {
    throw ValidationError("score: feature dimension " + std::to_string(x.size()) +
                          " does not match model dimension " + std::to_string(dim));
  }
  auto it = weights.find(pair);
  if (it == weights.end()) return 0.0;
  double s = 0.0;
  for (int t = 0; t < dim; ++t) s += it->second[t] * x[t];
  return s;
}

double objective(const TransferModel& model, const Dataset& data, double lambda_a) {
  return data_loss(model, data) + penalty(model, lambda_a);
}

LossGradient loss_gradient(const TransferModel& model, const Dataset& data) {
  const int d = model.dim;
  LossGradient g;
  g.w0.assign(d, 0.0);
  g.w.assign(model.w.size(), std::vector<double>(d, 0.0));
  for (const auto& ex : data.examples) {
    const auto& wi = model.w[ex.pair.a];
    const auto& wj = model.w[ex.pair.b];
    double s = 0.0;
    for (int t = 0; t < d; ++t) s += (model.w0[t] + 0.5 * (wi[t] + wj[t])) * ex.x[t];
    const double r = ex.y - s;
    auto& gi = g.w[ex.pair.a];
    auto& gj = g.w[ex.pair.b];
    for (int t = 0; t < d; ++t) {
      const double rx = r * ex.x[t];
      g.w0[t] -= rx;
      gi[t] -= 0.5 * rx;
      gj[t] -= 0.5 * rx;
    }
  }
  return g;
}

std::vector<double> soft_threshold(std::span<const double> v, double tau) {
  if (!(tau >= 0.0)) {
    throw std::invalid_argument("soft_threshold: tau must be nonnegative");
  }
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double x = v[i];
    out[i] = x > tau ? x - tau : (x < -tau ? x + tau : 0.0);
  }
  return out;
}

TransferModel transfer_step(const TransferModel& model, const Dataset& data,
                            double gamma, double lambda_a, bool update_sources) {
  return apply_step(model, loss_gradient(model, data), gamma, lambda_a,
                    update_sources);
}

std::pair<TransferModel, SolverTrace> fit_transfer(const Dataset& data,
                                                   const SolverConfig& cfg,
                                                   const FitObserver& observer) {
  return fit_composite(data, cfg, observer, /*update_sources=*/true);
}

std::pair<TransferModel, SolverTrace> fit_pooled(const Dataset& data,
                                                 const SolverConfig& cfg,
                                                 const FitObserver& observer) {
  return fit_composite(data, cfg, observer, /*update_sources=*/false);
}

IndepModel fit_indep(const Dataset& data, const SolverConfig& cfg) {
  data.validate();
  cfg.validate();
  IndepModel m;
  m.dim = data.dim;
  m.feature_names = data.feature_names;
  m.sources = data.sources;

  std::map<SourcePair, std::vector<const LabeledExample*>> groups;
  for (const auto& ex : data.examples) groups[ex.pair].push_back(&ex);
  for (const auto& [pair, examples] : groups) {
    double trace_xx = 0.0;
    for (const auto* ex : examples) {
      for (double x : ex->x) trace_xx += x * x;
    }
    const double ridge = cfg.indep_ridge_scale * trace_xx / data.dim;
    m.weights.emplace(pair, ridge_solve(examples, data.dim, ridge));
  }
  const int n = static_cast<int>(data.sources.size());
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const SourcePair pair{i, j};
      if (groups.contains(pair)) continue;
      m.unseen.push_back(pair);
      m.warnings.push_back("pair " + data.sources[i] + "-" +
                           data.sources[j] +
                           " has no training examples; scores default to 0");
    }
  }
  return m;
}

std::vector<double> ridge_solve(const std::vector<const LabeledExample*>& examples,
                                int dim, double ridge) {
  if (dim <= 0) throw ValidationError("ridge_solve: dim must be positive");
  if (!std::isfinite(ridge) || ridge < 0) {
    throw ValidationError("ridge_solve: ridge must be a nonnegative finite value");
  }
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(dim);
  for (const auto* ex : examples) {
    Eigen::Map<const Eigen::VectorXd> x(ex->x.data(), dim);
    a.selfadjointView<Eigen::Lower>().rankUpdate(x);
    b += ex->y * x;
  }
  a = a.selfadjointView<Eigen::Lower>();
  if (b.isZero(0.0)) return std::vector<double>(dim, 0.0);
  a.diagonal().array() += ridge;
  Eigen::VectorXd w = a.ldlt().solve(b);
  if (!w.allFinite()) {
    throw NumericalError("ridge_solve: singular normal equations (ridge=" +
                         format_double(ridge) + ")");
  }
  return {w.data(), w.data() + dim};
}

double lambda_max(const Dataset& data) {
  data.validate();
  const int n = static_cast<int>(data.examples.size());
  const int d = data.dim;
  Eigen::MatrixXd x(n, d);
  Eigen::VectorXd y(n);
  for (int k = 0; k < n; ++k) {
    for (int t = 0; t < d; ++t) x(k, t) = data.examples[k].x[t];
    y(k) = data.examples[k].y;
  }
  const Eigen::VectorXd pooled = x.colPivHouseholderQr().solve(y);
  const Eigen::VectorXd resid = y - x * pooled;
  std::vector<std::vector<double>> grads(data.sources.size(),
                                         std::vector<double>(d, 0.0));
  for (int k = 0; k < n; ++k) {
    const auto& ex = data.examples[k];
    for (int t = 0; t < d; ++t) {
      const double g = -0.5 * resid(k) * ex.x[t];
      grads[ex.pair.a][t] += g;
      grads[ex.pair.b][t] += g;
    }
  }
  double best = 0.0;
  for (const auto& g : grads) {
    for (double v : g) best = std::max(best, std::fabs(v));
  }
  return best;
}

double estimate_lipschitz(const Dataset& data, bool with_source_blocks) {
  data.validate();
  const int d = data.dim;
  const int n_src = static_cast<int>(data.sources.size());
  const int dims = with_source_blocks ? (1 + n_src) * d : d;
  Rng rng(0x9e3779b97f4a7c15ull);
  std::vector<double> v(dims);
  for (double& vi : v) vi = rng.uniform(-1.0, 1.0);
  double norm = 0.0;
  for (double vi : v) norm += vi * vi;
  norm = std::sqrt(norm);
  if (norm == 0.0) return 0.0;
  for (double& vi : v) vi /= norm;

  std::vector<double> hv(dims);
  for (int round = 0; round < 20; ++round) {
    std::fill(hv.begin(), hv.end(), 0.0);
    for (const auto& ex : data.examples) {
      // s = <a_k, v> with a_k = (x, ..., x/2 at block i, x/2 at block j, ...)
      double s = 0.0;
      for (int t = 0; t < d; ++t) s += v[t] * ex.x[t];
      if (with_source_blocks) {
        const int oi = (1 + ex.pair.a) * d;
        const int oj = (1 + ex.pair.b) * d;
        for (int t = 0; t < d; ++t) s += 0.5 * (v[oi + t] + v[oj + t]) * ex.x[t];
        for (int t = 0; t < d; ++t) {
          const double sx = s * ex.x[t];
          hv[t] += sx;
          hv[oi + t] += 0.5 * sx;
          hv[oj + t] += 0.5 * sx;
        }
      } else {
        for (int t = 0; t < d; ++t) hv[t] += s * ex.x[t];
      }
    }
    norm = 0.0;
    for (double h : hv) norm += h * h;
    norm = std::sqrt(norm);
    if (norm == 0.0) return 0.0;
    for (int t = 0; t < dims; ++t) v[t] = hv[t] / norm;
  }
  return norm;
}

}  // namespace ertl
