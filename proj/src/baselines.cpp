#include "tbs/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "tbs/errors.hpp"
#include "tbs/stats.hpp"

namespace tbs::baselines {

namespace {

double soft_threshold(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

// tau-quantile by the inverse empirical CDF (lower order statistic).
double empirical_quantile(Eigen::VectorXd v, double tau) {
  std::sort(v.data(), v.data() + v.size());
  const auto n = static_cast<double>(v.size());
  auto k = static_cast<Eigen::Index>(std::ceil(tau * n)) - 1;
  k = std::clamp<Eigen::Index>(k, 0, v.size() - 1);
  return v[k];
}

}  // namespace

double lasso_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& beta, double intercept,
                       double lambda) {
  const Eigen::VectorXd r =
      y - X * beta - Eigen::VectorXd::Constant(y.size(), intercept);
  return r.squaredNorm() / (2.0 * static_cast<double>(y.size())) +
         lambda * beta.lpNorm<1>();
}

double lasso_lambda_max(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  const double n = static_cast<double>(y.size());
  const Eigen::RowVectorXd xm = X.colwise().mean();
  const Eigen::MatrixXd Xc = X.rowwise() - xm;
  const Eigen::VectorXd yc = y.array() - y.mean();
  return (Xc.transpose() * yc).cwiseAbs().maxCoeff() / n;
}

LassoFit lasso_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                   double lambda, const SolverOptions& opt,
                   const Eigen::VectorXd* warm_start) {
  if (!(lambda >= 0.0)) throw DomainError("lasso: lambda must be >= 0");
  if (X.rows() != y.size() || y.size() == 0) {
    throw DomainError("lasso: dimension mismatch");
  }
  const Eigen::Index n = X.rows(), p = X.cols();
  const double nd = static_cast<double>(n);
  const Eigen::RowVectorXd xm = X.colwise().mean();
  const Eigen::MatrixXd Xc = X.rowwise() - xm;
  const double ym = y.mean();
  const Eigen::VectorXd yc = y.array() - ym;
  const Eigen::VectorXd col_sq = Xc.colwise().squaredNorm().transpose() / nd;

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  if (warm_start && warm_start->size() == p) beta = *warm_start;
  Eigen::VectorXd r = yc - Xc * beta;
  auto objective = [&] {
    return r.squaredNorm() / (2.0 * nd) + lambda * beta.lpNorm<1>();
  };

  double obj = objective();
  LassoFit fit;
  fit.lambda = lambda;
  int sweep = 0;
  double max_change = 0.0;
  for (; sweep < opt.max_sweeps; ++sweep) {
    max_change = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (col_sq[j] <= 0.0) {
        beta[j] = 0.0;
        continue;
      }
      const double old = beta[j];
      const double rho = Xc.col(j).dot(r) / nd + col_sq[j] * old;
      const double nb = soft_threshold(rho, lambda) / col_sq[j];
      if (nb != old) {
        r -= Xc.col(j) * (nb - old);
        beta[j] = nb;
        max_change = std::max(max_change, std::abs(nb - old));
      }
    }
    const double next = objective();
    if (next > obj + 1e-12 * std::max(1.0, std::abs(obj))) {
      throw NumericalError("lasso: coordinate descent increased the objective");
    }
    obj = next;
    if (max_change < opt.tol) break;
  }
  if (sweep == opt.max_sweeps) {
    throw ConvergenceError("lasso: no convergence after " +
                           std::to_string(opt.max_sweeps) +
                           " sweeps, last max change " +
                           std::to_string(max_change));
  }
  fit.sweeps = sweep + 1;
  fit.beta = beta;
  fit.intercept = ym - xm.dot(beta);

  double kkt = 0.0;
  for (Eigen::Index j = 0; j < p; ++j) {
    const double g = Xc.col(j).dot(r) / nd;
    const double v = beta[j] != 0.0
                         ? std::abs(g - lambda * (beta[j] > 0 ? 1.0 : -1.0))
                         : std::max(0.0, std::abs(g) - lambda);
    kkt = std::max(kkt, v);
  }
  fit.kkt_residual = kkt;
  return fit;
}

double pinball(double r, double tau) {
  return r >= 0.0 ? tau * r : (tau - 1.0) * r;
}

double quantile_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                          const Eigen::VectorXd& beta, double intercept,
                          double tau, double lambda) {
  const Eigen::VectorXd r =
      y - X * beta - Eigen::VectorXd::Constant(y.size(), intercept);
  double s = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i) s += pinball(r[i], tau);
  return s / static_cast<double>(y.size()) + lambda * beta.lpNorm<1>();
}

double quantile_lambda_max(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           double tau) {
  const double q = empirical_quantile(y, tau);
  // Subgradient of the pinball loss at b = 0, b0 = q. Observations tied with
  // q share whatever value makes the intercept condition sum(psi) = 0 hold.
  Eigen::VectorXd psi(y.size());
  double sum_off = 0.0;
  int ties = 0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y[i] == q) {
      ++ties;
      continue;
    }
    psi[i] = tau - (y[i] < q ? 1.0 : 0.0);
    sum_off += psi[i];
  }
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y[i] == q) psi[i] = -sum_off / ties;
  }
  return (X.transpose() * psi).cwiseAbs().maxCoeff() /
         static_cast<double>(y.size());
}

QuantileFit quantile_lasso_fit(const Eigen::MatrixXd& X,
                               const Eigen::VectorXd& y, double tau,
                               double lambda, const QuantileFit* warm_start) {
  if (!(tau > 0.0 && tau < 1.0)) throw DomainError("quantile: tau not in (0,1)");
  if (!(lambda >= 0.0)) throw DomainError("quantile: lambda must be >= 0");
  if (X.rows() != y.size() || y.size() == 0) {
    throw DomainError("quantile: dimension mismatch");
  }
  const Eigen::Index n = X.rows(), p = X.cols();
  const double nd = static_cast<double>(n);

  // Design with the intercept as column 0; only columns 1.. are penalised.
  Eigen::MatrixXd A(n, p + 1);
  A.col(0).setOnes();
  A.rightCols(p) = X;
  const double smax2 =
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(A.transpose() * A,
                                                     Eigen::EigenvaluesOnly)
          .eigenvalues()
          .maxCoeff();

  Eigen::VectorXd w = Eigen::VectorXd::Zero(p + 1);
  if (warm_start && warm_start->beta.size() == p) {
    w[0] = warm_start->intercept;
    w.tail(p) = warm_start->beta;
  } else {
    w[0] = empirical_quantile(y, tau);
  }

  auto grad = [&](const Eigen::VectorXd& v, double h) {
    const Eigen::VectorXd r = y - A * v;
    Eigen::VectorXd psi(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      psi[i] = 0.5 * std::clamp(r[i] / h, -1.0, 1.0) + (tau - 0.5);
    }
    return Eigen::VectorXd(-(A.transpose() * psi) / nd);
  };
  auto prox = [&](Eigen::VectorXd v, double step) {
    for (Eigen::Index j = 1; j <= p; ++j) {
      v[j] = soft_threshold(v[j], step * lambda);
    }
    return v;
  };

  const int max_iter = 20000;
  double h = 0.1;
  double last_change = 0.0;
  bool converged = false;
  while (true) {
    const double L = smax2 / (2.0 * h * nd);
    const double step = 1.0 / L;
    Eigen::VectorXd x = w, yk = w;
    double t = 1.0;
    converged = false;
    for (int it = 0; it < max_iter; ++it) {
      const Eigen::VectorXd xn = prox(yk - step * grad(yk, h), step);
      last_change = (xn - x).cwiseAbs().maxCoeff();
      const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      if ((yk - xn).dot(xn - x) > 0.0) {
        // Adaptive restart: momentum points uphill.
        yk = xn;
        t = 1.0;
      } else {
        yk = xn + ((t - 1.0) / tn) * (xn - x);
        t = tn;
      }
      x = xn;
      if (last_change < 1e-12) {
        converged = true;
        break;
      }
    }
    w = x;
    if (h <= 1e-6) break;
    h *= 0.5;
  }
  if (!converged && last_change > 1e-8) {
    throw ConvergenceError("quantile lasso: proximal gradient did not converge, "
                           "last step " + std::to_string(last_change));
  }

  QuantileFit fit;
  fit.tau = tau;
  fit.lambda = lambda;
  fit.smoothing = h;
  fit.intercept = w[0];
  fit.beta = w.tail(p);
  fit.objective = quantile_objective(X, y, fit.beta, fit.intercept, tau, lambda);
  return fit;
}

std::vector<double> default_grid(const Eigen::MatrixXd& X,
                                 const Eigen::VectorXd& y, Method method,
                                 double tau, int size) {
  const double lmax = method == Method::Lasso ? lasso_lambda_max(X, y)
                                              : quantile_lambda_max(X, y, tau);
  std::vector<double> grid(static_cast<std::size_t>(size));
  const double lo = std::log(lmax * 1e-3), hi = std::log(lmax);
  for (int k = 0; k < size; ++k) {
    const double f = size == 1 ? 0.0 : static_cast<double>(k) / (size - 1);
    grid[static_cast<std::size_t>(k)] = std::exp(hi + f * (lo - hi));
  }
  return grid;
}

CvResult cv_select(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                   Method method, int folds, std::vector<double> grid,
                   std::uint64_t fold_seed, double tau) {
  const Eigen::Index n = X.rows();
  if (grid.empty()) throw DomainError("cv_select: empty lambda grid");
  if (folds < 2 || n < folds) {
    throw DomainError("cv_select: need 2 <= folds <= n");
  }
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  Rng rng = make_stream(fold_seed, 0xcf);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<int> fold_of(static_cast<std::size_t>(n));
  for (std::size_t k = 0; k < perm.size(); ++k) {
    fold_of[static_cast<std::size_t>(perm[k])] = static_cast<int>(k) % folds;
  }

  // Visit the grid from the largest lambda down so fits warm-start.
  std::vector<std::size_t> order(grid.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](auto a, auto b) { return grid[a] > grid[b]; });

  CvResult res;
  res.grid = grid;
  res.cv_loss.assign(grid.size(), 0.0);
  for (int f = 0; f < folds; ++f) {
    std::vector<Eigen::Index> tr, te;
    for (Eigen::Index i = 0; i < n; ++i) {
      (fold_of[static_cast<std::size_t>(i)] == f ? te : tr).push_back(i);
    }
    const Eigen::MatrixXd Xtr = X(tr, Eigen::all);
    const Eigen::VectorXd ytr = y(tr);
    const Eigen::MatrixXd Xte = X(te, Eigen::all);
    const Eigen::VectorXd yte = y(te);

    Eigen::VectorXd warm_beta;
    QuantileFit warm_q;
    bool have_warm = false;
    for (std::size_t g : order) {
      double loss = 0.0;
      if (method == Method::Lasso) {
        const LassoFit fit =
            lasso_fit(Xtr, ytr, grid[g], {}, have_warm ? &warm_beta : nullptr);
        warm_beta = fit.beta;
        const Eigen::VectorXd r = yte - Xte * fit.beta -
                                  Eigen::VectorXd::Constant(yte.size(), fit.intercept);
        loss = r.squaredNorm();
      } else {
        const QuantileFit fit = quantile_lasso_fit(Xtr, ytr, tau, grid[g],
                                                   have_warm ? &warm_q : nullptr);
        warm_q = fit;
        const Eigen::VectorXd r = yte - Xte * fit.beta -
                                  Eigen::VectorXd::Constant(yte.size(), fit.intercept);
        for (Eigen::Index i = 0; i < r.size(); ++i) loss += pinball(r[i], tau);
      }
      have_warm = true;
      res.cv_loss[g] += loss / static_cast<double>(n);
    }
  }

  std::size_t best = order.front();
  for (std::size_t g : order) {
    // Strict improvement only, visiting large to small: ties keep the larger
    // lambda.
    if (res.cv_loss[g] < res.cv_loss[best]) best = g;
  }
  res.best_index = best;
  res.best_lambda = grid[best];
  return res;
}

BaselineResult fit_with_cv(const Dataset& data, Method method,
                           std::uint64_t fold_seed, int folds, double tau) {
  BaselineResult out;
  out.method = method;
  out.cv = cv_select(data.X, data.y, method, folds,
                     default_grid(data.X, data.y, method, tau), fold_seed, tau);
  if (method == Method::Lasso) {
    const LassoFit fit = lasso_fit(data.X, data.y, out.cv.best_lambda);
    out.beta = fit.beta;
    out.intercept = fit.intercept;
  } else {
    const QuantileFit fit =
        quantile_lasso_fit(data.X, data.y, tau, out.cv.best_lambda);
    out.beta = fit.beta;
    out.intercept = fit.intercept;
  }
  for (Eigen::Index j = 0; j < out.beta.size(); ++j) {
    if (std::abs(out.beta[j]) > 1e-8) {
      out.selected.push_back(static_cast<std::size_t>(j));
    }
  }
  return out;
}

}  // namespace tbs::baselines
