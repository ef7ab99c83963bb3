#ifndef TBS_BASELINES_HPP
#define TBS_BASELINES_HPP

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "tbs/model.hpp"

namespace tbs::baselines {

struct LassoFit {
  Eigen::VectorXd beta;
  double intercept = 0.0;
  double lambda = 0.0;
  double kkt_residual = 0.0;
  int sweeps = 0;
};

struct QuantileFit {
  Eigen::VectorXd beta;
  double intercept = 0.0;
  double tau = 0.5;
  double lambda = 0.0;
  double smoothing = 0.0;  // final huberisation width
  double objective = 0.0;  // unsmoothed penalised objective at the solution
};

struct SolverOptions {
  double tol = 1e-10;      // max coefficient change per sweep / iteration
  int max_sweeps = 10000;
};

/// (1/2n)|y - X b - b0|^2 + lambda |b|_1 by cyclic coordinate descent.
/// The intercept is unpenalised. warm_start, when given, seeds beta.
LassoFit lasso_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                   double lambda, const SolverOptions& opt = {},
                   const Eigen::VectorXd* warm_start = nullptr);

double lasso_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& beta, double intercept,
                       double lambda);

/// Smallest lambda at which the LASSO solution is identically zero.
double lasso_lambda_max(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

double pinball(double r, double tau);

/// (1/n) sum pinball(y - b0 - X b) + lambda |b|_1.
double quantile_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                          const Eigen::VectorXd& beta, double intercept,
                          double tau, double lambda);

/// Smoothed-pinball continuation with an accelerated proximal-gradient inner
/// solver. The smoothing width starts at 0.1 and is halved until it is at
/// most 1e-6.
QuantileFit quantile_lasso_fit(const Eigen::MatrixXd& X,
                               const Eigen::VectorXd& y, double tau,
                               double lambda,
                               const QuantileFit* warm_start = nullptr);

double quantile_lambda_max(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           double tau);

enum class Method { Lasso, QuantileLasso };

struct CvResult {
  std::vector<double> grid;     // as supplied (or the default grid)
  std::vector<double> cv_loss;  // mean held-out loss per grid point
  double best_lambda = 0.0;
  std::size_t best_index = 0;
};

/// 30 log-spaced values from lambda_max down to lambda_max * 1e-3.
std::vector<double> default_grid(const Eigen::MatrixXd& X,
                                 const Eigen::VectorXd& y, Method method,
                                 double tau = 0.5, int size = 30);

/// K-fold cross-validation. Fold membership comes from a random permutation
/// seeded by fold_seed. Ties on the CV loss go to the larger lambda.
CvResult cv_select(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                   Method method, int folds, std::vector<double> grid,
                   std::uint64_t fold_seed, double tau = 0.5);

struct BaselineResult {
  Method method = Method::Lasso;
  CvResult cv;
  Eigen::VectorXd beta;
  double intercept = 0.0;
  std::vector<std::size_t> selected;  // |beta_j| > 1e-8
};

/// CV over the default grid, then a refit on the full data at the chosen
/// lambda.
BaselineResult fit_with_cv(const Dataset& data, Method method,
                           std::uint64_t fold_seed, int folds = 5,
                           double tau = 0.5);

}  // namespace tbs::baselines

#endif  // TBS_BASELINES_HPP
