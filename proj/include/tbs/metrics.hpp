#ifndef TBS_METRICS_HPP
#define TBS_METRICS_HPP

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tbs/model.hpp"
#include "tbs/samplers.hpp"

namespace tbs::metrics {

/// Replication means of masking, swamping and joint detection (all in
/// [0, 1]) and of the number of selected coefficients.
struct SelectionMetrics {
  double masking = 0.0;
  double swamping = 0.0;
  double n_selected = 0.0;
  double joint_detection = 0.0;
};

/// selected[r] holds the 0-based indices chosen in replication r.
SelectionMetrics selection_metrics(
    const Eigen::VectorXd& true_beta,
    const std::vector<std::vector<std::size_t>>& selected);

/// The influence measure as printed: quadratic term with a positive sign,
/// minus (n/2) log(2 pi sigma0^2), plus the Jacobian. Returns L / L* - 1.
/// intercept is added to the estimated linear predictor (frequentist fits).
double l_value(const Eigen::VectorXd& beta, const Dataset& data, double eta0,
               double sigma0, double intercept = 0.0);
double l_ratio(const Eigen::VectorXd& est_beta, const Dataset& data,
               const Eigen::VectorXd& beta0, double eta0, double sigma0,
               double est_intercept = 0.0);

/// Posterior mean of sum_i (g(y_i) - g(x_i'beta) - gamma_i)^2. Per-draw eta,
/// beta and gamma unless plug_in, in which case posterior-mean eta and the
/// summary point estimates are used throughout.
double ppl(const mcmc::ChainOutput& chain, const Dataset& data,
           bool plug_in = false);

enum class ResidualKind { Raw, Transformed };

struct QQRow {
  double observed = 0.0;
  double normal_quantile = 0.0;
};

/// Sorted residuals against standard-normal quantiles at (i - 0.5)/n.
std::vector<QQRow> qq_table(std::vector<double> residuals);

/// Raw: y - x'beta_hat. Transformed: g(y) - g(x'beta_hat) - gamma_hat with
/// eta_hat the posterior mean.
std::vector<double> residuals(const mcmc::PosteriorSummary& summary,
                              const Dataset& data, const ModelSpec& spec,
                              ResidualKind kind);

std::vector<QQRow> residual_table(const mcmc::PosteriorSummary& summary,
                                  const Dataset& data, const ModelSpec& spec,
                                  ResidualKind kind);

/// max_i |observed_i / scale - normal_quantile_i|.
double qq_sup_deviation(const std::vector<QQRow>& table, double scale);

/// Point state built from posterior means, used for plug-in prediction.
ParamState point_state(const mcmc::PosteriorSummary& summary,
                       const Dataset& data);

struct QuantileCurveRow {
  std::size_t index = 0;  // 1-based observation index
  double linear_predictor = 0.0;
  double median = 0.0;
  std::vector<double> quantiles;  // one per requested alpha
};

std::vector<QuantileCurveRow> quantile_curve_table(
    const mcmc::PosteriorSummary& summary, const Dataset& data,
    const ModelSpec& spec, const std::vector<double>& alphas);

}  // namespace tbs::metrics

#endif  // TBS_METRICS_HPP
