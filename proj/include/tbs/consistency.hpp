#ifndef TBS_CONSISTENCY_HPP
#define TBS_CONSISTENCY_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tbs/model.hpp"
#include "tbs/stats.hpp"

namespace tbs::consistency {

/// n x p design whose first column alternates 1, -1, 1, ... and whose other
/// columns are all ones. Rows with x_i1 = 1 are the odd rows (1-based).
struct AltDesign {
  Eigen::Index n = 2;
  Eigen::Index p = 1;

  void validate() const;
  Eigen::MatrixXd matrix() const;
  /// floor(n / log 4), the largest p covered by the consistency theorem.
  static Eigen::Index max_p(Eigen::Index n);
};

bool is_alt_design(const Eigen::MatrixXd& X);

/// Slab density used inside the marginal likelihood. Gaussian is the model's
/// slab N(0, sigma_beta^2) on t = g(beta). Flat replaces it by its value at
/// the mode, 1/(sqrt(2 pi) sigma_beta), which is what the exactly integrable
/// single-coefficient closed forms assume.
enum class SlabKernel { Gaussian, Flat };

struct LabHyper {
  double a = 2.0, b = 2.0;   // sigma^2 ~ IG(a, b), integrated out
  double sigma_beta2 = 1.0;  // fixed slab variance
  SlabKernel slab = SlabKernel::Gaussian;

  void validate() const;
};

struct LogValue {
  double log_value = 0.0;
  double abs_error = 0.0;  // estimated absolute error of log_value
};

/// log m_S(Y) with sigma^2 integrated analytically and the |S| <= 2
/// coefficient integral done by nested adaptive Gauss-Kronrod quadrature.
/// S holds 0-based column indices.
LogValue marginal_likelihood_quad(const Dataset& data,
                                  const std::vector<std::size_t>& S,
                                  double eta, const LabHyper& hyper);

/// log C_n(Y) = -(n/2) log(2 pi) + sum log|g'(y_i)| + a log b - lgamma(a).
double log_cn(const Dataset& data, double eta, const LabHyper& hyper);

// Closed forms. The single-coefficient ones are exact under the flat kernel.
double closed_form_empty(const Dataset& data, double eta, const LabHyper& hyper);
double closed_form_ones(const Dataset& data, double eta, const LabHyper& hyper);
double closed_form_alternating(const Dataset& data, double eta,
                               const LabHyper& hyper);

/// Supports with identical likelihood: described by size and whether the
/// alternating column is included.
struct SupportClass {
  int size = 0;
  bool has_alternating = false;
  double count = 0.0;            // supports in the class
  LogValue log_m;                // per support
  double log_prior = 0.0;        // per support
  double posterior_each = 0.0;   // per support
  double posterior_total = 0.0;  // whole class
  std::vector<std::size_t> representative;
};

struct SupportPosterior {
  std::vector<SupportClass> classes;
  double posterior_sum = 0.0;
  double truncated_mass_estimate = 0.0;  // relative mass beyond max size
  std::optional<std::string> warning;

  /// Posterior of one specific support (0-based indices).
  double probability(const std::vector<std::size_t>& S) const;
};

/// Exact posterior over all supports of size <= max_support_size (<= 2),
/// with pi(S) = pi0^|S| (1 - pi0)^(p - |S|). A warning is attached when the
/// extrapolated mass of larger supports exceeds 1e-3.
SupportPosterior support_posterior(const Dataset& data, double eta, double pi0,
                                   const LabHyper& hyper,
                                   int max_support_size = 2);

struct CurveRow {
  Eigen::Index n = 0;
  Eigen::Index p = 0;
  double mean_prob = 0.0;
  double min_prob = 0.0;
  double max_prob = 0.0;
};

struct CurveConfig {
  double eta = 1.8;
  double pi0 = 0.1;
  double beta01 = 3.0;
  double sigma0 = 1.0;
  int replications = 20;
  std::uint64_t seed = 1;
  LabHyper hyper{2.0, 2.0, 10.0, SlabKernel::Gaussian};
};

/// y simulated on the alternating design with S0 = {first column}; one row
/// per n with p = floor(n / log 4).
Dataset simulate_alt(Eigen::Index n, Eigen::Index p, double beta01, double eta,
                     double sigma0, Rng& rng);

std::vector<CurveRow> consistency_curve(const std::vector<Eigen::Index>& n_grid,
                                        const CurveConfig& config);

/// Mean probability non-decreasing along the grid up to the given slack.
bool curve_non_decreasing(const std::vector<CurveRow>& rows, double slack);

enum class LemmaRule {
  General,    // argmax |beta_j| rule, valid for every k >= 2
  AsPrinted,  // the k = 2 display taken literally
};

struct Lemma1Instance {
  Eigen::VectorXd z;  // transformed observations
  Eigen::VectorXd t;  // t_j = g(beta_j)
  double eta = 1.0;
  int k = 2;
  Eigen::VectorXd T;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  double coefficient = 0.0;  // multiplies sum|z_i| b't
};

Lemma1Instance make_lemma1_instance(const Eigen::VectorXd& z,
                                    const Eigen::VectorXd& beta, double eta,
                                    LemmaRule rule = LemmaRule::General);

struct LemmaCheck {
  bool holds = false;
  double lhs = 0.0, rhs = 0.0;
  double slack = 0.0;  // lhs - rhs
};

/// LHS: sum_i (z_i - g(s_i beta_1 + beta_2 + ... + beta_k))^2 with s_i
/// alternating +1, -1 over rows.
LemmaCheck lemma1_check(const Lemma1Instance& inst, const Eigen::VectorXd& beta);

struct FuzzReport {
  long instances = 0;
  long violations = 0;
  double min_slack = 0.0;
  std::optional<std::vector<double>> first_violation;  // z..., beta..., eta
};

FuzzReport lemma1_fuzz(long instances, const std::vector<int>& ks,
                       LemmaRule rule, std::uint64_t seed);

struct BoundCheck {
  bool vacuous = false;
  bool holds = false;
  double log_m = 0.0;
  double log_bound = 0.0;  // +inf when vacuous
  double denominator = 0.0;
  double log_ratio = 0.0;  // log_m - log_bound
};

/// Compares m_S for S = {alternating, ones} against the two-coefficient upper
/// bound 6 C_n Gamma((n-1)/2 + a) / (sqrt(n) sigma_beta D^((n-1)/2 + a)) with
/// D = sum T_i / 2 - 2^(2 eta - 1) (sum|z_i|)^2 / n + b.
BoundCheck bound_check_upper(const Dataset& data, double eta,
                             const LabHyper& hyper);

}  // namespace tbs::consistency

#endif  // TBS_CONSISTENCY_HPP
