#ifndef TBS_MODEL_HPP
#define TBS_MODEL_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "tbs/transform.hpp"

namespace tbs {

/// Mean/SD applied to one column at ingestion.
struct ColumnScaling {
  std::string name;
  double mean = 0.0;
  double sd = 1.0;
};

/// Covariates, response on its original scale, and the standardisation that
/// produced them (if any).
struct Dataset {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  std::vector<std::string> column_names;
  std::string response_name = "y";
  bool standardized = false;
  std::vector<ColumnScaling> scaling;

  Eigen::Index n() const { return X.rows(); }
  Eigen::Index p() const { return X.cols(); }

  /// Enforces n >= 2, p >= 1, finite entries, consistent sizes and y_i != 0.
  void validate() const;
};

enum class Variant { TbsSg, TbsoSg, TbstSg, TbssSg, TbscnSg };

std::string_view variant_name(Variant v);
/// Accepts the enum names and the CLI short forms (tbs, tbso, tbst, tbss, tbscn).
Variant parse_variant(std::string_view name);

struct ModelSpec {
  Variant variant = Variant::TbsSg;

  bool has_shifts() const { return variant == Variant::TbsoSg; }
  bool is_ni() const {
    return variant == Variant::TbstSg || variant == Variant::TbssSg ||
           variant == Variant::TbscnSg;
  }
};

/// Prior hyperparameters. Gamma and inverse-gamma use shape/rate.
///
/// pi0 is the prior probability that a coefficient is exactly zero and
/// pi_gamma the prior probability that a shift is exactly zero.
struct PriorHyper {
  double a = 2.0, b = 2.0;            // sigma^2 ~ IG(a, b)
  double c1 = 1.0, d1 = 1.0;          // eta / 2 ~ Beta(c1, d1)
  double pi0_a = 1.0, pi0_b = 1.0;    // pi0 ~ Beta
  double sb_a = 2.0, sb_b = 2.0;      // sigma_beta^2 ~ IG
  double pi_gamma_a = 9.0, pi_gamma_b = 1.0;  // pi_gamma ~ Beta
  double sg2 = 100.0;                 // slab variance of the shifts
  double nu_rate = 0.1;               // Student-t: nu - 2 ~ Exp(nu_rate)
  static constexpr double nu_min = 2.0;
  double slash_a = 0.1, slash_b = 0.01;   // slash nu ~ Gamma(shape, rate)
  double cn_nu_a = 1.0, cn_nu_b = 9.0;    // CN contamination probability
  double cn_rho_a = 1.0, cn_rho_b = 1.0;  // CN variance-inflation scale

  void validate() const;
};

/// Complete state of the sampler. Coefficients live on the transformed scale
/// theta_j = gpow(beta_j); an excluded coefficient (z_j = 0) has beta_j = 0
/// and stores theta_j = 0.
///
/// The shift block (gamma, zg, pi_gamma) is only read for TBSO and the mixing
/// block (u, nu, rho, contaminated) only for the NI variants, but every
/// vector is always sized to n so a state can be carried across variants.
struct ParamState {
  double eta = 1.0;
  double sigma2 = 1.0;
  Eigen::VectorXd theta;
  std::vector<std::uint8_t> z;
  double pi0 = 0.5;
  double sigma_beta2 = 1.0;
  Eigen::VectorXd gamma;
  std::vector<std::uint8_t> zg;
  double pi_gamma = 0.9;
  Eigen::VectorXd u;
  double nu = 4.0;
  double rho = 0.5;
  // CN only: contaminated[i] = 1 iff u_i = rho.
  std::vector<std::uint8_t> contaminated;

  Eigen::Index p() const { return theta.size(); }
  Eigen::Index n() const { return gamma.size(); }
  int active_count() const;
  int shift_count() const;

  /// State with every block sized for (n, p) at neutral values.
  static ParamState zeros(Eigen::Index n, Eigen::Index p);
  void validate(const ModelSpec& spec) const;

  bool operator==(const ParamState&) const = default;
};

Eigen::VectorXd beta_from_state(const ParamState& state);

/// Sum over observations of the normal log density of the transformed
/// response plus the Jacobian (eta - 1) sum log|y_i|. Conditional on the
/// latent scales u for NI variants.
double log_likelihood(const ParamState& state, const Dataset& data,
                      const ModelSpec& spec);

double log_prior(const ParamState& state, const ModelSpec& spec,
                 const PriorHyper& hyper);

inline double log_posterior(const ParamState& state, const Dataset& data,
                            const ModelSpec& spec, const PriorHyper& hyper) {
  return log_likelihood(state, data, spec) + log_prior(state, spec, hyper);
}

/// Log density of one latent scale u under the variant's mixing law
/// (excluding the CN two-point mass, which is handled by the indicators).
double log_mixing_density(double u, const ParamState& state,
                          const ModelSpec& spec);

double median_predict(const Eigen::Ref<const Eigen::VectorXd>& x,
                      const Eigen::Ref<const Eigen::VectorXd>& beta);

/// alpha-quantile of the transformed-scale error e (scaled by U^(-1/2) for NI
/// variants). Normal errors are exact; NI marginals are inverted by bisection
/// on the mixed CDF to 1e-8.
double error_quantile(const ParamState& state, const ModelSpec& spec,
                      double alpha);

/// CDF of the NI marginal error at z (normal CDF for the other variants).
double error_cdf(const ParamState& state, const ModelSpec& spec, double z);

double quantile_predict(const Eigen::Ref<const Eigen::VectorXd>& x,
                        const ParamState& state, const ModelSpec& spec,
                        double alpha);

}  // namespace tbs

#endif  // TBS_MODEL_HPP
