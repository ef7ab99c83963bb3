#ifndef TBS_SAMPLERS_HPP
#define TBS_SAMPLERS_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tbs/errors.hpp"
#include "tbs/model.hpp"
#include "tbs/stats.hpp"

namespace tbs::mcmc {

/// Blocks held at their initial value for the whole run. Everything is free
/// by default; tests pin blocks to obtain closed-form targets.
struct FixedBlocks {
  bool eta = false;
  bool sigma2 = false;
  bool support = false;       // z held fixed; theta still moves by random walk
  bool coefficients = false;  // z and theta both held
  bool hyper = false;         // pi0, sigma_beta^2, pi_gamma
  bool shifts = false;        // gamma, zg
  bool latent_scales = false; // u / contamination indicators
  bool mixing = false;        // nu, rho

  bool operator==(const FixedBlocks&) const = default;
};

struct McmcConfig {
  int n_iter = 20000;
  int burn_in = 10000;
  int thin = 5;
  std::uint64_t seed = 1;
  double rw_scale_eta = 0.5;    // on logit(eta / 2)
  double rw_scale_theta = 0.5;
  double rw_scale_nu = 0.5;     // on log(nu - 2) or log-odds, per variant
  double rw_scale_rho = 0.5;    // on logit(rho)
  bool adapt = true;            // Robbins-Monro during burn-in only
  double target_acceptance = 0.44;
  bool random_scan = false;     // shuffle coefficient order each sweep
  FixedBlocks fixed;
  std::optional<ParamState> init;

  void validate() const;
  int draw_count() const { return (n_iter - burn_in) / thin; }
};

struct BlockStats {
  long proposed = 0;
  long accepted = 0;
  double rate() const {
    return proposed ? static_cast<double>(accepted) / proposed : 0.0;
  }
};

struct ChainOutput {
  std::vector<ParamState> draws;
  std::map<std::string, double> acceptance_rates;
  McmcConfig config;
  ModelSpec spec;
  double wall_time_seconds = 0.0;  // not part of equality or persistence

  bool same_draws(const ChainOutput& other) const {
    return draws == other.draws && acceptance_rates == other.acceptance_rates;
  }
};

/// Non-finite log posterior during a run.
class SamplerDivergence : public NumericalError {
 public:
  SamplerDivergence(int iteration, std::string block)
      : NumericalError("sampler diverged at iteration " +
                       std::to_string(iteration) + " in block '" + block + "'"),
        iteration_(iteration),
        block_(std::move(block)) {}
  int iteration() const noexcept { return iteration_; }
  const std::string& block() const noexcept { return block_; }

 private:
  int iteration_;
  std::string block_;
};

/// Metropolis-within-Gibbs kernel for one chain. Keeps the linear predictor,
/// transformed response and residuals cached so that single-coordinate moves
/// cost O(n).
class Sampler {
 public:
  Sampler(const Dataset& data, ModelSpec spec, PriorHyper hyper,
          ParamState state);

  const ParamState& state() const noexcept { return state_; }
  const Eigen::VectorXd& beta() const noexcept { return beta_; }

  void update_eta(Rng& rng);
  void update_sigma2(Rng& rng);
  void update_coefficient(Eigen::Index j, Rng& rng);
  void update_hyper(Rng& rng);
  void update_gamma(Eigen::Index i, Rng& rng);
  void update_u(Eigen::Index i, Rng& rng);
  void update_mixing_params(Rng& rng);

  /// Full sweep in the documented order: eta, sigma^2, coefficients,
  /// hyperparameters, then shifts or latent scales and mixing parameters.
  void sweep(Rng& rng, const FixedBlocks& fixed = {}, bool random_scan = false,
             int iteration = 0);

  // Log MH ratios from cached quantities; equal to the full-recompute ratios
  // in the free functions below.
  double coefficient_log_ratio(Eigen::Index j, bool z_new,
                               double theta_new) const;
  double eta_log_ratio(double eta_new) const;

  /// Transformed-scale residuals g(y) - g(x'beta) - gamma.
  Eigen::VectorXd residuals() const;

  /// Robbins-Monro step on every random-walk scale; weight decays with the
  /// iteration index.
  void adapt_scales(int iteration, double target);
  void set_scales(double eta, double theta, double nu, double rho);
  std::map<std::string, BlockStats> block_stats() const;
  void reset_stats();

 private:
  double weighted_ss(const Eigen::VectorXd& resid) const;
  void refresh_all();
  void check_finite(const char* block) const;

  const Dataset& data_;
  ModelSpec spec_;
  PriorHyper hyper_;
  ParamState state_;

  double sum_log_abs_y_ = 0.0;
  Eigen::VectorXd beta_, mu_, gy_, gmu_, resid_;
  double ss_ = 0.0;  // sum u_i r_i^2

  double scale_eta_ = 0.5, scale_nu_ = 0.5, scale_rho_ = 0.5;
  Eigen::VectorXd scale_theta_;

  BlockStats st_eta_, st_birth_, st_death_, st_nu_, st_rho_;
  std::vector<BlockStats> st_rw_;
  // Acceptance indicators since the last adaptation step.
  double last_eta_ = -1, last_nu_ = -1, last_rho_ = -1;
  Eigen::VectorXd last_rw_;

  friend class SamplerTestAccess;
};

// Single-block updates on a state value; each builds a Sampler, applies one
// update and returns the new state.
ParamState update_sigma2(const ParamState& state, const Dataset& data,
                         const ModelSpec& spec, const PriorHyper& hyper,
                         Rng& rng);
ParamState update_coefficient(const ParamState& state, Eigen::Index j,
                              const Dataset& data, const ModelSpec& spec,
                              const PriorHyper& hyper, Rng& rng,
                              double rw_scale = 0.5);
ParamState update_eta(const ParamState& state, const Dataset& data,
                      const ModelSpec& spec, const PriorHyper& hyper, Rng& rng,
                      double rw_scale = 0.5);
ParamState update_gamma(const ParamState& state, Eigen::Index i,
                        const Dataset& data, const PriorHyper& hyper, Rng& rng);
ParamState update_u(const ParamState& state, Eigen::Index i,
                    const Dataset& data, const ModelSpec& spec,
                    const PriorHyper& hyper, Rng& rng);
ParamState update_mixing_params(const ParamState& state, const Dataset& data,
                                const ModelSpec& spec, const PriorHyper& hyper,
                                Rng& rng, double rw_scale = 0.5);
ParamState update_hyper(const ParamState& state, const ModelSpec& spec,
                        const PriorHyper& hyper, Rng& rng);

// Log acceptance ratios recomputed from scratch with log_posterior and the
// proposal densities. from -> to and to -> from must sum to zero.
double mh_log_ratio_coefficient(const ParamState& from, const ParamState& to,
                                Eigen::Index j, const Dataset& data,
                                const ModelSpec& spec, const PriorHyper& hyper,
                                double rw_scale);
double mh_log_ratio_eta(const ParamState& from, const ParamState& to,
                        const Dataset& data, const ModelSpec& spec,
                        const PriorHyper& hyper);
double mh_log_ratio_nu(const ParamState& from, const ParamState& to,
                       const Dataset& data, const ModelSpec& spec,
                       const PriorHyper& hyper);
double mh_log_ratio_rho(const ParamState& from, const ParamState& to,
                        const Dataset& data, const ModelSpec& spec,
                        const PriorHyper& hyper);

/// Default starting point: eta = 1, sigma^2 = sample variance of the eta = 1
/// residuals at beta = 0, z = 0, gamma = 0, u = 1, hyperparameters at their
/// prior means.
ParamState initial_state(const Dataset& data, const ModelSpec& spec,
                         const PriorHyper& hyper);

ChainOutput run_chain(const Dataset& data, const ModelSpec& spec,
                      const PriorHyper& hyper, const McmcConfig& config);

struct CoefficientSummary {
  double inclusion_prob = 0.0;
  bool selected = false;
  // Conditional on inclusion; NaN when the coefficient was never included.
  double mean = 0.0, median = 0.0, ci_low = 0.0, ci_high = 0.0;
};

struct PosteriorSummary {
  double threshold = 0.5;
  std::vector<std::size_t> support;  // selected coefficients (0-based)
  std::vector<CoefficientSummary> coefficients;
  Eigen::VectorXd beta_hat;          // conditional mean if selected, else 0
  double eta_mean = 0.0, sigma2_mean = 0.0, pi0_mean = 0.0,
         sigma_beta2_mean = 0.0;
  // TBSO shift block
  std::vector<std::size_t> shift_support;
  Eigen::VectorXd shift_inclusion, gamma_hat;
  // NI mixing block
  double nu_mean = 0.0, rho_mean = 0.0;
};

/// Median-probability-model selection: j is selected iff its inclusion
/// frequency is strictly greater than the threshold.
PosteriorSummary select_support(const ChainOutput& chain,
                                double threshold = 0.5);

}  // namespace tbs::mcmc

#endif  // TBS_SAMPLERS_HPP
