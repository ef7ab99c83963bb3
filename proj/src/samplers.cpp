#include "tbs/samplers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

namespace tbs::mcmc {

namespace {

// Unchecked transform for inner loops; callers guarantee a valid eta.
inline double g(double y, double e) {
  return (std::copysign(std::pow(std::abs(y), e), y) - 1.0) / e;
}

inline double g_inv(double t, double e) {
  const double s = e * t + 1.0;
  return std::copysign(std::pow(std::abs(s), 1.0 / e), s);
}

inline bool accept(Rng& rng, double log_ratio) {
  if (log_ratio >= 0.0) return true;
  return std::log(stats::draw_uniform(rng)) < log_ratio;
}

// Density of logit(eta/2) under the Beta(c1, d1) prior on eta/2, up to a
// constant: Beta log density plus the log Jacobian log s + log(1 - s).
double eta_log_target_prior(double eta, const PriorHyper& h) {
  const double s = 0.5 * eta;
  return stats::log_beta_pdf(s, h.c1, h.d1) + std::log(s) + std::log1p(-s);
}

double nu_t_log_target(double nu, const Eigen::VectorXd& u,
                       const PriorHyper& h) {
  double lp = -h.nu_rate * (nu - PriorHyper::nu_min) +
              std::log(nu - PriorHyper::nu_min);
  const double half = 0.5 * nu;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    lp += stats::log_gamma_pdf(u[i], half, half);
  }
  return lp;
}

double rho_log_target(double rho, const Eigen::VectorXd& resid, double sigma2,
                      const std::vector<std::uint8_t>& contaminated,
                      const PriorHyper& h) {
  double lp = stats::log_beta_pdf(rho, h.cn_rho_a, h.cn_rho_b) +
              std::log(rho) + std::log1p(-rho);
  for (std::size_t i = 0; i < contaminated.size(); ++i) {
    if (!contaminated[i]) continue;
    const double r = resid[static_cast<Eigen::Index>(i)];
    lp += 0.5 * std::log(rho) - rho * r * r / (2.0 * sigma2);
  }
  return lp;
}

double prior_mean_pi(double a, double b) { return a / (a + b); }

}  // namespace

void McmcConfig::validate() const {
  if (n_iter <= 0) throw DomainError("mcmc: n_iter must be positive");
  if (burn_in < 0 || burn_in >= n_iter) {
    throw DomainError("mcmc: burn_in must satisfy 0 <= burn_in < n_iter");
  }
  if (thin <= 0) throw DomainError("mcmc: thin must be positive");
  if (!(rw_scale_eta > 0.0) || !(rw_scale_theta > 0.0) ||
      !(rw_scale_nu > 0.0) || !(rw_scale_rho > 0.0)) {
    throw DomainError("mcmc: random-walk scales must be positive");
  }
}

Sampler::Sampler(const Dataset& data, ModelSpec spec, PriorHyper hyper,
                 ParamState state)
    : data_(data), spec_(spec), hyper_(hyper), state_(std::move(state)) {
  if (state_.p() != data_.p() || state_.n() != data_.n()) {
    throw DomainError("sampler: state dimensions do not match the data");
  }
  state_.validate(spec_);
  sum_log_abs_y_ = 0.0;
  for (Eigen::Index i = 0; i < data_.n(); ++i) {
    if (data_.y[i] == 0.0) {
      throw IndexedDomainError("sampler: zero response", i);
    }
    sum_log_abs_y_ += std::log(std::abs(data_.y[i]));
  }
  scale_theta_ = Eigen::VectorXd::Constant(data_.p(), 0.5);
  st_rw_.assign(static_cast<std::size_t>(data_.p()), {});
  last_rw_ = Eigen::VectorXd::Constant(data_.p(), -1.0);
  refresh_all();
}

void Sampler::set_scales(double eta, double theta, double nu, double rho) {
  scale_eta_ = eta;
  scale_theta_.setConstant(theta);
  scale_nu_ = nu;
  scale_rho_ = rho;
}

double Sampler::weighted_ss(const Eigen::VectorXd& resid) const {
  if (spec_.is_ni()) return (state_.u.array() * resid.array().square()).sum();
  return resid.squaredNorm();
}

void Sampler::refresh_all() {
  const double e = state_.eta;
  beta_ = beta_from_state(state_);
  mu_ = data_.X * beta_;
  gy_.resize(data_.n());
  gmu_.resize(data_.n());
  resid_.resize(data_.n());
  for (Eigen::Index i = 0; i < data_.n(); ++i) {
    gy_[i] = g(data_.y[i], e);
    gmu_[i] = g(mu_[i], e);
    resid_[i] = gy_[i] - gmu_[i] - (spec_.has_shifts() ? state_.gamma[i] : 0.0);
  }
  ss_ = weighted_ss(resid_);
}

Eigen::VectorXd Sampler::residuals() const { return resid_; }

void Sampler::check_finite(const char* block) const {
  if (!std::isfinite(ss_) || !std::isfinite(state_.sigma2) ||
      !(state_.sigma2 > 0.0) || !std::isfinite(state_.sigma_beta2)) {
    throw SamplerDivergence(-1, block);
  }
}

void Sampler::update_sigma2(Rng& rng) {
  const double shape = hyper_.a + 0.5 * static_cast<double>(data_.n());
  const double rate = hyper_.b + 0.5 * ss_;
  state_.sigma2 = stats::draw_inv_gamma(rng, shape, rate);
}

double Sampler::eta_log_ratio(double eta_new) const {
  if (!Eta::valid(eta_new)) return -std::numeric_limits<double>::infinity();
  double ss_new = 0.0;
  const bool ni = spec_.is_ni();
  // beta changes with eta because theta is held fixed.
  Eigen::VectorXd beta_new = Eigen::VectorXd::Zero(data_.p());
  for (Eigen::Index j = 0; j < data_.p(); ++j) {
    if (state_.z[static_cast<std::size_t>(j)]) {
      beta_new[j] = g_inv(state_.theta[j], eta_new);
    }
  }
  const Eigen::VectorXd mu_new = data_.X * beta_new;
  for (Eigen::Index i = 0; i < data_.n(); ++i) {
    const double r = g(data_.y[i], eta_new) - g(mu_new[i], eta_new) -
                     (spec_.has_shifts() ? state_.gamma[i] : 0.0);
    ss_new += (ni ? state_.u[i] : 1.0) * r * r;
  }
  const double dll = -(ss_new - ss_) / (2.0 * state_.sigma2) +
                     (eta_new - state_.eta) * sum_log_abs_y_;
  return dll + eta_log_target_prior(eta_new, hyper_) -
         eta_log_target_prior(state_.eta, hyper_);
}

void Sampler::update_eta(Rng& rng) {
  const double cur = stats::logit(0.5 * state_.eta);
  const double prop = cur + stats::draw_normal(rng, 0.0, scale_eta_);
  const double eta_new = 2.0 * stats::inv_logit(prop);
  ++st_eta_.proposed;
  last_eta_ = 0.0;
  if (!Eta::valid(eta_new)) return;
  const double lr = eta_log_ratio(eta_new);
  if (std::isfinite(lr) && accept(rng, lr)) {
    state_.eta = eta_new;
    refresh_all();
    ++st_eta_.accepted;
    last_eta_ = 1.0;
  }
}

double Sampler::coefficient_log_ratio(Eigen::Index j, bool z_new,
                                      double theta_new) const {
  const bool z_old = state_.z[static_cast<std::size_t>(j)] != 0;
  const double beta_new = z_new ? g_inv(theta_new, state_.eta) : 0.0;
  const double delta = beta_new - beta_[j];
  double ss_new = 0.0;
  const bool ni = spec_.is_ni();
  const bool shifts = spec_.has_shifts();
  for (Eigen::Index i = 0; i < data_.n(); ++i) {
    const double m = mu_[i] + data_.X(i, j) * delta;
    const double r = gy_[i] - g(m, state_.eta) - (shifts ? state_.gamma[i] : 0.0);
    ss_new += (ni ? state_.u[i] : 1.0) * r * r;
  }
  double lr = -(ss_new - ss_) / (2.0 * state_.sigma2);
  const double log_odds = std::log1p(-state_.pi0) - std::log(state_.pi0);
  if (!z_old && z_new) {
    lr += log_odds + std::log(0.5);  // birth: reverse move is a death w.p. 1/2
  } else if (z_old && !z_new) {
    lr += -log_odds - std::log(0.5);
  } else if (z_old && z_new) {
    lr += stats::log_normal_pdf(theta_new, 0.0, state_.sigma_beta2) -
          stats::log_normal_pdf(state_.theta[j], 0.0, state_.sigma_beta2);
  }
  return lr;
}

void Sampler::update_coefficient(Eigen::Index j, Rng& rng) {
  const auto ju = static_cast<std::size_t>(j);
  const bool z_old = state_.z[ju] != 0;
  bool z_new = true;
  double theta_new = 0.0;
  BlockStats* stats_block = nullptr;
  bool rw = false;
  if (!z_old) {
    theta_new = stats::draw_normal(rng, 0.0, std::sqrt(state_.sigma_beta2));
    stats_block = &st_birth_;
  } else if (stats::draw_uniform(rng) < 0.5) {
    z_new = false;
    stats_block = &st_death_;
  } else {
    theta_new = state_.theta[j] + stats::draw_normal(rng, 0.0, scale_theta_[j]);
    stats_block = &st_rw_[ju];
    rw = true;
  }
  ++stats_block->proposed;
  if (rw) last_rw_[j] = 0.0;
  const double lr = coefficient_log_ratio(j, z_new, theta_new);
  if (!(std::isfinite(lr) && accept(rng, lr))) return;

  ++stats_block->accepted;
  if (rw) last_rw_[j] = 1.0;
  const double beta_new = z_new ? g_inv(theta_new, state_.eta) : 0.0;
  const double delta = beta_new - beta_[j];
  state_.z[ju] = z_new ? 1 : 0;
  state_.theta[j] = z_new ? theta_new : 0.0;
  beta_[j] = beta_new;
  const bool shifts = spec_.has_shifts();
  for (Eigen::Index i = 0; i < data_.n(); ++i) {
    mu_[i] += data_.X(i, j) * delta;
    gmu_[i] = g(mu_[i], state_.eta);
    resid_[i] = gy_[i] - gmu_[i] - (shifts ? state_.gamma[i] : 0.0);
  }
  ss_ = weighted_ss(resid_);
}

void Sampler::update_hyper(Rng& rng) {
  const int active = state_.active_count();
  const int inactive = static_cast<int>(state_.p()) - active;
  state_.pi0 = stats::draw_beta(rng, hyper_.pi0_a + inactive,
                                hyper_.pi0_b + active);
  double ss_theta = 0.0;
  for (Eigen::Index j = 0; j < state_.p(); ++j) {
    if (state_.z[static_cast<std::size_t>(j)]) {
      ss_theta += state_.theta[j] * state_.theta[j];
    }
  }
  state_.sigma_beta2 = stats::draw_inv_gamma(
      rng, hyper_.sb_a + 0.5 * active, hyper_.sb_b + 0.5 * ss_theta);
  if (spec_.has_shifts()) {
    const int shifted = state_.shift_count();
    const int clean = static_cast<int>(state_.n()) - shifted;
    state_.pi_gamma = stats::draw_beta(rng, hyper_.pi_gamma_a + clean,
                                       hyper_.pi_gamma_b + shifted);
  }
  // Beta draws can round to the boundary for extreme counts.
  const double eps = 1e-300;
  state_.pi0 = std::clamp(state_.pi0, eps, 1.0 - 1e-16);
  state_.pi_gamma = std::clamp(state_.pi_gamma, eps, 1.0 - 1e-16);
}

void Sampler::update_gamma(Eigen::Index i, Rng& rng) {
  if (!spec_.has_shifts()) {
    throw DomainError("update_gamma: only defined for the TBSO variant");
  }
  const auto iu = static_cast<std::size_t>(i);
  const double d = gy_[i] - gmu_[i];
  const double s2 = state_.sigma2;
  const double log_excl =
      std::log(state_.pi_gamma) + stats::log_normal_pdf(d, 0.0, s2);
  const double log_incl = std::log1p(-state_.pi_gamma) +
                          stats::log_normal_pdf(d, 0.0, s2 + hyper_.sg2);
  const double p_incl =
      std::exp(log_incl - stats::log_add_exp(log_excl, log_incl));
  if (stats::draw_bernoulli(rng, p_incl)) {
    const double v = 1.0 / (1.0 / hyper_.sg2 + 1.0 / s2);
    const double m = v * d / s2;
    state_.zg[iu] = 1;
    state_.gamma[i] = stats::draw_normal(rng, m, std::sqrt(v));
  } else {
    state_.zg[iu] = 0;
    state_.gamma[i] = 0.0;
  }
  const double r_old = resid_[i];
  resid_[i] = d - state_.gamma[i];
  ss_ += resid_[i] * resid_[i] - r_old * r_old;
}

void Sampler::update_u(Eigen::Index i, Rng& rng) {
  const auto iu = static_cast<std::size_t>(i);
  const double r = resid_[i];
  const double q = r * r / state_.sigma2;
  double u_new = 1.0;
  switch (spec_.variant) {
    case Variant::TbstSg:
      u_new = stats::draw_gamma(rng, 0.5 * (state_.nu + 1.0),
                                0.5 * (state_.nu + q));
      u_new = std::max(u_new, std::numeric_limits<double>::min());
      break;
    case Variant::TbssSg:
      u_new = stats::draw_gamma_unit_truncated(rng, state_.nu + 0.5, 0.5 * q);
      break;
    case Variant::TbscnSg: {
      const double log_c = std::log(state_.nu) + 0.5 * std::log(state_.rho) -
                           0.5 * state_.rho * q;
      const double log_clean = std::log1p(-state_.nu) - 0.5 * q;
      const double p_c = std::exp(log_c - stats::log_add_exp(log_c, log_clean));
      const bool c = stats::draw_bernoulli(rng, p_c);
      state_.contaminated[iu] = c ? 1 : 0;
      u_new = c ? state_.rho : 1.0;
      break;
    }
    default:
      throw DomainError("update_u: only defined for NI variants");
  }
  ss_ += (u_new - state_.u[i]) * r * r;
  state_.u[i] = u_new;
}

void Sampler::update_mixing_params(Rng& rng) {
  switch (spec_.variant) {
    case Variant::TbstSg: {
      const double cur = std::log(state_.nu - PriorHyper::nu_min);
      const double prop = cur + stats::draw_normal(rng, 0.0, scale_nu_);
      const double nu_new = PriorHyper::nu_min + std::exp(prop);
      ++st_nu_.proposed;
      last_nu_ = 0.0;
      if (!std::isfinite(nu_new) || !(nu_new > PriorHyper::nu_min)) return;
      const double lr = nu_t_log_target(nu_new, state_.u, hyper_) -
                        nu_t_log_target(state_.nu, state_.u, hyper_);
      if (std::isfinite(lr) && accept(rng, lr)) {
        state_.nu = nu_new;
        ++st_nu_.accepted;
        last_nu_ = 1.0;
      }
      break;
    }
    case Variant::TbssSg: {
      const double sum_log_u = state_.u.array().log().sum();
      state_.nu = stats::draw_gamma(rng, hyper_.slash_a + state_.n(),
                                    hyper_.slash_b - sum_log_u);
      state_.nu = std::max(state_.nu, 1e-300);
      break;
    }
    case Variant::TbscnSg: {
      int k = 0;
      for (auto c : state_.contaminated) k += c;
      state_.nu = stats::draw_beta(rng, hyper_.cn_nu_a + k,
                                   hyper_.cn_nu_b + (state_.n() - k));
      state_.nu = std::clamp(state_.nu, 1e-300, 1.0 - 1e-16);

      const double cur = stats::logit(state_.rho);
      const double prop = cur + stats::draw_normal(rng, 0.0, scale_rho_);
      const double rho_new = stats::inv_logit(prop);
      ++st_rho_.proposed;
      last_rho_ = 0.0;
      if (!(rho_new > 0.0 && rho_new < 1.0)) return;
      const double lr = rho_log_target(rho_new, resid_, state_.sigma2,
                                       state_.contaminated, hyper_) -
                        rho_log_target(state_.rho, resid_, state_.sigma2,
                                       state_.contaminated, hyper_);
      if (std::isfinite(lr) && accept(rng, lr)) {
        state_.rho = rho_new;
        for (std::size_t i = 0; i < state_.contaminated.size(); ++i) {
          if (state_.contaminated[i]) {
            state_.u[static_cast<Eigen::Index>(i)] = rho_new;
          }
        }
        ss_ = weighted_ss(resid_);
        ++st_rho_.accepted;
        last_rho_ = 1.0;
      }
      break;
    }
    default:
      throw DomainError("update_mixing_params: only defined for NI variants");
  }
}

void Sampler::sweep(Rng& rng, const FixedBlocks& fixed, bool random_scan,
                    int iteration) {
  auto guard = [&](const char* block) {
    try {
      check_finite(block);
    } catch (const SamplerDivergence&) {
      throw SamplerDivergence(iteration, block);
    }
  };
  if (!fixed.eta) { update_eta(rng); guard("eta"); }
  if (!fixed.sigma2) { update_sigma2(rng); guard("sigma2"); }
  if (!fixed.coefficients) {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(data_.p()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    if (random_scan) std::shuffle(order.begin(), order.end(), rng);
    for (Eigen::Index j : order) {
      if (fixed.support) {
        if (!state_.z[static_cast<std::size_t>(j)]) continue;
        // Random-walk refinement only.
        const double theta_new =
            state_.theta[j] + stats::draw_normal(rng, 0.0, scale_theta_[j]);
        auto& sb = st_rw_[static_cast<std::size_t>(j)];
        ++sb.proposed;
        last_rw_[j] = 0.0;
        const double lr = coefficient_log_ratio(j, true, theta_new);
        if (std::isfinite(lr) && accept(rng, lr)) {
          state_.theta[j] = theta_new;
          refresh_all();
          ++sb.accepted;
          last_rw_[j] = 1.0;
        }
      } else {
        update_coefficient(j, rng);
      }
    }
    guard("coefficients");
  }
  if (!fixed.hyper) { update_hyper(rng); guard("hyper"); }
  if (spec_.has_shifts() && !fixed.shifts) {
    for (Eigen::Index i = 0; i < data_.n(); ++i) update_gamma(i, rng);
    guard("shifts");
  }
  if (spec_.is_ni()) {
    if (!fixed.latent_scales) {
      for (Eigen::Index i = 0; i < data_.n(); ++i) update_u(i, rng);
      guard("latent_scales");
    }
    if (!fixed.mixing) { update_mixing_params(rng); guard("mixing"); }
  }
}

void Sampler::adapt_scales(int iteration, double target) {
  const double w = std::pow(static_cast<double>(iteration) + 1.0, -0.6);
  auto step = [&](double& scale, double& last) {
    if (last < 0.0) return;
    scale = std::clamp(scale * std::exp(w * (last - target)), 1e-6, 50.0);
    last = -1.0;
  };
  step(scale_eta_, last_eta_);
  step(scale_nu_, last_nu_);
  step(scale_rho_, last_rho_);
  for (Eigen::Index j = 0; j < scale_theta_.size(); ++j) {
    step(scale_theta_[j], last_rw_[j]);
  }
}

std::map<std::string, BlockStats> Sampler::block_stats() const {
  std::map<std::string, BlockStats> out;
  auto add = [&](const std::string& name, const BlockStats& s) {
    if (s.proposed > 0) out[name] = s;
  };
  add("eta", st_eta_);
  add("birth", st_birth_);
  add("death", st_death_);
  BlockStats rw;
  for (const auto& s : st_rw_) {
    rw.proposed += s.proposed;
    rw.accepted += s.accepted;
  }
  add("theta_rw", rw);
  add("nu", st_nu_);
  add("rho", st_rho_);
  return out;
}

void Sampler::reset_stats() {
  st_eta_ = st_birth_ = st_death_ = st_nu_ = st_rho_ = {};
  for (auto& s : st_rw_) s = {};
}

// ---------------------------------------------------------------------------
// Value-level wrappers

ParamState update_sigma2(const ParamState& state, const Dataset& data,
                         const ModelSpec& spec, const PriorHyper& hyper,
                         Rng& rng) {
  Sampler s(data, spec, hyper, state);
  s.update_sigma2(rng);
  return s.state();
}

ParamState update_coefficient(const ParamState& state, Eigen::Index j,
                              const Dataset& data, const ModelSpec& spec,
                              const PriorHyper& hyper, Rng& rng,
                              double rw_scale) {
  if (j < 0 || j >= data.p()) throw DomainError("coefficient index out of range");
  Sampler s(data, spec, hyper, state);
  s.set_scales(0.5, rw_scale, 0.5, 0.5);
  s.update_coefficient(j, rng);
  return s.state();
}

ParamState update_eta(const ParamState& state, const Dataset& data,
                      const ModelSpec& spec, const PriorHyper& hyper, Rng& rng,
                      double rw_scale) {
  Sampler s(data, spec, hyper, state);
  s.set_scales(rw_scale, 0.5, 0.5, 0.5);
  s.update_eta(rng);
  return s.state();
}

ParamState update_gamma(const ParamState& state, Eigen::Index i,
                        const Dataset& data, const PriorHyper& hyper,
                        Rng& rng) {
  Sampler s(data, ModelSpec{Variant::TbsoSg}, hyper, state);
  s.update_gamma(i, rng);
  return s.state();
}

ParamState update_u(const ParamState& state, Eigen::Index i,
                    const Dataset& data, const ModelSpec& spec,
                    const PriorHyper& hyper, Rng& rng) {
  Sampler s(data, spec, hyper, state);
  s.update_u(i, rng);
  return s.state();
}

ParamState update_mixing_params(const ParamState& state, const Dataset& data,
                                const ModelSpec& spec, const PriorHyper& hyper,
                                Rng& rng, double rw_scale) {
  Sampler s(data, spec, hyper, state);
  s.set_scales(0.5, 0.5, rw_scale, rw_scale);
  s.update_mixing_params(rng);
  return s.state();
}

ParamState update_hyper(const ParamState& state, const ModelSpec& spec,
                        const PriorHyper& hyper, Rng& rng) {
  // Conditional draws only depend on the state, so no data is needed.
  Dataset empty;
  empty.X.resize(state.n(), state.p());
  empty.X.setZero();
  empty.y = Eigen::VectorXd::Ones(state.n());
  Sampler s(empty, spec, hyper, state);
  s.update_hyper(rng);
  return s.state();
}

// ---------------------------------------------------------------------------
// Full-recompute acceptance ratios

double mh_log_ratio_coefficient(const ParamState& from, const ParamState& to,
                                Eigen::Index j, const Dataset& data,
                                const ModelSpec& spec, const PriorHyper& hyper,
                                double rw_scale) {
  const auto ju = static_cast<std::size_t>(j);
  const bool zf = from.z[ju] != 0, zt = to.z[ju] != 0;
  // log q(to | from)
  auto log_q = [&](const ParamState& a, const ParamState& b) {
    const bool za = a.z[ju] != 0, zb = b.z[ju] != 0;
    if (!za && zb) return stats::log_normal_pdf(b.theta[j], 0.0, a.sigma_beta2);
    if (za && !zb) return std::log(0.5);
    if (za && zb) {
      return std::log(0.5) +
             stats::log_normal_pdf(b.theta[j], a.theta[j], rw_scale * rw_scale);
    }
    return 0.0;
  };
  if (!zf && !zt) return 0.0;
  return log_posterior(to, data, spec, hyper) -
         log_posterior(from, data, spec, hyper) + log_q(to, from) -
         log_q(from, to);
}

double mh_log_ratio_eta(const ParamState& from, const ParamState& to,
                        const Dataset& data, const ModelSpec& spec,
                        const PriorHyper& hyper) {
  // Symmetric random walk on logit(eta/2): the target in that coordinate is
  // the posterior times d eta / d logit = 2 s (1 - s).
  auto log_jac = [](double eta) {
    const double s = 0.5 * eta;
    return std::log(s) + std::log1p(-s);
  };
  return log_posterior(to, data, spec, hyper) + log_jac(to.eta) -
         log_posterior(from, data, spec, hyper) - log_jac(from.eta);
}

double mh_log_ratio_nu(const ParamState& from, const ParamState& to,
                       const Dataset& data, const ModelSpec& spec,
                       const PriorHyper& hyper) {
  auto log_jac = [](double nu) { return std::log(nu - PriorHyper::nu_min); };
  return log_posterior(to, data, spec, hyper) + log_jac(to.nu) -
         log_posterior(from, data, spec, hyper) - log_jac(from.nu);
}

double mh_log_ratio_rho(const ParamState& from, const ParamState& to,
                        const Dataset& data, const ModelSpec& spec,
                        const PriorHyper& hyper) {
  auto log_jac = [](double rho) { return std::log(rho) + std::log1p(-rho); };
  return log_posterior(to, data, spec, hyper) + log_jac(to.rho) -
         log_posterior(from, data, spec, hyper) - log_jac(from.rho);
}

// ---------------------------------------------------------------------------

ParamState initial_state(const Dataset& data, const ModelSpec& spec,
                         const PriorHyper& hyper) {
  ParamState s = ParamState::zeros(data.n(), data.p());
  s.eta = 1.0;
  // With eta = 1 and beta = 0 the transformed residual is g1(y) - g1(0) = y.
  double var = 1.0;
  if (data.n() >= 2) {
    const double mean = data.y.mean();
    var = (data.y.array() - mean).square().sum() /
          static_cast<double>(data.n() - 1);
  }
  s.sigma2 = (std::isfinite(var) && var > 0.0) ? var : 1.0;
  s.pi0 = prior_mean_pi(hyper.pi0_a, hyper.pi0_b);
  s.sigma_beta2 = hyper.sb_a > 1.0 ? hyper.sb_b / (hyper.sb_a - 1.0) : hyper.sb_b;
  s.pi_gamma = prior_mean_pi(hyper.pi_gamma_a, hyper.pi_gamma_b);
  switch (spec.variant) {
    case Variant::TbstSg: s.nu = PriorHyper::nu_min + 1.0 / hyper.nu_rate; break;
    case Variant::TbssSg: s.nu = hyper.slash_a / hyper.slash_b; break;
    case Variant::TbscnSg:
      s.nu = prior_mean_pi(hyper.cn_nu_a, hyper.cn_nu_b);
      s.rho = prior_mean_pi(hyper.cn_rho_a, hyper.cn_rho_b);
      break;
    default: break;
  }
  return s;
}

ChainOutput run_chain(const Dataset& data, const ModelSpec& spec,
                      const PriorHyper& hyper, const McmcConfig& config) {
  data.validate();
  hyper.validate();
  config.validate();
  const auto start = std::chrono::steady_clock::now();

  ParamState init = config.init ? *config.init : initial_state(data, spec, hyper);
  Sampler sampler(data, spec, hyper, std::move(init));
  sampler.set_scales(config.rw_scale_eta, config.rw_scale_theta,
                     config.rw_scale_nu, config.rw_scale_rho);
  Rng rng = make_stream(config.seed, 0);

  ChainOutput out;
  out.config = config;
  out.spec = spec;
  out.draws.reserve(static_cast<std::size_t>(config.draw_count()));
  for (int it = 0; it < config.n_iter; ++it) {
    if (it == config.burn_in) sampler.reset_stats();
    sampler.sweep(rng, config.fixed, config.random_scan, it);
    if (it < config.burn_in) {
      if (config.adapt) sampler.adapt_scales(it, config.target_acceptance);
    } else if ((it - config.burn_in + 1) % config.thin == 0) {
      out.draws.push_back(sampler.state());
    }
  }
  for (const auto& [name, s] : sampler.block_stats()) {
    out.acceptance_rates[name] = s.rate();
  }
  out.wall_time_seconds = std::chrono::duration<double>(
                              std::chrono::steady_clock::now() - start)
                              .count();
  return out;
}

// ---------------------------------------------------------------------------

namespace {

double quantile_sorted(const std::vector<double>& v, double q) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] + frac * (v[hi] - v[lo]);
}

}  // namespace

PosteriorSummary select_support(const ChainOutput& chain, double threshold) {
  if (chain.draws.empty()) throw DomainError("select_support: empty chain");
  const auto& first = chain.draws.front();
  const Eigen::Index p = first.p(), n = first.n();
  const double m = static_cast<double>(chain.draws.size());

  PosteriorSummary out;
  out.threshold = threshold;
  out.coefficients.resize(static_cast<std::size_t>(p));
  out.beta_hat = Eigen::VectorXd::Zero(p);
  std::vector<std::vector<double>> included(static_cast<std::size_t>(p));
  for (const auto& d : chain.draws) {
    const Eigen::VectorXd beta = beta_from_state(d);
    for (Eigen::Index j = 0; j < p; ++j) {
      if (d.z[static_cast<std::size_t>(j)]) {
        included[static_cast<std::size_t>(j)].push_back(beta[j]);
      }
    }
    out.eta_mean += d.eta / m;
    out.sigma2_mean += d.sigma2 / m;
    out.pi0_mean += d.pi0 / m;
    out.sigma_beta2_mean += d.sigma_beta2 / m;
    out.nu_mean += d.nu / m;
    out.rho_mean += d.rho / m;
  }
  for (Eigen::Index j = 0; j < p; ++j) {
    auto& draws = included[static_cast<std::size_t>(j)];
    auto& cs = out.coefficients[static_cast<std::size_t>(j)];
    cs.inclusion_prob = static_cast<double>(draws.size()) / m;
    cs.selected = cs.inclusion_prob > threshold;
    if (draws.empty()) {
      cs.mean = cs.median = cs.ci_low = cs.ci_high =
          std::numeric_limits<double>::quiet_NaN();
    } else {
      cs.mean = std::accumulate(draws.begin(), draws.end(), 0.0) /
                static_cast<double>(draws.size());
      std::sort(draws.begin(), draws.end());
      cs.median = quantile_sorted(draws, 0.5);
      cs.ci_low = quantile_sorted(draws, 0.025);
      cs.ci_high = quantile_sorted(draws, 0.975);
    }
    if (cs.selected) {
      out.support.push_back(static_cast<std::size_t>(j));
      out.beta_hat[j] = cs.mean;
    }
  }

  if (chain.spec.has_shifts()) {
    out.shift_inclusion = Eigen::VectorXd::Zero(n);
    out.gamma_hat = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd gamma_sum = Eigen::VectorXd::Zero(n);
    for (const auto& d : chain.draws) {
      for (Eigen::Index i = 0; i < n; ++i) {
        if (d.zg[static_cast<std::size_t>(i)]) {
          out.shift_inclusion[i] += 1.0;
          gamma_sum[i] += d.gamma[i];
        }
      }
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      const double cnt = out.shift_inclusion[i];
      out.shift_inclusion[i] = cnt / m;
      if (out.shift_inclusion[i] > threshold) {
        out.shift_support.push_back(static_cast<std::size_t>(i));
        out.gamma_hat[i] = gamma_sum[i] / cnt;
      }
    }
  }
  return out;
}

}  // namespace tbs::mcmc
