#include "tbs/model.hpp"

#include <cmath>
#include <limits>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "tbs/errors.hpp"
#include "tbs/stats.hpp"

namespace tbs {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

bool all_finite(const Eigen::MatrixXd& m) { return m.allFinite(); }

}  // namespace

void Dataset::validate() const {
  if (X.rows() != y.size()) {
    throw DomainError("dataset: X has " + std::to_string(X.rows()) +
                      " rows but y has " + std::to_string(y.size()));
  }
  if (n() < 2) throw DomainError("dataset: need at least 2 observations");
  if (p() < 1) throw DomainError("dataset: need at least 1 covariate");
  if (!all_finite(X)) throw DomainError("dataset: non-finite covariate");
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (!std::isfinite(y[i])) {
      throw IndexedDomainError("dataset: non-finite response", i);
    }
    if (y[i] == 0.0) {
      throw IndexedDomainError(
          "dataset: response exactly zero; the transformed likelihood is "
          "degenerate at 0, jitter or drop the row",
          i);
    }
  }
}

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::TbsSg: return "TbsSg";
    case Variant::TbsoSg: return "TbsoSg";
    case Variant::TbstSg: return "TbstSg";
    case Variant::TbssSg: return "TbssSg";
    case Variant::TbscnSg: return "TbscnSg";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  if (name == "TbsSg" || name == "tbs") return Variant::TbsSg;
  if (name == "TbsoSg" || name == "tbso") return Variant::TbsoSg;
  if (name == "TbstSg" || name == "tbst") return Variant::TbstSg;
  if (name == "TbssSg" || name == "tbss") return Variant::TbssSg;
  if (name == "TbscnSg" || name == "tbscn") return Variant::TbscnSg;
  throw DomainError("unknown model variant '" + std::string(name) + "'");
}

void PriorHyper::validate() const {
  const double all[] = {a,       b,       c1,         d1,         pi0_a,
                        pi0_b,   sb_a,    sb_b,       pi_gamma_a, pi_gamma_b,
                        sg2,     nu_rate, slash_a,    slash_b,    cn_nu_a,
                        cn_nu_b, cn_rho_a, cn_rho_b};
  for (double v : all) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw DomainError("prior hyperparameters must be finite and positive");
    }
  }
}

int ParamState::active_count() const {
  int k = 0;
  for (auto v : z) k += v;
  return k;
}

int ParamState::shift_count() const {
  int k = 0;
  for (auto v : zg) k += v;
  return k;
}

ParamState ParamState::zeros(Eigen::Index n, Eigen::Index p) {
  ParamState s;
  s.theta = Eigen::VectorXd::Zero(p);
  s.z.assign(static_cast<std::size_t>(p), 0);
  s.gamma = Eigen::VectorXd::Zero(n);
  s.zg.assign(static_cast<std::size_t>(n), 0);
  s.u = Eigen::VectorXd::Ones(n);
  s.contaminated.assign(static_cast<std::size_t>(n), 0);
  return s;
}

void ParamState::validate(const ModelSpec& spec) const {
  const auto np = static_cast<std::size_t>(p());
  const auto nn = static_cast<std::size_t>(n());
  if (z.size() != np) throw DomainError("state: z and theta sizes differ");
  if (zg.size() != nn || static_cast<std::size_t>(u.size()) != nn ||
      contaminated.size() != nn) {
    throw DomainError("state: observation-level blocks have mismatched sizes");
  }
  if (!Eta::valid(eta)) throw DomainError("state: eta out of range");
  if (!(sigma2 > 0.0) || !(sigma_beta2 > 0.0)) {
    throw DomainError("state: variances must be positive");
  }
  if (!(pi0 > 0.0 && pi0 < 1.0)) throw DomainError("state: pi0 not in (0,1)");
  for (std::size_t j = 0; j < np; ++j) {
    if (!z[j] && theta[static_cast<Eigen::Index>(j)] != 0.0) {
      throw IndexedDomainError("state: excluded coefficient with theta != 0", j);
    }
  }
  if (spec.has_shifts()) {
    if (!(pi_gamma > 0.0 && pi_gamma < 1.0)) {
      throw DomainError("state: pi_gamma not in (0,1)");
    }
    for (std::size_t i = 0; i < nn; ++i) {
      if (!zg[i] && gamma[static_cast<Eigen::Index>(i)] != 0.0) {
        throw IndexedDomainError("state: excluded shift with gamma != 0", i);
      }
    }
  }
  if (spec.is_ni()) {
    for (std::size_t i = 0; i < nn; ++i) {
      const double ui = u[static_cast<Eigen::Index>(i)];
      if (!(ui > 0.0)) throw IndexedDomainError("state: u must be positive", i);
      if (spec.variant == Variant::TbssSg && ui > 1.0) {
        throw IndexedDomainError("state: slash scale above 1", i);
      }
      if (spec.variant == Variant::TbscnSg &&
          ui != (contaminated[i] ? rho : 1.0)) {
        throw IndexedDomainError("state: CN scale not in {rho, 1}", i);
      }
    }
    if (spec.variant == Variant::TbstSg && !(nu > PriorHyper::nu_min)) {
      throw DomainError("state: Student-t nu must exceed 2");
    }
    if (spec.variant == Variant::TbssSg && !(nu > 0.0)) {
      throw DomainError("state: slash nu must be positive");
    }
    if (spec.variant == Variant::TbscnSg &&
        !(nu > 0.0 && nu < 1.0 && rho > 0.0 && rho <= 1.0)) {
      throw DomainError("state: CN nu/rho out of range");
    }
  }
}

Eigen::VectorXd beta_from_state(const ParamState& state) {
  const Eta eta(state.eta);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(state.p());
  for (Eigen::Index j = 0; j < state.p(); ++j) {
    if (state.z[static_cast<std::size_t>(j)]) {
      beta[j] = gpow_inv(state.theta[j], eta);
    }
  }
  return beta;
}

double log_likelihood(const ParamState& state, const Dataset& data,
                      const ModelSpec& spec) {
  if (state.p() != data.p()) {
    throw DomainError("log_likelihood: state and data disagree on p");
  }
  if (state.n() != data.n()) {
    throw DomainError("log_likelihood: state and data disagree on n");
  }
  const Eta eta(state.eta);
  const Eigen::VectorXd mu = data.X * beta_from_state(state);
  const double jac = log_jacobian(
      std::span<const double>(data.y.data(), static_cast<std::size_t>(data.n())),
      eta);
  double ll = 0.0;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const double shift = spec.has_shifts() ? state.gamma[i] : 0.0;
    const double scale = spec.is_ni() ? state.u[i] : 1.0;
    const double r = gpow(data.y[i], eta) - gpow(mu[i], eta) - shift;
    const double term = stats::log_normal_pdf(r, 0.0, state.sigma2 / scale);
    if (!std::isfinite(term)) {
      throw NumericalError("log_likelihood: non-finite term at observation " +
                           std::to_string(i));
    }
    ll += term;
  }
  return ll + jac;
}

double log_mixing_density(double u, const ParamState& state,
                          const ModelSpec& spec) {
  switch (spec.variant) {
    case Variant::TbstSg:
      return stats::log_gamma_pdf(u, 0.5 * state.nu, 0.5 * state.nu);
    case Variant::TbssSg:
      if (u <= 0.0 || u > 1.0) return kNegInf;
      return std::log(state.nu) + (state.nu - 1.0) * std::log(u);
    default:
      return 0.0;
  }
}

double log_prior(const ParamState& state, const ModelSpec& spec,
                 const PriorHyper& hyper) {
  state.validate(spec);
  double lp = 0.0;
  const double log_pi0 = std::log(state.pi0);
  const double log_incl = std::log1p(-state.pi0);
  for (Eigen::Index j = 0; j < state.p(); ++j) {
    if (state.z[static_cast<std::size_t>(j)]) {
      lp += log_incl +
            stats::log_normal_pdf(state.theta[j], 0.0, state.sigma_beta2);
    } else {
      lp += log_pi0;
    }
  }
  lp += stats::log_inv_gamma_pdf(state.sigma2, hyper.a, hyper.b);
  // eta/2 ~ Beta(c1, d1); density of eta carries the 1/2 scale factor.
  lp += stats::log_beta_pdf(0.5 * state.eta, hyper.c1, hyper.d1) - std::log(2.0);
  lp += stats::log_beta_pdf(state.pi0, hyper.pi0_a, hyper.pi0_b);
  lp += stats::log_inv_gamma_pdf(state.sigma_beta2, hyper.sb_a, hyper.sb_b);

  if (spec.has_shifts()) {
    const double log_pg = std::log(state.pi_gamma);
    const double log_shift = std::log1p(-state.pi_gamma);
    for (Eigen::Index i = 0; i < state.n(); ++i) {
      if (state.zg[static_cast<std::size_t>(i)]) {
        lp += log_shift + stats::log_normal_pdf(state.gamma[i], 0.0, hyper.sg2);
      } else {
        lp += log_pg;
      }
    }
    lp += stats::log_beta_pdf(state.pi_gamma, hyper.pi_gamma_a,
                              hyper.pi_gamma_b);
  }

  switch (spec.variant) {
    case Variant::TbstSg:
      for (Eigen::Index i = 0; i < state.n(); ++i) {
        lp += log_mixing_density(state.u[i], state, spec);
      }
      lp += std::log(hyper.nu_rate) -
            hyper.nu_rate * (state.nu - PriorHyper::nu_min);
      break;
    case Variant::TbssSg:
      for (Eigen::Index i = 0; i < state.n(); ++i) {
        lp += log_mixing_density(state.u[i], state, spec);
      }
      lp += stats::log_gamma_pdf(state.nu, hyper.slash_a, hyper.slash_b);
      break;
    case Variant::TbscnSg: {
      const double log_c = std::log(state.nu);
      const double log_clean = std::log1p(-state.nu);
      for (auto c : state.contaminated) lp += c ? log_c : log_clean;
      lp += stats::log_beta_pdf(state.nu, hyper.cn_nu_a, hyper.cn_nu_b);
      lp += stats::log_beta_pdf(state.rho, hyper.cn_rho_a, hyper.cn_rho_b);
      break;
    }
    default:
      break;
  }
  return lp;
}

double median_predict(const Eigen::Ref<const Eigen::VectorXd>& x,
                      const Eigen::Ref<const Eigen::VectorXd>& beta) {
  if (x.size() != beta.size()) {
    throw DomainError("median_predict: dimension mismatch");
  }
  return x.dot(beta);
}

double error_cdf(const ParamState& state, const ModelSpec& spec, double z) {
  using boost::math::quadrature::gauss_kronrod;
  const double sigma = std::sqrt(state.sigma2);
  switch (spec.variant) {
    case Variant::TbstSg: {
      const double half = 0.5 * state.nu;
      auto f = [&](double u) {
        if (u <= 0.0) return 0.0;
        return stats::normal_cdf(z * std::sqrt(u) / sigma) *
               std::exp(stats::log_gamma_pdf(u, half, half));
      };
      return gauss_kronrod<double, 31>::integrate(
          f, 0.0, std::numeric_limits<double>::infinity(), 15, 1e-12);
    }
    case Variant::TbssSg: {
      // Substituting v = u^nu turns nu u^(nu-1) du into dv on (0, 1].
      const double power = 0.5 / state.nu;
      auto f = [&](double v) {
        return stats::normal_cdf(z * std::pow(v, power) / sigma);
      };
      return gauss_kronrod<double, 31>::integrate(f, 0.0, 1.0, 15, 1e-12);
    }
    case Variant::TbscnSg:
      return state.nu * stats::normal_cdf(z * std::sqrt(state.rho) / sigma) +
             (1.0 - state.nu) * stats::normal_cdf(z / sigma);
    default:
      return stats::normal_cdf(z / sigma);
  }
}

double error_quantile(const ParamState& state, const ModelSpec& spec,
                      double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw DomainError("quantile level must lie in (0, 1)");
  }
  if (alpha == 0.5) return 0.0;
  const double sigma = std::sqrt(state.sigma2);
  const double normal_q = sigma * stats::normal_quantile(alpha);
  if (!spec.is_ni()) return normal_q;

  // Heavier tails than the normal: bracket outward from the normal quantile.
  double lo = 0.0, hi = normal_q;
  if (alpha < 0.5) std::swap(lo, hi);
  auto below = [&](double x) { return error_cdf(state, spec, x) < alpha; };
  if (alpha > 0.5) {
    while (below(hi)) { lo = hi; hi *= 2.0; }
  } else {
    while (!below(lo)) { hi = lo; lo *= 2.0; }
  }
  for (int it = 0; it < 200 && hi - lo > 1e-8 * std::max(1.0, std::abs(hi));
       ++it) {
    const double mid = 0.5 * (lo + hi);
    if (below(mid)) lo = mid; else hi = mid;
  }
  return 0.5 * (lo + hi);
}

double quantile_predict(const Eigen::Ref<const Eigen::VectorXd>& x,
                        const ParamState& state, const ModelSpec& spec,
                        double alpha) {
  const Eta eta(state.eta);
  const double median = median_predict(x, beta_from_state(state));
  if (alpha == 0.5) return median;
  return gpow_inv(gpow(median, eta) + error_quantile(state, spec, alpha), eta);
}

}  // namespace tbs
