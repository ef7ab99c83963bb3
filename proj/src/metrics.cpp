#include "tbs/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "tbs/errors.hpp"
#include "tbs/stats.hpp"

namespace tbs::metrics {

SelectionMetrics selection_metrics(
    const Eigen::VectorXd& true_beta,
    const std::vector<std::vector<std::size_t>>& selected) {
  const auto p = static_cast<std::size_t>(true_beta.size());
  std::size_t n_true = 0;
  for (std::size_t j = 0; j < p; ++j) n_true += true_beta[static_cast<Eigen::Index>(j)] != 0.0;
  if (n_true == 0) {
    throw DomainError("selection_metrics: masking undefined for an all-zero truth");
  }
  if (selected.empty()) throw DomainError("selection_metrics: no replications");
  const std::size_t n_zero = p - n_true;

  SelectionMetrics m;
  for (const auto& sel : selected) {
    std::vector<bool> chosen(p, false);
    for (std::size_t j : sel) {
      if (j >= p) throw DomainError("selection_metrics: index out of range");
      chosen[j] = true;
    }
    std::size_t missed = 0, wrong = 0, count = 0;
    for (std::size_t j = 0; j < p; ++j) {
      const bool nonzero = true_beta[static_cast<Eigen::Index>(j)] != 0.0;
      count += chosen[j];
      if (nonzero && !chosen[j]) ++missed;
      if (!nonzero && chosen[j]) ++wrong;
    }
    const double mr = static_cast<double>(missed) / static_cast<double>(n_true);
    m.masking += mr;
    m.swamping += n_zero ? static_cast<double>(wrong) / static_cast<double>(n_zero) : 0.0;
    m.joint_detection += missed == 0 ? 1.0 : 0.0;
    m.n_selected += static_cast<double>(count);
  }
  const double r = static_cast<double>(selected.size());
  m.masking /= r;
  m.swamping /= r;
  m.joint_detection /= r;
  m.n_selected /= r;
  return m;
}

double l_value(const Eigen::VectorXd& beta, const Dataset& data, double eta0,
               double sigma0, double intercept) {
  const Eta eta(eta0);
  const Eigen::VectorXd mu =
      data.X * beta + Eigen::VectorXd::Constant(data.n(), intercept);
  double q = 0.0;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const double r = gpow(data.y[i], eta) - gpow(mu[i], eta);
    q += r * r;
  }
  const double s2 = sigma0 * sigma0;
  const double n = static_cast<double>(data.n());
  return q / (2.0 * s2) - 0.5 * n * std::log(2.0 * std::numbers::pi * s2) +
         log_jacobian(std::span<const double>(data.y.data(),
                                              static_cast<std::size_t>(data.n())),
                      eta);
}

double l_ratio(const Eigen::VectorXd& est_beta, const Dataset& data,
               const Eigen::VectorXd& beta0, double eta0, double sigma0,
               double est_intercept) {
  const double l_star = l_value(beta0, data, eta0, sigma0);
  if (l_star == 0.0) throw DomainError("l_ratio: L* is zero");
  return l_value(est_beta, data, eta0, sigma0, est_intercept) / l_star - 1.0;
}

ParamState point_state(const mcmc::PosteriorSummary& summary,
                       const Dataset& data) {
  ParamState s = ParamState::zeros(data.n(), data.p());
  s.eta = std::clamp(summary.eta_mean, Eta::kMin, Eta::kMax);
  const Eta eta(s.eta);
  for (Eigen::Index j = 0; j < data.p(); ++j) {
    if (summary.beta_hat[j] != 0.0) {
      s.z[static_cast<std::size_t>(j)] = 1;
      s.theta[j] = gpow(summary.beta_hat[j], eta);
    }
  }
  s.sigma2 = summary.sigma2_mean;
  s.sigma_beta2 = summary.sigma_beta2_mean > 0 ? summary.sigma_beta2_mean : 1.0;
  s.pi0 = std::clamp(summary.pi0_mean, 1e-12, 1.0 - 1e-12);
  if (summary.gamma_hat.size() == data.n()) {
    s.gamma = summary.gamma_hat;
    for (Eigen::Index i = 0; i < data.n(); ++i) {
      s.zg[static_cast<std::size_t>(i)] = s.gamma[i] != 0.0;
    }
  }
  s.nu = summary.nu_mean;
  s.rho = summary.rho_mean;
  return s;
}

double ppl(const mcmc::ChainOutput& chain, const Dataset& data, bool plug_in) {
  if (chain.draws.empty()) throw DomainError("ppl: empty chain");
  const bool shifts = chain.spec.has_shifts();
  auto rss = [&](const ParamState& s) {
    const Eta eta(s.eta);
    const Eigen::VectorXd mu = data.X * beta_from_state(s);
    double total = 0.0;
    for (Eigen::Index i = 0; i < data.n(); ++i) {
      const double r = gpow(data.y[i], eta) - gpow(mu[i], eta) -
                       (shifts ? s.gamma[i] : 0.0);
      total += r * r;
    }
    return total;
  };
  if (plug_in) {
    return rss(point_state(mcmc::select_support(chain), data));
  }
  double sum = 0.0;
  for (const auto& d : chain.draws) sum += rss(d);
  return sum / static_cast<double>(chain.draws.size());
}

std::vector<QQRow> qq_table(std::vector<double> residuals) {
  std::sort(residuals.begin(), residuals.end());
  const double n = static_cast<double>(residuals.size());
  std::vector<QQRow> out(residuals.size());
  for (std::size_t i = 0; i < residuals.size(); ++i) {
    out[i].observed = residuals[i];
    out[i].normal_quantile =
        stats::normal_quantile((static_cast<double>(i) + 0.5) / n);
  }
  return out;
}

std::vector<double> residuals(const mcmc::PosteriorSummary& summary,
                              const Dataset& data, const ModelSpec& spec,
                              ResidualKind kind) {
  const Eigen::VectorXd mu = data.X * summary.beta_hat;
  std::vector<double> r(static_cast<std::size_t>(data.n()));
  const Eta eta(std::clamp(summary.eta_mean, Eta::kMin, Eta::kMax));
  const bool shifts = spec.has_shifts() && summary.gamma_hat.size() == data.n();
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    r[static_cast<std::size_t>(i)] =
        kind == ResidualKind::Raw
            ? data.y[i] - mu[i]
            : gpow(data.y[i], eta) - gpow(mu[i], eta) -
                  (shifts ? summary.gamma_hat[i] : 0.0);
  }
  return r;
}

std::vector<QQRow> residual_table(const mcmc::PosteriorSummary& summary,
                                  const Dataset& data, const ModelSpec& spec,
                                  ResidualKind kind) {
  return qq_table(residuals(summary, data, spec, kind));
}

double qq_sup_deviation(const std::vector<QQRow>& table, double scale) {
  if (!(scale > 0.0)) throw DomainError("qq_sup_deviation: scale must be positive");
  double sup = 0.0;
  for (const auto& row : table) {
    sup = std::max(sup, std::abs(row.observed / scale - row.normal_quantile));
  }
  return sup;
}

std::vector<QuantileCurveRow> quantile_curve_table(
    const mcmc::PosteriorSummary& summary, const Dataset& data,
    const ModelSpec& spec, const std::vector<double>& alphas) {
  for (double a : alphas) {
    if (!(a > 0.0 && a < 1.0)) {
      throw DomainError("quantile_curve_table: alpha must lie in (0, 1)");
    }
  }
  const ParamState s = point_state(summary, data);
  const Eta eta(s.eta);
  std::vector<double> eq(alphas.size());
  for (std::size_t k = 0; k < alphas.size(); ++k) {
    eq[k] = error_quantile(s, spec, alphas[k]);
  }
  std::vector<QuantileCurveRow> out(static_cast<std::size_t>(data.n()));
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    auto& row = out[static_cast<std::size_t>(i)];
    row.index = static_cast<std::size_t>(i) + 1;
    row.linear_predictor = data.X.row(i).dot(summary.beta_hat);
    row.median = row.linear_predictor;
    const double gm = gpow(row.median, eta);
    row.quantiles.resize(alphas.size());
    for (std::size_t k = 0; k < alphas.size(); ++k) {
      row.quantiles[k] = eq[k] == 0.0 ? row.median : gpow_inv(gm + eq[k], eta);
    }
  }
  return out;
}

}  // namespace tbs::metrics
