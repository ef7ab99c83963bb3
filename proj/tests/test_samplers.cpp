#include <doctest.h>

#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/exponential.hpp>
#include <boost/math/distributions/gamma.hpp>

#include "oracles.hpp"
#include "tbs/samplers.hpp"

namespace bm = boost::math;
using namespace tbs;
using namespace tbs::mcmc;

namespace {

double g_ref(double y, double e) {
  return ((y >= 0 ? 1.0 : -1.0) * std::pow(std::abs(y), e) - 1.0) / e;
}
double g_inv_ref(double t, double e) {
  const double s = e * t + 1.0;
  return (s >= 0 ? 1.0 : -1.0) * std::pow(std::abs(s), 1.0 / e);
}

Dataset noise_data(Eigen::Index n, Eigen::Index p, std::uint64_t seed) {
  Rng rng = make_stream(seed, 0);
  Dataset d;
  d.X.resize(n, p);
  d.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) d.X(i, j) = stats::draw_normal(rng, 0, 1);
    d.y[i] = stats::draw_normal(rng, 1.0, 2.0);
    if (d.y[i] == 0.0) d.y[i] = 0.5;
  }
  return d;
}

const Variant kVariants[] = {Variant::TbsSg, Variant::TbsoSg, Variant::TbstSg,
                             Variant::TbssSg, Variant::TbscnSg};

// State drawn from the prior of `spec` under `h`.
ParamState prior_draw(Eigen::Index n, Eigen::Index p, const ModelSpec& spec,
                      const PriorHyper& h, Rng& rng) {
  ParamState s = ParamState::zeros(n, p);
  s.eta = 2.0 * stats::draw_beta(rng, h.c1, h.d1);
  s.sigma2 = stats::draw_inv_gamma(rng, h.a, h.b);
  s.pi0 = stats::draw_beta(rng, h.pi0_a, h.pi0_b);
  s.sigma_beta2 = stats::draw_inv_gamma(rng, h.sb_a, h.sb_b);
  for (Eigen::Index j = 0; j < p; ++j) {
    if (stats::draw_bernoulli(rng, 1.0 - s.pi0)) {
      s.z[static_cast<std::size_t>(j)] = 1;
      s.theta[j] = stats::draw_normal(rng, 0, std::sqrt(s.sigma_beta2));
    }
  }
  if (spec.has_shifts()) {
    s.pi_gamma = stats::draw_beta(rng, h.pi_gamma_a, h.pi_gamma_b);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (stats::draw_bernoulli(rng, 1.0 - s.pi_gamma)) {
        s.zg[static_cast<std::size_t>(i)] = 1;
        s.gamma[i] = stats::draw_normal(rng, 0, std::sqrt(h.sg2));
      }
    }
  }
  switch (spec.variant) {
    case Variant::TbstSg:
      s.nu = 2.0 - std::log(stats::draw_uniform(rng)) / h.nu_rate;
      for (Eigen::Index i = 0; i < n; ++i) s.u[i] = stats::draw_gamma(rng, s.nu / 2, s.nu / 2);
      break;
    case Variant::TbssSg:
      s.nu = stats::draw_gamma(rng, h.slash_a, h.slash_b);
      for (Eigen::Index i = 0; i < n; ++i) {
        s.u[i] = std::pow(stats::draw_uniform(rng), 1.0 / s.nu);
      }
      break;
    case Variant::TbscnSg:
      s.nu = stats::draw_beta(rng, h.cn_nu_a, h.cn_nu_b);
      s.rho = stats::draw_beta(rng, h.cn_rho_a, h.cn_rho_b);
      for (Eigen::Index i = 0; i < n; ++i) {
        const bool c = stats::draw_bernoulli(rng, s.nu);
        s.contaminated[static_cast<std::size_t>(i)] = c;
        s.u[i] = c ? s.rho : 1.0;
      }
      break;
    default:
      break;
  }
  return s;
}

// Response given the state: g(y) = g(x'beta) + gamma + e / sqrt(u).
void simulate_y(const ParamState& s, const ModelSpec& spec, Dataset& d, Rng& rng) {
  const Eigen::VectorXd mu = d.X * beta_from_state(s);
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    double y = 0.0;
    while (y == 0.0) {
      const double t = g_ref(mu[i], s.eta) + (spec.has_shifts() ? s.gamma[i] : 0.0) +
                       stats::draw_normal(rng, 0, std::sqrt(s.sigma2 / s.u[i]));
      y = g_inv_ref(t, s.eta);
    }
    d.y[i] = y;
  }
}

PriorHyper tame_hyper() {
  PriorHyper h;
  h.a = 4.0; h.b = 3.0;
  h.c1 = 10.0; h.d1 = 10.0;
  h.pi0_a = 2.0; h.pi0_b = 2.0;
  h.sb_a = 6.0; h.sb_b = 5.0;
  h.pi_gamma_a = 3.0; h.pi_gamma_b = 2.0;
  h.sg2 = 1.0;
  h.nu_rate = 0.5;
  h.slash_a = 6.0; h.slash_b = 3.0;
  h.cn_nu_a = 2.0; h.cn_nu_b = 5.0;
  h.cn_rho_a = 4.0; h.cn_rho_b = 4.0;
  return h;
}

struct Probe {
  std::string name;
  std::function<double(const ParamState&)> value;
  std::function<bool(const ParamState&)> keep = [](const ParamState&) { return true; };
};

std::vector<Probe> probes(const ModelSpec& spec) {
  std::vector<Probe> out{
      {"eta", [](const ParamState& s) { return s.eta; }},
      {"sigma2", [](const ParamState& s) { return s.sigma2; }},
      {"pi0", [](const ParamState& s) { return s.pi0; }},
      {"sigma_beta2", [](const ParamState& s) { return s.sigma_beta2; }},
      {"theta1|z1", [](const ParamState& s) { return s.theta[0]; },
       [](const ParamState& s) { return s.z[0] != 0; }},
      {"theta2|z2", [](const ParamState& s) { return s.theta[1]; },
       [](const ParamState& s) { return s.z[1] != 0; }}};
  switch (spec.variant) {
    case Variant::TbsoSg:
      out.push_back({"pi_gamma", [](const ParamState& s) { return s.pi_gamma; }});
      out.push_back({"gamma1|zg1", [](const ParamState& s) { return s.gamma[0]; },
                     [](const ParamState& s) { return s.zg[0] != 0; }});
      break;
    case Variant::TbstSg:
    case Variant::TbssSg:
      out.push_back({"nu", [](const ParamState& s) { return s.nu; }});
      out.push_back({"u1", [](const ParamState& s) { return s.u[0]; }});
      break;
    case Variant::TbscnSg:
      out.push_back({"nu", [](const ParamState& s) { return s.nu; }});
      out.push_back({"rho", [](const ParamState& s) { return s.rho; }});
      break;
    default:
      break;
  }
  return out;
}

// Discrete summaries compared by a chi-square homogeneity test.
std::vector<std::pair<std::string, std::function<int(const ParamState&)>>> counters(
    const ModelSpec& spec) {
  std::vector<std::pair<std::string, std::function<int(const ParamState&)>>> out{
      {"active", [](const ParamState& s) { return s.active_count(); }}};
  if (spec.has_shifts()) {
    out.push_back({"shifts", [](const ParamState& s) { return s.shift_count(); }});
  }
  if (spec.variant == Variant::TbscnSg) {
    out.push_back({"contaminated", [](const ParamState& s) {
                     int c = 0;
                     for (auto v : s.contaminated) c += v;
                     return c;
                   }});
  }
  return out;
}

}  // namespace

TEST_CASE("sigma2 Gibbs draw") {
  Dataset d = noise_data(2, 1, 3);
  ParamState s = ParamState::zeros(2, 1);
  s.eta = 1.0;
  // residual g1(y) - g1(0) = y
  d.y << 1.0, -1.0;
  PriorHyper h;  // a = b = 2
  Rng rng = make_stream(4, 0);
  std::vector<double> draws(20000);
  for (auto& v : draws) v = update_sigma2(s, d, {Variant::TbsSg}, h, rng).sigma2;
  const bm::gamma_distribution<> inv(3.0, 1.0 / 3.0);
  CHECK(oracle::ks_one_sample(draws, [&](double v) {
          return bm::cdf(bm::complement(inv, 1.0 / v));
        }).p > 0.01);

  // IG mean (b + sum r^2 / 2) / (a + n / 2 - 1)
  Dataset d8 = noise_data(8, 1, 5);
  double ss = 0.0;
  for (Eigen::Index i = 0; i < 8; ++i) ss += d8.y[i] * d8.y[i];
  ParamState s8 = ParamState::zeros(8, 1);
  s8.eta = 1.0;
  double mean = 0.0;
  const int m = 100000;
  for (int k = 0; k < m; ++k) mean += update_sigma2(s8, d8, {Variant::TbsSg}, h, rng).sigma2 / m;
  CHECK(mean == doctest::Approx((2.0 + ss / 2) / (2.0 + 4.0 - 1.0)).epsilon(0.01));
}

TEST_CASE("cached ratios equal full-recompute ratios; reverse moves cancel") {
  Rng rng = make_stream(77, 0);
  const PriorHyper h = tame_hyper();
  for (Variant v : kVariants) {
    const ModelSpec spec{v};
    for (int rep = 0; rep < 200; ++rep) {
      const Dataset d = noise_data(7, 3, 100 + rep);
      ParamState s = prior_draw(7, 3, spec, h, rng);
      const Sampler sm(d, spec, h, s);
      const Eigen::Index j = rep % 3;
      // a move of each kind available from s
      std::vector<std::pair<bool, double>> moves;
      if (s.z[static_cast<std::size_t>(j)]) {
        moves.push_back({false, 0.0});
        moves.push_back({true, s.theta[j] + stats::draw_normal(rng, 0, 0.7)});
      } else {
        moves.push_back({true, stats::draw_normal(rng, 0, 1.0)});
      }
      for (auto [z_new, th] : moves) {
        ParamState t = s;
        t.z[static_cast<std::size_t>(j)] = z_new;
        t.theta[j] = z_new ? th : 0.0;
        const double full = mh_log_ratio_coefficient(s, t, j, d, spec, h, 0.7);
        const double back = mh_log_ratio_coefficient(t, s, j, d, spec, h, 0.7);
        CHECK(full + back == doctest::Approx(0.0).epsilon(1e-10).scale(1.0));
        CHECK(std::abs(sm.coefficient_log_ratio(j, z_new, t.theta[j]) - full) <=
              1e-10 * std::max(1.0, std::abs(full)));
      }
      // proposal equal to the current value
      if (s.z[static_cast<std::size_t>(j)]) {
        CHECK(sm.coefficient_log_ratio(j, true, s.theta[j]) == doctest::Approx(0.0));
      }
      // eta
      ParamState te = s;
      te.eta = 2.0 * stats::inv_logit(stats::logit(s.eta / 2) + stats::draw_normal(rng, 0, 0.3));
      const double fe = mh_log_ratio_eta(s, te, d, spec, h);
      CHECK(fe + mh_log_ratio_eta(te, s, d, spec, h) == doctest::Approx(0.0).epsilon(1e-10).scale(1.0));
      CHECK(std::abs(sm.eta_log_ratio(te.eta) - fe) <= 1e-10 * std::max(1.0, std::abs(fe)));
      CHECK(sm.eta_log_ratio(s.eta) == doctest::Approx(0.0).scale(1.0));
      // mixing parameters
      if (v == Variant::TbstSg) {
        ParamState tn = s;
        tn.nu = 2.0 + (s.nu - 2.0) * 1.3;
        CHECK(mh_log_ratio_nu(s, tn, d, spec, h) + mh_log_ratio_nu(tn, s, d, spec, h) ==
              doctest::Approx(0.0).epsilon(1e-10).scale(1.0));
      }
      if (v == Variant::TbscnSg) {
        ParamState tr = s;
        tr.rho = stats::inv_logit(stats::logit(s.rho) - 0.4);
        for (std::size_t i = 0; i < tr.contaminated.size(); ++i) {
          if (tr.contaminated[i]) tr.u[static_cast<Eigen::Index>(i)] = tr.rho;
        }
        CHECK(mh_log_ratio_rho(s, tr, d, spec, h) + mh_log_ratio_rho(tr, s, d, spec, h) ==
              doctest::Approx(0.0).epsilon(1e-10).scale(1.0));
      }
    }
  }
}

TEST_CASE("flat likelihood: inclusion frequency tends to 1 - pi0") {
  const Dataset d = noise_data(10, 1, 8);
  ParamState s = ParamState::zeros(10, 1);
  s.eta = 1.0;
  s.sigma2 = 1e12;
  s.pi0 = 0.3;
  McmcConfig c;
  c.n_iter = 60000;
  c.burn_in = 1000;
  c.thin = 1;
  c.init = s;
  c.fixed.eta = c.fixed.sigma2 = c.fixed.hyper = true;
  const auto chain = run_chain(d, {Variant::TbsSg}, PriorHyper{}, c);
  double incl = 0.0;
  for (const auto& st : chain.draws) incl += st.z[0];
  incl /= static_cast<double>(chain.draws.size());
  CHECK(incl == doctest::Approx(0.7).epsilon(0.02));
}

TEST_CASE("single covariate at eta = 1: inclusion probability matches the Gaussian marginal") {
  // y = x beta + e, beta = 0 or beta ~ N(1, sb2) since theta = beta - 1.
  Rng rng = make_stream(12, 0);
  Dataset d;
  const int n = 12;
  d.X.resize(n, 1);
  d.y.resize(n);
  for (int i = 0; i < n; ++i) {
    d.X(i, 0) = stats::draw_normal(rng, 0, 1);
    d.y[i] = 0.7 * d.X(i, 0) + stats::draw_normal(rng, 0, 1);
  }
  const double s2 = 1.0, sb2 = 1.0, pi0 = 0.5;
  const Eigen::VectorXd x = d.X.col(0);
  // log N(y; m, S) for both hypotheses
  auto log_mvn = [&](const Eigen::VectorXd& m, const Eigen::MatrixXd& S) {
    Eigen::LLT<Eigen::MatrixXd> llt(S);
    const Eigen::VectorXd r = d.y - m;
    const double quad = r.dot(llt.solve(r));
    double logdet = 0.0;
    for (int i = 0; i < n; ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
    return -0.5 * (n * stats::kLogTwoPi + logdet + quad);
  };
  const double l0 = log_mvn(Eigen::VectorXd::Zero(n), s2 * Eigen::MatrixXd::Identity(n, n));
  const double l1 = log_mvn(x, s2 * Eigen::MatrixXd::Identity(n, n) + sb2 * x * x.transpose());
  const double pip = 1.0 / (1.0 + std::exp(l0 - l1) * pi0 / (1.0 - pi0));

  ParamState s = ParamState::zeros(n, 1);
  s.eta = 1.0;
  s.sigma2 = s2;
  s.sigma_beta2 = sb2;
  s.pi0 = pi0;
  McmcConfig c;
  c.n_iter = 101000;
  c.burn_in = 1000;
  c.thin = 1;
  c.init = s;
  c.fixed.eta = c.fixed.sigma2 = c.fixed.hyper = true;
  const auto chain = run_chain(d, {Variant::TbsSg}, PriorHyper{}, c);
  double incl = 0.0;
  for (const auto& st : chain.draws) incl += st.z[0];
  incl /= static_cast<double>(chain.draws.size());
  INFO("closed form ", pip, " chain ", incl);
  CHECK(pip > 0.2);
  CHECK(pip < 0.8);
  CHECK(std::abs(incl - pip) <= 0.02);
}

TEST_CASE("eta = 1 with all coefficients active reduces to the Gaussian linear model") {
  Rng rng = make_stream(13, 0);
  const int n = 40, p = 3;
  Dataset d;
  d.X.resize(n, p);
  d.y.resize(n);
  Eigen::VectorXd b0(p);
  b0 << 2.0, -1.5, 3.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) d.X(i, j) = stats::draw_normal(rng, 0, 1);
    d.y[i] = d.X.row(i).dot(b0) + stats::draw_normal(rng, 0, 0.8);
  }
  const double s2 = 0.64, sb2 = 2.0;
  // prior beta ~ N(1, sb2 I)
  const Eigen::MatrixXd prec = d.X.transpose() * d.X / s2 +
                               Eigen::MatrixXd::Identity(p, p) / sb2;
  const Eigen::VectorXd rhs = d.X.transpose() * d.y / s2 + Eigen::VectorXd::Ones(p) / sb2;
  const Eigen::VectorXd post_mean = prec.ldlt().solve(rhs);
  const Eigen::MatrixXd post_cov = prec.inverse();

  ParamState s = ParamState::zeros(n, p);
  s.eta = 1.0;
  s.sigma2 = s2;
  s.sigma_beta2 = sb2;
  s.z.assign(p, 1);
  for (int j = 0; j < p; ++j) s.theta[j] = b0[j] - 1.0;
  McmcConfig c;
  c.n_iter = 60000;
  c.burn_in = 5000;
  c.thin = 1;
  c.init = s;
  c.fixed.eta = c.fixed.sigma2 = c.fixed.hyper = c.fixed.support = true;
  const auto chain = run_chain(d, {Variant::TbsSg}, PriorHyper{}, c);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(p);
  for (const auto& st : chain.draws) mean += beta_from_state(st);
  mean /= static_cast<double>(chain.draws.size());
  Eigen::VectorXd var = Eigen::VectorXd::Zero(p);
  for (const auto& st : chain.draws) {
    var += (beta_from_state(st) - mean).array().square().matrix();
  }
  var /= static_cast<double>(chain.draws.size());
  for (int j = 0; j < p; ++j) {
    CHECK(mean[j] == doctest::Approx(post_mean[j]).epsilon(0.01));
    CHECK(var[j] == doctest::Approx(post_cov(j, j)).epsilon(0.1));
  }
}

TEST_CASE("shift block") {
  PriorHyper h;
  h.sg2 = 100.0;
  Dataset d = noise_data(3, 1, 1);
  ParamState s = ParamState::zeros(3, 1);
  s.eta = 1.0;
  s.sigma2 = 1.0;
  s.pi_gamma = 0.9;
  // beta = 0 so d_i = g1(y) - g1(0) = y
  d.y << 8.0, 1e-9, 2.0;
  Rng rng = make_stream(2, 2);
  int in0 = 0, in1 = 0;
  const int m = 20000;
  for (int k = 0; k < m; ++k) {
    const ParamState t = update_gamma(s, 0, d, h, rng);
    const ParamState u = update_gamma(s, 1, d, h, rng);
    in0 += t.zg[0];
    in1 += u.zg[1];
  }
  CHECK(in0 / double(m) > 0.99);
  // d = 0: odds of inclusion (1 - pi)/pi / sqrt(1 + sg2 / s2)
  const double odds = (0.1 / 0.9) / std::sqrt(101.0);
  CHECK(in1 / double(m) == doctest::Approx(odds / (1 + odds)).epsilon(0.15));
  h.sg2 = 1e-12;
  for (int k = 0; k < 100; ++k) {
    CHECK(std::abs(update_gamma(s, 0, d, h, rng).gamma[0]) < 1e-5);
  }
}

TEST_CASE("latent scale blocks") {
  Rng rng = make_stream(31, 0);
  Dataset d = noise_data(2, 1, 2);
  ParamState s = ParamState::zeros(2, 1);
  s.eta = 1.0;
  s.sigma2 = 1.0;
  // beta = 0 and eta = 1 give r = y
  d.y << 1e-300, 3.0;
  PriorHyper h;
  const int m = 20000;
  // t, r = 0: Gamma((nu + 1) / 2, nu / 2), mean (nu + 1) / nu
  s.nu = 4.0;
  double mean = 0.0;
  for (int k = 0; k < m; ++k) mean += update_u(s, 0, d, {Variant::TbstSg}, h, rng).u[0] / m;
  CHECK(mean == doctest::Approx(5.0 / 4.0).epsilon(0.02));
  // slash, r = 0: Beta(nu + 1/2, 1)
  s.nu = 1.5;
  std::vector<double> us(m);
  for (auto& v : us) v = update_u(s, 0, d, {Variant::TbssSg}, h, rng).u[0];
  CHECK(oracle::ks_one_sample(us, [](double v) { return std::pow(v, 2.0); }).p > 0.01);
  // CN with rho = 1 never changes the scale
  s.nu = 0.3;
  s.rho = 1.0 - 1e-15;
  for (int k = 0; k < 200; ++k) {
    CHECK(update_u(s, 1, d, {Variant::TbscnSg}, h, rng).u[1] == doctest::Approx(1.0));
  }
}

TEST_CASE("mixing parameter blocks") {
  Rng rng = make_stream(32, 0);
  PriorHyper h;
  const int n = 5, m = 100000;
  Dataset d = noise_data(n, 1, 9);
  // slash with all u = 1: Gamma(a + n, b)
  ParamState s = ParamState::zeros(n, 1);
  s.eta = 1.0;
  s.nu = 1.0;
  std::vector<double> nus(m);
  for (auto& v : nus) v = update_mixing_params(s, d, {Variant::TbssSg}, h, rng).nu;
  const bm::gamma_distribution<> gd(h.slash_a + n, 1.0 / h.slash_b);
  CHECK(oracle::ks_one_sample(nus, [&](double v) { return bm::cdf(gd, v); }).p > 0.01);
  // CN, 2 of 5 contaminated: nu ~ Beta(a + 2, b + 3)
  s.nu = 0.2;
  s.rho = 0.4;
  s.contaminated = {1, 0, 1, 0, 0};
  s.u << 0.4, 1, 0.4, 1, 1;
  double mean = 0.0;
  for (int k = 0; k < m; ++k) mean += update_mixing_params(s, d, {Variant::TbscnSg}, h, rng).nu / m;
  CHECK(mean == doctest::Approx((h.cn_nu_a + 2) / (h.cn_nu_a + h.cn_nu_b + 5)).epsilon(0.02));
  // t: alternating u | nu from the mixing law and the nu update keeps the prior
  PriorHyper ht;
  ht.nu_rate = 0.5;
  ParamState t = ParamState::zeros(n, 1);
  t.eta = 1.0;
  t.nu = 4.0;
  std::vector<double> kept;
  for (int k = 0; k < 200000; ++k) {
    for (Eigen::Index i = 0; i < n; ++i) t.u[i] = stats::draw_gamma(rng, t.nu / 2, t.nu / 2);
    t = update_mixing_params(t, d, {Variant::TbstSg}, ht, rng, 1.0);
    if (k % 20 == 0) kept.push_back(t.nu - 2.0);
  }
  const bm::exponential_distribution<> ed(0.5);
  CHECK(oracle::ks_one_sample(kept, [&](double v) { return bm::cdf(ed, v); }).p > 0.01);
}

TEST_CASE("hyperparameter block") {
  Rng rng = make_stream(33, 0);
  PriorHyper h;  // Beta(1, 1) for pi0
  ParamState s = ParamState::zeros(3, 8);
  s.z = {1, 1, 0, 0, 1, 0, 0, 0};
  s.theta << 0.5, -1, 0, 0, 2, 0, 0, 0;
  const int m = 40000;
  double mean = 0.0;
  std::vector<double> sb;
  for (int k = 0; k < m; ++k) {
    const ParamState t = update_hyper(s, {Variant::TbsSg}, h, rng);
    mean += t.pi0 / m;
  }
  CHECK(mean == doctest::Approx(6.0 / 10.0).epsilon(0.01));
  ParamState e = ParamState::zeros(3, 8);
  for (int k = 0; k < m; ++k) sb.push_back(update_hyper(e, {Variant::TbsSg}, h, rng).sigma_beta2);
  const bm::gamma_distribution<> prec(h.sb_a, 1.0 / h.sb_b);
  CHECK(oracle::ks_one_sample(sb, [&](double v) {
          return bm::cdf(bm::complement(prec, 1.0 / v));
        }).p > 0.01);
}

TEST_CASE("run_chain bookkeeping and determinism") {
  const Dataset d = noise_data(15, 3, 40);
  McmcConfig c;
  c.n_iter = 600;
  c.burn_in = 300;
  c.thin = 7;
  c.seed = 99;
  for (Variant v : kVariants) {
    const auto a = run_chain(d, {v}, PriorHyper{}, c);
    const auto b = run_chain(d, {v}, PriorHyper{}, c);
    CHECK(a.draws.size() == static_cast<std::size_t>((600 - 300) / 7));
    CHECK(a.same_draws(b));
  }
  c.n_iter = c.burn_in + c.thin;
  CHECK(run_chain(d, {Variant::TbsSg}, PriorHyper{}, c).draws.size() == 1);
  c.burn_in = c.n_iter;
  CHECK_THROWS_AS(c.validate(), DomainError);
}

TEST_CASE("support selection rule") {
  ChainOutput ch;
  for (int k = 0; k < 4; ++k) {
    ParamState s = ParamState::zeros(2, 3);
    s.z = {1, static_cast<std::uint8_t>(k % 2), 0};
    s.theta << 0.5, k % 2 ? 1.0 : 0.0, 0.0;
    ch.draws.push_back(s);
  }
  const auto sum = select_support(ch, 0.5);
  CHECK(sum.coefficients[0].inclusion_prob == 1.0);
  CHECK(sum.coefficients[1].inclusion_prob == 0.5);
  REQUIRE(sum.support.size() == 1);
  CHECK(sum.support[0] == 0);
  CHECK(std::isnan(sum.coefficients[2].mean));
  CHECK_THROWS(select_support(ChainOutput{}, 0.5));
}

TEST_CASE("exact posterior draws stay exact after one sweep") {
  // One datum, one coefficient, sigma^2 and hyperparameters fixed: draw
  // (eta, z, theta) from the posterior by rejection from the prior, apply one
  // sweep to each draw, and compare the two samples.
  Dataset d;
  d.X = Eigen::MatrixXd::Constant(1, 1, 1.0);
  d.y = Eigen::VectorXd::Constant(1, 2.0);
  PriorHyper h;
  h.c1 = 3.0;
  h.d1 = 3.0;
  const double s2 = 0.5, sb2 = 1.0, pi0 = 0.5;
  Rng rng = make_stream(55, 0);
  // log-likelihood bound: normal density max plus (eta - 1) log 2 <= log 2
  const double bound = -0.5 * std::log(2 * M_PI * s2) + std::log(2.0);
  std::vector<ParamState> exact;
  while (exact.size() < 20000) {
    ParamState s = ParamState::zeros(1, 1);
    s.eta = 2.0 * stats::draw_beta(rng, h.c1, h.d1);
    s.sigma2 = s2;
    s.sigma_beta2 = sb2;
    s.pi0 = pi0;
    if (stats::draw_bernoulli(rng, 1 - pi0)) {
      s.z = {1};
      s.theta[0] = stats::draw_normal(rng, 0, 1);
    }
    const double ll = log_likelihood(s, d, {Variant::TbsSg});
    if (std::log(stats::draw_uniform(rng)) < ll - bound) exact.push_back(s);
  }
  FixedBlocks fixed;
  fixed.sigma2 = fixed.hyper = true;
  std::vector<double> e0, e1, t0, t1;
  double z0 = 0, z1 = 0;
  for (const auto& s : exact) {
    Sampler sm(d, {Variant::TbsSg}, h, s);
    sm.sweep(rng, fixed);
    const auto& t = sm.state();
    e0.push_back(s.eta);
    e1.push_back(t.eta);
    z0 += s.z[0];
    z1 += t.z[0];
    if (s.z[0]) t0.push_back(s.theta[0]);
    if (t.z[0]) t1.push_back(t.theta[0]);
  }
  CHECK(oracle::ks_two_sample(e0, e1).p > 0.01);
  CHECK(oracle::ks_two_sample(t0, t1).p > 0.01);
  CHECK(oracle::chi2_homogeneity_p({z0, exact.size() - z0}, {z1, exact.size() - z1}) > 0.01);
}

TEST_CASE("getting it right: prior plus data simulation vs successive conditionals") {
  const PriorHyper h = tame_hyper();
  Eigen::MatrixXd X(4, 2);
  X << 0.8, -0.4, -1.1, 0.6, 0.3, 1.2, -0.5, -0.9;
  const int kept = 10000, lag = 20;
  for (Variant v : kVariants) {
    const ModelSpec spec{v};
    Rng rng = make_stream(2024, static_cast<std::uint64_t>(v));
    // marginal-conditional
    std::vector<ParamState> mc;
    for (int k = 0; k < kept; ++k) mc.push_back(prior_draw(4, 2, spec, h, rng));
    // successive-conditional
    Dataset d;
    d.X = X;
    d.y.resize(4);
    ParamState s = prior_draw(4, 2, spec, h, rng);
    simulate_y(s, spec, d, rng);
    std::vector<ParamState> sc;
    for (int it = 0; it < kept * lag; ++it) {
      Sampler sm(d, spec, h, s);
      sm.set_scales(0.3, 0.8, 0.8, 0.8);
      sm.sweep(rng);
      s = sm.state();
      simulate_y(s, spec, d, rng);
      if ((it + 1) % lag == 0) sc.push_back(s);
    }
    for (const auto& pr : probes(spec)) {
      std::vector<double> a, b;
      for (const auto& st : mc) if (pr.keep(st)) a.push_back(pr.value(st));
      for (const auto& st : sc) if (pr.keep(st)) b.push_back(pr.value(st));
      const auto ks = oracle::ks_two_sample(a, b);
      INFO(variant_name(v), " ", pr.name, " D=", ks.d, " p=", ks.p);
      CHECK(ks.p > 0.01);
    }
    for (const auto& [name, f] : counters(spec)) {
      std::vector<double> ca(5, 0.0), cb(5, 0.0);
      for (const auto& st : mc) ca[static_cast<std::size_t>(f(st))] += 1;
      for (const auto& st : sc) cb[static_cast<std::size_t>(f(st))] += 1;
      const double p = oracle::chi2_homogeneity_p(ca, cb);
      INFO(variant_name(v), " ", name, " p=", p);
      CHECK(p > 0.01);
    }
  }
}
