#include "tbs/consistency.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/minima.hpp>

#include "tbs/errors.hpp"
#include "tbs/parallel.hpp"
#include "tbs/transform.hpp"

namespace tbs::consistency {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

inline double g(double y, double e) {
  return (std::copysign(std::pow(std::abs(y), e), y) - 1.0) / e;
}

inline double g_inv(double t, double e) {
  const double s = e * t + 1.0;
  return std::copysign(std::pow(std::abs(s), 1.0 / e), s);
}

// Sufficient statistics of z = g(y) over the rows where the alternating
// column is +1 (odd rows, 1-based) and -1 (even rows).
struct AltStats {
  double n = 0, n_o = 0, n_e = 0;
  double s_o1 = 0, s_o2 = 0, s_e1 = 0, s_e2 = 0;
  double max_abs_z = 0, sum_abs_z = 0, sum_z2 = 0;

  // Q = sum_i (z_i - fit_i)^2 with fit = a on odd rows and c on even rows.
  double q(double a, double c) const {
    return (s_o2 - 2.0 * a * s_o1 + n_o * a * a) +
           (s_e2 - 2.0 * c * s_e1 + n_e * c * c);
  }
};

AltStats alt_stats(const Dataset& data, double eta) {
  AltStats st;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const double z = g(data.y[i], eta);
    if (i % 2 == 0) {
      st.n_o += 1; st.s_o1 += z; st.s_o2 += z * z;
    } else {
      st.n_e += 1; st.s_e1 += z; st.s_e2 += z * z;
    }
    st.max_abs_z = std::max(st.max_abs_z, std::abs(z));
    st.sum_abs_z += std::abs(z);
    st.sum_z2 += z * z;
  }
  st.n = static_cast<double>(data.n());
  return st;
}

void check_data(const Dataset& data, double eta) {
  if (!Eta::valid(eta)) throw DomainError("consistency: eta out of range");
  if (!is_alt_design(data.X)) {
    throw DomainError("consistency: design is not the alternating design");
  }
  if (data.y.size() != data.n()) throw DomainError("consistency: size mismatch");
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    if (data.y[i] == 0.0 || !std::isfinite(data.y[i])) {
      throw IndexedDomainError("consistency: response must be finite and non-zero", i);
    }
  }
}

struct Quad {
  double log_value = -kInf;
  double abs_error = 0.0;
};

// log of the integral of exp(h) over the real line. The maximiser is located
// on a grid and refined by Brent; the line is then cut at geometric offsets
// from the mode and at the supplied kinks, and each panel is integrated by
// adaptive Gauss-Kronrod on the shifted integrand exp(h - h_max).
Quad log_integrate(const std::function<double(double)>& h,
                   std::vector<double> kinks, double half_range, int grid,
                   double tol, unsigned depth) {
  double best_t = 0.0, best_h = -kInf;
  std::vector<double> ts(static_cast<std::size_t>(grid) + 1), hs(ts.size());
  for (int k = 0; k <= grid; ++k) {
    const double t = -half_range + 2.0 * half_range * k / grid;
    ts[static_cast<std::size_t>(k)] = t;
    hs[static_cast<std::size_t>(k)] = h(t);
  }
  for (double kt : kinks) {
    const double hv = h(kt);
    if (hv > best_h) { best_h = hv; best_t = kt; }
  }
  std::size_t arg = 0;
  for (std::size_t k = 0; k < ts.size(); ++k) {
    if (hs[k] > best_h) { best_h = hs[k]; best_t = ts[k]; arg = k; }
  }
  if (best_t == ts[arg]) {
    const double lo = ts[arg == 0 ? 0 : arg - 1];
    const double hi = ts[std::min(arg + 1, ts.size() - 1)];
    const auto r = boost::math::tools::brent_find_minima(
        [&](double t) { return -h(t); }, lo, hi, 52);
    if (-r.second > best_h) { best_h = -r.second; best_t = r.first; }
  }
  if (!std::isfinite(best_h)) {
    throw NumericalError("consistency: integrand has no finite maximum");
  }
  const double mode = best_t, hmax = best_h;

  // Distance from the mode at which h has dropped by one unit.
  auto width = [&](double dir) {
    double d = 1e-8 * (1.0 + std::abs(mode));
    while (d < 1e8 && h(mode + dir * d) > hmax - 1.0) d *= 2.0;
    double lo = d * 0.5, hi = d;
    for (int it = 0; it < 40; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (h(mode + dir * mid) > hmax - 1.0) lo = mid; else hi = mid;
    }
    return hi;
  };
  const double wl = width(-1.0), wr = width(1.0);

  std::vector<double> cuts{mode};
  for (double f : {1.0, 3.0, 10.0, 30.0, 100.0, 300.0, 1000.0}) {
    cuts.push_back(mode - f * wl);
    cuts.push_back(mode + f * wr);
  }
  for (double kt : kinks) {
    if (std::isfinite(kt)) cuts.push_back(kt);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end(),
                         [](double a, double b) {
                           return std::abs(a - b) <= 1e-14 * (1.0 + std::abs(a));
                         }),
             cuts.end());

  auto f = [&](double t) {
    const double v = h(t) - hmax;
    return std::isfinite(v) ? std::exp(v) : 0.0;
  };
  using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
  double sum = 0.0, err = 0.0;
  auto panel = [&](double a, double b) {
    double e = 0.0;
    sum += GK::integrate(f, a, b, depth, tol, &e);
    err += e;
  };
  panel(-kInf, cuts.front());
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) panel(cuts[k], cuts[k + 1]);
  panel(cuts.back(), kInf);
  if (!(sum > 0.0) || !std::isfinite(sum)) {
    throw ConvergenceError("consistency: quadrature produced a non-positive value");
  }
  return {hmax + std::log(sum), err / sum};
}

enum class Kind { Empty, Ones, Alternating, AltOnes, OnesOnes };

Kind classify(const std::vector<std::size_t>& S, Eigen::Index p) {
  std::vector<std::size_t> s = S;
  std::sort(s.begin(), s.end());
  if (std::adjacent_find(s.begin(), s.end()) != s.end()) {
    throw DomainError("consistency: repeated index in support");
  }
  for (std::size_t j : s) {
    if (j >= static_cast<std::size_t>(p)) {
      throw DomainError("consistency: support index out of range");
    }
  }
  if (s.empty()) return Kind::Empty;
  if (s.size() > 2) {
    throw DomainError("consistency: quadrature supports at most two coefficients");
  }
  const bool alt = s.front() == 0;
  if (s.size() == 1) return alt ? Kind::Alternating : Kind::Ones;
  return alt ? Kind::AltOnes : Kind::OnesOnes;
}

double log_slab(double t, const LabHyper& h) {
  if (h.slab == SlabKernel::Flat) {
    return -0.5 * (stats::kLogTwoPi + std::log(h.sigma_beta2));
  }
  return stats::log_normal_pdf(t, 0.0, h.sigma_beta2);
}

LogValue quad_for(Kind kind, const AltStats& st, double eta, const LabHyper& hy,
                  double lcn) {
  const double m = 0.5 * st.n + hy.a;
  auto lik = [&](double a, double c) {
    const double q = st.q(a, c);
    return -m * std::log(0.5 * std::max(q, 0.0) + hy.b);
  };
  const double base = lcn + std::lgamma(m);
  const double zero = -1.0 / eta;
  const double half_range =
      2.0 * (st.max_abs_z + 2.0 / eta) + 10.0 * std::sqrt(hy.sigma_beta2) + 5.0;
  const double tol = 1e-11;

  switch (kind) {
    case Kind::Empty:
      return {base + lik(zero, zero), 0.0};
    case Kind::Ones: {
      auto h = [&](double t) { return lik(t, t) + log_slab(t, hy); };
      const Quad r = log_integrate(h, {zero}, half_range, 400, tol, 15);
      return {base + r.log_value, r.abs_error};
    }
    case Kind::Alternating: {
      auto h = [&](double t) {
        return lik(t, -t - 2.0 / eta) + log_slab(t, hy);
      };
      const Quad r = log_integrate(h, {zero}, half_range, 400, tol, 15);
      return {base + r.log_value, r.abs_error};
    }
    case Kind::AltOnes:
    case Kind::OnesOnes: {
      if (kind == Kind::OnesOnes && hy.slab == SlabKernel::Flat) {
        throw DomainError(
            "consistency: two ones-columns under the flat kernel is improper");
      }
      const bool alt = kind == Kind::AltOnes;
      double inner_err = 0.0;
      auto outer = [&](double t1) {
        const double b1 = g_inv(t1, eta);
        auto h = [&](double t2) {
          const double b2 = g_inv(t2, eta);
          const double a = g(b1 + b2, eta);
          const double c = alt ? g(-b1 + b2, eta) : a;
          return lik(a, c) + log_slab(t2, hy);
        };
        std::vector<double> kinks{zero, g(-b1, eta)};
        if (alt) kinks.push_back(g(b1, eta));
        const Quad r = log_integrate(h, kinks, half_range, 120, 1e-8, 6);
        inner_err = std::max(inner_err, r.abs_error);
        return r.log_value + log_slab(t1, hy);
      };
      const Quad r = log_integrate(outer, {zero}, half_range, 120, 1e-7, 6);
      return {base + r.log_value, r.abs_error + inner_err};
    }
  }
  return {};
}

}  // namespace

void AltDesign::validate() const {
  if (n < 2 || n % 2 != 0) throw DomainError("AltDesign: n must be even and >= 2");
  if (p < 1 || p > std::max<Eigen::Index>(1, max_p(n))) {
    throw DomainError("AltDesign: need 1 <= p <= n / log 4");
  }
}

Eigen::MatrixXd AltDesign::matrix() const {
  Eigen::MatrixXd X = Eigen::MatrixXd::Ones(n, p);
  for (Eigen::Index i = 0; i < n; ++i) X(i, 0) = i % 2 == 0 ? 1.0 : -1.0;
  return X;
}

Eigen::Index AltDesign::max_p(Eigen::Index n) {
  return static_cast<Eigen::Index>(std::floor(static_cast<double>(n) / std::log(4.0)));
}

bool is_alt_design(const Eigen::MatrixXd& X) {
  if (X.rows() < 2 || X.cols() < 1) return false;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    if (X(i, 0) != (i % 2 == 0 ? 1.0 : -1.0)) return false;
    for (Eigen::Index j = 1; j < X.cols(); ++j) {
      if (X(i, j) != 1.0) return false;
    }
  }
  return true;
}

void LabHyper::validate() const {
  if (!(a > 0.0 && b > 0.0 && sigma_beta2 > 0.0)) {
    throw DomainError("consistency: a, b and sigma_beta2 must be positive");
  }
}

double log_cn(const Dataset& data, double eta, const LabHyper& hyper) {
  const double n = static_cast<double>(data.n());
  double s = 0.0;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    s += (eta - 1.0) * std::log(std::abs(data.y[i]));
  }
  return -0.5 * n * stats::kLogTwoPi + s + hyper.a * std::log(hyper.b) -
         std::lgamma(hyper.a);
}

LogValue marginal_likelihood_quad(const Dataset& data,
                                  const std::vector<std::size_t>& S,
                                  double eta, const LabHyper& hyper) {
  check_data(data, eta);
  hyper.validate();
  const Kind kind = classify(S, data.p());
  return quad_for(kind, alt_stats(data, eta), eta, hyper,
                  log_cn(data, eta, hyper));
}

double closed_form_empty(const Dataset& data, double eta, const LabHyper& hyper) {
  check_data(data, eta);
  const double n = static_cast<double>(data.n());
  double s = 0.0;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const double r = g(data.y[i], eta) + 1.0 / eta;
    s += r * r;
  }
  const double m = n / 2.0 + hyper.a;
  return log_cn(data, eta, hyper) + std::lgamma(m) - m * std::log(s / 2.0 + hyper.b);
}

double closed_form_ones(const Dataset& data, double eta, const LabHyper& hyper) {
  check_data(data, eta);
  const AltStats st = alt_stats(data, eta);
  const double zbar = (st.s_o1 + st.s_e1) / st.n;
  const double d = st.sum_z2 / 2.0 - st.n * zbar * zbar / 2.0 + hyper.b;
  const double m = (st.n - 1.0) / 2.0 + hyper.a;
  return log_cn(data, eta, hyper) - 0.5 * std::log(st.n) -
         0.5 * std::log(hyper.sigma_beta2) + std::lgamma(m) - m * std::log(d);
}

double closed_form_alternating(const Dataset& data, double eta,
                               const LabHyper& hyper) {
  check_data(data, eta);
  const AltStats st = alt_stats(data, eta);
  const double two = 2.0 / eta;
  const double even_shift =
      st.s_e2 + 2.0 * two * st.s_e1 + st.n_e * two * two;  // sum (z + 2/eta)^2
  const double cross = st.s_o1 - st.s_e1 - st.n / eta;
  const double d = st.s_o2 / 2.0 + even_shift / 2.0 -
                   cross * cross / (2.0 * st.n) + hyper.b;
  const double m = (st.n - 1.0) / 2.0 + hyper.a;
  return log_cn(data, eta, hyper) - 0.5 * std::log(st.n) -
         0.5 * std::log(hyper.sigma_beta2) + std::lgamma(m) - m * std::log(d);
}

double SupportPosterior::probability(const std::vector<std::size_t>& S) const {
  const int size = static_cast<int>(S.size());
  const bool alt = std::find(S.begin(), S.end(), std::size_t{0}) != S.end();
  for (const auto& c : classes) {
    if (c.size == size && c.has_alternating == alt) return c.posterior_each;
  }
  return 0.0;
}

SupportPosterior support_posterior(const Dataset& data, double eta, double pi0,
                                   const LabHyper& hyper, int max_support_size) {
  check_data(data, eta);
  hyper.validate();
  if (!(pi0 > 0.0 && pi0 < 1.0)) throw DomainError("consistency: pi0 not in (0,1)");
  if (max_support_size < 0 || max_support_size > 2) {
    throw DomainError("consistency: enumeration limited to |S| <= 2");
  }
  const Eigen::Index p = data.p();
  const double pd = static_cast<double>(p);
  const AltStats st = alt_stats(data, eta);
  const double lcn = log_cn(data, eta, hyper);

  struct Spec { int size; bool alt; double count; std::vector<std::size_t> rep; };
  std::vector<Spec> specs{{0, false, 1.0, {}}};
  if (max_support_size >= 1) {
    specs.push_back({1, true, 1.0, {0}});
    if (p >= 2) specs.push_back({1, false, pd - 1.0, {1}});
  }
  if (max_support_size >= 2 && p >= 2) {
    specs.push_back({2, true, pd - 1.0, {0, 1}});
    if (p >= 3) specs.push_back({2, false, (pd - 1.0) * (pd - 2.0) / 2.0, {1, 2}});
  }

  SupportPosterior out;
  out.classes.resize(specs.size());
  parallel_for(specs.size(), 0, [&](std::size_t k) {
    const Spec& s = specs[k];
    SupportClass& c = out.classes[k];
    c.size = s.size;
    c.has_alternating = s.alt;
    c.count = s.count;
    c.representative = s.rep;
    c.log_m = quad_for(classify(s.rep, p), st, eta, hyper, lcn);
    c.log_prior = s.size * std::log(pi0) + (pd - s.size) * std::log1p(-pi0);
  });

  double lz = -kInf;
  std::vector<double> level(3, -kInf);
  for (const auto& c : out.classes) {
    const double lt = std::log(c.count) + c.log_m.log_value + c.log_prior;
    lz = stats::log_add_exp(lz, lt);
    level[static_cast<std::size_t>(c.size)] =
        stats::log_add_exp(level[static_cast<std::size_t>(c.size)], lt);
  }
  for (auto& c : out.classes) {
    c.posterior_each = std::exp(c.log_m.log_value + c.log_prior - lz);
    c.posterior_total = c.count * c.posterior_each;
    out.posterior_sum += c.posterior_total;
  }

  // Geometric extrapolation of level masses for sizes above the cut-off.
  const int top = max_support_size;
  if (top >= 1 && p > top && std::isfinite(level[static_cast<std::size_t>(top)])) {
    const double lr = level[static_cast<std::size_t>(top)] -
                      level[static_cast<std::size_t>(top - 1)];
    double tail = -kInf;
    for (Eigen::Index k = top + 1; k <= p; ++k) {
      tail = stats::log_add_exp(
          tail, level[static_cast<std::size_t>(top)] + lr * static_cast<double>(k - top));
    }
    out.truncated_mass_estimate = std::exp(tail - lz);
  } else if (top == 0 && p > 0) {
    out.truncated_mass_estimate = kInf;
  }
  if (out.truncated_mass_estimate > 1e-3) {
    out.warning = "supports larger than " + std::to_string(top) +
                  " may carry an estimated relative mass of " +
                  std::to_string(out.truncated_mass_estimate);
  }
  return out;
}

Dataset simulate_alt(Eigen::Index n, Eigen::Index p, double beta01, double eta,
                     double sigma0, Rng& rng) {
  AltDesign design{n, p};
  if (n < 2 || n % 2 != 0 || p < 1) {
    throw DomainError("simulate_alt: need even n >= 2 and p >= 1");
  }
  Dataset d;
  d.X = design.matrix();
  d.y.resize(n);
  const double t_odd = g(beta01, eta), t_even = g(-beta01, eta);
  for (Eigen::Index i = 0; i < n; ++i) {
    double y = 0.0;
    while (y == 0.0) {
      const double z = (i % 2 == 0 ? t_odd : t_even) +
                       sigma0 * stats::draw_normal(rng, 0.0, 1.0);
      y = g_inv(z, eta);
    }
    d.y[i] = y;
  }
  d.column_names.resize(static_cast<std::size_t>(p));
  for (Eigen::Index j = 0; j < p; ++j) {
    d.column_names[static_cast<std::size_t>(j)] = "x" + std::to_string(j + 1);
  }
  return d;
}

std::vector<CurveRow> consistency_curve(const std::vector<Eigen::Index>& n_grid,
                                        const CurveConfig& cfg) {
  if (n_grid.empty()) throw DomainError("consistency_curve: empty grid");
  for (std::size_t k = 1; k < n_grid.size(); ++k) {
    if (n_grid[k] <= n_grid[k - 1]) {
      throw DomainError("consistency_curve: n grid must be increasing");
    }
  }
  if (cfg.replications < 1) throw DomainError("consistency_curve: replications >= 1");
  std::vector<CurveRow> rows;
  for (Eigen::Index n : n_grid) {
    const Eigen::Index p = std::max<Eigen::Index>(1, AltDesign::max_p(n));
    std::vector<double> probs(static_cast<std::size_t>(cfg.replications));
    for (int r = 0; r < cfg.replications; ++r) {
      Rng rng = make_stream(cfg.seed, static_cast<std::uint64_t>(n) * 4096 +
                                          static_cast<std::uint64_t>(r));
      const Dataset d = simulate_alt(n, p, cfg.beta01, cfg.eta, cfg.sigma0, rng);
      const SupportPosterior post =
          support_posterior(d, cfg.eta, cfg.pi0, cfg.hyper, 2);
      probs[static_cast<std::size_t>(r)] = post.probability({0});
    }
    CurveRow row;
    row.n = n;
    row.p = p;
    double s = 0.0;
    for (double v : probs) s += v;
    row.mean_prob = s / static_cast<double>(probs.size());
    row.min_prob = *std::min_element(probs.begin(), probs.end());
    row.max_prob = *std::max_element(probs.begin(), probs.end());
    rows.push_back(row);
  }
  return rows;
}

bool curve_non_decreasing(const std::vector<CurveRow>& rows, double slack) {
  for (std::size_t k = 1; k < rows.size(); ++k) {
    if (rows[k].mean_prob < rows[k - 1].mean_prob - slack) return false;
  }
  return true;
}

Lemma1Instance make_lemma1_instance(const Eigen::VectorXd& z,
                                    const Eigen::VectorXd& beta, double eta,
                                    LemmaRule rule) {
  if (!Eta::valid(eta)) throw DomainError("lemma1: eta out of range");
  const auto k = static_cast<int>(beta.size());
  if (k < 2) throw DomainError("lemma1: need k >= 2");
  if (rule == LemmaRule::AsPrinted && k != 2) {
    throw DomainError("lemma1: the printed case rule is stated for k = 2 only");
  }
  Lemma1Instance inst;
  inst.z = z;
  inst.eta = eta;
  inst.k = k;
  inst.t.resize(k);
  for (int j = 0; j < k; ++j) inst.t[j] = g(beta[j], eta);
  const double kpow = std::pow(static_cast<double>(k), eta);
  inst.coefficient = rule == LemmaRule::AsPrinted ? std::pow(2.0, eta + 1.0)
                                                  : 2.0 * kpow;
  const double tconst = rule == LemmaRule::AsPrinted
                            ? std::pow(2.0, eta + 1.0) + 2.0
                            : 2.0 * kpow + 2.0;
  inst.T.resize(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    inst.T[i] = z[i] * z[i] - tconst * std::abs(z[i]) / eta;
  }
  inst.A = Eigen::MatrixXd::Zero(k, k);
  inst.b = Eigen::VectorXd::Zero(k);
  if (rule == LemmaRule::AsPrinted) {
    if (std::abs(beta[0]) >= std::abs(beta[1])) {
      inst.A(1, 1) = -1.0;
    } else {
      inst.A(0, 0) = 1.0;
    }
    if (inst.t[0] >= 0.0) {
      inst.b[0] = -1.0;
    } else {
      inst.b[1] = -1.0;
    }
  } else {
    Eigen::Index j = 0;
    beta.cwiseAbs().maxCoeff(&j);
    inst.A(k - 1 - j, k - 1 - j) = -1.0;
    inst.b[j] = inst.t[j] >= 0.0 ? -1.0 : 1.0;
  }
  return inst;
}

LemmaCheck lemma1_check(const Lemma1Instance& inst, const Eigen::VectorXd& beta) {
  if (beta.size() != inst.k) throw DomainError("lemma1: beta has the wrong length");
  const double rest = beta.tail(inst.k - 1).sum();
  LemmaCheck c;
  for (Eigen::Index i = 0; i < inst.z.size(); ++i) {
    const double s = i % 2 == 0 ? 1.0 : -1.0;
    const double r = inst.z[i] - g(s * beta[0] + rest, inst.eta);
    c.lhs += r * r;
  }
  const double n = static_cast<double>(inst.z.size());
  c.rhs = inst.T.sum() + n * inst.t.dot(inst.A * inst.t) +
          inst.coefficient * inst.z.cwiseAbs().sum() * inst.b.dot(inst.t);
  c.slack = c.lhs - c.rhs;
  const double tol = 1e-9 * (1.0 + std::abs(c.lhs) + std::abs(c.rhs));
  c.holds = c.slack >= -tol;
  return c;
}

FuzzReport lemma1_fuzz(long instances, const std::vector<int>& ks,
                       LemmaRule rule, std::uint64_t seed) {
  if (ks.empty()) throw DomainError("lemma1_fuzz: no k values");
  FuzzReport rep;
  rep.min_slack = kInf;
  Rng rng = make_stream(seed, 0x1e3a);
  for (long it = 0; it < instances; ++it) {
    const int k = ks[static_cast<std::size_t>(it) % ks.size()];
    const double eta = 0.02 + 1.96 * stats::draw_uniform(rng);
    const auto n = 1 + static_cast<Eigen::Index>(stats::draw_uniform(rng) * 20);
    Eigen::VectorXd beta(k);
    const double bscale = std::pow(10.0, -2.0 + 3.5 * stats::draw_uniform(rng));
    for (int j = 0; j < k; ++j) {
      beta[j] = stats::draw_uniform(rng) < 0.1 ? 0.0
                                               : stats::draw_normal(rng, 0.0, bscale);
    }
    Eigen::VectorXd z(n);
    const double zscale = std::pow(10.0, -2.0 + 4.0 * stats::draw_uniform(rng));
    const bool model_like = stats::draw_uniform(rng) < 0.5;
    const double rest = beta.tail(k - 1).sum();
    for (Eigen::Index i = 0; i < n; ++i) {
      const double s = i % 2 == 0 ? 1.0 : -1.0;
      const double centre = model_like ? g(s * beta[0] + rest, eta) : 0.0;
      z[i] = centre + stats::draw_normal(rng, 0.0, zscale);
    }
    if (rule == LemmaRule::AsPrinted && k != 2) continue;
    const auto inst = make_lemma1_instance(z, beta, eta, rule);
    const auto c = lemma1_check(inst, beta);
    ++rep.instances;
    rep.min_slack = std::min(rep.min_slack, c.slack);
    if (!c.holds) {
      ++rep.violations;
      if (!rep.first_violation) {
        std::vector<double> v(z.data(), z.data() + z.size());
        v.insert(v.end(), beta.data(), beta.data() + beta.size());
        v.push_back(eta);
        rep.first_violation = v;
      }
    }
  }
  return rep;
}

BoundCheck bound_check_upper(const Dataset& data, double eta,
                             const LabHyper& hyper) {
  check_data(data, eta);
  if (data.p() < 2) throw DomainError("bound_check_upper: need p >= 2");
  const AltStats st = alt_stats(data, eta);
  const double n = st.n;
  double sum_t = 0.0;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const double z = g(data.y[i], eta);
    sum_t += z * z - (std::pow(2.0, eta + 1.0) + 2.0) * std::abs(z) / eta;
  }
  BoundCheck out;
  out.denominator = sum_t / 2.0 -
                    std::pow(2.0, 2.0 * eta - 1.0) * st.sum_abs_z * st.sum_abs_z / n +
                    hyper.b;
  LabHyper gauss = hyper;
  gauss.slab = SlabKernel::Gaussian;
  out.log_m = marginal_likelihood_quad(data, {0, 1}, eta, gauss).log_value;
  if (out.denominator <= 0.0) {
    out.vacuous = true;
    out.holds = true;
    out.log_bound = kInf;
    out.log_ratio = -kInf;
    return out;
  }
  const double m = (n - 1.0) / 2.0 + hyper.a;
  out.log_bound = std::log(6.0) + log_cn(data, eta, hyper) - 0.5 * std::log(n) -
                  0.5 * std::log(hyper.sigma_beta2) + std::lgamma(m) -
                  m * std::log(out.denominator);
  out.log_ratio = out.log_m - out.log_bound;
  out.holds = out.log_ratio <= 0.0;
  return out;
}

}  // namespace tbs::consistency
