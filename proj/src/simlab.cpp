#include "tbs/simlab.hpp"

#include <cmath>
#include <limits>

#include "tbs/errors.hpp"
#include "tbs/parallel.hpp"

namespace tbs::simlab {

namespace {

Eigen::VectorXd blocks(std::initializer_list<std::pair<double, int>> parts) {
  int p = 0;
  for (const auto& [v, k] : parts) p += k;
  Eigen::VectorXd b(p);
  int at = 0;
  for (const auto& [v, k] : parts) {
    b.segment(at, k).setConstant(v);
    at += k;
  }
  return b;
}

Eigen::VectorXd p8_beta() {
  Eigen::VectorXd b(8);
  b << 3.0, 1.5, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0;
  return b;
}

Eigen::VectorXd case_beta(std::string_view c) {
  if (c == "i") return blocks({{2, 12}, {0, 8}});
  if (c == "ii") return blocks({{-10, 6}, {4, 6}, {0, 8}});
  if (c == "iii") return blocks({{-10, 10}, {4, 2}, {0, 8}});
  if (c == "iv") {
    return blocks({{-10, 2}, {-4, 2}, {-2, 2}, {2, 2}, {4, 2}, {10, 2}, {0, 8}});
  }
  if (c == "v") return blocks({{-10, 6}, {2, 6}, {0, 8}});
  if (c == "vi") {
    return blocks({{-10, 2}, {-8, 2}, {-6, 2}, {-4, 2}, {-2, 2}, {2, 2}, {0, 8}});
  }
  throw DomainError("unknown case '" + std::string(c) + "'");
}

double eta_from_suffix(std::string_view s) {
  if (s == "eta05") return 0.5;
  if (s == "eta18") return 1.8;
  throw DomainError("unknown eta suffix '" + std::string(s) + "'");
}

// Stream indices: data streams use the replication index directly; fit seeds
// are derived in a disjoint range so they never collide with data streams.
std::uint64_t fit_seed(std::uint64_t master, int rep, int method) {
  Rng r = make_stream(master, (std::uint64_t{1} << 40) +
                                  static_cast<std::uint64_t>(rep) * 64 +
                                  static_cast<std::uint64_t>(method));
  return r();
}

}  // namespace

void Scenario::validate() const {
  if (n < 2) throw DomainError("scenario: n must be at least 2");
  if (p() < 1) throw DomainError("scenario: beta0 must be non-empty");
  if (!Eta::valid(eta0)) throw DomainError("scenario: eta0 out of range");
  if (!(sigma0 >= 0.0)) throw DomainError("scenario: sigma0 must be >= 0");
  for (const auto& [i, g] : outliers) {
    if (i >= static_cast<std::size_t>(n)) {
      throw DomainError("scenario: outlier index beyond n");
    }
    if (!std::isfinite(g)) throw DomainError("scenario: non-finite outlier");
  }
  if (ni) {
    if (!ModelSpec{ni->variant}.is_ni()) {
      throw DomainError("scenario: NI truth needs an NI variant");
    }
    if (!(ni->nu > 0.0)) throw DomainError("scenario: NI nu must be positive");
    if (ni->variant == Variant::TbscnSg &&
        !(ni->nu < 1.0 && ni->rho > 0.0 && ni->rho <= 1.0)) {
      throw DomainError("scenario: CN truth needs nu < 1 and rho in (0, 1]");
    }
  }
}

Generated generate(const Scenario& sc, Rng& rng) {
  sc.validate();
  const Eta eta(sc.eta0);
  const Eigen::Index n = sc.n, p = sc.p();
  Generated g;
  g.data.X.resize(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) {
      g.data.X(i, j) = stats::draw_normal(rng, 0.0, 1.0);
    }
  }
  g.data.column_names.resize(static_cast<std::size_t>(p));
  for (Eigen::Index j = 0; j < p; ++j) {
    g.data.column_names[static_cast<std::size_t>(j)] = "x" + std::to_string(j + 1);
  }
  g.truth.beta0 = sc.beta0;
  g.truth.eta0 = sc.eta0;
  g.truth.sigma0 = sc.sigma0;
  g.truth.gamma = Eigen::VectorXd::Zero(n);
  for (const auto& [i, v] : sc.outliers) {
    g.truth.gamma[static_cast<Eigen::Index>(i)] = v;
  }
  g.truth.u = Eigen::VectorXd::Ones(n);
  g.truth.e.resize(n);
  g.data.y.resize(n);

  const Eigen::VectorXd mu = g.data.X * sc.beta0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (sc.ni) {
      switch (sc.ni->variant) {
        case Variant::TbstSg:
          g.truth.u[i] = stats::draw_gamma(rng, 0.5 * sc.ni->nu, 0.5 * sc.ni->nu);
          break;
        case Variant::TbssSg:
          g.truth.u[i] = std::pow(stats::draw_uniform(rng), 1.0 / sc.ni->nu);
          break;
        default:
          g.truth.u[i] =
              stats::draw_bernoulli(rng, sc.ni->nu) ? sc.ni->rho : 1.0;
          break;
      }
      g.truth.u[i] = std::max(g.truth.u[i], std::numeric_limits<double>::min());
    }
    const double gm = gpow(mu[i], eta) + g.truth.gamma[i];
    for (int attempt = 0;; ++attempt) {
      const double e = stats::draw_normal(rng, 0.0, 1.0) * sc.sigma0;
      const double t = gm + e / std::sqrt(g.truth.u[i]);
      const double s = sc.eta0 * t + 1.0;
      if (!std::isfinite(t) ||
          std::log(std::abs(s)) / sc.eta0 > std::log(1e300)) {
        throw DomainError("scenario '" + sc.id +
                          "': response overflows at observation " +
                          std::to_string(i + 1));
      }
      const double y = gpow_inv(t, eta);
      if (y != 0.0) {
        g.truth.e[i] = e;
        g.data.y[i] = y;
        break;
      }
      if (attempt > 100) {
        throw DomainError("scenario '" + sc.id + "': response stuck at zero");
      }
    }
  }
  return g;
}

Scenario preset(std::string_view id) {
  Scenario sc;
  sc.id = std::string(id);
  sc.n = 50;
  sc.sigma0 = 1.0;
  auto suffix_of = [&](std::string_view prefix) {
    return id.substr(prefix.size());
  };
  if (id.starts_with("p8_")) {
    sc.beta0 = p8_beta();
    sc.eta0 = eta_from_suffix(suffix_of("p8_"));
    return sc;
  }
  if (id.starts_with("outlier_")) {
    sc.beta0 = p8_beta();
    sc.eta0 = eta_from_suffix(suffix_of("outlier_"));
    sc.outliers = {{0, 8.0}, {1, 8.0}, {2, -8.0}};
    return sc;
  }
  if (id.starts_with("case_")) {
    std::string_view rest = suffix_of("case_");
    const auto us = rest.find('_');
    sc.beta0 = case_beta(rest.substr(0, us));
    sc.eta0 = us == std::string_view::npos ? 0.5
                                           : eta_from_suffix(rest.substr(us + 1));
    return sc;
  }
  if (id.starts_with("ni_")) {
    std::string_view rest = suffix_of("ni_");
    const auto us = rest.find('_');
    if (us == std::string_view::npos) {
      throw DomainError("unknown preset '" + std::string(id) + "'");
    }
    const std::string_view kind = rest.substr(0, us);
    sc.beta0 = p8_beta();
    sc.eta0 = eta_from_suffix(rest.substr(us + 1));
    if (kind == "t") {
      sc.ni = NiTruth{Variant::TbstSg, 4.0, 1.0};
    } else if (kind == "slash") {
      sc.ni = NiTruth{Variant::TbssSg, 2.0, 1.0};
    } else if (kind == "cn") {
      sc.ni = NiTruth{Variant::TbscnSg, 0.1, 0.1};
    } else {
      throw DomainError("unknown preset '" + std::string(id) + "'");
    }
    return sc;
  }
  throw DomainError("unknown preset '" + std::string(id) + "'");
}

std::vector<std::string> preset_ids() {
  std::vector<std::string> ids;
  for (const char* e : {"eta05", "eta18"}) {
    ids.push_back(std::string("p8_") + e);
  }
  for (const char* c : {"i", "ii", "iii", "iv", "v", "vi"}) {
    for (const char* e : {"eta05", "eta18"}) {
      ids.push_back(std::string("case_") + c + "_" + e);
    }
  }
  for (const char* e : {"eta05", "eta18"}) {
    ids.push_back(std::string("outlier_") + e);
  }
  for (const char* k : {"t", "slash", "cn"}) {
    for (const char* e : {"eta05", "eta18"}) {
      ids.push_back(std::string("ni_") + k + "_" + e);
    }
  }
  return ids;
}

std::string_view method_name(StudyMethod m) {
  switch (m) {
    case StudyMethod::TbsSg: return "TbsSg";
    case StudyMethod::TbsoSg: return "TbsoSg";
    case StudyMethod::TbstSg: return "TbstSg";
    case StudyMethod::TbssSg: return "TbssSg";
    case StudyMethod::TbscnSg: return "TbscnSg";
    case StudyMethod::Lasso: return "Lasso";
    case StudyMethod::QuantileLasso: return "QuantileLasso";
  }
  return "?";
}

StudyMethod parse_method(std::string_view name) {
  if (name == "Lasso" || name == "lasso") return StudyMethod::Lasso;
  if (name == "QuantileLasso" || name == "quantile" || name == "qlasso") {
    return StudyMethod::QuantileLasso;
  }
  switch (parse_variant(name)) {
    case Variant::TbsSg: return StudyMethod::TbsSg;
    case Variant::TbsoSg: return StudyMethod::TbsoSg;
    case Variant::TbstSg: return StudyMethod::TbstSg;
    case Variant::TbssSg: return StudyMethod::TbssSg;
    case Variant::TbscnSg: return StudyMethod::TbscnSg;
  }
  throw DomainError("unknown method");
}

const StudyRow& StudyReport::row(std::string_view method) const {
  for (const auto& r : rows) {
    if (r.method == method) return r;
  }
  throw DomainError("study report has no row '" + std::string(method) + "'");
}

namespace {

struct RepResult {
  bool ok = false;
  std::string error;
  std::vector<std::size_t> selected;
  double l_ratio = 0.0;
  std::vector<std::size_t> shift_selected;  // TBSO only
};

Variant variant_of(StudyMethod m) {
  switch (m) {
    case StudyMethod::TbsoSg: return Variant::TbsoSg;
    case StudyMethod::TbstSg: return Variant::TbstSg;
    case StudyMethod::TbssSg: return Variant::TbssSg;
    case StudyMethod::TbscnSg: return Variant::TbscnSg;
    default: return Variant::TbsSg;
  }
}

RepResult fit_one(const Generated& g, StudyMethod m, const StudyConfig& cfg,
                  std::uint64_t seed) {
  RepResult res;
  const Truth& t = g.truth;
  if (m == StudyMethod::Lasso || m == StudyMethod::QuantileLasso) {
    const auto method = m == StudyMethod::Lasso
                            ? baselines::Method::Lasso
                            : baselines::Method::QuantileLasso;
    const auto fit =
        baselines::fit_with_cv(g.data, method, seed, cfg.cv_folds, cfg.tau);
    res.selected = fit.selected;
    res.l_ratio = metrics::l_ratio(fit.beta, g.data, t.beta0, t.eta0, t.sigma0,
                                   fit.intercept);
  } else {
    mcmc::McmcConfig mc = cfg.mcmc;
    mc.seed = seed;
    const ModelSpec spec{variant_of(m)};
    const auto chain = mcmc::run_chain(g.data, spec, cfg.hyper, mc);
    const auto summary = mcmc::select_support(chain, cfg.threshold);
    res.selected = summary.support;
    res.l_ratio =
        metrics::l_ratio(summary.beta_hat, g.data, t.beta0, t.eta0, t.sigma0);
    if (spec.has_shifts()) res.shift_selected = summary.shift_support;
  }
  res.ok = true;
  return res;
}

}  // namespace

StudyReport run_study(const Scenario& scenario,
                      const std::vector<StudyMethod>& methods,
                      const StudyConfig& cfg) {
  scenario.validate();
  if (cfg.replications < 1) throw DomainError("study: replications must be >= 1");
  if (methods.empty()) throw DomainError("study: no methods");
  cfg.mcmc.validate();
  cfg.hyper.validate();

  const auto R = static_cast<std::size_t>(cfg.replications);
  const std::size_t M = methods.size();
  std::vector<RepResult> results(R * M);

  // One task per (replication, method); data regenerated deterministically
  // per task so tasks share nothing mutable.
  parallel_for(R * M, cfg.threads, [&](std::size_t k) {
    const std::size_t r = k / M, mi = k % M;
    Rng rng = make_stream(cfg.master_seed, r);
    try {
      Generated g = generate(scenario, rng);
      results[k] = fit_one(g, methods[mi], cfg,
                           fit_seed(cfg.master_seed, static_cast<int>(r),
                                    static_cast<int>(methods[mi])));
    } catch (const std::exception& ex) {
      results[k].ok = false;
      results[k].error = "replication " + std::to_string(r + 1) + ": " + ex.what();
    }
  });

  StudyReport report;
  report.scenario = scenario.id;
  report.replications = cfg.replications;
  for (std::size_t mi = 0; mi < M; ++mi) {
    StudyRow row;
    row.method = std::string(method_name(methods[mi]));
    StudyRow shift_row;
    shift_row.method = row.method + ":gamma";
    std::vector<std::vector<std::size_t>> gamma_sel;
    double lsum = 0.0;
    for (std::size_t r = 0; r < R; ++r) {
      const RepResult& res = results[r * M + mi];
      if (!res.ok) {
        ++row.failed;
        row.failures.push_back(res.error);
        continue;
      }
      ++row.used;
      lsum += res.l_ratio;
      row.selected.push_back(res.selected);
      gamma_sel.push_back(res.shift_selected);
    }
    if (row.used > 0) {
      row.selection = metrics::selection_metrics(scenario.beta0, row.selected);
      row.l_ratio = lsum / row.used;
    } else {
      row.l_ratio = std::numeric_limits<double>::quiet_NaN();
    }
    report.rows.push_back(row);

    if (methods[mi] == StudyMethod::TbsoSg && !scenario.outliers.empty() &&
        row.used > 0) {
      Eigen::VectorXd gamma0 = Eigen::VectorXd::Zero(scenario.n);
      for (const auto& [i, v] : scenario.outliers) {
        gamma0[static_cast<Eigen::Index>(i)] = v;
      }
      shift_row.used = row.used;
      shift_row.failed = row.failed;
      shift_row.selected = gamma_sel;
      shift_row.selection = metrics::selection_metrics(gamma0, gamma_sel);
      shift_row.l_ratio = std::numeric_limits<double>::quiet_NaN();
      report.rows.push_back(shift_row);
    }
  }
  return report;
}

}  // namespace tbs::simlab
