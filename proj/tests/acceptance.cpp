// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "tbs/baselines.hpp"
#include "tbs/consistency.hpp"
#include "tbs/io.hpp"
#include "tbs/model.hpp"
#include "tbs/simlab.hpp"
#include "tbs/transform.hpp"

namespace fs = std::filesystem;
using namespace tbs;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", prec, v);
  return buf;
}

bool in(double v, double lo, double hi) { return v >= lo && v <= hi; }

simlab::StudyConfig study_config() {
  simlab::StudyConfig c;  // default chain lengths
  c.replications = 50;
  c.master_seed = 2024;
  return c;
}

int run_shell(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// 1. eta0 = 1.8
Outcome table1_eta18() {
  const auto rep = simlab::run_study(simlab::preset("p8_eta18"), {simlab::StudyMethod::TbsSg},
                                     study_config());
  const auto& m = rep.row("TbsSg").selection;
  Outcome o;
  o.pass = in(m.n_selected, 2.9, 3.4) && m.masking == 0.0 && m.joint_detection == 1.0 &&
           m.swamping <= 0.03;
  o.detail = "TbsSg nonzeros " + fmt(m.n_selected) + " M " + fmt(100 * m.masking) + "% S " +
             fmt(100 * m.swamping) + "% JD " + fmt(100 * m.joint_detection) + "%";
  return o;
}

// 2. eta0 = 0.5
Outcome table1_eta05() {
  const auto rep = simlab::run_study(
      simlab::preset("p8_eta05"),
      {simlab::StudyMethod::TbsSg, simlab::StudyMethod::Lasso, simlab::StudyMethod::QuantileLasso},
      study_config());
  const auto& t = rep.row("TbsSg").selection;
  const auto& l = rep.row("Lasso").selection;
  const auto& q = rep.row("QuantileLasso").selection;
  Outcome o;
  o.pass = in(t.n_selected, 2.8, 3.7) && in(t.swamping, 0.0, 0.08) && t.joint_detection == 1.0 &&
           in(l.n_selected, 4.0, 6.0) && q.swamping > 0.30;
  o.detail = "TbsSg nonzeros " + fmt(t.n_selected) + " S " + fmt(100 * t.swamping) + "% JD " +
             fmt(100 * t.joint_detection) + "%; Lasso nonzeros " + fmt(l.n_selected) +
             "; QuantileLasso S " + fmt(100 * q.swamping) + "%";
  return o;
}

// 3. swamping at eta0 = 1.8 never above eta0 = 0.5
Outcome table2_direction() {
  const std::vector<simlab::StudyMethod> methods{simlab::StudyMethod::TbsSg,
                                                 simlab::StudyMethod::TbscnSg,
                                                 simlab::StudyMethod::Lasso};
  Outcome o{true, ""};
  for (const char* c : {"i", "ii", "iii", "iv", "v", "vi"}) {
    const std::string base = std::string("case_") + c;
    const auto lo = simlab::run_study(simlab::preset(base + "_eta05"), methods, study_config());
    const auto hi = simlab::run_study(simlab::preset(base + "_eta18"), methods, study_config());
    for (auto m : methods) {
      const std::string name(simlab::method_name(m));
      const double s05 = lo.row(name).selection.swamping;
      const double s18 = hi.row(name).selection.swamping;
      if (s18 > s05) {
        o.pass = false;
        o.detail += base + " " + name + " S(1.8)=" + fmt(100 * s18) + "% > S(0.5)=" +
                    fmt(100 * s05) + "%; ";
      }
      std::fprintf(stderr, "  %s %s S(0.5)=%.2f%% S(1.8)=%.2f%%\n", base.c_str(), name.c_str(),
                   100 * s05, 100 * s18);
    }
  }
  if (o.pass) o.detail = "18 case/method pairs ordered";
  return o;
}

// 4. outlier recovery
Outcome outlier_study() {
  Outcome o{true, ""};
  for (const char* id : {"outlier_eta05", "outlier_eta18"}) {
    const auto rep = simlab::run_study(simlab::preset(id), {simlab::StudyMethod::TbsoSg},
                                       study_config());
    const auto& g = rep.row("TbsoSg:gamma").selection;
    const auto& b = rep.row("TbsoSg").selection;
    const bool ok = g.masking <= 0.04 && g.swamping <= 0.03 && g.joint_detection >= 0.94 &&
                    b.joint_detection >= 0.94;
    o.pass = o.pass && ok;
    o.detail += std::string(id) + ": gamma M " + fmt(100 * g.masking) + "% S " +
                fmt(100 * g.swamping) + "% JD " + fmt(100 * g.joint_detection) + "%, beta JD " +
                fmt(100 * b.joint_detection) + "%; ";
  }
  return o;
}

// 5. sampler correctness: the property tests in the sampler test binary
Outcome sampler_correctness() {
  const std::string bin = TBS_SAMPLERS_TEST_PATH;
  const std::vector<std::pair<std::string, std::string>> parts{
      {"Geweke", "getting it right*"},
      {"eta=1 conjugate", "eta = 1 with all coefficients active*"},
      {"detailed balance", "cached ratios equal*"}};
  Outcome o{true, ""};
  for (const auto& [label, filter] : parts) {
    const int rc = run_shell(bin + " -tc=\"" + filter + "\" > /dev/null 2>&1");
    o.pass = o.pass && rc == 0;
    o.detail += label + (rc == 0 ? " ok; " : " FAILED; ");
  }
  return o;
}

// 6. consistency lab
Outcome consistency_lab() {
  using namespace consistency;
  Outcome o{true, ""};
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    for (double eta : {0.5, 1.0, 1.8}) {
      Rng rng = make_stream(seed, 77);
      const Dataset d = simulate_alt(20, 3, 3.0, eta, 1.0, rng);
      const LabHyper flat{2.0, 2.0, 1.0, SlabKernel::Flat};
      worst = std::max(worst, std::abs(marginal_likelihood_quad(d, {}, eta, flat).log_value -
                                       closed_form_empty(d, eta, flat)));
      worst = std::max(worst, std::abs(marginal_likelihood_quad(d, {1}, eta, flat).log_value -
                                       closed_form_ones(d, eta, flat)));
    }
  }
  const FuzzReport fz = lemma1_fuzz(100000, {2, 3, 4, 5}, LemmaRule::General, 6);
  CurveConfig cc;
  cc.replications = 20;
  cc.seed = 6;
  const auto rows = consistency_curve({20, 60, 120, 200}, cc);
  const bool trend = curve_non_decreasing(rows, 0.05);
  const double last = rows.back().mean_prob;
  o.pass = worst <= 1e-8 && fz.violations == 0 && trend && last > 0.9;
  o.detail = "closed-form log error " + fmt(worst, 2) + "; lemma violations " +
             std::to_string(fz.violations) + "/" + std::to_string(fz.instances) + "; curve";
  for (const auto& r : rows) o.detail += " " + fmt(r.mean_prob);
  o.detail += trend ? " (non-decreasing)" : " (decreasing)";
  return o;
}

// 7. median and interquartile band
Outcome median_quantiles() {
  Outcome o{true, ""};
  Rng rng = make_stream(7, 0);
  double worst = 0.0;
  const int m = 100000;
  for (double eta : {0.5, 1.8}) {
    for (double mu : {1.5, 4.0, 9.0}) {
      const Eta e(eta);
      std::vector<double> ys(m);
      for (auto& y : ys) y = gpow_inv(gpow(mu, e) + stats::draw_normal(rng, 0, 1.0), e);
      std::nth_element(ys.begin(), ys.begin() + m / 2, ys.end());
      const double scale = std::pow(mu, 1.0 - eta);
      worst = std::max(worst, std::abs(ys[m / 2] - mu) / scale);
    }
  }
  double worst_cov = 0.0;
  for (const char* id : {"p8_eta05", "p8_eta18", "ni_t_eta05"}) {
    simlab::Scenario sc = simlab::preset(id);
    sc.n = 20000;
    const auto g = simlab::generate(sc, rng);
    ParamState s = ParamState::zeros(sc.n, sc.p());
    s.eta = sc.eta0;
    s.sigma2 = sc.sigma0 * sc.sigma0;
    const Eta e(sc.eta0);
    for (Eigen::Index j = 0; j < sc.p(); ++j) {
      if (sc.beta0[j] != 0.0) {
        s.z[static_cast<std::size_t>(j)] = 1;
        s.theta[j] = gpow(sc.beta0[j], e);
      }
    }
    ModelSpec spec{Variant::TbsSg};
    if (sc.ni) {
      spec.variant = sc.ni->variant;
      s.nu = sc.ni->nu;
    }
    int covered = 0;
    for (Eigen::Index i = 0; i < sc.n; ++i) {
      const Eigen::VectorXd x = g.data.X.row(i).transpose();
      const double lo = quantile_predict(x, s, spec, 0.25);
      const double hi = quantile_predict(x, s, spec, 0.75);
      covered += g.data.y[i] >= lo && g.data.y[i] <= hi;
    }
    const double cov = covered / static_cast<double>(sc.n);
    worst_cov = std::max(worst_cov, std::abs(cov - 0.5));
    o.detail += std::string(id) + " coverage " + fmt(100 * cov) + "%; ";
  }
  o.pass = worst <= 0.01 && worst_cov <= 0.03;
  o.detail = "max |median - x'b|/scale " + fmt(worst, 3) + "; " + o.detail;
  return o;
}

// 8. numerical kernels
Outcome kernels() {
  Outcome o;
  double worst_rt = 0.0;
  for (double eta = 0.05; eta <= 1.95 + 1e-12; eta += 0.05) {
    const Eta e(eta);
    for (double ly = -6.0; ly <= 6.0 + 1e-12; ly += 0.01) {
      for (double sg : {-1.0, 1.0}) {
        const double y = sg * std::pow(10.0, ly);
        worst_rt = std::max(worst_rt, std::abs(gpow_inv(gpow(y, e), e) - y) / std::max(1.0, std::abs(y)));
      }
    }
  }
  Rng rng = make_stream(8, 0);
  const Eigen::Index n = 60, p = 30;
  Eigen::MatrixXd X(n, p);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < p; ++j) X(i, j) = stats::draw_normal(rng, 0, 1);
  Eigen::VectorXd y = 2.0 * X.col(0) - X.col(3) + 0.5 * X.col(7);
  for (Eigen::Index i = 0; i < n; ++i) y[i] += stats::draw_normal(rng, 0, 1);
  double worst_kkt = 0.0;
  for (double lam : baselines::default_grid(X, y, baselines::Method::Lasso, 0.5, 10)) {
    worst_kkt = std::max(worst_kkt, baselines::lasso_fit(X, y, lam).kkt_residual);
  }
  // p = 2: exact minimum over the vertices of the piecewise-linear objective
  const Eigen::Index nq = 20;
  Eigen::MatrixXd Xq(nq, 2);
  Eigen::VectorXd yq(nq);
  for (Eigen::Index i = 0; i < nq; ++i) {
    Xq(i, 0) = stats::draw_normal(rng, 0, 1);
    Xq(i, 1) = stats::draw_normal(rng, 0, 1);
    yq[i] = 1.0 + 1.5 * Xq(i, 0) + std::exp(stats::draw_normal(rng, 0, 1));
  }
  const double tau = 0.5, lam = 0.05;
  double best = std::numeric_limits<double>::infinity();
  auto consider = [&](const Eigen::MatrixXd& A, const Eigen::VectorXd& rhs, int mask) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (!lu.isInvertible()) return;
    const Eigen::VectorXd sol = lu.solve(rhs);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(2);
    int k = 1;
    for (int j = 0; j < 2; ++j) {
      if (mask & (1 << j)) b[j] = sol[k++];
    }
    best = std::min(best, baselines::quantile_objective(Xq, yq, b, sol[0], tau, lam));
  };
  for (int mask = 0; mask < 4; ++mask) {
    const int free = 1 + (mask & 1) + ((mask >> 1) & 1);
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(free));
    std::function<void(int, Eigen::Index)> rec = [&](int depth, Eigen::Index start) {
      if (depth == free) {
        Eigen::MatrixXd A(free, free);
        Eigen::VectorXd rhs(free);
        for (int r = 0; r < free; ++r) {
          const Eigen::Index i = idx[static_cast<std::size_t>(r)];
          int c = 0;
          A(r, c++) = 1.0;
          for (int j = 0; j < 2; ++j) {
            if (mask & (1 << j)) A(r, c++) = Xq(i, j);
          }
          rhs[r] = yq[i];
        }
        consider(A, rhs, mask);
        return;
      }
      for (Eigen::Index i = start; i < nq; ++i) {
        idx[static_cast<std::size_t>(depth)] = i;
        rec(depth + 1, i + 1);
      }
    };
    rec(0, 0);
  }
  const auto qf = baselines::quantile_lasso_fit(Xq, yq, tau, lam);
  const double gap = std::abs(qf.objective - best);
  o.pass = worst_rt <= 1e-10 && worst_kkt <= 1e-8 && gap <= 1e-4;
  o.detail = "roundtrip " + fmt(worst_rt, 2) + "; KKT " + fmt(worst_kkt, 2) +
             "; quantile objective gap " + fmt(gap, 2);
  return o;
}

// 9. byte-identical reruns of every command
std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = io::read_file(e.path());
  }
  return out;
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "tbs_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  const io::json mcmc{{"n_iter", 4000}, {"burn_in", 2000}, {"thin", 4}};
  const std::vector<std::pair<std::string, io::json>> runs{
      {"fit", {{"seed", 9}, {"preset", "outlier_eta05"}, {"model", "tbso"}, {"mcmc", mcmc}}},
      {"simulate",
       {{"seed", 9}, {"preset", "p8_eta05"}, {"replications", 3}, {"mcmc", mcmc},
        {"study", {{"methods", {"TbsSg", "TbstSg", "Lasso", "QuantileLasso"}}, {"threads", 2}}}}},
      {"consistency",
       {{"seed", 9},
        {"consistency",
         {{"n_grid", {20, 40}}, {"replications", 2}, {"bound_datasets", 2}, {"fuzz_instances", 1000}}}}},
      {"baseline", {{"seed", 9}, {"preset", "case_ii_eta18"}}}};
  Outcome o{true, ""};
  for (const auto& [cmd, cfg] : runs) {
    const fs::path cfg_path = root / (cmd + ".json");
    io::write_file(cfg_path, cfg.dump(2));
    const std::string call = std::string(TBS_CLI_PATH) + " " + cmd + " --config " +
                             cfg_path.string() + " --out " + (root / cmd).string() +
                             " > /dev/null 2>&1";
    const int a = run_shell(call);
    const auto first = snapshot(root / cmd);
    const int b = run_shell(call);
    const bool same = a == 0 && b == 0 && !first.empty() && snapshot(root / cmd) == first;
    o.pass = o.pass && same;
    o.detail += cmd + (same ? " identical (" + std::to_string(first.size()) + " files); "
                            : " DIFFERS or failed; ");
  }
  fs::remove_all(root);
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"1 p8 study, eta0 = 1.8", table1_eta18},
      {"2 p8 study, eta0 = 0.5", table1_eta05},
      {"3 swamping direction over cases i-vi", table2_direction},
      {"4 outlier recovery", outlier_study},
      {"5 sampler correctness", sampler_correctness},
      {"6 consistency lab", consistency_lab},
      {"7 median and quantile properties", median_quantiles},
      {"8 numerical kernels", kernels},
      {"9 determinism", determinism},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s  criterion %s: %s [%.0f s]\n", o.pass ? "PASS" : "FAIL", name.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed == 0 ? 0 : 1;
}
