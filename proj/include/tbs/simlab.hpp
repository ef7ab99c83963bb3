#ifndef TBS_SIMLAB_HPP
#define TBS_SIMLAB_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "tbs/baselines.hpp"
#include "tbs/metrics.hpp"
#include "tbs/model.hpp"
#include "tbs/samplers.hpp"
#include "tbs/stats.hpp"

namespace tbs::simlab {

/// True mixing law for heavy-tailed truths.
struct NiTruth {
  Variant variant = Variant::TbstSg;
  double nu = 4.0;
  double rho = 1.0;  // CN only
};

enum class XDist { StandardNormal };

struct Scenario {
  std::string id;
  Eigen::Index n = 50;
  Eigen::VectorXd beta0;
  double eta0 = 1.0;
  double sigma0 = 1.0;
  std::vector<std::pair<std::size_t, double>> outliers;  // 0-based index, gamma
  std::optional<NiTruth> ni;
  XDist x_dist = XDist::StandardNormal;
  std::uint64_t seed = 1;

  Eigen::Index p() const { return beta0.size(); }
  void validate() const;
};

struct Truth {
  Eigen::VectorXd beta0;
  double eta0 = 1.0;
  double sigma0 = 1.0;
  Eigen::VectorXd gamma;  // zeros except at injected outliers
  Eigen::VectorXd u;      // ones unless an NI truth is used
  Eigen::VectorXd e;      // transformed-scale Gaussian errors before scaling
};

struct Generated {
  Dataset data;
  Truth truth;
};

/// y_i = gpow_inv(gpow(x_i'beta0) + gamma_i + e_i / sqrt(u_i), eta0) with
/// e_i ~ N(0, sigma0^2). A response that lands exactly on zero is redrawn.
/// Throws DomainError if any y_i would exceed 1e300 in magnitude.
Generated generate(const Scenario& scenario, Rng& rng);

/// Named scenarios. Bare case ids ("case_ii") resolve to the eta0 = 0.5 form.
Scenario preset(std::string_view id);
std::vector<std::string> preset_ids();

enum class StudyMethod { TbsSg, TbsoSg, TbstSg, TbssSg, TbscnSg, Lasso, QuantileLasso };

std::string_view method_name(StudyMethod m);
StudyMethod parse_method(std::string_view name);

struct StudyConfig {
  mcmc::McmcConfig mcmc;
  PriorHyper hyper;
  int replications = 50;
  std::uint64_t master_seed = 1;
  unsigned threads = 0;  // 0: hardware concurrency
  int cv_folds = 5;
  double tau = 0.5;
  double threshold = 0.5;
};

struct StudyRow {
  std::string method;  // "<Method>" or "TbsoSg:gamma" for the shift block
  metrics::SelectionMetrics selection;
  double l_ratio = 0.0;  // NaN for the shift row
  int used = 0;          // replications contributing
  int failed = 0;
  std::vector<std::string> failures;
  std::vector<std::vector<std::size_t>> selected;  // per used replication
};

struct StudyReport {
  std::string scenario;
  int replications = 0;
  std::vector<StudyRow> rows;

  const StudyRow& row(std::string_view method) const;
};

/// Replications are generated from per-replication streams and fitted
/// concurrently; the report only depends on the scenario, methods and
/// config. A failing fit is excluded from its method's row and reported.
StudyReport run_study(const Scenario& scenario,
                      const std::vector<StudyMethod>& methods,
                      const StudyConfig& config);

}  // namespace tbs::simlab

#endif  // TBS_SIMLAB_HPP
