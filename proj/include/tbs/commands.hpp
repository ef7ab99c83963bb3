#ifndef TBS_COMMANDS_HPP
#define TBS_COMMANDS_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tbs/baselines.hpp"
#include "tbs/consistency.hpp"
#include "tbs/io.hpp"
#include "tbs/model.hpp"
#include "tbs/samplers.hpp"
#include "tbs/simlab.hpp"

namespace tbs::cli {

enum class Command { Fit, Simulate, Consistency, Baseline };

std::string_view command_name(Command c);
Command parse_command(std::string_view name);

/// Command-line values; each one set here replaces the config file's value.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> model;
  std::optional<std::string> preset;
  std::optional<int> replications;
};

struct InputSpec {
  std::filesystem::path path;  // resolved against the config file's folder
  io::IngestOptions options;
};

struct ConsistencySettings {
  consistency::CurveConfig curve;
  std::vector<Eigen::Index> n_grid{20, 60, 120, 200};
  double trend_slack = 0.05;
  std::vector<double> bound_etas{0.8, 1.2, 1.8};
  int bound_datasets = 20;
  Eigen::Index bound_n = 20;
  long fuzz_instances = 100000;
};

struct RunConfig {
  Command command = Command::Fit;
  std::uint64_t seed = 0;
  std::filesystem::path out;
  Variant model = Variant::TbsSg;
  std::optional<std::string> preset;
  std::optional<int> replications;
  std::optional<InputSpec> input;
  mcmc::McmcConfig mcmc;
  PriorHyper hyper;
  double threshold = 0.5;
  std::vector<double> alphas{0.25, 0.5, 0.75};
  // simulate
  std::vector<simlab::StudyMethod> methods{simlab::StudyMethod::TbsSg,
                                           simlab::StudyMethod::Lasso,
                                           simlab::StudyMethod::QuantileLasso};
  unsigned threads = 0;
  int cv_folds = 5;
  double tau = 0.5;
  // baseline
  baselines::Method baseline_method = baselines::Method::Lasso;
  ConsistencySettings consistency;

  /// Canonical echo of every resolved setting.
  io::json to_json() const;
};

/// Reads the JSON config, applies the overrides and validates. The seed is
/// mandatory; the output folder defaults to "tbs_out".
RunConfig load_config(Command command, const std::filesystem::path& config_path,
                      const Overrides& overrides);
RunConfig config_from_json(Command command, const io::json& j,
                           const std::filesystem::path& base_dir,
                           const Overrides& overrides);

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitDiverged = 3;

/// Writes the command's artifacts under config.out and returns the exit
/// code. Progress lines go to log.
int run(const RunConfig& config, std::ostream& log);

}  // namespace tbs::cli

#endif  // TBS_COMMANDS_HPP
