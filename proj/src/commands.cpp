#include "tbs/commands.hpp"

#include <fstream>
#include <ostream>
#include <sstream>

#include "tbs/errors.hpp"
#include "tbs/metrics.hpp"
#include "tbs/stats.hpp"

namespace tbs::cli {

using io::json;
using io::format_double;

std::string_view command_name(Command c) {
  switch (c) {
    case Command::Fit: return "fit";
    case Command::Simulate: return "simulate";
    case Command::Consistency: return "consistency";
    case Command::Baseline: return "baseline";
  }
  return "?";
}

Command parse_command(std::string_view name) {
  for (Command c : {Command::Fit, Command::Simulate, Command::Consistency,
                    Command::Baseline}) {
    if (command_name(c) == name) return c;
  }
  throw DomainError("unknown command '" + std::string(name) + "'");
}

namespace {

std::string_view baseline_name(baselines::Method m) {
  return m == baselines::Method::Lasso ? "lasso" : "quantile_lasso";
}

baselines::Method parse_baseline(std::string_view s) {
  if (s == "lasso" || s == "Lasso") return baselines::Method::Lasso;
  if (s == "quantile_lasso" || s == "QuantileLasso" || s == "quantile") {
    return baselines::Method::QuantileLasso;
  }
  throw DomainError("unknown baseline method '" + std::string(s) + "'");
}

void check_keys(const json& j, std::initializer_list<const char*> keys,
                const std::string& what) {
  if (!j.is_object()) throw DomainError(what + ": expected an object");
  for (const auto& [k, v] : j.items()) {
    bool known = false;
    for (const char* key : keys) known = known || k == key;
    if (!known) throw DomainError(what + ": unknown key '" + k + "'");
  }
}

template <class T>
void take(const json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

void read_consistency(const json& j, ConsistencySettings& c) {
  check_keys(j, {"eta", "pi0", "beta01", "sigma0", "replications", "a", "b",
                 "sigma_beta2", "slab", "n_grid", "trend_slack", "bound_etas",
                 "bound_datasets", "bound_n", "fuzz_instances"},
             "consistency");
  take(j, "eta", c.curve.eta);
  take(j, "pi0", c.curve.pi0);
  take(j, "beta01", c.curve.beta01);
  take(j, "sigma0", c.curve.sigma0);
  take(j, "replications", c.curve.replications);
  take(j, "a", c.curve.hyper.a);
  take(j, "b", c.curve.hyper.b);
  take(j, "sigma_beta2", c.curve.hyper.sigma_beta2);
  if (j.contains("slab")) {
    const auto s = j.at("slab").get<std::string>();
    if (s == "gaussian") c.curve.hyper.slab = consistency::SlabKernel::Gaussian;
    else if (s == "flat") c.curve.hyper.slab = consistency::SlabKernel::Flat;
    else throw DomainError("consistency.slab must be 'gaussian' or 'flat'");
  }
  take(j, "n_grid", c.n_grid);
  take(j, "trend_slack", c.trend_slack);
  take(j, "bound_etas", c.bound_etas);
  take(j, "bound_datasets", c.bound_datasets);
  take(j, "bound_n", c.bound_n);
  take(j, "fuzz_instances", c.fuzz_instances);
}

}  // namespace

json RunConfig::to_json() const {
  json j;
  j["command"] = command_name(command);
  j["seed"] = seed;
  j["out"] = out.generic_string();
  j["model"] = variant_name(model);
  j["preset"] = preset ? json(*preset) : json(nullptr);
  j["replications"] = replications ? json(*replications) : json(nullptr);
  if (input) {
    j["input"] = {{"path", input->path.generic_string()},
                  {"response", input->options.response},
                  {"covariates", input->options.covariates},
                  {"standardize", input->options.standardize},
                  {"standardize_response", input->options.standardize_response}};
  } else {
    j["input"] = nullptr;
  }
  j["mcmc"] = io::to_json(mcmc);
  j["hyper"] = io::to_json(hyper);
  j["threshold"] = threshold;
  j["alphas"] = alphas;
  json ms = json::array();
  for (auto m : methods) ms.push_back(simlab::method_name(m));
  j["study"] = {{"methods", ms}, {"threads", threads}, {"cv_folds", cv_folds},
                {"tau", tau}};
  j["baseline"] = {{"method", baseline_name(baseline_method)}};
  const auto& c = consistency;
  j["consistency"] = {
      {"eta", c.curve.eta},
      {"pi0", c.curve.pi0},
      {"beta01", c.curve.beta01},
      {"sigma0", c.curve.sigma0},
      {"replications", c.curve.replications},
      {"a", c.curve.hyper.a},
      {"b", c.curve.hyper.b},
      {"sigma_beta2", c.curve.hyper.sigma_beta2},
      {"slab", c.curve.hyper.slab == consistency::SlabKernel::Flat ? "flat" : "gaussian"},
      {"n_grid", c.n_grid},
      {"trend_slack", c.trend_slack},
      {"bound_etas", c.bound_etas},
      {"bound_datasets", c.bound_datasets},
      {"bound_n", c.bound_n},
      {"fuzz_instances", c.fuzz_instances}};
  return j;
}

RunConfig config_from_json(Command command, const json& j,
                           const std::filesystem::path& base_dir,
                           const Overrides& ov) {
  check_keys(j, {"command", "seed", "out", "model", "preset", "replications",
                 "input", "mcmc", "hyper", "threshold", "alphas", "study",
                 "baseline", "consistency"},
             "config");
  RunConfig rc;
  rc.command = command;
  if (j.contains("command") &&
      parse_command(j.at("command").get<std::string>()) != command) {
    throw DomainError("config is for command '" + j.at("command").get<std::string>() +
                      "' but '" + std::string(command_name(command)) + "' was run");
  }
  if (ov.seed) rc.seed = *ov.seed;
  else if (j.contains("seed")) rc.seed = j.at("seed").get<std::uint64_t>();
  else throw DomainError("config: a seed is required (config 'seed' or --seed)");

  if (ov.out) rc.out = *ov.out;
  else if (j.contains("out")) rc.out = base_dir / j.at("out").get<std::string>();
  else rc.out = "tbs_out";

  if (ov.model) rc.model = parse_variant(*ov.model);
  else if (j.contains("model")) rc.model = parse_variant(j.at("model").get<std::string>());

  if (ov.preset) rc.preset = *ov.preset;
  else if (j.contains("preset") && !j.at("preset").is_null()) {
    rc.preset = j.at("preset").get<std::string>();
  }
  if (ov.replications) rc.replications = *ov.replications;
  else if (j.contains("replications") && !j.at("replications").is_null()) {
    rc.replications = j.at("replications").get<int>();
  }
  if (rc.replications && *rc.replications < 1) {
    throw DomainError("config: replications must be >= 1");
  }

  if (j.contains("input") && !j.at("input").is_null()) {
    const json& in = j.at("input");
    check_keys(in, {"path", "response", "covariates", "standardize",
                    "standardize_response"},
               "input");
    InputSpec spec;
    spec.path = base_dir / in.at("path").get<std::string>();
    take(in, "response", spec.options.response);
    take(in, "covariates", spec.options.covariates);
    take(in, "standardize", spec.options.standardize);
    take(in, "standardize_response", spec.options.standardize_response);
    rc.input = spec;
  }
  if (j.contains("mcmc")) io::apply_json(j.at("mcmc"), rc.mcmc);
  rc.mcmc.seed = rc.seed;
  if (j.contains("hyper")) io::apply_json(j.at("hyper"), rc.hyper);
  take(j, "threshold", rc.threshold);
  take(j, "alphas", rc.alphas);
  if (j.contains("study")) {
    const json& s = j.at("study");
    check_keys(s, {"methods", "threads", "cv_folds", "tau"}, "study");
    if (s.contains("methods")) {
      rc.methods.clear();
      for (const auto& m : s.at("methods")) {
        rc.methods.push_back(simlab::parse_method(m.get<std::string>()));
      }
    }
    take(s, "threads", rc.threads);
    take(s, "cv_folds", rc.cv_folds);
    take(s, "tau", rc.tau);
  }
  if (j.contains("baseline")) {
    const json& b = j.at("baseline");
    check_keys(b, {"method"}, "baseline");
    if (b.contains("method")) rc.baseline_method = parse_baseline(b.at("method").get<std::string>());
  }
  if (j.contains("consistency")) read_consistency(j.at("consistency"), rc.consistency);
  rc.consistency.curve.seed = rc.seed;
  if (rc.replications) rc.consistency.curve.replications = *rc.replications;

  // validation
  rc.mcmc.validate();
  rc.hyper.validate();
  if (!(rc.threshold >= 0.0 && rc.threshold < 1.0)) {
    throw DomainError("config: threshold must lie in [0, 1)");
  }
  for (double a : rc.alphas) {
    if (!(a > 0.0 && a < 1.0)) throw DomainError("config: alphas must lie in (0, 1)");
  }
  if (rc.methods.empty()) throw DomainError("config: study.methods is empty");
  if (rc.cv_folds < 2) throw DomainError("config: cv_folds must be >= 2");
  if (!(rc.tau > 0.0 && rc.tau < 1.0)) throw DomainError("config: tau must lie in (0, 1)");
  if ((command == Command::Fit || command == Command::Baseline) && !rc.input &&
      !rc.preset) {
    throw DomainError("config: fit and baseline need an input CSV or a preset");
  }
  if (command == Command::Simulate && !rc.preset) {
    throw DomainError("config: simulate needs a preset");
  }
  if (rc.preset) simlab::preset(*rc.preset);  // unknown ids fail here
  if (rc.input && !std::filesystem::exists(rc.input->path)) {
    throw DomainError("config: input file '" + rc.input->path.string() + "' not found");
  }
  const auto& cs = rc.consistency;
  cs.curve.hyper.validate();
  if (cs.n_grid.empty()) throw DomainError("consistency: n_grid is empty");
  for (std::size_t k = 0; k < cs.n_grid.size(); ++k) {
    if (cs.n_grid[k] < 2 || cs.n_grid[k] % 2) {
      throw DomainError("consistency: n_grid entries must be even and >= 2");
    }
    if (k && cs.n_grid[k] <= cs.n_grid[k - 1]) {
      throw DomainError("consistency: n_grid must be increasing");
    }
  }
  if (cs.bound_n < 2 || cs.bound_n % 2) throw DomainError("consistency: bound_n must be even");
  if (cs.fuzz_instances < 0 || cs.bound_datasets < 0) {
    throw DomainError("consistency: counts must be non-negative");
  }
  return rc;
}

RunConfig load_config(Command command, const std::filesystem::path& path,
                      const Overrides& ov) {
  json j;
  try {
    j = json::parse(io::read_file(path));
  } catch (const json::parse_error& e) {
    throw io::ParseError(std::string("config: ") + e.what(), 0, 0);
  }
  return config_from_json(command, j, path.parent_path(), ov);
}

namespace {

struct LoadedData {
  Dataset data;
  std::size_t dropped_rows = 0;
  std::optional<simlab::Generated> generated;
};

LoadedData load_data(const RunConfig& rc, const std::filesystem::path& out) {
  LoadedData ld;
  if (rc.input) {
    auto r = io::ingest_csv(rc.input->path, rc.input->options);
    ld.data = std::move(r.data);
    ld.dropped_rows = r.dropped_rows;
    return ld;
  }
  const simlab::Scenario sc = simlab::preset(*rc.preset);
  Rng rng = make_stream(rc.seed, 0xda7a);
  ld.generated = simlab::generate(sc, rng);
  ld.data = ld.generated->data;
  io::write_dataset_csv(out / "data.csv", ld.data);
  const auto& t = ld.generated->truth;
  json gamma = json::array();
  for (Eigen::Index i = 0; i < t.gamma.size(); ++i) gamma.push_back(t.gamma[i]);
  json beta = json::array();
  for (Eigen::Index j = 0; j < t.beta0.size(); ++j) beta.push_back(t.beta0[j]);
  io::write_file(out / "truth.json",
                 io::dump({{"preset", sc.id}, {"beta0", beta}, {"eta0", t.eta0},
                           {"sigma0", t.sigma0}, {"gamma", gamma}}));
  return ld;
}

std::string qq_csv(const std::vector<metrics::QQRow>& t) {
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < t.size(); ++i) {
    rows.push_back({std::to_string(i + 1), format_double(t[i].observed),
                    format_double(t[i].normal_quantile)});
  }
  return io::csv_text({"rank", "residual", "normal_quantile"}, rows);
}

int fit_command(const RunConfig& rc, std::ostream& log) {
  const auto& out = rc.out;
  LoadedData ld = load_data(rc, out);
  const ModelSpec spec{rc.model};
  log << "fit: " << variant_name(rc.model) << " n=" << ld.data.n()
      << " p=" << ld.data.p() << "\n";
  mcmc::ChainOutput chain;
  try {
    chain = mcmc::run_chain(ld.data, spec, rc.hyper, rc.mcmc);
  } catch (const mcmc::SamplerDivergence& e) {
    io::write_file(out / "diagnostic.json",
                   io::dump({{"error", "sampler_divergence"},
                             {"message", e.what()},
                             {"iteration", e.iteration()},
                             {"block", e.block()},
                             {"config", rc.to_json()}}));
    log << "fit: " << e.what() << "\n";
    return kExitDiverged;
  }
  const auto summary = mcmc::select_support(chain, rc.threshold);

  {
    std::ostringstream ss;
    io::write_chain(ss, chain, rc.to_json());
    io::write_file(out / "chain.jsonl", ss.str());
  }
  io::SummaryContext ctx;
  ctx.column_names = ld.data.column_names;
  ctx.ppl = metrics::ppl(chain, ld.data, false);
  ctx.ppl_plug_in = metrics::ppl(chain, ld.data, true);
  json sj = io::summary_json(summary, chain, ctx);
  sj["input"] = {{"n", ld.data.n()}, {"p", ld.data.p()},
                 {"dropped_rows", ld.dropped_rows}};
  io::write_file(out / "summary.json", io::dump(sj));

  io::write_file(out / "residuals_raw.csv",
                 qq_csv(metrics::residual_table(summary, ld.data, spec,
                                                metrics::ResidualKind::Raw)));
  io::write_file(out / "residuals_transformed.csv",
                 qq_csv(metrics::residual_table(summary, ld.data, spec,
                                                metrics::ResidualKind::Transformed)));

  const auto curve = metrics::quantile_curve_table(summary, ld.data, spec, rc.alphas);
  std::vector<std::string> header{"index", "linear_predictor", "median"};
  for (double a : rc.alphas) header.push_back("q" + format_double(a));
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : curve) {
    std::vector<std::string> row{std::to_string(r.index),
                                 format_double(r.linear_predictor),
                                 format_double(r.median)};
    for (double q : r.quantiles) row.push_back(format_double(q));
    rows.push_back(std::move(row));
  }
  io::write_file(out / "quantiles.csv", io::csv_text(header, rows));

  log << "fit: selected {";
  for (std::size_t k = 0; k < summary.support.size(); ++k) {
    log << (k ? "," : "") << summary.support[k] + 1;
  }
  log << "}\n";
  return kExitOk;
}

std::string percent(double v) { return format_double(100.0 * v); }

int simulate_command(const RunConfig& rc, std::ostream& log) {
  simlab::Scenario sc = simlab::preset(*rc.preset);
  simlab::StudyConfig cfg;
  cfg.mcmc = rc.mcmc;
  cfg.hyper = rc.hyper;
  cfg.replications = rc.replications.value_or(50);
  cfg.master_seed = rc.seed;
  cfg.threads = rc.threads;
  cfg.cv_folds = rc.cv_folds;
  cfg.tau = rc.tau;
  cfg.threshold = rc.threshold;
  log << "simulate: " << sc.id << " x" << cfg.replications << "\n";
  const auto report = simlab::run_study(sc, rc.methods, cfg);

  std::vector<std::vector<std::string>> rows;
  json meta_rows = json::array();
  for (const auto& r : report.rows) {
    rows.push_back({r.method, format_double(r.l_ratio),
                    format_double(r.selection.n_selected),
                    percent(r.selection.masking), percent(r.selection.swamping),
                    percent(r.selection.joint_detection)});
    meta_rows.push_back({{"method", r.method}, {"used", r.used},
                         {"failed", r.failed}, {"failures", r.failures}});
  }
  io::write_file(rc.out / "study.csv",
                 io::csv_text({"method", "l_ratio", "n_selected", "M%", "S%", "JD%"},
                              rows));
  io::write_file(rc.out / "study_meta.json",
                 io::dump({{"scenario", report.scenario},
                           {"replications", report.replications},
                           {"rows", meta_rows},
                           {"config", rc.to_json()}}));
  return kExitOk;
}

int consistency_command(const RunConfig& rc, std::ostream& log) {
  const auto& cs = rc.consistency;
  log << "consistency: curve over " << cs.n_grid.size() << " sample sizes\n";
  const auto curve = consistency::consistency_curve(cs.n_grid, cs.curve);
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : curve) {
    rows.push_back({std::to_string(r.n), std::to_string(r.p),
                    format_double(r.mean_prob), format_double(r.min_prob),
                    format_double(r.max_prob)});
  }
  io::write_file(rc.out / "curve.csv",
                 io::csv_text({"n", "p", "mean_prob", "min_prob", "max_prob"}, rows));

  rows.clear();
  int vacuous = 0, violated = 0;
  consistency::LabHyper bh = cs.curve.hyper;
  bh.slab = consistency::SlabKernel::Gaussian;
  for (std::size_t e = 0; e < cs.bound_etas.size(); ++e) {
    const double eta = cs.bound_etas[e];
    for (int d = 0; d < cs.bound_datasets; ++d) {
      Rng rng = make_stream(rc.seed, 0xb0b0000 + e * 100000 + static_cast<std::uint64_t>(d));
      const Dataset data = consistency::simulate_alt(cs.bound_n, 2, cs.curve.beta01,
                                                     eta, cs.curve.sigma0, rng);
      const auto b = consistency::bound_check_upper(data, eta, bh);
      vacuous += b.vacuous;
      violated += !b.vacuous && !b.holds;
      rows.push_back({format_double(eta), std::to_string(d + 1),
                      b.vacuous ? "1" : "0", b.holds ? "1" : "0",
                      format_double(b.log_m), format_double(b.log_bound),
                      format_double(b.denominator), format_double(b.log_ratio)});
    }
  }
  io::write_file(rc.out / "bound.csv",
                 io::csv_text({"eta", "dataset", "vacuous", "holds", "log_m",
                               "log_bound", "denominator", "log_ratio"},
                              rows));

  json fuzz = json::object();
  if (cs.fuzz_instances > 0) {
    log << "consistency: inequality fuzzing\n";
    const auto general = consistency::lemma1_fuzz(cs.fuzz_instances, {2, 3, 5},
                                                  consistency::LemmaRule::General, rc.seed);
    const auto printed = consistency::lemma1_fuzz(cs.fuzz_instances, {2},
                                                  consistency::LemmaRule::AsPrinted, rc.seed);
    auto fj = [](const consistency::FuzzReport& f) {
      return json{{"instances", f.instances},
                  {"violations", f.violations},
                  {"min_slack", f.min_slack},
                  {"first_violation", f.first_violation ? json(*f.first_violation)
                                                        : json(nullptr)}};
    };
    fuzz = {{"general", fj(general)}, {"as_printed_k2", fj(printed)}};
  }
  const bool trend = consistency::curve_non_decreasing(curve, cs.trend_slack);
  io::write_file(rc.out / "consistency.json",
                 io::dump({{"non_decreasing", trend},
                           {"trend_slack", cs.trend_slack},
                           {"last_mean_prob", curve.back().mean_prob},
                           {"bound_vacuous", vacuous},
                           {"bound_violations", violated},
                           {"lemma_fuzz", fuzz},
                           {"config", rc.to_json()}}));
  log << "consistency: non-decreasing " << (trend ? "yes" : "no") << "\n";
  return kExitOk;
}

int baseline_command(const RunConfig& rc, std::ostream& log) {
  LoadedData ld = load_data(rc, rc.out);
  log << "baseline: " << baseline_name(rc.baseline_method) << "\n";
  const auto res = baselines::fit_with_cv(ld.data, rc.baseline_method, rc.seed,
                                          rc.cv_folds, rc.tau);
  std::vector<std::vector<std::string>> rows;
  for (std::size_t k = 0; k < res.cv.grid.size(); ++k) {
    rows.push_back({format_double(res.cv.grid[k]), format_double(res.cv.cv_loss[k])});
  }
  io::write_file(rc.out / "cv.csv", io::csv_text({"lambda", "cv_loss"}, rows));
  json beta = json::array(), sel = json::array();
  for (Eigen::Index j = 0; j < res.beta.size(); ++j) beta.push_back(res.beta[j]);
  for (auto j : res.selected) sel.push_back(j + 1);
  io::write_file(rc.out / "baseline.json",
                 io::dump({{"method", baseline_name(rc.baseline_method)},
                           {"lambda", res.cv.best_lambda},
                           {"intercept", res.intercept},
                           {"beta", beta},
                           {"selected", sel},
                           {"dropped_rows", ld.dropped_rows},
                           {"config", rc.to_json()}}));
  return kExitOk;
}

}  // namespace

int run(const RunConfig& rc, std::ostream& log) {
  std::filesystem::create_directories(rc.out);
  io::write_file(rc.out / "config_resolved.json", io::dump(rc.to_json()));
  switch (rc.command) {
    case Command::Fit: return fit_command(rc, log);
    case Command::Simulate: return simulate_command(rc, log);
    case Command::Consistency: return consistency_command(rc, log);
    case Command::Baseline: return baseline_command(rc, log);
  }
  return kExitError;
}

}  // namespace tbs::cli
