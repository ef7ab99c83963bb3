#include "tbs/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "tbs/errors.hpp"

namespace tbs::io {

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> rec;
  std::string field;
  bool in_quotes = false, closed = false;
  std::size_t row = 1;
  auto end_field = [&] {
    rec.push_back(std::move(field));
    field.clear();
    closed = false;
  };
  auto end_record = [&] {
    end_field();
    if (!(rec.size() == 1 && rec[0].empty())) records.push_back(std::move(rec));
    rec.clear();
    ++row;
  };
  if (text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (in_quotes) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
          closed = true;
        }
      } else {
        field.push_back(ch);
      }
      continue;
    }
    switch (ch) {
      case '"':
        if (closed || !field.empty()) {
          throw ParseError("csv: quote inside an unquoted field", row, rec.size() + 1);
        }
        in_quotes = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
        end_record();
        break;
      case '\n':
        end_record();
        break;
      default:
        if (closed) throw ParseError("csv: text after closing quote", row, rec.size() + 1);
        field.push_back(ch);
    }
  }
  if (in_quotes) throw ParseError("csv: unterminated quoted field", row, rec.size() + 1);
  if (!field.empty() || closed || !rec.empty()) end_record();
  return records;
}

namespace {

bool is_missing(std::string_view s) {
  std::string t;
  for (char c : s) {
    if (c != ' ' && c != '\t') t.push_back(static_cast<char>(std::tolower(c)));
  }
  return t.empty() || t == "na" || t == "nan" || t == "null";
}

bool parse_number(std::string_view s, double& out) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto r = std::from_chars(s.data(), s.data() + s.size(), out);
  return r.ec == std::errc() && r.ptr == s.data() + s.size() && std::isfinite(out);
}

std::size_t find_column(const std::vector<std::string>& header,
                        const std::string& name) {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw DomainError("csv: no column named '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

ColumnScaling standardize_vector(Eigen::Ref<Eigen::VectorXd> v,
                                 const std::string& name) {
  ColumnScaling s;
  s.name = name;
  s.mean = v.mean();
  const double n = static_cast<double>(v.size());
  if (v.size() < 2) throw DomainError("csv: cannot standardise '" + name + "' with fewer than 2 rows");
  s.sd = std::sqrt((v.array() - s.mean).square().sum() / (n - 1.0));
  if (!(s.sd > 0.0)) throw DomainError("csv: column '" + name + "' is constant");
  v = (v.array() - s.mean) / s.sd;
  return s;
}

}  // namespace

IngestResult ingest_csv_text(std::string_view text, const IngestOptions& opt) {
  const auto records = parse_csv(text);
  if (records.empty()) throw ParseError("csv: missing header", 1, 0);
  const auto& header = records[0];
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != header.size()) {
      throw ParseError("csv: row has " + std::to_string(records[r].size()) +
                           " fields, header has " + std::to_string(header.size()),
                       r + 1, 0);
    }
  }
  const std::size_t yc = find_column(header, opt.response);
  std::vector<std::size_t> xc;
  std::vector<std::string> names;
  if (opt.covariates.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c != yc) { xc.push_back(c); names.push_back(header[c]); }
    }
  } else {
    for (const auto& nm : opt.covariates) {
      xc.push_back(find_column(header, nm));
      names.push_back(nm);
    }
  }
  if (xc.empty()) throw DomainError("csv: no covariate columns");

  IngestResult out;
  std::vector<std::vector<double>> rows;
  std::vector<double> ys;
  std::vector<std::size_t> file_rows;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    bool missing = is_missing(rec[yc]);
    for (std::size_t c : xc) missing = missing || is_missing(rec[c]);
    if (missing) {
      ++out.dropped_rows;
      out.dropped_row_numbers.push_back(r + 1);
      continue;
    }
    double yv = 0.0;
    if (!parse_number(rec[yc], yv)) {
      throw ParseError("csv: non-numeric value '" + rec[yc] + "'", r + 1, yc + 1);
    }
    if (yv == 0.0) {
      throw ParseError("csv: zero response is outside the transform's domain", r + 1, yc + 1);
    }
    std::vector<double> xs(xc.size());
    for (std::size_t k = 0; k < xc.size(); ++k) {
      if (!parse_number(rec[xc[k]], xs[k])) {
        throw ParseError("csv: non-numeric value '" + rec[xc[k]] + "'", r + 1, xc[k] + 1);
      }
    }
    rows.push_back(std::move(xs));
    ys.push_back(yv);
    file_rows.push_back(r + 1);
  }
  Dataset& d = out.data;
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto p = static_cast<Eigen::Index>(xc.size());
  d.X.resize(n, p);
  d.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d.y[i] = ys[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < p; ++j) {
      d.X(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  }
  d.column_names = names;
  d.response_name = opt.response;

  std::vector<std::string> to_scale;
  for (const auto& nm : opt.standardize) {
    if (nm == "*") {
      to_scale = names;
      break;
    }
    if (std::find(names.begin(), names.end(), nm) == names.end()) {
      throw DomainError("csv: standardise column '" + nm + "' is not a covariate");
    }
    to_scale.push_back(nm);
  }
  for (const auto& nm : to_scale) {
    const auto j = std::find(names.begin(), names.end(), nm) - names.begin();
    d.scaling.push_back(standardize_vector(d.X.col(j), nm));
  }
  if (opt.standardize_response) {
    d.scaling.push_back(standardize_vector(d.y, opt.response));
    for (Eigen::Index i = 0; i < n; ++i) {
      if (d.y[i] == 0.0) {
        throw ParseError("csv: standardised response is exactly zero",
                         file_rows[static_cast<std::size_t>(i)], yc + 1);
      }
    }
  }
  d.standardized = !d.scaling.empty();
  d.validate();
  return out;
}

IngestResult ingest_csv(const std::filesystem::path& path,
                        const IngestOptions& opt) {
  return ingest_csv_text(read_file(path), opt);
}

std::string format_double(double v) {
  if (std::isnan(v)) return "NaN";
  if (std::isinf(v)) return v > 0 ? "Infinity" : "-Infinity";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q.push_back('"');
    q.push_back(c);
  }
  q.push_back('"');
  return q;
}

std::string csv_text(const std::vector<std::string>& header,
                     const std::vector<std::vector<std::string>>& rows) {
  std::string out;
  auto line = [&](const std::vector<std::string>& rec) {
    for (std::size_t k = 0; k < rec.size(); ++k) {
      if (k) out.push_back(',');
      out += csv_field(rec[k]);
    }
    out.push_back('\n');
  };
  line(header);
  for (const auto& r : rows) line(r);
  return out;
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& data) {
  std::vector<std::string> header{data.response_name};
  for (Eigen::Index j = 0; j < data.p(); ++j) {
    header.push_back(static_cast<std::size_t>(j) < data.column_names.size()
                         ? data.column_names[static_cast<std::size_t>(j)]
                         : "x" + std::to_string(j + 1));
  }
  std::vector<std::vector<std::string>> rows;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    std::vector<std::string> r{format_double(data.y[i])};
    for (Eigen::Index j = 0; j < data.p(); ++j) r.push_back(format_double(data.X(i, j)));
    rows.push_back(std::move(r));
  }
  write_file(path, csv_text(header, rows));
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  os.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!os) throw std::runtime_error("write to '" + path.string() + "' failed");
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

namespace {

json vec_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Eigen::VectorXd json_vec(const json& a) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  return v;
}

json flags_json(const std::vector<std::uint8_t>& f) {
  json a = json::array();
  for (auto b : f) a.push_back(static_cast<int>(b));
  return a;
}

std::vector<std::uint8_t> json_flags(const json& a) {
  std::vector<std::uint8_t> f;
  for (const auto& e : a) f.push_back(static_cast<std::uint8_t>(e.get<int>() != 0));
  return f;
}

json fixed_json(const mcmc::FixedBlocks& f) {
  return {{"eta", f.eta},           {"sigma2", f.sigma2},
          {"support", f.support},   {"coefficients", f.coefficients},
          {"hyper", f.hyper},       {"shifts", f.shifts},
          {"latent_scales", f.latent_scales}, {"mixing", f.mixing}};
}

template <class T>
void take(const json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

void check_keys(const json& j, std::initializer_list<const char*> keys,
                const char* what) {
  if (!j.is_object()) throw DomainError(std::string(what) + ": expected an object");
  for (const auto& [k, v] : j.items()) {
    bool known = false;
    for (const char* key : keys) known = known || k == key;
    if (!known) throw DomainError(std::string(what) + ": unknown key '" + k + "'");
  }
}

}  // namespace

json to_json(const mcmc::McmcConfig& c) {
  json j = {{"n_iter", c.n_iter},
            {"burn_in", c.burn_in},
            {"thin", c.thin},
            {"seed", c.seed},
            {"rw_scale_eta", c.rw_scale_eta},
            {"rw_scale_theta", c.rw_scale_theta},
            {"rw_scale_nu", c.rw_scale_nu},
            {"rw_scale_rho", c.rw_scale_rho},
            {"adapt", c.adapt},
            {"target_acceptance", c.target_acceptance},
            {"random_scan", c.random_scan},
            {"fixed", fixed_json(c.fixed)}};
  j["init"] = c.init ? to_json(*c.init) : json(nullptr);
  return j;
}

void apply_json(const json& j, mcmc::McmcConfig& c) {
  check_keys(j, {"n_iter", "burn_in", "thin", "seed", "rw_scale_eta",
                 "rw_scale_theta", "rw_scale_nu", "rw_scale_rho", "adapt",
                 "target_acceptance", "random_scan", "fixed", "init"},
             "mcmc");
  take(j, "n_iter", c.n_iter);
  take(j, "burn_in", c.burn_in);
  take(j, "thin", c.thin);
  take(j, "seed", c.seed);
  take(j, "rw_scale_eta", c.rw_scale_eta);
  take(j, "rw_scale_theta", c.rw_scale_theta);
  take(j, "rw_scale_nu", c.rw_scale_nu);
  take(j, "rw_scale_rho", c.rw_scale_rho);
  take(j, "adapt", c.adapt);
  take(j, "target_acceptance", c.target_acceptance);
  take(j, "random_scan", c.random_scan);
  if (j.contains("fixed")) {
    const json& f = j.at("fixed");
    check_keys(f, {"eta", "sigma2", "support", "coefficients", "hyper", "shifts",
                   "latent_scales", "mixing"},
               "mcmc.fixed");
    take(f, "eta", c.fixed.eta);
    take(f, "sigma2", c.fixed.sigma2);
    take(f, "support", c.fixed.support);
    take(f, "coefficients", c.fixed.coefficients);
    take(f, "hyper", c.fixed.hyper);
    take(f, "shifts", c.fixed.shifts);
    take(f, "latent_scales", c.fixed.latent_scales);
    take(f, "mixing", c.fixed.mixing);
  }
  if (j.contains("init")) {
    if (j.at("init").is_null()) c.init.reset();
    else c.init = state_from_json(j.at("init"));
  }
}

json to_json(const PriorHyper& h) {
  return {{"a", h.a},           {"b", h.b},
          {"c1", h.c1},         {"d1", h.d1},
          {"pi0_a", h.pi0_a},   {"pi0_b", h.pi0_b},
          {"sb_a", h.sb_a},     {"sb_b", h.sb_b},
          {"pi_gamma_a", h.pi_gamma_a}, {"pi_gamma_b", h.pi_gamma_b},
          {"sg2", h.sg2},       {"nu_rate", h.nu_rate},
          {"slash_a", h.slash_a}, {"slash_b", h.slash_b},
          {"cn_nu_a", h.cn_nu_a}, {"cn_nu_b", h.cn_nu_b},
          {"cn_rho_a", h.cn_rho_a}, {"cn_rho_b", h.cn_rho_b}};
}

void apply_json(const json& j, PriorHyper& h) {
  check_keys(j, {"a", "b", "c1", "d1", "pi0_a", "pi0_b", "sb_a", "sb_b",
                 "pi_gamma_a", "pi_gamma_b", "sg2", "nu_rate", "slash_a",
                 "slash_b", "cn_nu_a", "cn_nu_b", "cn_rho_a", "cn_rho_b"},
             "hyper");
  take(j, "a", h.a);
  take(j, "b", h.b);
  take(j, "c1", h.c1);
  take(j, "d1", h.d1);
  take(j, "pi0_a", h.pi0_a);
  take(j, "pi0_b", h.pi0_b);
  take(j, "sb_a", h.sb_a);
  take(j, "sb_b", h.sb_b);
  take(j, "pi_gamma_a", h.pi_gamma_a);
  take(j, "pi_gamma_b", h.pi_gamma_b);
  take(j, "sg2", h.sg2);
  take(j, "nu_rate", h.nu_rate);
  take(j, "slash_a", h.slash_a);
  take(j, "slash_b", h.slash_b);
  take(j, "cn_nu_a", h.cn_nu_a);
  take(j, "cn_nu_b", h.cn_nu_b);
  take(j, "cn_rho_a", h.cn_rho_a);
  take(j, "cn_rho_b", h.cn_rho_b);
}

json to_json(const ParamState& s) {
  return {{"eta", s.eta},
          {"sigma2", s.sigma2},
          {"theta", vec_json(s.theta)},
          {"z", flags_json(s.z)},
          {"pi0", s.pi0},
          {"sigma_beta2", s.sigma_beta2},
          {"gamma", vec_json(s.gamma)},
          {"zg", flags_json(s.zg)},
          {"pi_gamma", s.pi_gamma},
          {"u", vec_json(s.u)},
          {"nu", s.nu},
          {"rho", s.rho},
          {"contaminated", flags_json(s.contaminated)}};
}

ParamState state_from_json(const json& j) {
  ParamState s;
  s.eta = j.at("eta").get<double>();
  s.sigma2 = j.at("sigma2").get<double>();
  s.theta = json_vec(j.at("theta"));
  s.z = json_flags(j.at("z"));
  s.pi0 = j.at("pi0").get<double>();
  s.sigma_beta2 = j.at("sigma_beta2").get<double>();
  s.gamma = json_vec(j.at("gamma"));
  s.zg = json_flags(j.at("zg"));
  s.pi_gamma = j.at("pi_gamma").get<double>();
  s.u = json_vec(j.at("u"));
  s.nu = j.at("nu").get<double>();
  s.rho = j.at("rho").get<double>();
  s.contaminated = json_flags(j.at("contaminated"));
  return s;
}

void write_chain(std::ostream& os, const mcmc::ChainOutput& chain,
                 const json& echo) {
  json acc = json::object();
  for (const auto& [k, v] : chain.acceptance_rates) acc[k] = v;
  const json header = {{"format", "tbs-chain"},
                       {"version", kChainFormatVersion},
                       {"variant", variant_name(chain.spec.variant)},
                       {"draws", chain.draws.size()},
                       {"config", to_json(chain.config)},
                       {"acceptance", acc},
                       {"echo", echo}};
  os << header.dump() << '\n';
  for (const auto& d : chain.draws) os << to_json(d).dump() << '\n';
}

mcmc::ChainOutput read_chain(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ParseError("chain: empty file", 1, 0);
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw ParseError(std::string("chain: bad header: ") + e.what(), 1, 0);
  }
  if (header.value("format", "") != "tbs-chain") {
    throw ParseError("chain: not a chain file", 1, 0);
  }
  if (header.value("version", 0) != kChainFormatVersion) {
    throw ParseError("chain: unsupported format version", 1, 0);
  }
  mcmc::ChainOutput out;
  out.spec.variant = parse_variant(header.at("variant").get<std::string>());
  apply_json(header.at("config"), out.config);
  for (const auto& [k, v] : header.at("acceptance").items()) {
    out.acceptance_rates[k] = v.get<double>();
  }
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty()) continue;
    try {
      out.draws.push_back(state_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ParseError(std::string("chain: bad draw: ") + e.what(), row, 0);
    }
  }
  const auto expected = header.at("draws").get<std::size_t>();
  if (out.draws.size() != expected) {
    throw ParseError("chain: header announces " + std::to_string(expected) +
                         " draws, file has " + std::to_string(out.draws.size()),
                     row, 0);
  }
  return out;
}

namespace {

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

json summary_json(const mcmc::PosteriorSummary& s,
                  const mcmc::ChainOutput& chain, const SummaryContext& ctx) {
  json coefs = json::array();
  for (std::size_t j = 0; j < s.coefficients.size(); ++j) {
    const auto& c = s.coefficients[j];
    coefs.push_back({{"index", j + 1},
                     {"name", j < ctx.column_names.size() ? ctx.column_names[j]
                                                          : "x" + std::to_string(j + 1)},
                     {"inclusion_prob", c.inclusion_prob},
                     {"selected", c.selected},
                     {"mean", num(c.mean)},
                     {"median", num(c.median)},
                     {"ci95", {num(c.ci_low), num(c.ci_high)}}});
  }
  json support = json::array();
  for (auto j : s.support) support.push_back(j + 1);
  json out = {{"variant", variant_name(chain.spec.variant)},
              {"draws", chain.draws.size()},
              {"threshold", s.threshold},
              {"support", support},
              {"coefficients", coefs},
              {"eta_mean", s.eta_mean},
              {"sigma2_mean", s.sigma2_mean},
              {"pi0_mean", s.pi0_mean},
              {"sigma_beta2_mean", s.sigma_beta2_mean},
              {"ppl", num(ctx.ppl)},
              {"ppl_plug_in", num(ctx.ppl_plug_in)}};
  json acc = json::object();
  for (const auto& [k, v] : chain.acceptance_rates) acc[k] = v;
  out["acceptance"] = acc;
  if (chain.spec.has_shifts()) {
    json ss = json::array(), incl = json::array(), gh = json::array();
    for (auto i : s.shift_support) ss.push_back(i + 1);
    for (Eigen::Index i = 0; i < s.shift_inclusion.size(); ++i) {
      incl.push_back(s.shift_inclusion[i]);
      gh.push_back(num(s.gamma_hat[i]));
    }
    out["shift_support"] = ss;
    out["shift_inclusion"] = incl;
    out["gamma_hat"] = gh;
  }
  if (chain.spec.is_ni()) {
    out["nu_mean"] = s.nu_mean;
    if (chain.spec.variant == Variant::TbscnSg) out["rho_mean"] = s.rho_mean;
  }
  return out;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace tbs::io
