#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>

#include "tbs/errors.hpp"
#include "tbs/io.hpp"

using namespace tbs;
using namespace tbs::io;

namespace {

std::size_t error_row(std::string_view text, const IngestOptions& opt = {}) {
  try {
    ingest_csv_text(text, opt);
  } catch (const ParseError& e) {
    return e.row();
  }
  return 0;
}

std::size_t error_column(std::string_view text, const IngestOptions& opt = {}) {
  try {
    ingest_csv_text(text, opt);
  } catch (const ParseError& e) {
    return e.column();
  }
  return 0;
}

}  // namespace

TEST_CASE("csv records") {
  const auto r = parse_csv("a,b,c\r\n1,\"x, y\",\"say \"\"hi\"\"\"\n\"multi\nline\",,3");
  REQUIRE(r.size() == 3);
  CHECK(r[0] == std::vector<std::string>{"a", "b", "c"});
  CHECK(r[1] == std::vector<std::string>{"1", "x, y", "say \"hi\""});
  CHECK(r[2] == std::vector<std::string>{"multi\nline", "", "3"});
  CHECK(parse_csv("\xEF\xBB\xBFh\n1\n")[0][0] == "h");
  CHECK(parse_csv("a\n1\n").size() == 2);
  CHECK_THROWS_AS(parse_csv("a,b\n\"open,1\n"), ParseError);
  CHECK_THROWS_AS(parse_csv("a,b\n\"x\"y,1\n"), ParseError);
}

TEST_CASE("csv writing round-trips") {
  CHECK(csv_field("plain") == "plain");
  CHECK(csv_field("a,b") == "\"a,b\"");
  CHECK(csv_field("q\"") == "\"q\"\"\"");
  const std::vector<std::string> header{"name", "note"};
  const std::vector<std::vector<std::string>> rows{{"x", "has, comma"}, {"y\nz", "\"q\""}};
  const auto back = parse_csv(csv_text(header, rows));
  REQUIRE(back.size() == 3);
  CHECK(back[0] == header);
  CHECK(back[1] == rows[0]);
  CHECK(back[2] == rows[1]);
}

TEST_CASE("shortest round-trip number formatting") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 1.0, 0.0}) {
    CHECK(std::stod(format_double(v)) == v);
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(2.0) == "2");
  CHECK(format_double(std::numeric_limits<double>::quiet_NaN()) == "NaN");
  CHECK(format_double(-std::numeric_limits<double>::infinity()) == "-Infinity");
}

TEST_CASE("ingestion") {
  SUBCASE("columns, missing cells and dropped rows") {
    const std::string text =
        "x1,y,x2,note\n"
        "1,2.5,3,a\n"
        "NA,1,2,b\n"
        "2,,1,c\n"
        "0.5,-1,nan,d\n"
        "4,3,0,\n";
    IngestOptions opt;
    opt.covariates = {"x1", "x2"};
    const IngestResult r = ingest_csv_text(text, opt);
    CHECK(r.data.n() == 2);
    CHECK(r.data.p() == 2);
    CHECK(r.dropped_rows == 3);
    CHECK(r.dropped_row_numbers == std::vector<std::size_t>{3, 4, 5});
    CHECK(r.data.y[0] == 2.5);
    CHECK(r.data.y[1] == 3.0);
    CHECK(r.data.X(1, 0) == 4.0);
    CHECK(r.data.X(1, 1) == 0.0);
    CHECK(r.data.column_names == std::vector<std::string>{"x1", "x2"});
  }
  SUBCASE("default covariates are every other column") {
    const IngestResult r = ingest_csv_text("a,y,b\n1,2,3\n4,5,6\n", {});
    CHECK(r.data.column_names == std::vector<std::string>{"a", "b"});
    CHECK(r.data.X(1, 1) == 6.0);
  }
  SUBCASE("standardisation uses the sample standard deviation") {
    IngestOptions opt;
    opt.standardize = {"*"};
    opt.standardize_response = true;
    const IngestResult r = ingest_csv_text("a,y\n1,2\n2,4\n3,9\n", opt);
    // a: mean 2, sd 1
    CHECK(r.data.X(0, 0) == doctest::Approx(-1.0));
    CHECK(r.data.X(2, 0) == doctest::Approx(1.0));
    CHECK(r.data.y.sum() == doctest::Approx(0.0).scale(1.0));
    CHECK(r.data.standardized);
    opt.standardize_response = false;
    CHECK_THROWS_AS(ingest_csv_text("a,y\n1,2\n1,4\n1,9\n", opt), DomainError);
  }
  SUBCASE("errors carry the file position") {
    CHECK(error_row("a,y\n1,2\n1,abc\n") == 3);
    CHECK(error_column("a,y\n1,2\n1,abc\n") == 2);
    CHECK(error_row("a,y\n1,2\nq,3\n") == 3);
    CHECK(error_column("a,y\n1,2\nq,3\n") == 1);
    CHECK(error_row("a,y\n1,2\n1,0\n") == 3);
    CHECK(error_row("a,y\n1,2\n1,2,3\n") == 3);
    IngestOptions opt;
    opt.response = "missing";
    CHECK_THROWS_AS(ingest_csv_text("a,y\n1,2\n", opt), DomainError);
  }
}

TEST_CASE("config and state json") {
  mcmc::McmcConfig c;
  c.n_iter = 1234;
  c.fixed.eta = true;
  ParamState init = ParamState::zeros(3, 2);
  init.eta = 0.7;
  c.init = init;
  mcmc::McmcConfig back;
  apply_json(to_json(c), back);
  CHECK(back.n_iter == 1234);
  CHECK(back.fixed == c.fixed);
  REQUIRE(back.init);
  CHECK(*back.init == init);
  CHECK_THROWS(apply_json(json{{"n_iterations", 5}}, back));

  PriorHyper h;
  h.pi_gamma_a = 4.5;
  PriorHyper hb;
  apply_json(to_json(h), hb);
  CHECK(hb.pi_gamma_a == 4.5);
  CHECK_THROWS(apply_json(json{{"nonsense", 1}}, hb));
}

TEST_CASE("chain files round-trip exactly") {
  Dataset d;
  d.X = Eigen::MatrixXd::Random(12, 3);
  d.y = Eigen::VectorXd::LinSpaced(12, 0.5, 6.0);
  mcmc::McmcConfig c;
  c.n_iter = 200;
  c.burn_in = 100;
  c.thin = 10;
  for (Variant v : {Variant::TbsSg, Variant::TbsoSg, Variant::TbscnSg}) {
    const auto chain = mcmc::run_chain(d, {v}, PriorHyper{}, c);
    std::stringstream ss;
    write_chain(ss, chain, json{{"note", "x"}});
    const std::string text = ss.str();
    CHECK(std::count(text.begin(), text.end(), '\n') == 1 + static_cast<long>(chain.draws.size()));
    std::stringstream in(text);
    const auto back = read_chain(in);
    CHECK(back.same_draws(chain));
    CHECK(back.spec.variant == v);
    CHECK(back.config.n_iter == 200);
    std::stringstream again;
    write_chain(again, back, json{{"note", "x"}});
    CHECK(again.str() == text);
  }
  std::stringstream bad("{\"format\":\"other\"}\n");
  CHECK_THROWS(read_chain(bad));
}

TEST_CASE("summary json") {
  mcmc::ChainOutput ch;
  ch.spec = {Variant::TbsSg};
  for (int k = 0; k < 4; ++k) {
    ParamState s = ParamState::zeros(2, 2);
    s.z = {1, 0};
    s.theta << 0.5 * k, 0.0;
    ch.draws.push_back(s);
  }
  ch.acceptance_rates = {{"eta", 0.4}};
  const auto sum = mcmc::select_support(ch);
  const json j = summary_json(sum, ch, {{"a", "b"}, 1.5, 2.5});
  CHECK(j["support"] == json::array({1}));
  CHECK(j["coefficients"][0]["name"] == "a");
  CHECK(j["coefficients"][0]["index"] == 1);
  CHECK(j["coefficients"][1]["mean"].is_null());
  CHECK(j["ppl"] == 1.5);
  CHECK(j["acceptance"]["eta"] == 0.4);
  CHECK(dump(j).back() == '\n');
}

TEST_CASE("files") {
  const auto dir = std::filesystem::temp_directory_path() / "tbs_io_test" / "nested";
  std::filesystem::remove_all(dir.parent_path());
  write_file(dir / "f.txt", "hello\n");
  CHECK(read_file(dir / "f.txt") == "hello\n");
  Dataset d;
  d.X = Eigen::MatrixXd::Constant(2, 1, 0.25);
  d.y = Eigen::Vector2d(1.5, -2.0);
  d.column_names = {"x,1"};
  write_dataset_csv(dir / "d.csv", d);
  IngestOptions opt;
  const auto back = ingest_csv(dir / "d.csv", opt);
  CHECK(back.data.X == d.X);
  CHECK(back.data.y == d.y);
  CHECK(back.data.column_names == d.column_names);
  CHECK_THROWS(read_file(dir / "absent.txt"));
  std::filesystem::remove_all(dir.parent_path());
}
