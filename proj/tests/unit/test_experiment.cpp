#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "misspec/experiment.hpp"

using namespace misspec;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = fs::path(MISSPEC_SOURCE_DIR) / "configs";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "misspec-test-experiment";
  fs::create_directories(dir);
  return dir / name;
}

const char* kQuadratic = R"([experiment]
problem = quadratic
scheme = joint-gradient
K = 100
theta0 = truth

[quadratic]
q_diag = 1, 1
theta_star = 1, 2

[schedule]
kind = constant
gamma = 0.5

[learning]
kind = constant
gamma = 0.5
)";

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_SUITE("experiment") {
  TEST_CASE("load a config from text") {
    const auto c = load_config(ConfigTable::parse_string(kQuadratic));
    CHECK(c.id == "experiment");
    CHECK(c.problem == ProblemKind::quadratic);
    CHECK(c.scheme == SchemeKind::joint_gradient);
    CHECK(c.K == 100);
    CHECK(c.seed == 1);
    CHECK(c.emit_bounds);
    CHECK(c.output.empty());
    CHECK(load_config_file(kConfigs / "edisp_cost.ini").id == "edisp_cost");
  }

  TEST_CASE("diagnostics name the line and field") {
    std::string text = kQuadratic;
    text.replace(text.find("joint-gradient"), 14, "newton");
    const auto msg = error_of([&] { load_config(ConfigTable::parse_string(text, "cfg.ini")); });
    CHECK(msg.find("cfg.ini:3: experiment.scheme") != std::string::npos);
    CHECK(msg.find("newton") != std::string::npos);

    text = kQuadratic;
    text.replace(text.find("K = 100"), 7, "K = lots");
    CHECK(error_of([&] { load_config(ConfigTable::parse_string(text, "cfg.ini")); }).find("cfg.ini:4: experiment.K") !=
          std::string::npos);

    CHECK(error_of([] { load_config(ConfigTable::parse_string("[experiment]\nscheme = tikhonov\n")); })
              .find("experiment.problem") != std::string::npos);
    CHECK(error_of([] {
            load_config(ConfigTable::parse_string("[experiment]\nproblem = quadratic\nscheme = extragradient\n"));
          }).find("needs a map") != std::string::npos);
    CHECK_THROWS_AS(ConfigTable::parse_string("[experiment\nproblem = quadratic\n"), ConfigError);
    CHECK_THROWS_AS(ConfigTable::parse_file(kConfigs / "missing.ini"), ConfigError);
  }

  TEST_CASE("unknown fields are rejected") {
    std::string text = kQuadratic;
    text += "gamme = 0.1\n";
    const auto c = load_config(ConfigTable::parse_string(text, "typo.ini"));
    const auto msg = error_of([&] { run_experiment(c); });
    CHECK(msg.find("typo.ini:18: learning.gamme: unknown field") != std::string::npos);
  }

  TEST_CASE("theta0 = theta* recovers the specified solution") {
    const auto r = run_experiment(load_config(ConfigTable::parse_string(kQuadratic)));
    REQUIRE(r.summary.ok);
    CHECK(r.summary.iterations == 100);
    CHECK(*r.summary.x_err <= 1e-10);
    CHECK(*r.summary.theta_err == 0.0);
  }

  TEST_CASE("five-generator dispatch run") {
    const auto r = run_experiment(load_config_file(kConfigs / "edisp_cost.ini"));
    REQUIRE(r.summary.ok);
    const auto& recs = r.trace.records;
    REQUIRE(recs.size() == 5001);
    for (std::size_t k = 1; k < recs.size(); ++k) {
      CHECK(recs[k].theta_err <= recs[k - 1].theta_err);
      CHECK(*recs[k].bound >= *recs[k].x_err);
    }
    CHECK(*recs.back().f_gap < *recs[1].f_gap);
    CHECK(*recs.back().f_gap < 1e-2 * *recs.front().f_gap);
  }

  TEST_CASE("joint beats sequential on the same instance and budget") {
    const auto joint = run_experiment(load_config_file(kConfigs / "edisp_cost.ini"));
    const auto seq = run_experiment(load_config_file(kConfigs / "edisp_sequential.ini"));
    REQUIRE(joint.summary.ok);
    REQUIRE(seq.summary.ok);
    CHECK(*joint.summary.f_gap <= *seq.summary.f_gap);
  }

  TEST_CASE("trace CSV round-trips to 15 significant digits") {
    auto c = load_config_file(kConfigs / "edisp_cost.ini");
    c.K = 300;
    c.output = scratch("roundtrip.csv");
    const auto r = run_experiment(c);
    const auto rows = read_trace_csv(c.output);
    REQUIRE(rows.size() == r.trace.records.size());
    auto close = [](double a, double b) { return std::abs(a - b) <= 1e-15 * std::max(std::abs(a), std::abs(b)); };
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& rec = r.trace.records[i];
      CHECK(rows[i].k == rec.k);
      CHECK(close(rows[i].theta_err, rec.theta_err));
      CHECK(close(*rows[i].x_err, *rec.x_err));
      CHECK(close(*rows[i].f_gap, *rec.f_gap));
      CHECK(close(*rows[i].bound, *rec.bound));
      CHECK(close(rows[i].gamma_f, rec.gamma_f));
      CHECK_FALSE(rows[i].vi_gap.has_value());
      CHECK_FALSE(rows[i].epsilon.has_value());
    }
    std::istringstream bad("k,theta_err\n1,2\n");
    CHECK_THROWS(read_trace_csv(bad));
  }

  TEST_CASE("identical config and seed give identical files") {
    auto c = load_config_file(kConfigs / "edisp_nonsmooth.ini");
    c.K = 500;
    c.output = scratch("a.csv");
    run_experiment(c);
    c.output = scratch("b.csv");
    run_experiment(c);
    CHECK(slurp(scratch("a.csv")) == slurp(scratch("b.csv")));
    c.seed += 1;
    c.output = scratch("c.csv");
    run_experiment(c);
    CHECK(slurp(scratch("a.csv")) != slurp(scratch("c.csv")));
  }

  TEST_CASE("sweep expansion") {
    std::string text = kQuadratic;
    text.replace(text.find("[experiment]"), 12, "[experiment]\nid = q");
    text += "[sweep]\nschedule.gamma = 0.1, 0.5, 1.0\nexperiment.K = 10,20\n";
    const auto configs = expand_sweep(ConfigTable::parse_string(text));
    REQUIRE(configs.size() == 6);
    CHECK(configs[0].id == "q_K-10_gamma-0.1");
    CHECK(configs[1].id == "q_K-10_gamma-0.5");
    CHECK(configs[5].id == "q_K-20_gamma-1.0");
    CHECK(configs[5].K == 20);
    CHECK(expand_sweep(ConfigTable::parse_string(kQuadratic)).size() == 1);
    CHECK_THROWS_AS(expand_sweep(ConfigTable::parse_string(std::string(kQuadratic) + "[sweep]\nexperiment.K =\n")),
                    ConfigError);

    const auto s1 = run_sweep(configs, 1);
    const auto s4 = run_sweep(configs, 4);
    std::ostringstream a, b;
    write_summary_csv(s1, a);
    write_summary_csv(s4, b);
    CHECK(a.str() == b.str());
    CHECK(s1[3].id == configs[3].id);
    CHECK(s1[3].ok);
  }

  TEST_CASE("empty sweep gives an empty table") {
    const auto s = run_sweep({}, 8);
    CHECK(s.empty());
    std::ostringstream out;
    write_summary_csv(s, out);
    CHECK(out.str() == "id,problem,scheme,K,iterations,status,theta_err,x_err,f_gap,avg_gap,vi_gap,bound,error\n");
  }

  TEST_CASE("a failing run is reported and keeps its partial trace") {
    std::string text = kQuadratic;
    text.replace(text.find("gamma = 0.5"), 11, "gamma = 50");
    auto c = load_config(ConfigTable::parse_string(text));
    CHECK_FALSE(run_experiment(c).summary.ok);  // inadmissible step

    text.replace(text.find("theta0 = truth"), 14, "theta0 = truth\noverride_steplength_checks = true");
    text.replace(text.find("theta_star"), 10, "box_lower = -inf\nbox_upper = inf\ntheta_star");
    c = load_config(ConfigTable::parse_string(text));
    c.K = 5000;
    c.output = scratch("diverged.csv");
    const auto r = run_experiment(c);
    CHECK_FALSE(r.summary.ok);
    INFO(r.summary.error);
    CHECK(r.summary.error.find("diverged") != std::string::npos);
    CHECK(fs::exists(c.output));
    CHECK(read_trace_csv(c.output).size() == r.trace.records.size());
    CHECK(!r.trace.records.empty());
  }

  TEST_CASE("summary line and emit_bounds") {
    auto c = load_config_file(kConfigs / "edisp_cost.ini");
    c.K = 20;
    c.emit_bounds = false;
    const auto r = run_experiment(c);
    CHECK_FALSE(r.trace.final().bound.has_value());
    const auto line = summary_line(r.summary);
    CHECK(line.find("edisp_cost") != std::string::npos);
    CHECK(line.find("joint-gradient") != std::string::npos);
  }
}
