#include <gtest/gtest.h>

#include "conflab/runner.hpp"

using namespace conflab;

namespace {

const char* kKw = R"(
# comment line
[[scenario]]
name = "kw"              # trailing comment
manifold = "perturbed_sphere"
manifold.n = 2
manifold.a0 = 0.1
manifold.a1 = 0.05
vector_field = "boost"
quantity = "scalar_curvature"
identity = "kazdan_warner"
levels = [2, 3, 4]
tol = 1e-6
)";

std::string parse_error(const std::string& text) {
  try {
    parse_scenarios(text, "s.toml");
  } catch (const ScenarioError& e) {
    return e.what();
  }
  return "";
}

RunReport run_text(const std::string& text, const RunOptions& opt = {}) {
  return run_scenarios(parse_scenarios(text, "s.toml"), opt);
}

}  // namespace

TEST(ScenarioParse, FieldsAndParams) {
  const auto f = parse_scenarios(kKw, "s.toml");
  ASSERT_EQ(f.scenarios.size(), 1u);
  const auto& s = f.scenarios[0];
  EXPECT_EQ(s.name, "kw");
  EXPECT_EQ(s.line, 3);
  EXPECT_EQ(s.manifold, "perturbed_sphere");
  EXPECT_EQ(s.manifold_params.at("n"), 2.0);
  EXPECT_EQ(s.manifold_params.at("a1"), 0.05);
  EXPECT_EQ(s.levels, (std::vector<int>{2, 3, 4}));
  EXPECT_EQ(s.tol, 1e-6);
  EXPECT_TRUE(parse_scenarios("", "e").scenarios.empty());
  EXPECT_TRUE(parse_scenarios("# nothing\n\n", "e").scenarios.empty());
}

TEST(ScenarioParse, ErrorsCarryPositions) {
  const std::string head = "[[scenario]]\nname = \"a\"\nidentity = \"kazdan_warner\"\n";
  EXPECT_EQ(parse_error(head + "colour = \"red\"\n"), "s.toml:4:1: unknown key 'colour'");
  EXPECT_EQ(parse_error(head + "tol = \"small\"\n"), "s.toml:4:1: 'tol' must be a number");
  EXPECT_EQ(parse_error(head + "levels = [3, 2]\n"), "s.toml:4:1: levels must be strictly increasing");
  EXPECT_EQ(parse_error(head + "levels = [1.5]\n"), "s.toml:4:1: levels must be non-negative integers");
  EXPECT_EQ(parse_error(head + "manifold = \"x\n"), "s.toml:4:12: unterminated string");
  EXPECT_EQ(parse_error(head + "tol = 1e-6 7\n"), "s.toml:4:12: trailing characters after value");
  EXPECT_EQ(parse_error(head + "tol 1e-6\n"), "s.toml:4:5: expected '='");
  EXPECT_EQ(parse_error(head + "manifold.a.b = 1\n"), "s.toml:4:11: keys nest at most one level");
  EXPECT_EQ(parse_error(head + "colour.n = 1\n"), "s.toml:4:1: unknown parameter group 'colour'");
  EXPECT_EQ(parse_error(head + "manifold.n = \"two\"\n"), "s.toml:4:1: 'manifold.n' must be a number");
  EXPECT_EQ(parse_error(head + "name = \"b\"\n"), "s.toml:4:1: duplicate key 'name'");
  EXPECT_EQ(parse_error("tol = 1\n"), "s.toml:1:1: key outside a [[scenario]] block");
  EXPECT_EQ(parse_error("[[other]]\n"), "s.toml:1:3: only [[scenario]] blocks are allowed");
  EXPECT_EQ(parse_error(head + head), "s.toml:4:1: duplicate scenario name 'a'");
  EXPECT_EQ(parse_error("[[scenario]]\nname = \"a\"\n"), "s.toml:1:1: scenario 'a' has no identity");
  EXPECT_THROW(load_scenarios("/nonexistent/file.toml"), ScenarioError);
}

TEST(ScenarioRun, EmptySuitePasses) {
  const auto r = run_text("");
  EXPECT_EQ(r.suite_verdict(), Verdict::pass);
  EXPECT_EQ(r.exit_code(), 0);
  const auto text = emit_report(r, ReportFormat::text);
  EXPECT_EQ(text.substr(0, text.find('\n')).find("scenario"), 0u);
  EXPECT_NE(emit_report(r, ReportFormat::machine).find("\"scenarios\": []"), std::string::npos);
}

TEST(ScenarioRun, KazdanWarnerOnS2RefinesAndPasses) {
  const auto r = run_text(kKw);
  ASSERT_EQ(r.results.size(), 1u);
  const auto& rep = r.results[0].report;
  EXPECT_EQ(rep.verdict, Verdict::pass);
  EXPECT_EQ(r.exit_code(), 0);
  ASSERT_EQ(rep.history.size(), 3u);
  for (std::size_t i = 1; i < rep.history.size(); ++i) {
    const double prev = rep.history[i - 1].rel_residual, cur = rep.history[i].rel_residual;
    EXPECT_TRUE(cur <= 0.5 * prev || cur < 1e-15) << cur << " vs " << prev;
  }
  const auto machine = emit_report(r, ReportFormat::machine);
  EXPECT_NE(machine.find("\"verdict\": \"pass\""), std::string::npos);
  EXPECT_EQ(machine, emit_report(run_text(kKw), ReportFormat::machine));
}

TEST(ScenarioRun, MisspelledManifoldIsAConfigurationError) {
  std::string text = kKw;
  text.replace(text.find("perturbed_sphere"), 16, "perturbed_shpere");
  const auto r = run_text(text);
  EXPECT_EQ(r.exit_code(), 2);
  EXPECT_TRUE(r.results.empty());
  EXPECT_NE(r.error.find("unknown manifold 'perturbed_shpere'"), std::string::npos) << r.error;
  EXPECT_NE(r.error.find("s.toml:3: scenario 'kw'"), std::string::npos) << r.error;
}

TEST(ScenarioRun, UnknownVocabularyIsRejected) {
  std::string text = kKw;
  text.replace(text.find("\"boost\""), 7, "\"twist\"");
  EXPECT_EQ(run_text(text).exit_code(), 2);
  text = kKw;
  text.replace(text.find("scalar_curvature"), 16, "scalar_curvatur");
  EXPECT_EQ(run_text(text).exit_code(), 2);
  text = kKw;
  text.replace(text.find("kazdan_warner"), 13, "kazdan_warne");
  EXPECT_NE(run_text(text).error.find("unknown identity"), std::string::npos);
  text = kKw;
  text += "manifold.radius = 2\n";
  EXPECT_NE(run_text(text).error.find("unknown parameter 'radius'"), std::string::npos);
}

TEST(ScenarioRun, FailingScenarioReportsResidualAndTolerance) {
  const std::string text = R"(
[[scenario]]
name = "tight"
manifold = "unit_ball"
manifold.n = 3
quantity = "power"
quantity.p = 3
identity = "pohozaev"
levels = [0]
tol = 1e-15
)";
  const auto r = run_text(text);
  ASSERT_EQ(r.results.size(), 1u);
  EXPECT_EQ(r.results[0].report.verdict, Verdict::fail);
  EXPECT_EQ(r.exit_code(), 1);
  const auto m = emit_report(r, ReportFormat::machine);
  EXPECT_NE(m.find("\"verdict\": \"fail\""), std::string::npos);
  EXPECT_NE(m.find("\"rel_residual\": "), std::string::npos);
  EXPECT_NE(m.find("\"tolerance\": 1.0000000000000001e-15"), std::string::npos);
  EXPECT_NE(emit_report(r, ReportFormat::text).find("fail"), std::string::npos);

  // The same scenario passes at a reasonable tolerance and tighter ODE levels.
  RunOptions opt;
  opt.tol = 1e-4;
  opt.levels = std::vector<int>{2, 4};
  const auto ok = run_text(text, opt);
  EXPECT_EQ(ok.exit_code(), 0);
  EXPECT_EQ(ok.results[0].report.history.size(), 2u);
}

TEST(ScenarioRun, NonConservedTensorStopsAtTheGate) {
  const std::string text = R"(
[[scenario]]
name = "ricci"
manifold = "hemisphere_cap"
manifold.n = 3
manifold.theta0 = 1.9
manifold.a0 = 0.1
manifold.b0 = -0.06
vector_field = "boost"
quantity = "ricci"
identity = "pohozaev_schoen"
levels = [2]
tol = 1e-4
)";
  const auto r = run_text(text);
  ASSERT_EQ(r.results.size(), 1u);
  EXPECT_EQ(r.results[0].report.verdict, Verdict::precondition_failed);
  EXPECT_EQ(r.exit_code(), 2);
}

TEST(ScenarioRun, ResultsAreOrderedByName) {
  const std::string text = R"(
[[scenario]]
name = "zeta"
manifold = "ellipsoid"
quantity = "codazzi_tensor"
identity = "codazzi"
[[scenario]]
name = "alpha"
manifold = "torus"
quantity = "codazzi_tensor"
identity = "codazzi"
)";
  const auto r = run_text(text);
  ASSERT_EQ(r.results.size(), 2u);
  EXPECT_EQ(r.results[0].scenario, "alpha");
  EXPECT_EQ(r.results[1].scenario, "zeta");
  EXPECT_EQ(r.exit_code(), 0);
}

TEST(ScenarioRun, IdentityRequirementsAreCheckedBeforeRunning) {
  // Kazdan-Warner on a chart with boundary and conserved currents without faces.
  const std::string cap = R"(
[[scenario]]
name = "kw_cap"
manifold = "hemisphere_cap"
vector_field = "boost"
quantity = "scalar_curvature"
identity = "kazdan_warner"
)";
  EXPECT_NE(run_text(cap).error.find("closed manifold"), std::string::npos);
  const std::string flux = R"(
[[scenario]]
name = "flux"
manifold = "flat_annulus"
vector_field = "rotation"
quantity = "metric"
identity = "conserved_current"
)";
  EXPECT_NE(run_text(flux).error.find("faces"), std::string::npos);
  RunOptions bad;
  bad.levels = std::vector<int>{3, 3};
  EXPECT_EQ(run_text(kKw, bad).exit_code(), 2);
}
