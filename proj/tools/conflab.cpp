// conflab verify <file> [--levels L1,L2,...] [--tol T] [--format text|machine] [--out PATH]
//
// Exit status: 0 all scenarios pass, 1 an identity failed, 2 configuration
// or precondition error. CONFLAB_THREADS sets the worker count.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "conflab/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Numerical verification of conformal-geometry integral identities"};
  app.require_subcommand(1);
  auto* verify = app.add_subcommand("verify", "Run the scenarios in a scenario file");
  std::string path, format = "text", out;
  std::vector<int> levels;
  double tol = 0.0;
  verify->add_option("file", path, "Scenario file")->required();
  auto* levels_opt = verify->add_option("--levels", levels, "Grid levels, overriding the file")->delimiter(',');
  auto* tol_opt = verify->add_option("--tol", tol, "Identity tolerance, overriding the file");
  verify->add_option("--format", format, "Report format")
      ->check(CLI::IsMember({"text", "machine", "json"}));
  verify->add_option("--out", out, "Write the report here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  conflab::RunOptions opt;
  if (levels_opt->count()) opt.levels = levels;
  if (tol_opt->count()) opt.tol = tol;
  const auto report = conflab::run_scenario(path, opt);
  const auto fmt = format == "text" ? conflab::ReportFormat::text : conflab::ReportFormat::machine;
  const std::string text = conflab::emit_report(report, fmt);
  if (out.empty()) {
    std::cout << text;
  } else {
    std::ofstream f(out);
    if (!f) {
      std::cerr << "cannot write " << out << "\n";
      return 2;
    }
    f << text;
  }
  if (!report.error.empty()) std::cerr << "error: " << report.error << "\n";
  return report.exit_code();
}
