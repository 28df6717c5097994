// Runs one experiment and writes its report.
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "dpgmg/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"DPG multigrid experiment driver"};
  std::string config_file;
  std::vector<std::pair<std::string, std::string>> overrides;
  app.add_option("--config", config_file, "key = value file; flags override it")->check(CLI::ExistingFile);

  const std::vector<std::pair<std::string, std::string>> flags{
      {"problem", "poisson | stokes | navier-stokes | cavity | cavity-ns"},
      {"dim", "spatial dimension (1 or 2)"},
      {"k", "field polynomial order"},
      {"delta-k", "test enrichment (default: dim)"},
      {"width", "elements per side of the fine mesh"},
      {"coarse-width", "root grid width of multilevel runs"},
      {"two-grid", "none | h | p"},
      {"k-coarse", "order of the coarsest hierarchy level"},
      {"skip-intermediate-p", "true | false"},
      {"tol", "relative residual tolerance of CG"},
      {"overlap-h", "Schwarz overlap on h levels (0 or 1)"},
      {"overlap-p", "Schwarz overlap on p levels (0 or 1)"},
      {"sigma-mode", "aggressive | conservative"},
      {"adaptive", "true | false"},
      {"refs", "number of adaptive refinements"},
      {"fraction", "greedy refinement fraction"},
      {"guess", "zero | previous | both"},
      {"re", "Reynolds number"},
      {"newton-eps0", "initial Newton increment threshold"},
      {"newton-max-steps", "Newton step cap"},
      {"out", "report path (stdout when empty)"},
      {"format", "json | csv"},
  };
  std::map<std::string, std::string> values;
  for (const auto& [name, help] : flags) app.add_option("--" + name, values[name], help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  dpgmg::ExperimentConfig cfg;
  try {
    if (!config_file.empty()) {
      std::ifstream in(config_file);
      std::stringstream ss;
      ss << in.rdbuf();
      cfg = dpgmg::parse_config(ss.str());
    }
    for (const auto& [name, help] : flags)
      if (app.count("--" + name) > 0) cfg.set(name, values[name]);
    cfg.validate();
  } catch (const std::exception& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 1;
  }

  try {
    const dpgmg::TableReport rep = dpgmg::run_experiment(cfg);
    if (cfg.out.empty())
      std::cout << dpgmg::format_report(rep, cfg.format);
    else
      dpgmg::write_report(rep, cfg.out, cfg.format);
    return rep.all_converged() ? 0 : 2;
  } catch (const dpgmg::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
