#include "langevin/cli.hpp"

#include <filesystem>
#include <fstream>
#include <optional>

#include "CLI11.hpp"
#include "langevin/errors.hpp"
#include "langevin/experiments.hpp"

namespace langevin {

namespace {

namespace fs = std::filesystem;

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
}

void write_histogram(const fs::path& path, const std::vector<HistogramBin>& bins) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f.precision(17);
  f << "bin_left\tbin_right\tcount\n";
  for (const auto& b : bins) f << b.left << '\t' << b.right << '\t' << b.count << '\n';
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Classical and relativistic Langevin dynamics with singular interactions"};
  app.require_subcommand(1);

  struct Args {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out_dir = ".";
  };
  Args args;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"simulate", "Run one trajectory and write timeseries.tsv"},
      {"ergodicity", "Marginal KS distances along long runs"},
      {"small-mass", "Coupled small-mass limit against the overdamped system"},
      {"newtonian", "Coupled Newtonian limit of the relativistic system"},
      {"gamma3-band", "Ensemble mean of sup Gamma_3 across epsilon"},
      {"lemmas", "Random-trial suites for the auxiliary inequalities"},
      {"certify-drift", "Fit the Lyapunov drift inequality on a sample plan"},
      {"audit-potentials", "Sample the potential growth conditions"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("config", args.config, "flat key = value config file")->required();
    sub->add_option("--seed", args.seed, "override the config seed");
    sub->add_option("--out", args.out_dir, "output directory");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitPass : kExitConfig;
  }
  const std::string cmd = app.get_subcommands().front()->get_name();

  RunConfig rc;
  try {
    rc = load_run_config(args.config);
    if (args.seed) rc.model.seed = *args.seed;
    fs::create_directories(args.out_dir);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const fs::filesystem_error& e) {
    err << "cannot create output directory: " << e.what() << "\n";
    return kExitConfig;
  }
  const fs::path dir(args.out_dir);

  try {
    ExperimentReport rep;
    if (cmd == "simulate") {
      std::ofstream ts(dir / "timeseries.tsv", std::ios::binary);
      if (!ts) throw std::runtime_error("cannot write timeseries.tsv");
      rep = run_simulate(rc, &ts);
    } else if (cmd == "ergodicity") {
      rep = run_ergodicity(rc);
      write_histogram(dir / "histogram.tsv", rep.histogram);
    } else if (cmd == "small-mass") {
      rep = run_small_mass(rc);
    } else if (cmd == "newtonian") {
      rep = run_newtonian(rc);
    } else if (cmd == "gamma3-band") {
      rep = run_gamma3_band(rc);
    } else if (cmd == "lemmas") {
      rep = run_lemma_suite(rc);
    } else if (cmd == "certify-drift") {
      rep = run_certify_drift(rc);
    } else {
      rep = run_audit(rc);
    }
    const fs::path report = dir / (cmd + "_report.json");
    write_file(report, rep.dump());
    out << cmd << ": " << (rep.pass ? "pass" : "FAIL") << " (" << report.string() << ")\n";
    return rep.pass ? kExitPass : kExitThreshold;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const KindError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const SimulationAborted& e) {
    err << cmd << ": aborted at step " << e.step << ": " << e.what() << "\n";
    return kExitThreshold;
  }
}

}  // namespace langevin
