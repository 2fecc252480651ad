#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "cumlab/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"cumlab: spiked cumulant numerical laboratory"};
  app.set_version_flag("--version", cumlab::version_string());
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = ".";
  int jobs = 1;
  std::vector<int> points;

  for (const auto& kind : cumlab::experiment_kinds()) {
    auto* sub = app.add_subcommand(kind, "run the " + kind + " experiment");
    sub->add_option("--config", config_path, "JSON config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--points", points, "only run these grid point ids");
  }
  auto* plot = app.add_subcommand("emit-plotdata", "aggregate runs into mean/sd per grid point");
  plot->add_option("--out", out_dir, "results directory written by an experiment");
  plot->add_option("--config", config_path, "ignored; accepted for a uniform interface");
  plot->add_option("--jobs", jobs, "ignored");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : cumlab::kExitConfigError;
  }

  const std::string kind = app.get_subcommands().front()->get_name();
  try {
    if (kind == "emit-plotdata") return cumlab::emit_plotdata(out_dir);
    cumlab::json cfg;
    {
      std::ifstream is(config_path);
      try {
        cfg = cumlab::json::parse(is);
      } catch (const cumlab::json::parse_error& e) {
        throw cumlab::ConfigError(std::string("cannot parse config: ") + e.what());
      }
    }
    cumlab::RunOptions opts;
    opts.out_dir = out_dir;
    opts.jobs = jobs;
    opts.only_points = points;
    opts.seed_override = cumlab::seed_from_env();
    int rc = cumlab::run_experiment(kind, cfg, opts);
    if (rc != cumlab::kExitOk) std::cerr << "cumlab: some grid points failed, see " << out_dir << "/errors.csv\n";
    return rc;
  } catch (const cumlab::ConfigError& e) {
    std::cerr << "cumlab: config error: " << e.what() << '\n';
    return cumlab::kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "cumlab: " << e.what() << '\n';
    return cumlab::kExitPartialFailure;
  }
}
