// Experiment driver: sweeps transmit power, cluster size and precoding
// method over Monte-Carlo channel draws and writes the results as CSV.

#include <CLI11.hpp>
#include <iostream>

#include "ucn/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Weighted-sum-rate precoder design for user-centric network "
               "massive MIMO (Riemannian conjugate gradient)"};

  std::string config_path;
  std::string out_dir;
  std::string methods;
  std::uint64_t seed = 0;
  int trials = 0;
  bool trajectory = false;

  app.add_option("--config", config_path, "experiment config file")
      ->required();
  app.add_option("--seed", seed, "override the master RNG seed");
  app.add_option("--out", out_dir, "override the output directory");
  app.add_option("--methods", methods,
                 "override the method list (comma separated)");
  app.add_option("--trials", trials, "override the Monte-Carlo trial count");
  app.add_flag("--trajectory", trajectory,
               "write per-iteration trajectory CSVs");

  CLI11_PARSE(app, argc, argv);

  try {
    ucn::ExperimentSpec spec = ucn::load_experiment_spec(config_path);
    if (app.count("--seed")) spec.seed = seed;
    if (app.count("--out")) spec.out_dir = out_dir;
    if (app.count("--trials")) spec.trials = trials;
    if (app.count("--methods"))
      spec.methods = ucn::detail::split_list(methods);
    if (trajectory) spec.trajectory = true;

    const ucn::ExperimentOutput out = ucn::run_experiment(spec);
    std::cout << "wrote " << out.results_path << "\n"
              << "wrote " << out.summary_path << "\n";
    for (const auto& p : out.trajectory_paths) std::cout << "wrote " << p << "\n";
    std::cout << out.report_text;
    return 0;
  } catch (const ucn::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 2;
  }
}
