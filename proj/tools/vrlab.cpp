#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "vrlab/config.hpp"
#include "vrlab/errors.hpp"
#include "vrlab/runner.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("config", args.config_path, "experiment config file")
      ->required();
  cmd->add_option("--seed", args.seed, "master seed override");
  cmd->add_option("--out-dir", args.out_dir, "output directory override");
  cmd->add_option("--override", args.overrides,
                  "key=value or section.key=value override, repeatable");
}

vrlab::runner::ExperimentConfig load_config(const CommonArgs& args) {
  auto cfg = vrlab::runner::parse_config_file(args.config_path);
  for (const std::string& assignment : args.overrides)
    vrlab::runner::apply_override(cfg, assignment);
  if (args.seed) cfg.seed = *args.seed;
  if (args.out_dir) cfg.out_dir = *args.out_dir;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"finite-sum variance reduction laboratory"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string figure_name, csv_path, plot_out;

  CLI::App* run_cmd = app.add_subcommand("run", "train per the config");
  add_common(run_cmd, args);
  CLI::App* variance_cmd =
      app.add_subcommand("variance-scan", "measure variance ratios at the "
                                          "configured within-epoch fractions");
  add_common(variance_cmd, args);
  CLI::App* curvature_cmd = app.add_subcommand(
      "curvature-scan", "measure iterate distance and empirical curvature");
  add_common(curvature_cmd, args);

  CLI::App* plot_cmd =
      app.add_subcommand("plot", "turn a metrics CSV into plot-ready columns");
  plot_cmd
      ->add_option("figure", figure_name,
                   "variance_ratio, distance, curvature or test_error")
      ->required();
  plot_cmd->add_option("csv", csv_path, "metrics CSV file")->required();
  plot_cmd->add_option("out", plot_out, "output file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*run_cmd) {
      const auto cfg = load_config(args);
      vrlab::runner::run_experiment(cfg);
      std::cout << "wrote " << vrlab::runner::metrics_path(cfg) << '\n';
    } else if (*variance_cmd) {
      const auto cfg = load_config(args);
      vrlab::runner::run_variance_scan(cfg);
      std::cout << "wrote " << cfg.out_dir << '/' << cfg.run_id
                << "_variance.csv\n";
    } else if (*curvature_cmd) {
      const auto cfg = load_config(args);
      vrlab::runner::run_curvature_scan(cfg);
      std::cout << "wrote " << cfg.out_dir << '/' << cfg.run_id
                << "_curvature.csv\n";
    } else if (*plot_cmd) {
      const auto records = vrlab::runner::read_metrics_csv(csv_path);
      vrlab::runner::emit_plot_data(records,
                                    vrlab::runner::parse_figure(figure_name),
                                    plot_out);
      std::cout << "wrote " << plot_out << '\n';
    }
  } catch (const vrlab::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
