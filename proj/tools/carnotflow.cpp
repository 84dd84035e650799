#include "carnotflow/cli_runner.hpp"

#include "CLI11.hpp"

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Horizontal Gauss curvature flow experiments on Carnot groups"};
  app.require_subcommand(1);

  std::vector<std::string> configs;
  std::string out;
  double tol = 0.0;
  const std::pair<const char*, const char*> commands[] = {
      {"simulate", "evolve the graph flow and write snapshots"},
      {"verify", "run oracle and identity checks"},
      {"compare", "evolve two ordered runs and check the ordering"}};
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", configs, "experiment config (compare accepts two)")->required();
    sub->add_option("--out", out, "output directory, overrides output_dir");
    sub->add_option("--tol", tol, "tolerance override");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : carnotflow::exit_code::config_error;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  const CLI::App* sub = app.get_subcommand(command);
  std::vector<std::filesystem::path> paths(configs.begin(), configs.end());
  std::optional<std::filesystem::path> out_dir;
  std::optional<double> tol_override;
  if (sub->count("--out")) out_dir = out;
  if (sub->count("--tol")) tol_override = tol;
  try {
    return carnotflow::run_command(command, paths, out_dir, tol_override, std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return carnotflow::exit_code::config_error;
  }
}
