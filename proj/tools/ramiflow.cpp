#include <CLI11.hpp>

#include <iostream>

#include "ramiflow/cli.hpp"
#include "ramiflow/errors.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Transport networks between atomic measures"};
  std::string task;
  std::string config_path;
  std::string out;
  std::uint64_t seed = 0;
  app.add_option("task", task, "Task; overrides the config's \"task\"")
      ->check(CLI::IsMember(ramiflow::task_names()));
  app.add_option("--config,-c", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "Random seed (default 0)");
  app.add_option("--out,-o", out, "Output file (default stdout)");
  CLI11_PARSE(app, argc, argv);

  ramiflow::ExperimentConfig config;
  try {
    config = ramiflow::load_config(config_path);
  } catch (const ramiflow::Error& e) {
    std::cerr << "{\"error\":\"" << ramiflow::code_name(e.code()) << "\",\"message\":" << ramiflow::io::Json(e.what()).dump()
              << "}\n";
    return ramiflow::kExitError;
  }
  if (!task.empty()) config.task = task;
  if (*seed_opt) config.seed = seed;
  if (!out.empty()) config.out = out;
  if (config.task.empty()) {
    std::cerr << "{\"error\":\"InvalidArgument\",\"message\":\"no task given\"}\n";
    return ramiflow::kExitError;
  }
  return ramiflow::run(config, std::cout, std::cerr);
}
