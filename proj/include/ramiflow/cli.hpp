#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ramiflow/io.hpp"

namespace ramiflow {

/// One experiment: a task name plus its JSON parameters. Inputs ("graph",
/// "plan", "measure", "source", "sink") are inline JSON objects or paths
/// relative to base_dir; "cost" is a cost object.
struct ExperimentConfig {
  std::string task;
  io::Json params = io::Json::object();
  std::string base_dir = ".";
  std::string out;  // empty: write to the output stream
  std::uint64_t seed = 0;
};

const std::vector<std::string>& task_names();

/// Reads a config file; "task", "out" and "seed" become fields, the rest stay
/// in params. Throws ParseError.
ExperimentConfig load_config(const std::string& path);

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitValidation = 2;

/// Runs the task. The JSON result (or SVG for `render`) goes to config.out
/// or to `out`; errors are reported on `err` as {"error": code, "message": ..}.
/// Returns 0 on success, 2 when validation or a reproduction check fails, 1
/// on any other error.
int run(const ExperimentConfig& config, std::ostream& out, std::ostream& err);

}  // namespace ramiflow
