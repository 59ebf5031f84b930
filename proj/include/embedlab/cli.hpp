#pragma once

// Command layer behind the embedlab executable. Every subcommand is a
// function of its arguments and files; run_cli() parses the command line,
// dispatches and maps failures to exit codes.

#include "embedlab/io.hpp"
#include "embedlab/landscape.hpp"
#include "embedlab/two_stage.hpp"

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

namespace embedlab {

inline constexpr int kExitOk = 0;
inline constexpr int kExitVerificationFailed = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumerical = 3;

/// Config file:
/// {"widths":[1,4,1], "activation":"tanh", "loss":"mse",
///  "dataset":"data.json" | {"kind":"tanh_bumps"|"teacher", "n":30, "noise":0, "seed":0},
///  "optimizer":{"lr":0.05, "max_iters":200000, "grad_tol":1e-8, "init_scale":0.5, "polish":true},
///  "seed":0, "embedding":"spec.json", "output_dir":"out", "trace_stride":1,
///  "two_stage":{...}}
/// Relative paths resolve against the config file's directory.
struct ExperimentConfig {
  std::optional<NetShape> shape;
  std::string activation = "tanh";
  std::string loss = "mse";
  std::optional<std::filesystem::path> dataset_path;
  SyntheticSpec synthetic;
  DescentOptions optimizer;
  std::optional<std::filesystem::path> embedding_path;
  std::filesystem::path output_dir = "out";
  std::size_t trace_stride = 1;
  TwoStageConfig two_stage = default_two_stage_config();
};

ExperimentConfig config_from_json(const Json& j, const std::filesystem::path& base_dir);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Loads the dataset file or generates the synthetic set for the config's shape.
Dataset resolve_dataset(const ExperimentConfig& cfg);

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace embedlab
