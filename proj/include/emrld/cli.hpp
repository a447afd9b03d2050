#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "emrld/config.hpp"
#include "emrld/envs.hpp"

namespace emrld::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfigError = 2,
  kDemoError = 3,
  kNumericalError = 4,
  kBoundViolation = 5,
};

/// Flags override values loaded from `config_path`.
struct TrainOptions {
  std::string config_path;
  std::optional<std::string> env;
  std::optional<std::string> algorithm;
  std::optional<int> iterations;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
  std::optional<std::string> demos;
  std::optional<int> workers;
  std::optional<std::string> meta_grad_mode;
};

struct EvalOptions {
  std::string checkpoint;
  std::optional<std::string> env;
  std::string demos;
  int n_test_tasks = 20;
  int adapt_steps = 1;
  std::uint64_t seed = 1;
  std::uint64_t task_seed = 7;
  std::string output_dir = "runs/eval";
  std::optional<int> workers;
};

struct GenDemosOptions {
  std::string env = "point2d";
  std::string mode = "optimal";
  std::string out = "demos.jsonl";
  std::uint64_t seed = 1;
  int expert_iters = 300;
  int n_tasks = 0;  // 0: the environment's training task count
  std::string split = "train";
  std::uint64_t task_seed = 7;
  std::optional<int> workers;
};

struct VerifyBoundOptions {
  int n_instances = 500;
  std::uint64_t seed = 1;
  std::string out = "bound_report.json";
  std::optional<int> workers;
};

struct PlotOptions {
  std::vector<std::string> inputs;
  std::vector<std::string> labels;
  std::string kind = "curves";
  std::string out = "plot.svg";
  int step = -1;  // trajectories: adaptation step to draw, -1 for the last
};

/// Each command reports problems on `err` and returns an ExitCode.
int cmd_train(const TrainOptions& opt, std::ostream& out, std::ostream& err);
int cmd_eval(const EvalOptions& opt, std::ostream& out, std::ostream& err);
int cmd_gen_demos(const GenDemosOptions& opt, std::ostream& out, std::ostream& err);
int cmd_verify_bound(const VerifyBoundOptions& opt, std::ostream& out, std::ostream& err);
int cmd_plot(const PlotOptions& opt, std::ostream& out, std::ostream& err);

/// Training configuration after applying flag overrides; throws ConfigError.
RunConfig effective_train_config(const TrainOptions& opt);

/// Comma-separated table with a header row.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  int column(const std::string& name) const;  // -1 if absent
};

/// Throws std::invalid_argument on malformed or empty input.
CsvTable read_csv(const std::string& path);

/// Shortest round-trip decimal form.
std::string format_double(double v);

}  // namespace emrld::cli
