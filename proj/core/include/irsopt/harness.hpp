#pragma once

#include <map>
#include <string>
#include <vector>

#include "irsopt/agent.hpp"
#include "irsopt/env.hpp"
#include "irsopt/optim.hpp"

namespace irsopt {

enum class Method { kDrl, kVamp, kAdmm, kBcd, kRandom, kOracle };

std::string method_name(Method m);
Method method_from_name(const std::string& name);

// Raised for malformed configs; the CLI maps it to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// Raised when a DRL experiment lacks a usable checkpoint; exit code 3.
struct MissingCheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  std::string experiment = "snr-vs-m";
  std::vector<double> sweep;       // M list | eps list | delta_d list
  int trials = 100;
  std::vector<Method> methods = {Method::kVamp, Method::kAdmm, Method::kRandom};
  std::uint64_t seed = 1;
  std::string checkpoint;          // "{M}" expands to the sweep value
  std::string out_dir = ".";

  EnvConfig env;
  SolverConfig solver;
  AgentConfig agent;
  NoiseState noise;

  bool requery_on_perturbed = false;  // robustness: re-query DRL on perturbed CSI
  int grid_levels = 64;
  int drl_rollout = 10;
};

struct ResultRow {
  std::string method;
  double sweep_value = 0.0;
  int trial = 0;
  double snr_db = 0.0;
  double snr_loss_db = 0.0;
  bool has_loss = false;
  double wall_time_ms = 0.0;
};

struct ResultTable {
  std::vector<ResultRow> rows;
  std::map<std::string, std::string> meta;
};

// Achieved MRT SNR of each method vs number of IRS elements.
ResultTable run_snr_vs_m(const ExperimentConfig& cfg);
// Freeze-then-re-evaluate under Gauss-Markov CSI perturbation.
ResultTable run_robust_noise(const ExperimentConfig& cfg);
// Freeze-then-re-evaluate under user mobility.
ResultTable run_robust_mobility(const ExperimentConfig& cfg);
// Mean per-query time of 30-iteration solvers vs one DRL forward.
ResultTable bench_inference(const ExperimentConfig& cfg);

// Header: method,sweep_value,trial,snr_db,snr_loss_db,wall_time_ms.
void write_csv(const ResultTable& table, const std::string& path);
std::string csv_string(const ResultTable& table);
void write_manifest(const ExperimentConfig& cfg, const ResultTable& table,
                    const std::string& path);

// Split M into a near-square IRS grid (exact factorization).
FadingParams fading_for_m(const FadingParams& base, int m);

// Config file in JSON (.json) or flat TOML syntax.
ExperimentConfig load_config(const std::string& path);

int cli_main(int argc, const char* const* argv);

}  // namespace irsopt
