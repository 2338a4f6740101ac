#pragma once

#include "pdediff/interpolate.hpp"
#include "pdediff/net.hpp"
#include "pdediff/pdesolve.hpp"
#include "pdediff/sde.hpp"
#include "pdediff/train.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace pdediff {

enum class SamplerKind { AR, AAO };

std::string to_string(SamplerKind k);
SamplerKind parse_sampler_kind(const std::string& name);

struct SampleConfig {
  bool operator==(const SampleConfig&) const = default;
  SamplerKind sampler = SamplerKind::AR;
  int P = 4;
  int C = 1;
  int corrector_steps = 0;
  double corrector_snr = 0.1;
  TimeGrid time_grid;
  double t_min = 1e-3;  // t_max comes from the checkpoint
  GuidanceConfig guidance;
  int chunk = 256;
  bool threshold = false;
  double threshold_percentile = 99.5;
};

struct TaskConfig {
  bool operator==(const TaskConfig&) const = default;
  std::uint64_t seed = 0;
  int threads = 1;
  int n_eval = 16;            // test trajectories scored by forecast / DA commands
  int length = 0;             // rollout length; 0 uses the test length
  double sigma_y = 0.01;      // observation noise of generated measurements
  int n_initial_full = -1;    // fully observed leading states in offline DA; -1 uses C
  std::vector<double> proportions{0.001, 0.0031622776601683794, 0.01, 0.031622776601683794, 0.1,
                                  0.31622776601683794};
  std::vector<double> gammas;            // per-proportion overrides, empty for none
  std::vector<double> guidance_sigma_ys;  // per-proportion overrides, empty for none
  int online_s = 10;
  int online_f = 80;
  double online_proportion = 0.1;
  double online_first_fraction = 0.1;
  std::vector<std::pair<int, int>> pc_grid;  // (P, C) pairs swept by forecast
  bool compare_aao = false;
  int aao_corrector_steps = 0;
  double rho_threshold = 0.8;
  std::vector<InterpMethod> interp_methods{InterpMethod::Linear, InterpMethod::Cubic, InterpMethod::Nearest};
  bool climatology = true;
  bool persistence = true;
};

struct ExperimentConfig {
  bool operator==(const ExperimentConfig&) const = default;
  DatasetSpec data;
  std::string data_dir = "data";
  NetConfig net;
  std::string checkpoint = "model.pdck";
  TrainConfig train;
  bool resume = false;
  int stop_after = 0;  // epochs run by one train invocation, 0 for all
  SampleConfig sample;
  TaskConfig task;
};

/// Line-oriented `key = value` text with [data] [model] [train] [sample] [task] headers and
/// `#` comments. Missing keys keep their defaults; unknown keys and sections are usage errors.
ExperimentConfig parse_config(const std::string& text);
std::string render_config(const ExperimentConfig& cfg);

/// Sets one field from its "section.key" name, e.g. set_config_value(c, "train.epochs", "5").
void set_config_value(ExperimentConfig& cfg, const std::string& dotted_key, const std::string& value);

ExperimentConfig load_config(const std::string& path);
void save_config(const std::string& path, const ExperimentConfig& cfg);

/// Built-in scaled-down setups: "ks-desk" and "burgers-desk".
ExperimentConfig preset(const std::string& name);
std::vector<std::string> preset_names();

/// Checks cross-field constraints not covered by the per-module validators.
void validate(const ExperimentConfig& cfg);

}  // namespace pdediff
