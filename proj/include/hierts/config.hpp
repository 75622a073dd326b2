#pragma once

#include "hierts/agents.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace hierts {

struct AgentSpec {
  AgentKind kind = AgentKind::GHierTS;
  AgentOptions options;
};

/// Parsed experiment configuration. The file format is flat, line-oriented
/// key = value text with [section] headers and # comments; see README for the
/// grammar. Unknown sections or keys are rejected by name.
struct ExperimentConfig {
  enum class Preset { Synthetic, MovieLens, Custom };

  Preset preset = Preset::Synthetic;

  // experiment
  Index horizon = 2000;
  int runs = 20;
  std::uint64_t base_seed = 1;
  int parallelism = 1;
  std::string out_prefix = "results";
  bool svg = false;
  double jitter = 0.0;

  // model
  Index L = 5;
  Index K = 20;
  Index d = 2;
  double sigma = 1.0;
  double hyper_mean = 0.0;  // mu_psi entries
  double hyper_var = 3.0;   // Sigma_Psi = hyper_var * I
  double cond_var = 1.0;    // Sigma_{0,i} = cond_var * I
  std::string mixing = "uniform";  // uniform: resampled from [-1,1] per run; ones: fixed

  // context
  std::string context_type = "cube";  // cube | constant
  double ctx_low = -1.0;
  double ctx_high = 1.0;

  // movielens
  std::string model_file;
  double scale_hyper = 0.75;
  double scale_cond = 0.25;

  // sweep grids (cartesian product over K and d)
  std::vector<Index> sweep_K;
  std::vector<Index> sweep_d;

  std::vector<AgentSpec> agents;

  std::string raw_text;  // verbatim file contents, hashed into the manifest

  void validate() const;  // throws ValidationError
};

ExperimentConfig parse_config(const std::string& path);        // throws IoError too
ExperimentConfig parse_config_text(const std::string& text);   // throws ParseError/ValidationError

}  // namespace hierts
