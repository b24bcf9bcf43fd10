#pragma once

#include "maskrl/likelihood.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace maskrl::harness {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::size_t dim = 32;
  std::size_t layers = 2;
  std::size_t max_ctx = 32;
  int diffusion_steps = 64;          // T
  int group_size = 8;                // N
  std::vector<int> restart_steps = {0, 8};  // tree-search restarts
  double gamma = 0.5;                // distill mixing weight
  double tau = 0.5;                  // answer-forcing gate threshold
  double inject_prob = 0.1;          // answer-forcing injection coin
  std::string estimator = "comp_w1";
  double learning_rate = 0.01;
  double weight_decay = 0.0;
  double sft_ratio = 0.3;            // offline share of batches
  int steps = 2000;
  int checkpoint_every = 500;
  std::string metrics_path = "metrics.csv";
  std::string checkpoint_path = "checkpoint.json";
  std::string reward_server;         // "host:port"; empty = local rewards
  std::vector<std::string> tasks = {"modsum"};
  int workers = 1;
  double kl_beta = 0.0;              // GRPO+KL ablation only
  bool length_normalize = false;
  int sft_corpus_size = 256;         // offline pairs per task
  int batch_retries = 3;             // reward-service group skips per step
  int stage1_steps = 800;            // pure-SFT stage before unified training

  likelihood::Estimator estimator_enum() const {
    return likelihood::estimator_from_string(estimator);
  }
};

// Parses a config JSON document; unknown keys are rejected, every known key
// is optional and falls back to the default.
RunConfig config_from_json_text(const std::string& text);
RunConfig load_config(const std::string& path);
std::string config_to_json_text(const RunConfig& cfg);

void validate_config(const RunConfig& cfg);

}  // namespace maskrl::harness
