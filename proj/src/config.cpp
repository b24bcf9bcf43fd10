#include "maskrl/config.hpp"

#include "maskrl/tasks.hpp"

#include <json.hpp>

#include <fstream>
#include <set>

namespace maskrl::harness {

namespace {

using nlohmann::json;

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

RunConfig config_from_json_text(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config is not valid JSON");
  if (!j.is_object()) throw ConfigError("config root must be an object");

  static const std::set<std::string> known = {
      "seed",           "dim",
      "layers",
      "max_ctx",        "diffusion_steps",
      "group_size",     "restart_steps",
      "gamma",          "tau",
      "inject_prob",    "estimator",
      "learning_rate",  "weight_decay",
      "sft_ratio",      "steps",
      "checkpoint_every", "metrics_path",
      "checkpoint_path", "reward_server",
      "tasks",          "workers",
      "kl_beta",        "length_normalize",
      "sft_corpus_size", "batch_retries",
      "stage1_steps"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (known.find(it.key()) == known.end())
      throw ConfigError("unknown config key: " + it.key());

  RunConfig cfg;
  try {
    read_field(j, "seed", cfg.seed);
    read_field(j, "dim", cfg.dim);
    read_field(j, "layers", cfg.layers);
    read_field(j, "max_ctx", cfg.max_ctx);
    read_field(j, "diffusion_steps", cfg.diffusion_steps);
    read_field(j, "group_size", cfg.group_size);
    read_field(j, "restart_steps", cfg.restart_steps);
    read_field(j, "gamma", cfg.gamma);
    read_field(j, "tau", cfg.tau);
    read_field(j, "inject_prob", cfg.inject_prob);
    read_field(j, "estimator", cfg.estimator);
    read_field(j, "learning_rate", cfg.learning_rate);
    read_field(j, "weight_decay", cfg.weight_decay);
    read_field(j, "sft_ratio", cfg.sft_ratio);
    read_field(j, "steps", cfg.steps);
    read_field(j, "checkpoint_every", cfg.checkpoint_every);
    read_field(j, "metrics_path", cfg.metrics_path);
    read_field(j, "checkpoint_path", cfg.checkpoint_path);
    read_field(j, "reward_server", cfg.reward_server);
    read_field(j, "tasks", cfg.tasks);
    read_field(j, "workers", cfg.workers);
    read_field(j, "kl_beta", cfg.kl_beta);
    read_field(j, "length_normalize", cfg.length_normalize);
    read_field(j, "sft_corpus_size", cfg.sft_corpus_size);
    read_field(j, "batch_retries", cfg.batch_retries);
    read_field(j, "stage1_steps", cfg.stage1_steps);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config field type error: ") + e.what());
  }
  validate_config(cfg);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return config_from_json_text(text);
}

std::string config_to_json_text(const RunConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["dim"] = cfg.dim;
  j["layers"] = cfg.layers;
  j["max_ctx"] = cfg.max_ctx;
  j["diffusion_steps"] = cfg.diffusion_steps;
  j["group_size"] = cfg.group_size;
  j["restart_steps"] = cfg.restart_steps;
  j["gamma"] = cfg.gamma;
  j["tau"] = cfg.tau;
  j["inject_prob"] = cfg.inject_prob;
  j["estimator"] = cfg.estimator;
  j["learning_rate"] = cfg.learning_rate;
  j["weight_decay"] = cfg.weight_decay;
  j["sft_ratio"] = cfg.sft_ratio;
  j["steps"] = cfg.steps;
  j["checkpoint_every"] = cfg.checkpoint_every;
  j["metrics_path"] = cfg.metrics_path;
  j["checkpoint_path"] = cfg.checkpoint_path;
  j["reward_server"] = cfg.reward_server;
  j["tasks"] = cfg.tasks;
  j["workers"] = cfg.workers;
  j["kl_beta"] = cfg.kl_beta;
  j["length_normalize"] = cfg.length_normalize;
  j["sft_corpus_size"] = cfg.sft_corpus_size;
  j["batch_retries"] = cfg.batch_retries;
  j["stage1_steps"] = cfg.stage1_steps;
  return j.dump(2);
}

void validate_config(const RunConfig& cfg) {
  if (cfg.dim == 0 || cfg.dim > 128) throw ConfigError("dim outside (0, 128]");
  if (cfg.layers == 0 || cfg.layers > 8) throw ConfigError("layers outside (0, 8]");
  if (cfg.diffusion_steps < 1) throw ConfigError("diffusion_steps < 1");
  if (cfg.group_size < 1) throw ConfigError("group_size < 1");
  if (!(cfg.gamma >= 0.0 && cfg.gamma <= 1.0))
    throw ConfigError("gamma outside [0, 1]");
  if (!(cfg.tau >= 0.0 && cfg.tau <= 1.0))
    throw ConfigError("tau outside [0, 1]");
  if (!(cfg.inject_prob >= 0.0 && cfg.inject_prob <= 1.0))
    throw ConfigError("inject_prob outside [0, 1]");
  if (!(cfg.sft_ratio >= 0.0 && cfg.sft_ratio <= 1.0))
    throw ConfigError("sft_ratio outside [0, 1]");
  if (cfg.steps < 0) throw ConfigError("steps < 0");
  if (cfg.workers < 1) throw ConfigError("workers < 1");
  if (cfg.sft_corpus_size < 1) throw ConfigError("sft_corpus_size < 1");
  if (cfg.tasks.empty()) throw ConfigError("tasks must be non-empty");
  if (!cfg.restart_steps.empty() && cfg.restart_steps[0] != 0)
    throw ConfigError("restart_steps must begin with 0");
  for (int s : cfg.restart_steps)
    if (s < 0 || s >= cfg.diffusion_steps)
      throw ConfigError("restart step outside [0, diffusion_steps)");
  try {
    likelihood::estimator_from_string(cfg.estimator);
    for (const auto& name : cfg.tasks) make_task(name);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace maskrl::harness
