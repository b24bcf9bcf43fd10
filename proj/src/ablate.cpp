#include "maskrl/ablate.hpp"

#include "maskrl/train.hpp"

#include <json.hpp>

#include <fstream>

namespace maskrl::harness {

namespace {

using nlohmann::json;

}  // namespace

RunConfig apply_overrides(const RunConfig& base,
                          const std::string& overrides) {
  json merged = json::parse(config_to_json_text(base));
  json over = json::parse(overrides, nullptr, false);
  if (over.is_discarded() || !over.is_object())
    throw ConfigError("ablation overrides must be a JSON object");
  for (auto it = over.begin(); it != over.end(); ++it)
    merged[it.key()] = it.value();
  return config_from_json_text(merged.dump());
}

std::vector<AblationSpec> load_ablation_grid(const std::string& path,
                                             RunConfig& base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read grid file: " + path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("grid file is not valid JSON");

  if (j.contains("base")) base = apply_overrides(base, j["base"].dump());

  std::vector<AblationSpec> grid;
  if (!j.contains("runs") || !j["runs"].is_array() || j["runs"].empty())
    throw ConfigError("grid file needs a non-empty runs array");
  for (const auto& run : j["runs"]) {
    AblationSpec spec;
    spec.name = run.at("name").get<std::string>();
    spec.overrides_json = run.value("overrides", json::object()).dump();
    grid.push_back(std::move(spec));
  }
  return grid;
}

std::string ablation_run(const RunConfig& base,
                         const std::vector<AblationSpec>& grid,
                         const std::string& out_csv) {
  std::ofstream out(out_csv);
  if (!out) throw ConfigError("cannot write comparison csv: " + out_csv);
  out << "config," << Trainer::metrics_header() << "\n";

  for (const auto& spec : grid) {
    RunConfig cfg = apply_overrides(base, spec.overrides_json);
    cfg.metrics_path = out_csv + "." + spec.name + ".metrics.csv";
    cfg.checkpoint_path = out_csv + "." + spec.name + ".checkpoint.json";

    Trainer trainer(cfg);
    const auto metrics_path = trainer.run();

    std::ifstream metrics(metrics_path);
    std::string line;
    std::getline(metrics, line);  // header
    while (std::getline(metrics, line))
      if (!line.empty()) out << spec.name << ',' << line << "\n";
  }
  return out_csv;
}

}  // namespace maskrl::harness
