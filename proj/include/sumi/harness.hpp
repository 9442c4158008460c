#pragma once

// Experiment orchestration: a JSON-backed configuration, source-model
// caching, the (stream x adapter x seed) cell grid with a bounded worker
// pool, the component on/off ablation grid, and deterministic report
// emission as JSON and CSV.

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

#include "sumi/adapt.hpp"
#include "sumi/datagen.hpp"
#include "sumi/model.hpp"
#include "sumi/objective.hpp"

namespace sumi::harness {

using json = nlohmann::ordered_json;

struct ExperimentConfig {
  datagen::TaskSpec task;  // its seed field is unused; the seed list drives everything
  model::ModelSpec model;  // dims and class count are copied from the task
  objective::AdaptConfig adapt;
  datagen::TrainOptions train;
  std::vector<datagen::StreamSpec> streams;
  std::vector<adapt::AdapterKind> adapters;
  std::vector<uint64_t> seeds;
  std::string out_dir = "runs";

  // Copies task dims and class count onto the model spec.
  void normalize();
  void validate() const;  // throws std::invalid_argument
};

ExperimentConfig default_config();

json config_to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const json& j);
ExperimentConfig load_config(const std::string& path);
void save_config(const ExperimentConfig& config, const std::string& path);

// Values the engine filled in for fields the config leaves null.
struct ResolvedValues {
  double gamma_m = 0.0;
  double ent0 = 0.0;
  int t0 = 0;
  int iter = 0;
};

struct CellResult {
  std::string adapter;
  std::string stream;  // canonical text form
  uint64_t seed = 0;
  std::string mode;  // weak or wild, derived from the stream
  bool failed = false;
  std::string error;
  double source_accuracy = 0.0;  // clean accuracy of the cell's source model
  double mean_selected = 0.0;    // mean per-step update-set size
  ResolvedValues resolved;
  adapt::RunReport run;
};

struct Aggregate {
  std::string stream;
  std::string adapter;
  int seed_count = 0;
  double mean_accuracy = 0.0;
  double stddev_accuracy = 0.0;
};

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<CellResult> cells;
  std::vector<Aggregate> aggregates;

  bool any_failed() const;
};

// Trains the source model for one seed, or loads it from the cache under
// <out_dir>/cache keyed by a hash of (task, model, train options, seed).
model::Model source_for_seed(const ExperimentConfig& config, const datagen::Task& task,
                             uint64_t seed);

// Runs every (stream, adapter, seed) cell. Cells run on a worker pool
// bounded by SUMI_THREADS; results merge in config order, so reruns give
// identical reports.
ExperimentReport run_experiment(const ExperimentConfig& config);

struct AblationRow {
  bool use_iqr = false;
  bool use_ua = false;
  bool use_mis = false;
  int seed_count = 0;
  double mean_accuracy = 0.0;
  double stddev_accuracy = 0.0;
};

struct AblationReport {
  ExperimentConfig config;
  std::vector<AblationRow> rows;  // all 8 switch combinations, all-off first
  std::vector<CellResult> cells;

  bool any_failed() const;
};

// The eight on/off combinations of the three components, run over the
// config's streams and seeds.
AblationReport run_ablation(const ExperimentConfig& config);

json report_to_json(const ExperimentReport& report);
ExperimentReport report_from_json(const json& j);
std::string report_csv(const ExperimentReport& report);

json ablation_to_json(const AblationReport& report);
std::string ablation_csv(const AblationReport& report);

// Writes report.json and report.csv (or ablation.json and ablation.csv)
// under dir, creating it if needed.
void emit_experiment(const ExperimentReport& report, const std::string& dir);
void emit_ablation(const AblationReport& report, const std::string& dir);

// Plain-text summary tables for the terminal.
std::string summarize(const ExperimentReport& report);
std::string summarize(const AblationReport& report);

}  // namespace sumi::harness
