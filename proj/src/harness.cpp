#include "sumi/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "sumi/selection.hpp"
#include "sumi/threads.hpp"

namespace sumi::harness {

namespace fs = std::filesystem;
using objective::OodMode;

namespace {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_quote(const std::string& s) { return "\"" + s + "\""; }

void check_keys(const json& j, const char* where, std::initializer_list<const char*> allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        known = true;
        break;
      }
    if (!known)
      throw std::invalid_argument("config: unknown key '" + it.key() + "' in " + where);
  }
}

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string cache_key(const ExperimentConfig& config, uint64_t seed) {
  const datagen::TaskSpec& t = config.task;
  const model::ModelSpec& m = config.model;
  const datagen::TrainOptions& tr = config.train;
  std::string canon = "task:" + std::to_string(t.classes) + "," + std::to_string(t.dim_u1) + "," +
                      std::to_string(t.dim_u2) + "," + format_double(t.separation) + "," +
                      format_double(t.noise_scale) + "," + format_double(t.info_u1) + "," +
                      format_double(t.info_u2) + "," + std::to_string(t.train_count) + "," +
                      std::to_string(t.test_count) + "|model:" + std::to_string(m.hidden) + "," +
                      std::to_string(m.repr) + "," + model::to_string(m.nonlinearity) +
                      "|train:" + std::to_string(tr.epochs) + "," +
                      format_double(tr.learning_rate) + "," + std::to_string(tr.batch_size) + "," +
                      format_double(tr.accuracy_floor) + "|seed:" + std::to_string(seed);
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(canon)));
  return buf;
}

}  // namespace

void ExperimentConfig::normalize() {
  model.dim_u1 = task.dim_u1;
  model.dim_u2 = task.dim_u2;
  model.classes = task.classes;
}

void ExperimentConfig::validate() const {
  task.validate();
  model.validate();
  adapt.validate();
  if (model.dim_u1 != task.dim_u1 || model.dim_u2 != task.dim_u2 ||
      model.classes != task.classes)
    throw std::invalid_argument("config: model dims disagree with the task; call normalize()");
  if (streams.empty()) throw std::invalid_argument("config: at least one stream required");
  for (const datagen::StreamSpec& s : streams) s.validate();
  if (adapters.empty()) throw std::invalid_argument("config: at least one adapter required");
  if (seeds.empty()) throw std::invalid_argument("config: at least one seed required");
  if (train.epochs < 0) throw std::invalid_argument("config: negative epoch count");
  if (out_dir.empty()) throw std::invalid_argument("config: empty output directory");
}

ExperimentConfig default_config() {
  ExperimentConfig config;
  config.streams = {datagen::parse_stream_spec(
      "total=2000,shuffle-seed=0,none=0.5,both:5=0.125,miss-u1:5=0.125,miss-u2:5=0.125,"
      "mix:5=0.125")};
  config.adapters = {adapt::AdapterKind::kSource, adapt::AdapterKind::kEntropyMin,
                     adapt::AdapterKind::kGatedEntropyMin, adapt::AdapterKind::kSumi};
  config.seeds = {1, 2, 3, 4, 5};
  config.normalize();
  return config;
}

json config_to_json(const ExperimentConfig& config) {
  json j;
  j["schema"] = "sumi-config";
  j["version"] = 1;
  j["task"] = {{"classes", config.task.classes},
               {"dim_u1", config.task.dim_u1},
               {"dim_u2", config.task.dim_u2},
               {"separation", config.task.separation},
               {"noise_scale", config.task.noise_scale},
               {"info_u1", config.task.info_u1},
               {"info_u2", config.task.info_u2},
               {"train_count", config.task.train_count},
               {"test_count", config.task.test_count}};
  j["model"] = {{"hidden", config.model.hidden},
                {"repr", config.model.repr},
                {"nonlinearity", model::to_string(config.model.nonlinearity)}};
  const objective::AdaptConfig& a = config.adapt;
  json ja;
  ja["gamma_m"] = a.gamma_m ? json(*a.gamma_m) : json(nullptr);
  ja["gamma_u"] = a.gamma_u;
  ja["mu"] = a.mu;
  ja["lambda"] = a.lambda;
  ja["beta"] = a.beta;
  ja["ent0"] = a.ent0 ? json(*a.ent0) : json(nullptr);
  ja["t0"] = a.t0 ? json(*a.t0) : json(nullptr);
  ja["schedule"] = selection::to_string(a.schedule);
  ja["quantile_mode"] = selection::to_string(a.quantile_mode);
  ja["learning_rate"] = a.learning_rate;
  ja["batch_size"] = a.batch_size;
  ja["balance_term"] = a.balance_term;
  ja["balance_weight"] = a.balance_weight;
  ja["modality_order"] = {a.modality_order[0], a.modality_order[1]};
  ja["use_iqr"] = a.use_iqr;
  ja["use_ua"] = a.use_ua;
  ja["use_mis"] = a.use_mis;
  j["adapt"] = ja;
  j["train"] = {{"epochs", config.train.epochs},
                {"learning_rate", config.train.learning_rate},
                {"batch_size", config.train.batch_size},
                {"accuracy_floor", config.train.accuracy_floor}};
  json streams = json::array();
  for (const datagen::StreamSpec& s : config.streams) streams.push_back(datagen::to_string(s));
  j["streams"] = streams;
  json adapters = json::array();
  for (adapt::AdapterKind kind : config.adapters) adapters.push_back(adapt::to_string(kind));
  j["adapters"] = adapters;
  j["seeds"] = config.seeds;
  j["out"] = config.out_dir;
  return j;
}

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("config: expected a JSON object");
  check_keys(j, "the top level",
             {"schema", "version", "task", "model", "adapt", "train", "streams", "adapters",
              "seeds", "out"});
  if (j.contains("schema") && j.at("schema") != "sumi-config")
    throw std::invalid_argument("config: schema is not sumi-config");
  if (j.contains("version") && j.at("version") != 1)
    throw std::invalid_argument("config: unsupported version");

  ExperimentConfig config = default_config();
  if (j.contains("task")) {
    const json& t = j.at("task");
    check_keys(t, "task",
               {"classes", "dim_u1", "dim_u2", "separation", "noise_scale", "info_u1", "info_u2",
                "train_count", "test_count"});
    config.task.classes = t.value("classes", config.task.classes);
    config.task.dim_u1 = t.value("dim_u1", config.task.dim_u1);
    config.task.dim_u2 = t.value("dim_u2", config.task.dim_u2);
    config.task.separation = t.value("separation", config.task.separation);
    config.task.noise_scale = t.value("noise_scale", config.task.noise_scale);
    config.task.info_u1 = t.value("info_u1", config.task.info_u1);
    config.task.info_u2 = t.value("info_u2", config.task.info_u2);
    config.task.train_count = t.value("train_count", config.task.train_count);
    config.task.test_count = t.value("test_count", config.task.test_count);
  }
  if (j.contains("model")) {
    const json& m = j.at("model");
    check_keys(m, "model", {"hidden", "repr", "nonlinearity"});
    config.model.hidden = m.value("hidden", config.model.hidden);
    config.model.repr = m.value("repr", config.model.repr);
    if (m.contains("nonlinearity"))
      config.model.nonlinearity =
          model::nonlinearity_from_string(m.at("nonlinearity").get<std::string>());
  }
  if (j.contains("adapt")) {
    const json& a = j.at("adapt");
    check_keys(a, "adapt",
               {"gamma_m", "gamma_u", "mu", "lambda", "beta", "ent0", "t0", "schedule",
                "quantile_mode", "learning_rate", "batch_size", "balance_term", "balance_weight",
                "modality_order", "use_iqr", "use_ua", "use_mis"});
    objective::AdaptConfig& c = config.adapt;
    if (a.contains("gamma_m"))
      c.gamma_m = a.at("gamma_m").is_null() ? std::optional<double>{}
                                            : std::optional<double>{a.at("gamma_m").get<double>()};
    c.gamma_u = a.value("gamma_u", c.gamma_u);
    c.mu = a.value("mu", c.mu);
    c.lambda = a.value("lambda", c.lambda);
    c.beta = a.value("beta", c.beta);
    if (a.contains("ent0"))
      c.ent0 = a.at("ent0").is_null() ? std::optional<double>{}
                                      : std::optional<double>{a.at("ent0").get<double>()};
    if (a.contains("t0"))
      c.t0 = a.at("t0").is_null() ? std::optional<int>{}
                                  : std::optional<int>{a.at("t0").get<int>()};
    if (a.contains("schedule"))
      c.schedule = selection::schedule_family_from_string(a.at("schedule").get<std::string>());
    if (a.contains("quantile_mode"))
      c.quantile_mode =
          selection::quantile_mode_from_string(a.at("quantile_mode").get<std::string>());
    c.learning_rate = a.value("learning_rate", c.learning_rate);
    c.batch_size = a.value("batch_size", c.batch_size);
    c.balance_term = a.value("balance_term", c.balance_term);
    c.balance_weight = a.value("balance_weight", c.balance_weight);
    if (a.contains("modality_order")) {
      const json& order = a.at("modality_order");
      if (!order.is_array() || order.size() != 2)
        throw std::invalid_argument("config: modality_order must list two modalities");
      c.modality_order = {order[0].get<std::string>(), order[1].get<std::string>()};
    }
    c.use_iqr = a.value("use_iqr", c.use_iqr);
    c.use_ua = a.value("use_ua", c.use_ua);
    c.use_mis = a.value("use_mis", c.use_mis);
  }
  if (j.contains("train")) {
    const json& t = j.at("train");
    check_keys(t, "train", {"epochs", "learning_rate", "batch_size", "accuracy_floor"});
    config.train.epochs = t.value("epochs", config.train.epochs);
    config.train.learning_rate = t.value("learning_rate", config.train.learning_rate);
    config.train.batch_size = t.value("batch_size", config.train.batch_size);
    config.train.accuracy_floor = t.value("accuracy_floor", config.train.accuracy_floor);
  }
  if (j.contains("streams")) {
    config.streams.clear();
    for (const json& s : j.at("streams"))
      config.streams.push_back(datagen::parse_stream_spec(s.get<std::string>()));
  }
  if (j.contains("adapters")) {
    config.adapters.clear();
    for (const json& a : j.at("adapters"))
      config.adapters.push_back(adapt::adapter_from_string(a.get<std::string>()));
  }
  if (j.contains("seeds")) {
    config.seeds.clear();
    for (const json& s : j.at("seeds")) config.seeds.push_back(s.get<uint64_t>());
  }
  config.out_dir = j.value("out", config.out_dir);
  config.normalize();
  config.validate();
  return config;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_config: cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::runtime_error("load_config: '" + path + "': " + e.what());
  }
  return config_from_json(j);
}

void save_config(const ExperimentConfig& config, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_config: cannot open '" + path + "'");
  out << config_to_json(config).dump(2) << "\n";
  if (!out) throw std::runtime_error("save_config: write failed for '" + path + "'");
}

bool ExperimentReport::any_failed() const {
  for (const CellResult& c : cells)
    if (c.failed) return true;
  return false;
}

bool AblationReport::any_failed() const {
  for (const CellResult& c : cells)
    if (c.failed) return true;
  return false;
}

model::Model source_for_seed(const ExperimentConfig& config, const datagen::Task& task,
                             uint64_t seed) {
  fs::path cache_dir = fs::path(config.out_dir) / "cache";
  fs::path path = cache_dir / ("source-" + cache_key(config, seed) + ".json");
  if (fs::exists(path)) return model::load_model(path.string());
  datagen::TrainResult trained =
      datagen::train_source(config.model, task.train, task.test, config.train, seed);
  fs::create_directories(cache_dir);
  model::save_model(trained.model, path.string());
  return trained.model;
}

namespace {

struct PreparedSeed {
  uint64_t seed = 0;
  datagen::Task task;
  model::Model source;
  double source_accuracy = 0.0;
};

std::vector<PreparedSeed> prepare_seeds(const ExperimentConfig& config) {
  std::vector<PreparedSeed> prepared;
  prepared.reserve(config.seeds.size());
  for (uint64_t seed : config.seeds) {
    PreparedSeed p;
    p.seed = seed;
    datagen::TaskSpec tspec = config.task;
    tspec.seed = seed;
    p.task = datagen::make_task(tspec);
    p.source = source_for_seed(config, p.task, seed);
    p.source_accuracy = adapt::evaluate_accuracy(p.source, p.task.test).accuracy;
    prepared.push_back(std::move(p));
  }
  return prepared;
}

void run_jobs(std::vector<std::function<void()>>& jobs) {
  int workers = std::min(sumi::thread_budget(), static_cast<int>(jobs.size()));
  if (workers <= 1) {
    for (std::function<void()>& job : jobs) job();
    return;
  }
  std::atomic<size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(workers));
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (size_t i = next.fetch_add(1); i < jobs.size(); i = next.fetch_add(1)) jobs[i]();
    });
  for (std::thread& th : pool) th.join();
}

CellResult run_cell(const ExperimentConfig& config, const PreparedSeed& prepared,
                    const datagen::StreamSpec& stream_spec, adapt::AdapterKind kind,
                    const objective::AdaptConfig& acfg, const std::string& label) {
  CellResult cell;
  cell.adapter = label;
  cell.stream = datagen::to_string(stream_spec);
  cell.seed = prepared.seed;
  bool wild = stream_spec.any_strong();
  cell.mode = objective::to_string(wild ? OodMode::kWild : OodMode::kWeak);
  try {
    model::Model m = prepared.source;
    std::vector<MultimodalSample> stream =
        datagen::make_stream(prepared.task.test, stream_spec, config.task.noise_scale);
    adapt::RunOptions opts;
    opts.mode = wild ? OodMode::kWild : OodMode::kWeak;
    cell.run = adapt::run_adaptation(m, stream, kind, acfg, opts);
    cell.source_accuracy = prepared.source_accuracy;
    cell.resolved.gamma_m = acfg.resolved_gamma_m(config.task.classes);
    cell.resolved.ent0 = acfg.resolved_ent0(config.task.classes);
    cell.resolved.iter = cell.run.iter;
    cell.resolved.t0 = acfg.resolved_t0(cell.run.iter);
    if (!cell.run.trace.empty()) {
      double sum = 0.0;
      for (const adapt::StepReport& s : cell.run.trace) sum += s.selected_count;
      cell.mean_selected = sum / static_cast<double>(cell.run.trace.size());
    }
  } catch (const std::exception& e) {
    cell.failed = true;
    cell.error = e.what();
  }
  return cell;
}

// Mean and sample standard deviation of the non-failed cell accuracies.
void aggregate_accuracy(const std::vector<const CellResult*>& cells, int& n, double& mean,
                        double& stddev) {
  std::vector<double> values;
  for (const CellResult* c : cells)
    if (!c->failed) values.push_back(c->run.accuracy);
  n = static_cast<int>(values.size());
  mean = 0.0;
  stddev = 0.0;
  if (values.empty()) return;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  ExperimentReport report;
  report.config = config;

  std::vector<PreparedSeed> prepared = prepare_seeds(config);

  size_t n_cells = config.streams.size() * config.adapters.size() * config.seeds.size();
  report.cells.resize(n_cells);
  std::vector<std::function<void()>> jobs;
  jobs.reserve(n_cells);
  size_t idx = 0;
  for (size_t si = 0; si < config.streams.size(); ++si)
    for (size_t ai = 0; ai < config.adapters.size(); ++ai)
      for (size_t ki = 0; ki < prepared.size(); ++ki) {
        size_t slot = idx++;
        jobs.push_back([&, si, ai, ki, slot] {
          report.cells[slot] =
              run_cell(config, prepared[ki], config.streams[si], config.adapters[ai],
                       config.adapt, adapt::to_string(config.adapters[ai]));
        });
      }
  run_jobs(jobs);

  for (size_t si = 0; si < config.streams.size(); ++si)
    for (size_t ai = 0; ai < config.adapters.size(); ++ai) {
      Aggregate agg;
      agg.stream = datagen::to_string(config.streams[si]);
      agg.adapter = adapt::to_string(config.adapters[ai]);
      std::vector<const CellResult*> group;
      for (size_t ki = 0; ki < prepared.size(); ++ki)
        group.push_back(
            &report.cells[(si * config.adapters.size() + ai) * prepared.size() + ki]);
      aggregate_accuracy(group, agg.seed_count, agg.mean_accuracy, agg.stddev_accuracy);
      report.aggregates.push_back(agg);
    }
  return report;
}

AblationReport run_ablation(const ExperimentConfig& config) {
  config.validate();
  AblationReport report;
  report.config = config;

  std::vector<PreparedSeed> prepared = prepare_seeds(config);

  struct Combo {
    bool iqr, ua, mis;
    objective::AdaptConfig cfg;
    std::string label;
  };
  std::vector<Combo> combos;
  for (int bits = 0; bits < 8; ++bits) {
    Combo combo;
    combo.iqr = (bits & 4) != 0;
    combo.ua = (bits & 2) != 0;
    combo.mis = (bits & 1) != 0;
    combo.cfg = config.adapt;
    combo.cfg.use_iqr = combo.iqr;
    combo.cfg.use_ua = combo.ua;
    combo.cfg.use_mis = combo.mis;
    combo.label = std::string("sumi[iqr=") + (combo.iqr ? "on" : "off") +
                  ",ua=" + (combo.ua ? "on" : "off") + ",mis=" + (combo.mis ? "on" : "off") + "]";
    combos.push_back(combo);
  }

  size_t n_cells = combos.size() * config.streams.size() * config.seeds.size();
  report.cells.resize(n_cells);
  std::vector<std::function<void()>> jobs;
  jobs.reserve(n_cells);
  size_t idx = 0;
  for (size_t ci = 0; ci < combos.size(); ++ci)
    for (size_t si = 0; si < config.streams.size(); ++si)
      for (size_t ki = 0; ki < prepared.size(); ++ki) {
        size_t slot = idx++;
        jobs.push_back([&, ci, si, ki, slot] {
          report.cells[slot] = run_cell(config, prepared[ki], config.streams[si],
                                        adapt::AdapterKind::kSumi, combos[ci].cfg,
                                        combos[ci].label);
        });
      }
  run_jobs(jobs);

  for (size_t ci = 0; ci < combos.size(); ++ci) {
    AblationRow row;
    row.use_iqr = combos[ci].iqr;
    row.use_ua = combos[ci].ua;
    row.use_mis = combos[ci].mis;
    std::vector<const CellResult*> group;
    for (size_t si = 0; si < config.streams.size(); ++si)
      for (size_t ki = 0; ki < prepared.size(); ++ki)
        group.push_back(
            &report.cells[(ci * config.streams.size() + si) * prepared.size() + ki]);
    aggregate_accuracy(group, row.seed_count, row.mean_accuracy, row.stddev_accuracy);
    report.rows.push_back(row);
  }
  return report;
}

namespace {

json cell_to_json(const CellResult& cell) {
  json j;
  j["adapter"] = cell.adapter;
  j["stream"] = cell.stream;
  j["seed"] = cell.seed;
  j["mode"] = cell.mode;
  j["failed"] = cell.failed;
  j["error"] = cell.error;
  j["source_accuracy"] = cell.source_accuracy;
  j["mean_selected"] = cell.mean_selected;
  j["resolved"] = {{"gamma_m", cell.resolved.gamma_m},
                   {"ent0", cell.resolved.ent0},
                   {"t0", cell.resolved.t0},
                   {"iter", cell.resolved.iter}};
  json run;
  run["accuracy"] = cell.run.accuracy;
  run["correct"] = cell.run.correct;
  run["total"] = cell.run.total;
  json domains;
  for (const auto& [name, stat] : cell.run.per_domain)
    domains[name] = {{"correct", stat.correct}, {"total", stat.total}};
  run["per_domain"] = domains;
  json trace = json::array();
  for (const adapt::StepReport& s : cell.run.trace)
    trace.push_back({{"t", s.t},
                     {"batch_size", s.batch_size},
                     {"band_count", s.band_count},
                     {"selected_count", s.selected_count},
                     {"loss", s.loss},
                     {"ent_sum", s.ent_sum},
                     {"mis_sum", s.mis_sum},
                     {"balance", s.balance},
                     {"f", s.f},
                     {"lambda_eff", s.lambda_eff},
                     {"correct", s.correct}});
  run["trace"] = trace;
  j["run"] = run;
  return j;
}

CellResult cell_from_json(const json& j) {
  CellResult cell;
  cell.adapter = j.at("adapter").get<std::string>();
  cell.stream = j.at("stream").get<std::string>();
  cell.seed = j.at("seed").get<uint64_t>();
  cell.mode = j.at("mode").get<std::string>();
  cell.failed = j.at("failed").get<bool>();
  cell.error = j.at("error").get<std::string>();
  cell.source_accuracy = j.at("source_accuracy").get<double>();
  cell.mean_selected = j.at("mean_selected").get<double>();
  const json& r = j.at("resolved");
  cell.resolved.gamma_m = r.at("gamma_m").get<double>();
  cell.resolved.ent0 = r.at("ent0").get<double>();
  cell.resolved.t0 = r.at("t0").get<int>();
  cell.resolved.iter = r.at("iter").get<int>();
  const json& run = j.at("run");
  cell.run.adapter = cell.adapter;
  cell.run.mode = objective::ood_mode_from_string(cell.mode);
  cell.run.iter = cell.resolved.iter;
  cell.run.accuracy = run.at("accuracy").get<double>();
  cell.run.correct = run.at("correct").get<int>();
  cell.run.total = run.at("total").get<int>();
  for (auto it = run.at("per_domain").begin(); it != run.at("per_domain").end(); ++it) {
    adapt::DomainStat stat;
    stat.correct = it.value().at("correct").get<int>();
    stat.total = it.value().at("total").get<int>();
    cell.run.per_domain[it.key()] = stat;
  }
  for (const json& ts : run.at("trace")) {
    adapt::StepReport s;
    s.t = ts.at("t").get<int>();
    s.batch_size = ts.at("batch_size").get<int>();
    s.band_count = ts.at("band_count").get<int>();
    s.selected_count = ts.at("selected_count").get<int>();
    s.loss = ts.at("loss").get<double>();
    s.ent_sum = ts.at("ent_sum").get<double>();
    s.mis_sum = ts.at("mis_sum").get<double>();
    s.balance = ts.at("balance").get<double>();
    s.f = ts.at("f").get<double>();
    s.lambda_eff = ts.at("lambda_eff").get<double>();
    s.correct = ts.at("correct").get<int>();
    cell.run.trace.push_back(s);
  }
  return cell;
}

}  // namespace

json report_to_json(const ExperimentReport& report) {
  json j;
  j["schema"] = "sumi-report";
  j["version"] = 1;
  j["config"] = config_to_json(report.config);
  json cells = json::array();
  for (const CellResult& c : report.cells) cells.push_back(cell_to_json(c));
  j["cells"] = cells;
  json aggregates = json::array();
  for (const Aggregate& a : report.aggregates)
    aggregates.push_back({{"stream", a.stream},
                          {"adapter", a.adapter},
                          {"seed_count", a.seed_count},
                          {"mean_accuracy", a.mean_accuracy},
                          {"stddev_accuracy", a.stddev_accuracy}});
  j["aggregates"] = aggregates;
  return j;
}

ExperimentReport report_from_json(const json& j) {
  if (!j.is_object() || j.value("schema", "") != "sumi-report" || j.value("version", 0) != 1)
    throw std::invalid_argument("report: not a version-1 report");
  ExperimentReport report;
  report.config = config_from_json(j.at("config"));
  for (const json& c : j.at("cells")) report.cells.push_back(cell_from_json(c));
  for (const json& a : j.at("aggregates")) {
    Aggregate agg;
    agg.stream = a.at("stream").get<std::string>();
    agg.adapter = a.at("adapter").get<std::string>();
    agg.seed_count = a.at("seed_count").get<int>();
    agg.mean_accuracy = a.at("mean_accuracy").get<double>();
    agg.stddev_accuracy = a.at("stddev_accuracy").get<double>();
    report.aggregates.push_back(agg);
  }
  return report;
}

std::string report_csv(const ExperimentReport& report) {
  std::string out = "adapter,stream,seed,mode,failed,accuracy,selected_mean,domain_accuracies\n";
  for (const CellResult& c : report.cells) {
    std::string domains;
    for (const auto& [name, stat] : c.run.per_domain) {
      if (!domains.empty()) domains += ";";
      double acc = stat.total > 0 ? static_cast<double>(stat.correct) / stat.total : 0.0;
      domains += name + "=" + format_double(acc);
    }
    out += csv_quote(c.adapter) + "," + csv_quote(c.stream) + "," + std::to_string(c.seed) + "," +
           csv_quote(c.mode) + "," + (c.failed ? "1" : "0") + "," +
           format_double(c.run.accuracy) + "," + format_double(c.mean_selected) + "," +
           csv_quote(domains) + "\n";
  }
  return out;
}

json ablation_to_json(const AblationReport& report) {
  json j;
  j["schema"] = "sumi-ablation";
  j["version"] = 1;
  j["config"] = config_to_json(report.config);
  json rows = json::array();
  for (const AblationRow& r : report.rows)
    rows.push_back({{"use_iqr", r.use_iqr},
                    {"use_ua", r.use_ua},
                    {"use_mis", r.use_mis},
                    {"seed_count", r.seed_count},
                    {"mean_accuracy", r.mean_accuracy},
                    {"stddev_accuracy", r.stddev_accuracy}});
  j["rows"] = rows;
  json cells = json::array();
  for (const CellResult& c : report.cells) cells.push_back(cell_to_json(c));
  j["cells"] = cells;
  return j;
}

std::string ablation_csv(const AblationReport& report) {
  std::string out = "use_iqr,use_ua,use_mis,seed_count,mean_accuracy,stddev_accuracy\n";
  for (const AblationRow& r : report.rows)
    out += std::string(r.use_iqr ? "on" : "off") + "," + (r.use_ua ? "on" : "off") + "," +
           (r.use_mis ? "on" : "off") + "," + std::to_string(r.seed_count) + "," +
           format_double(r.mean_accuracy) + "," + format_double(r.stddev_accuracy) + "\n";
  return out;
}

namespace {

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "'");
  out << content;
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

}  // namespace

void emit_experiment(const ExperimentReport& report, const std::string& dir) {
  fs::create_directories(dir);
  write_file(fs::path(dir) / "report.json", report_to_json(report).dump(2) + "\n");
  write_file(fs::path(dir) / "report.csv", report_csv(report));
}

void emit_ablation(const AblationReport& report, const std::string& dir) {
  fs::create_directories(dir);
  write_file(fs::path(dir) / "ablation.json", ablation_to_json(report).dump(2) + "\n");
  write_file(fs::path(dir) / "ablation.csv", ablation_csv(report));
}

std::string summarize(const ExperimentReport& report) {
  std::ostringstream out;
  char line[256];
  out << "cells: " << report.cells.size() << (report.any_failed() ? " (with failures)" : "")
      << "\n";
  for (const Aggregate& a : report.aggregates) {
    std::snprintf(line, sizeof line, "%-18s %-60s n=%d  acc %.4f +- %.4f\n", a.adapter.c_str(),
                  a.stream.c_str(), a.seed_count, a.mean_accuracy, a.stddev_accuracy);
    out << line;
  }
  for (const CellResult& c : report.cells)
    if (c.failed) out << "FAILED " << c.adapter << " seed " << c.seed << ": " << c.error << "\n";
  return out.str();
}

std::string summarize(const AblationReport& report) {
  std::ostringstream out;
  char line[256];
  out << "ablation rows: " << report.rows.size()
      << (report.any_failed() ? " (with failures)" : "") << "\n";
  for (const AblationRow& r : report.rows) {
    std::snprintf(line, sizeof line, "iqr=%-3s ua=%-3s mis=%-3s  n=%d  acc %.4f +- %.4f\n",
                  r.use_iqr ? "on" : "off", r.use_ua ? "on" : "off", r.use_mis ? "on" : "off",
                  r.seed_count, r.mean_accuracy, r.stddev_accuracy);
    out << line;
  }
  for (const CellResult& c : report.cells)
    if (c.failed) out << "FAILED " << c.adapter << " seed " << c.seed << ": " << c.error << "\n";
  return out.str();
}

}  // namespace sumi::harness
