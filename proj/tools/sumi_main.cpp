#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "sumi/adapt.hpp"
#include "sumi/datagen.hpp"
#include "sumi/harness.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::vector<std::string> streams;
  std::vector<std::string> adapters;
  std::vector<uint64_t> seeds;
  std::string quantile_mode;
  std::string schedule;
  std::string balance_term;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "JSON experiment config")
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", args.seeds, "seeds to run")->delimiter(',');
  cmd->add_option("--adapter", args.adapters, "adapters to run")->delimiter(',');
  cmd->add_option("--stream", args.streams,
                  "stream spec, e.g. total=2000,none=0.5,both:5=0.25,mix:5=0.25");
  cmd->add_option("--out", args.out_dir, "output directory");
  cmd->add_option("--quantile-mode", args.quantile_mode, "quartile estimator")
      ->check(CLI::IsMember({"minmax", "order"}));
  cmd->add_option("--schedule", args.schedule, "smoothing schedule")
      ->check(CLI::IsMember({"linear", "exp", "log"}));
  cmd->add_option("--balance-term", args.balance_term, "class-balance regularizer")
      ->check(CLI::IsMember({"on", "off"}));
}

sumi::harness::ExperimentConfig build_config(const CommonArgs& args) {
  sumi::harness::ExperimentConfig config = args.config_path.empty()
                                               ? sumi::harness::default_config()
                                               : sumi::harness::load_config(args.config_path);
  if (!args.seeds.empty()) config.seeds = args.seeds;
  if (!args.adapters.empty()) {
    config.adapters.clear();
    for (const std::string& a : args.adapters)
      config.adapters.push_back(sumi::adapt::adapter_from_string(a));
  }
  if (!args.streams.empty()) {
    config.streams.clear();
    for (const std::string& s : args.streams)
      config.streams.push_back(sumi::datagen::parse_stream_spec(s));
  }
  if (!args.out_dir.empty()) config.out_dir = args.out_dir;
  if (!args.quantile_mode.empty())
    config.adapt.quantile_mode = args.quantile_mode == "minmax"
                                     ? sumi::selection::QuantileMode::kMinmaxInterp
                                     : sumi::selection::QuantileMode::kOrderStat;
  if (!args.schedule.empty()) {
    if (args.schedule == "linear")
      config.adapt.schedule = sumi::selection::ScheduleFamily::kLinear;
    else if (args.schedule == "exp")
      config.adapt.schedule = sumi::selection::ScheduleFamily::kExponential;
    else
      config.adapt.schedule = sumi::selection::ScheduleFamily::kLogarithmic;
  }
  if (!args.balance_term.empty()) config.adapt.balance_term = args.balance_term == "on";
  config.normalize();
  config.validate();
  return config;
}

int cmd_train_source(const CommonArgs& args) {
  sumi::harness::ExperimentConfig config = build_config(args);
  for (uint64_t seed : config.seeds) {
    sumi::datagen::TaskSpec tspec = config.task;
    tspec.seed = seed;
    sumi::datagen::Task task = sumi::datagen::make_task(tspec);
    sumi::model::Model source = sumi::harness::source_for_seed(config, task, seed);
    double acc = sumi::adapt::evaluate_accuracy(source, task.test).accuracy;
    std::printf("seed %llu: clean accuracy %.4f\n", static_cast<unsigned long long>(seed), acc);
  }
  return 0;
}

int cmd_adapt(const CommonArgs& args) {
  sumi::harness::ExperimentConfig config = build_config(args);
  sumi::harness::ExperimentReport report = sumi::harness::run_experiment(config);
  sumi::harness::emit_experiment(report, config.out_dir);
  std::cout << sumi::harness::summarize(report);
  std::cout << "wrote " << config.out_dir << "/report.json and report.csv\n";
  return report.any_failed() ? 1 : 0;
}

int cmd_sweep(const CommonArgs& args, const std::string& kind_name,
              const std::vector<double>& ratios) {
  sumi::harness::ExperimentConfig config = build_config(args);
  if (kind_name.empty() == ratios.empty())
    throw CLI::ValidationError("sweep", "pass exactly one of --kind or --ratios");

  sumi::datagen::StreamSpec base = config.streams.front();
  config.streams.clear();
  if (!kind_name.empty()) {
    sumi::datagen::Corruption kind = sumi::datagen::corruption_from_string(kind_name);
    if (kind == sumi::datagen::Corruption::kNone)
      throw CLI::ValidationError("sweep", "--kind needs a corruption, not none");
    for (int severity = 1; severity <= 5; ++severity) {
      sumi::datagen::StreamSpec spec = base;
      spec.parts = {{{kind, severity}, 1.0}};
      config.streams.push_back(spec);
    }
  } else {
    for (double r : ratios) {
      if (r < 0.0 || r > 1.0)
        throw CLI::ValidationError("sweep", "ratios must lie in [0, 1]");
      sumi::datagen::StreamSpec spec = base;
      spec.parts.clear();
      if (r < 1.0) spec.parts.push_back({{sumi::datagen::Corruption::kNone, 0}, 1.0 - r});
      if (r > 0.0) {
        spec.parts.push_back({{sumi::datagen::Corruption::kBoth, 5}, r / 4.0});
        spec.parts.push_back({{sumi::datagen::Corruption::kMissU1, 5}, r / 4.0});
        spec.parts.push_back({{sumi::datagen::Corruption::kMissU2, 5}, r / 4.0});
        spec.parts.push_back({{sumi::datagen::Corruption::kMix, 5}, r / 4.0});
      }
      config.streams.push_back(spec);
    }
  }
  config.validate();
  sumi::harness::ExperimentReport report = sumi::harness::run_experiment(config);
  sumi::harness::emit_experiment(report, config.out_dir);
  std::cout << sumi::harness::summarize(report);
  std::cout << "wrote " << config.out_dir << "/report.json and report.csv\n";
  return report.any_failed() ? 1 : 0;
}

int cmd_ablate(const CommonArgs& args) {
  sumi::harness::ExperimentConfig config = build_config(args);
  sumi::harness::AblationReport report = sumi::harness::run_ablation(config);
  sumi::harness::emit_ablation(report, config.out_dir);
  std::cout << sumi::harness::summarize(report);
  std::cout << "wrote " << config.out_dir << "/ablation.json and ablation.csv\n";
  return report.any_failed() ? 1 : 0;
}

int cmd_report(const std::string& path_arg, const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::string path = path_arg;
  if (path.empty() && !out_dir.empty()) {
    for (const char* name : {"report.json", "ablation.json"}) {
      fs::path candidate = fs::path(out_dir) / name;
      if (fs::exists(candidate)) {
        path = candidate.string();
        break;
      }
    }
  }
  if (path.empty()) throw CLI::ValidationError("report", "pass a report path or --out");
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  sumi::harness::json j;
  in >> j;
  std::string schema = j.value("schema", "");
  if (schema == "sumi-report") {
    std::cout << sumi::harness::summarize(sumi::harness::report_from_json(j));
  } else if (schema == "sumi-ablation") {
    char line[256];
    for (const auto& r : j.at("rows")) {
      std::snprintf(line, sizeof line, "iqr=%-3s ua=%-3s mis=%-3s  n=%d  acc %.4f +- %.4f\n",
                    r.at("use_iqr").get<bool>() ? "on" : "off",
                    r.at("use_ua").get<bool>() ? "on" : "off",
                    r.at("use_mis").get<bool>() ? "on" : "off", r.at("seed_count").get<int>(),
                    r.at("mean_accuracy").get<double>(), r.at("stddev_accuracy").get<double>());
      std::cout << line;
    }
  } else {
    throw std::runtime_error("'" + path + "' is not a known report file");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"two-modality test-time adaptation workbench"};
  app.require_subcommand(1);
  app.footer("SUMI_THREADS caps the worker pool and kernel threads.");

  CommonArgs train_args, adapt_args, sweep_args, ablate_args;
  std::string sweep_kind;
  std::vector<double> sweep_ratios;
  std::string report_path, report_out;

  CLI::App* train = app.add_subcommand("train-source", "train or refresh cached source models");
  add_common(train, train_args);

  CLI::App* adapt = app.add_subcommand("adapt", "run the adapter grid on the configured streams");
  add_common(adapt, adapt_args);

  CLI::App* sweep = app.add_subcommand("sweep", "severity or strong-ratio sweeps");
  add_common(sweep, sweep_args);
  sweep->add_option("--kind", sweep_kind, "corruption for a severity 1..5 sweep");
  sweep->add_option("--ratios", sweep_ratios, "strong-OOD shares for a mixture sweep")
      ->delimiter(',');

  CLI::App* ablate = app.add_subcommand("ablate", "component on/off grid");
  add_common(ablate, ablate_args);

  CLI::App* report = app.add_subcommand("report", "print a saved report");
  report->add_option("path", report_path, "report.json or ablation.json");
  report->add_option("--out", report_out, "directory holding the report");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return cmd_train_source(train_args);
    if (adapt->parsed()) return cmd_adapt(adapt_args);
    if (sweep->parsed()) return cmd_sweep(sweep_args, sweep_kind, sweep_ratios);
    if (ablate->parsed()) return cmd_ablate(ablate_args);
    if (report->parsed()) return cmd_report(report_path, report_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
