#pragma once

// Test-time adaptation drivers: an Adam optimizer over the adaptable
// parameter partition, the per-batch update steps of each adapter, and the
// streaming loop that feeds batches through a model while recording
// predictions before every update.

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sumi/graph.hpp"
#include "sumi/model.hpp"
#include "sumi/objective.hpp"
#include "sumi/sample.hpp"
#include "sumi/selection.hpp"
#include "sumi/tensor.hpp"

namespace sumi::adapt {

using numkit::GradMap;
using numkit::ParamSet;
using numkit::Tensor;

struct AdamOptimizer {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  explicit AdamOptimizer(double lr) : learning_rate(lr) {}

  // Applies one update to every parameter named in grads. The step counter
  // is global, so a batch that produces no gradient must skip the call
  // entirely rather than pass an empty map.
  void step(ParamSet& params, const GradMap& grads);

  int64_t steps() const { return steps_; }

 private:
  int64_t steps_ = 0;
  std::map<std::string, Tensor> m1_, m2_;
};

enum class AdapterKind { kSource, kEntropyMin, kGatedEntropyMin, kSumi };

AdapterKind adapter_from_string(const std::string& s);
std::string to_string(AdapterKind kind);

// One row of the adaptation trace. Counts refer to the batch at step t;
// predictions are taken before the parameter update.
struct StepReport {
  int t = 0;
  int batch_size = 0;
  int band_count = 0;      // samples surviving the band filter
  int selected_count = 0;  // samples surviving both filters
  double loss = 0.0;
  double ent_sum = 0.0;
  double mis_sum = 0.0;
  double balance = 0.0;
  double f = 0.0;
  double lambda_eff = 0.0;
  int correct = 0;
};

// Full per-sample view of one step, for tests and probes.
struct StepDetail {
  int t = 0;
  double f = 0.0;
  std::vector<bool> band;      // band-filter mask (all true when unused)
  std::vector<bool> selected;  // final update mask
  std::vector<selection::SampleEntropies> entropies;
  std::vector<int> predictions;
};

using StepObserver = std::function<void(const StepDetail&)>;

struct DomainStat {
  int correct = 0;
  int total = 0;
};

struct RunReport {
  std::string adapter;
  objective::OodMode mode = objective::OodMode::kWeak;
  int iter = 0;
  int total = 0;
  int correct = 0;
  double accuracy = 0.0;
  std::map<std::string, DomainStat> per_domain;
  std::vector<StepReport> trace;
};

struct RunOptions {
  objective::OodMode mode = objective::OodMode::kWeak;
  // Schedule horizon; defaults to the number of batches in the stream.
  std::optional<int> iter;
  StepObserver observer;
};

// Argmax with the lowest index winning ties.
int predict_class(const Tensor& p);

struct EvalResult {
  int correct = 0;
  int total = 0;
  double accuracy = 0.0;
};

// Frozen-parameter accuracy over a labeled set.
EvalResult evaluate_accuracy(const model::Model& m, const std::vector<MultimodalSample>& data);

// Streams the samples in order through batches of config.batch_size,
// recording predictions before each update, and mutates the model's
// adaptable parameters in place. The source adapter never updates.
RunReport run_adaptation(model::Model& m, const std::vector<MultimodalSample>& stream,
                         AdapterKind kind, const objective::AdaptConfig& config,
                         const RunOptions& opts = {});

}  // namespace sumi::adapt
