#include "sumi/kernels.hpp"

#include <cstdlib>
#include <stdexcept>
#include <thread>

#include "sumi/threads.hpp"

#if defined(SUMI_HAVE_OPENMP)
#include <omp.h>
#endif

namespace sumi {

int thread_budget() {
#if defined(SUMI_HAVE_OPENMP)
  int budget = omp_get_max_threads();
#else
  int budget = static_cast<int>(std::thread::hardware_concurrency());
#endif
  if (budget < 1) budget = 1;
  if (const char* env = std::getenv("SUMI_THREADS")) {
    int cap = std::atoi(env);
    if (cap >= 1 && cap < budget) budget = cap;
  }
  return budget;
}

}  // namespace sumi

namespace sumi::kernels {

using model::ForwardOutputs;
using model::Model;
using numkit::Bindings;
using numkit::GradMap;
using numkit::Graph;
using numkit::ParamSet;
using numkit::Tensor;

namespace {

// Shape errors surface here, before any parallel region starts; exceptions
// must not escape an omp for body.
void check_shapes(const Model& m, const std::vector<MultimodalSample>& batch) {
  for (size_t i = 0; i < batch.size(); ++i) {
    const MultimodalSample& s = batch[i];
    if (s.x_u1.rows() != m.spec.dim_u1 || s.x_u1.cols() != 1 ||
        s.x_u2.rows() != m.spec.dim_u2 || s.x_u2.cols() != 1)
      throw std::invalid_argument("batch kernel: sample " + std::to_string(i) +
                                  " has inputs " + s.x_u1.shape_str() + ", " +
                                  s.x_u2.shape_str() + ", model expects " +
                                  std::to_string(m.spec.dim_u1) + "x1, " +
                                  std::to_string(m.spec.dim_u2) + "x1");
  }
}

}  // namespace

std::vector<ForwardOutputs> forward_batch(const Model& m,
                                          const std::vector<MultimodalSample>& batch) {
  check_shapes(m, batch);
  std::vector<ForwardOutputs> out(batch.size());
  int n = static_cast<int>(batch.size());
#if defined(SUMI_HAVE_OPENMP)
#pragma omp parallel for schedule(static) num_threads(sumi::thread_budget())
#endif
  for (int i = 0; i < n; ++i)
    out[static_cast<size_t>(i)] = model::forward(m, batch[static_cast<size_t>(i)]);
  return out;
}

std::vector<ForwardOutputs> forward_batch_serial(const Model& m,
                                                 const std::vector<MultimodalSample>& batch) {
  std::vector<ForwardOutputs> out;
  out.reserve(batch.size());
  for (const MultimodalSample& s : batch) out.push_back(model::forward(m, s));
  return out;
}

namespace {

struct CeSample {
  double loss = 0.0;
  GradMap grads;
};

// Labels are checked before any parallel region starts; exceptions must not
// escape an omp for body.
void check_labels(const Model& m, const std::vector<MultimodalSample>& batch) {
  if (batch.empty()) throw std::invalid_argument("ce_grad_batch: empty batch");
  check_shapes(m, batch);
  for (size_t i = 0; i < batch.size(); ++i) {
    int label = batch[i].label;
    if (label < 0 || label >= m.spec.classes)
      throw std::invalid_argument("ce_grad_batch: sample " + std::to_string(i) + " label " +
                                  std::to_string(label) + " outside [0, " +
                                  std::to_string(m.spec.classes) + ")");
  }
}

CeSample ce_sample(const Model& m, const ParamSet& wrt, const Bindings& bindings,
                   const MultimodalSample& s) {
  Graph g;
  model::ForwardNodes fw = model::build_forward(g, m, s.x_u1, s.x_u2);
  Tensor onehot(m.spec.classes, 1, 0.0);
  onehot[s.label] = 1.0;
  int loss = g.scale(g.sum(g.mul(g.log(fw.p_m), g.constant(std::move(onehot)))), -1.0);
  g.set_output(loss);

  CeSample out;
  out.loss = evaluate(g, bindings).value();
  out.grads = gradient(g, wrt);
  return out;
}

ParamSet all_adaptable(const Model& m) {
  ParamSet wrt = m.params;
  wrt.set_all_adaptable(true);
  return wrt;
}

CeBatch reduce_in_order(std::vector<CeSample>& slots) {
  CeBatch out;
  double inv = 1.0 / static_cast<double>(slots.size());
  for (size_t i = 0; i < slots.size(); ++i) {
    out.loss += slots[i].loss;
    if (i == 0) {
      out.grads = std::move(slots[i].grads);
    } else {
      for (auto& [name, acc] : out.grads) {
        const Tensor& g = slots[i].grads.at(name);
        for (int k = 0; k < acc.size(); ++k) acc[k] += g[k];
      }
    }
  }
  out.loss *= inv;
  for (auto& [name, acc] : out.grads)
    for (int k = 0; k < acc.size(); ++k) acc[k] *= inv;
  return out;
}

}  // namespace

CeBatch ce_grad_batch(const Model& m, const std::vector<MultimodalSample>& batch) {
  check_labels(m, batch);
  ParamSet wrt = all_adaptable(m);
  Bindings bindings = Bindings::of(m.params);
  std::vector<CeSample> slots(batch.size());
  int n = static_cast<int>(batch.size());
#if defined(SUMI_HAVE_OPENMP)
#pragma omp parallel for schedule(static) num_threads(sumi::thread_budget())
#endif
  for (int i = 0; i < n; ++i)
    slots[static_cast<size_t>(i)] = ce_sample(m, wrt, bindings, batch[static_cast<size_t>(i)]);
  return reduce_in_order(slots);
}

CeBatch ce_grad_batch_serial(const Model& m, const std::vector<MultimodalSample>& batch) {
  check_labels(m, batch);
  ParamSet wrt = all_adaptable(m);
  Bindings bindings = Bindings::of(m.params);
  CeBatch out;
  bool first = true;
  for (const MultimodalSample& s : batch) {
    CeSample one = ce_sample(m, wrt, bindings, s);
    out.loss += one.loss;
    if (first) {
      out.grads = std::move(one.grads);
      first = false;
    } else {
      for (auto& [name, acc] : out.grads) {
        const Tensor& g = one.grads.at(name);
        for (int k = 0; k < acc.size(); ++k) acc[k] += g[k];
      }
    }
  }
  double inv = 1.0 / static_cast<double>(batch.size());
  out.loss *= inv;
  for (auto& [name, acc] : out.grads)
    for (int k = 0; k < acc.size(); ++k) acc[k] *= inv;
  return out;
}

}  // namespace sumi::kernels
