#pragma once

// Batch kernels over independent per-sample graph evaluations. Each kernel
// has an OpenMP path (bounded by SUMI_THREADS, see threads.hpp) and a
// separately coded serial reference; the two agree bitwise because samples
// are computed into private slots and reduced in sample order.

#include <vector>

#include "sumi/graph.hpp"
#include "sumi/model.hpp"
#include "sumi/sample.hpp"

namespace sumi::kernels {

// Value-level forward pass for every sample.
std::vector<model::ForwardOutputs> forward_batch(const model::Model& m,
                                                 const std::vector<MultimodalSample>& batch);
std::vector<model::ForwardOutputs> forward_batch_serial(
    const model::Model& m, const std::vector<MultimodalSample>& batch);

struct CeBatch {
  double loss = 0.0;      // mean cross-entropy over the batch
  numkit::GradMap grads;  // mean gradient w.r.t. every parameter
};

// Supervised cross-entropy gradient for source training. Every sample must
// carry a label in [0, classes).
CeBatch ce_grad_batch(const model::Model& m, const std::vector<MultimodalSample>& batch);
CeBatch ce_grad_batch_serial(const model::Model& m, const std::vector<MultimodalSample>& batch);

}  // namespace sumi::kernels
