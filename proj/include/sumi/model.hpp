#pragma once

// Toy two-modality classifier: one encoder per modality (two blocks of
// linear -> layer norm with affine -> nonlinearity), fusion by
// concatenation into a linear head. Unimodal predictions reuse the head
// with the other representation zero-masked, which doubles as the
// missing-modality convention.

#include <cstdint>
#include <string>
#include <vector>

#include "sumi/graph.hpp"
#include "sumi/sample.hpp"
#include "sumi/tensor.hpp"

namespace sumi::model {

using numkit::Graph;
using numkit::ParamSet;
using numkit::Tensor;

enum class Nonlinearity { kRelu, kTanh };

Nonlinearity nonlinearity_from_string(const std::string& s);
std::string to_string(Nonlinearity n);

struct ModelSpec {
  int dim_u1 = 16;
  int dim_u2 = 16;
  int hidden = 64;
  int repr = 32;
  int classes = 8;
  Nonlinearity nonlinearity = Nonlinearity::kRelu;

  void validate() const;  // throws std::invalid_argument
};

// Parameters live in a flat ParamSet. The layer-norm scale/shift tensors of
// both encoders are the adaptable partition; everything else stays frozen.
struct Model {
  ModelSpec spec;
  ParamSet params;
  uint64_t init_seed = 0;
};

Model make_model(const ModelSpec& spec, uint64_t seed);

std::vector<std::string> adaptable_names(const Model& m);
std::vector<std::string> frozen_names(const Model& m);

// Graph-side forward for one sample. Inputs are embedded as constants,
// parameters as named leaves (bind them from model.params), so one graph
// can stack many samples while sharing the parameter leaves' gradients.
struct ForwardNodes {
  int h_u1 = -1;
  int h_u2 = -1;
  int h = -1;  // concatenation [h_u1, h_u2]
  int logits_m = -1, p_m = -1;
  int logits_u1 = -1, p_u1 = -1;
  int logits_u2 = -1, p_u2 = -1;
};

ForwardNodes build_forward(Graph& g, const Model& m, const Tensor& x_u1, const Tensor& x_u2);

// Value-level forward pass for one sample.
struct ForwardOutputs {
  Tensor h_u1, h_u2, h;
  Tensor logits_m, p_m, p_u1, p_u2;
  double ent_m = 0.0, ent_u1 = 0.0, ent_u2 = 0.0;
};

ForwardOutputs forward(const Model& m, const MultimodalSample& sample);

// Versioned JSON checkpoint: spec, init seed, every parameter tensor with
// its partition flag. Round-trips bit-exactly.
void save_model(const Model& m, const std::string& path);
Model load_model(const std::string& path);

}  // namespace sumi::model
