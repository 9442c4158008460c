#pragma once

// Loss components: Shannon entropy, the complementary distribution built
// from the other modalities' predictions, the mutual-information-sharing
// loss that pulls each unimodal prediction toward a mixture of its
// complement and the fused prediction, the confidence weight, and the
// assembled total objective over the selected samples.

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "sumi/graph.hpp"
#include "sumi/selection.hpp"
#include "sumi/tensor.hpp"

namespace sumi::objective {

using numkit::Graph;
using numkit::Tensor;

// -sum p_i ln p_i with the 0 ln 0 = 0 convention. Result in [0, ln C].
double entropy(const Tensor& p);

// (sum_j dists[j] - dists[i]) / (M-1), the normalized mixture of every
// distribution except i. For M=2 this is exactly the other distribution.
Tensor complementary(const std::vector<Tensor>& dists, int i);

// KL(p_u1 || (p_u1' + p_m)/2) + KL(p_u2 || (p_u2' + p_m)/2) where the
// primed distribution is the complementary one (the other modality's
// prediction for two modalities). Log arguments clamped at kLogEps.
double mis_loss(const Tensor& p_u1, const Tensor& p_u2, const Tensor& p_m);

// exp(ent0 - ent); treated as a constant, never differentiated through.
double sample_weight(double ent, double ent0);

enum class OodMode { kWeak, kWild };

OodMode ood_mode_from_string(const std::string& s);
std::string to_string(OodMode mode);

// Hyperparameters of the adaptation objective and selection. Fields that
// default relative to the class count or the horizon stay unset until
// resolved at run start.
struct AdaptConfig {
  std::optional<double> gamma_m;  // multimodal entropy gate; default 0.4 ln C
  double gamma_u = 0.36787944117144233;  // exp(-1), unimodal sum threshold
  double mu = 1.0;                // weight of the second modality's entropy
  double lambda = 5.0;            // MIS weight
  double beta = 0.6;              // fraction-rule floor
  std::optional<double> ent0;     // weight normalization; default 0.4 ln C
  std::optional<int> t0;          // MIS window; default iter/2 rounded down
  selection::ScheduleFamily schedule = selection::ScheduleFamily::kLinear;
  selection::QuantileMode quantile_mode = selection::QuantileMode::kMinmaxInterp;
  double learning_rate = 1e-4;
  int batch_size = 16;
  bool balance_term = false;      // adds omega * sum_c q_c ln q_c over selected
  double balance_weight = 1.0;    // omega
  std::array<std::string, 2> modality_order = {"u1", "u2"};
  // Component switches for ablation; all on = the full method.
  bool use_iqr = true;
  bool use_ua = true;
  bool use_mis = true;

  double resolved_gamma_m(int classes) const;
  double resolved_ent0(int classes) const;
  int resolved_t0(int iter) const;
  bool swapped_modalities() const;  // true when modality_order is {"u2","u1"}
  void validate() const;            // throws std::invalid_argument
};

// Per-sample probability nodes inside a shared graph, in the modality
// order the config prescribes.
struct SampleNodes {
  int p_m = -1;
  int p_u1 = -1;
  int p_u2 = -1;
};

// KL(p || q) as a graph node: sum(p * (log p - log q)).
int kl_node(Graph& g, int p, int q);

// Eq-6 style loss for two modalities as a graph node.
int mis_node(Graph& g, int p_u1, int p_u2, int p_m);

struct LossNodes {
  int total = -1;     // scalar node; a zero constant when nothing is selected
  int ent_sum = -1;   // sum over selected of alpha * Ent
  int mis_sum = -1;   // sum over selected of alpha * lambda_eff * MIS; -1 when gated off
  int balance = -1;   // omega * sum_c q_c ln q_c; -1 when disabled or empty selection
  double lambda_eff = 0.0;
  std::vector<double> alphas;  // per-sample weights, 0 for unselected samples
};

// Assembles sum over selected samples of alpha (Ent + lambda_eff MIS) on
// top of an already evaluated graph. lambda_eff is `lambda` when the mode
// is weak, or when the mode is wild and t < t0; otherwise 0 and no MIS
// nodes are built, so the gated-off loss is bitwise the lambda=0 loss.
// alpha = exp(ent0 - Ent) enters as a constant. The caller re-evaluates
// the graph afterwards to flow values through the new nodes.
LossNodes total_loss(Graph& g, const std::vector<SampleNodes>& outputs,
                     const selection::SelectionMask& mask, const AdaptConfig& config, int t,
                     OodMode mode, int iter, int classes);

}  // namespace sumi::objective
