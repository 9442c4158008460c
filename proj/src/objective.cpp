#include "sumi/objective.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sumi::objective {

double entropy(const Tensor& p) {
  double h = 0.0;
  for (int i = 0; i < p.size(); ++i)
    if (p[i] > 0.0) h -= p[i] * std::log(p[i]);
  return h;
}

Tensor complementary(const std::vector<Tensor>& dists, int i) {
  int m = static_cast<int>(dists.size());
  if (m < 2) throw std::invalid_argument("complementary: need at least two distributions");
  if (i < 0 || i >= m) throw std::invalid_argument("complementary: index out of range");
  Tensor out(dists[0].rows(), 1, 0.0);
  for (int j = 0; j < m; ++j) {
    if (j == i) continue;
    if (!out.same_shape(dists[static_cast<size_t>(j)]))
      throw std::invalid_argument("complementary: distributions have mixed lengths");
    for (int c = 0; c < out.size(); ++c) out[c] += dists[static_cast<size_t>(j)][c];
  }
  for (int c = 0; c < out.size(); ++c) out[c] /= (m - 1);
  return out;
}

namespace {

double kl(const Tensor& p, const Tensor& q) {
  double d = 0.0;
  for (int i = 0; i < p.size(); ++i) {
    double pi = std::max(p[i], numkit::kLogEps);
    double qi = std::max(q[i], numkit::kLogEps);
    if (p[i] > 0.0) d += p[i] * (std::log(pi) - std::log(qi));
  }
  return d;
}

}  // namespace

double mis_loss(const Tensor& p_u1, const Tensor& p_u2, const Tensor& p_m) {
  if (!p_u1.same_shape(p_u2) || !p_u1.same_shape(p_m))
    throw std::invalid_argument("mis_loss: distribution shapes differ");
  Tensor mix1(p_m.rows(), 1), mix2(p_m.rows(), 1);
  for (int i = 0; i < p_m.size(); ++i) {
    mix1[i] = 0.5 * (p_u2[i] + p_m[i]);  // complement of u1 is u2
    mix2[i] = 0.5 * (p_u1[i] + p_m[i]);
  }
  return kl(p_u1, mix1) + kl(p_u2, mix2);
}

double sample_weight(double ent, double ent0) { return std::exp(ent0 - ent); }

OodMode ood_mode_from_string(const std::string& s) {
  if (s == "weak") return OodMode::kWeak;
  if (s == "wild") return OodMode::kWild;
  throw std::invalid_argument("unknown OOD mode '" + s + "'");
}

std::string to_string(OodMode mode) { return mode == OodMode::kWeak ? "weak" : "wild"; }

double AdaptConfig::resolved_gamma_m(int classes) const {
  return gamma_m ? *gamma_m : 0.4 * std::log(static_cast<double>(classes));
}

double AdaptConfig::resolved_ent0(int classes) const {
  return ent0 ? *ent0 : 0.4 * std::log(static_cast<double>(classes));
}

int AdaptConfig::resolved_t0(int iter) const { return t0 ? *t0 : iter / 2; }

bool AdaptConfig::swapped_modalities() const {
  return modality_order[0] == "u2" && modality_order[1] == "u1";
}

void AdaptConfig::validate() const {
  if (gamma_m && *gamma_m < 0.0) throw std::invalid_argument("AdaptConfig: gamma_m < 0");
  if (gamma_u < 0.0) throw std::invalid_argument("AdaptConfig: gamma_u < 0");
  if (lambda < 0.0) throw std::invalid_argument("AdaptConfig: lambda < 0");
  if (ent0 && *ent0 < 0.0) throw std::invalid_argument("AdaptConfig: ent0 < 0");
  if (beta < 0.0 || beta > 1.0) throw std::invalid_argument("AdaptConfig: beta outside [0,1]");
  if (t0 && *t0 < 0) throw std::invalid_argument("AdaptConfig: t0 < 0");
  if (learning_rate <= 0.0) throw std::invalid_argument("AdaptConfig: learning rate <= 0");
  if (batch_size < 1) throw std::invalid_argument("AdaptConfig: batch size < 1");
  bool order_ok = (modality_order[0] == "u1" && modality_order[1] == "u2") ||
                  (modality_order[0] == "u2" && modality_order[1] == "u1");
  if (!order_ok)
    throw std::invalid_argument("AdaptConfig: modality_order must be a permutation of u1,u2");
}

int kl_node(Graph& g, int p, int q) {
  int diff = g.sub(g.log(p), g.log(q));
  return g.sum(g.mul(p, diff));
}

int mis_node(Graph& g, int p_u1, int p_u2, int p_m) {
  int mix1 = g.scale(g.add(p_u2, p_m), 0.5);
  int mix2 = g.scale(g.add(p_u1, p_m), 0.5);
  return g.add(kl_node(g, p_u1, mix1), kl_node(g, p_u2, mix2));
}

LossNodes total_loss(Graph& g, const std::vector<SampleNodes>& outputs,
                     const selection::SelectionMask& mask, const AdaptConfig& config, int t,
                     OodMode mode, int iter, int classes) {
  if (static_cast<int>(outputs.size()) != mask.size())
    throw std::invalid_argument("total_loss: mask and outputs disagree on batch size");
  if (!g.evaluated())
    throw std::logic_error("total_loss: evaluate the forward graph before assembling the loss");

  LossNodes loss;
  loss.lambda_eff = 0.0;
  if (config.use_mis &&
      (mode == OodMode::kWeak || (mode == OodMode::kWild && t < config.resolved_t0(iter))))
    loss.lambda_eff = config.lambda;

  double ent0 = config.resolved_ent0(classes);
  loss.alphas.assign(outputs.size(), 0.0);

  // Read the entropies before any append: adding nodes invalidates the
  // cached evaluation, and alpha must come from the pre-update forward.
  for (size_t i = 0; i < outputs.size(); ++i) {
    if (!mask.selected[i]) continue;
    loss.alphas[i] = sample_weight(entropy(g.value(outputs[i].p_m)), ent0);
  }

  int ent_sum = -1;
  int mis_sum = -1;
  std::vector<int> selected_pm;
  for (size_t i = 0; i < outputs.size(); ++i) {
    if (!mask.selected[i]) continue;
    const SampleNodes& nodes = outputs[i];
    double alpha = loss.alphas[i];
    selected_pm.push_back(nodes.p_m);

    int ent_term = g.scale(numkit::entropy_node(g, nodes.p_m), alpha);
    ent_sum = ent_sum < 0 ? ent_term : g.add(ent_sum, ent_term);

    if (loss.lambda_eff != 0.0) {
      int mis = mis_node(g, nodes.p_u1, nodes.p_u2, nodes.p_m);
      int mis_term = g.scale(mis, alpha * loss.lambda_eff);
      mis_sum = mis_sum < 0 ? mis_term : g.add(mis_sum, mis_term);
    }
  }

  if (ent_sum < 0) {  // nothing selected
    loss.total = g.constant(Tensor::scalar(0.0));
    g.set_output(loss.total);
    return loss;
  }

  loss.ent_sum = ent_sum;
  loss.mis_sum = mis_sum;
  int total = mis_sum < 0 ? ent_sum : g.add(ent_sum, mis_sum);

  if (config.balance_term) {
    int acc = selected_pm[0];
    for (size_t i = 1; i < selected_pm.size(); ++i) acc = g.add(acc, selected_pm[i]);
    int q = g.scale(acc, 1.0 / static_cast<double>(selected_pm.size()));
    loss.balance = g.scale(g.sum(g.mul(q, g.log(q))), config.balance_weight);
    total = g.add(total, loss.balance);
  }

  loss.total = total;
  g.set_output(total);
  return loss;
}

}  // namespace sumi::objective
