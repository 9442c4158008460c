#include "sumi/adapt.hpp"

#include <cmath>
#include <stdexcept>

#include "sumi/kernels.hpp"

namespace sumi::adapt {

using model::Model;
using numkit::Bindings;
using numkit::Graph;
using objective::AdaptConfig;
using objective::OodMode;
using selection::SelectionMask;

void AdamOptimizer::step(ParamSet& params, const GradMap& grads) {
  if (grads.empty()) throw std::invalid_argument("AdamOptimizer::step: empty gradient map");
  ++steps_;
  double bc1 = 1.0 - std::pow(beta1, static_cast<double>(steps_));
  double bc2 = 1.0 - std::pow(beta2, static_cast<double>(steps_));
  for (const auto& [name, g] : grads) {
    if (!params.contains(name))
      throw std::invalid_argument("AdamOptimizer::step: unknown parameter '" + name + "'");
    Tensor& p = params.entry(name).value;
    if (!p.same_shape(g))
      throw std::invalid_argument("AdamOptimizer::step: gradient for '" + name +
                                  "' is " + g.shape_str() + ", parameter is " + p.shape_str());
    Tensor& m = m1_.try_emplace(name, Tensor(p.rows(), p.cols())).first->second;
    Tensor& v = m2_.try_emplace(name, Tensor(p.rows(), p.cols())).first->second;
    for (int i = 0; i < p.size(); ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
      double mhat = m[i] / bc1;
      double vhat = v[i] / bc2;
      p[i] -= learning_rate * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

AdapterKind adapter_from_string(const std::string& s) {
  if (s == "source") return AdapterKind::kSource;
  if (s == "entropy-min") return AdapterKind::kEntropyMin;
  if (s == "gated-entropy-min") return AdapterKind::kGatedEntropyMin;
  if (s == "sumi") return AdapterKind::kSumi;
  throw std::invalid_argument("unknown adapter '" + s + "'");
}

std::string to_string(AdapterKind kind) {
  switch (kind) {
    case AdapterKind::kSource: return "source";
    case AdapterKind::kEntropyMin: return "entropy-min";
    case AdapterKind::kGatedEntropyMin: return "gated-entropy-min";
    case AdapterKind::kSumi: return "sumi";
  }
  throw std::invalid_argument("unknown adapter kind");
}

int predict_class(const Tensor& p) {
  if (p.size() < 1 || p.cols() != 1)
    throw std::invalid_argument("predict_class: expected a nonempty column vector");
  int best = 0;
  for (int i = 1; i < p.size(); ++i)
    if (p[i] > p[best]) best = i;
  return best;
}

EvalResult evaluate_accuracy(const Model& m, const std::vector<MultimodalSample>& data) {
  EvalResult r;
  if (data.empty()) return r;
  std::vector<model::ForwardOutputs> outs = kernels::forward_batch(m, data);
  r.total = static_cast<int>(data.size());
  for (size_t i = 0; i < data.size(); ++i)
    if (predict_class(outs[i].p_m) == data[i].label) ++r.correct;
  r.accuracy = static_cast<double>(r.correct) / static_cast<double>(r.total);
  return r;
}

namespace {

// Shared-graph forward pass over one batch. Unimodal slots follow the
// config's modality order so the gate and the loss see them consistently.
struct BatchGraph {
  Graph g;
  std::vector<model::ForwardNodes> nodes;
  std::vector<objective::SampleNodes> outputs;
  std::vector<Tensor> h;
  std::vector<Tensor> p_m;
  std::vector<selection::SampleEntropies> ents;
};

BatchGraph forward_graph(const Model& m, const std::vector<MultimodalSample>& batch,
                         const Bindings& bindings, bool swapped) {
  BatchGraph bg;
  bg.nodes.reserve(batch.size());
  for (const MultimodalSample& s : batch)
    bg.nodes.push_back(model::build_forward(bg.g, m, s.x_u1, s.x_u2));
  numkit::evaluate(bg.g, bindings);
  for (const model::ForwardNodes& n : bg.nodes) {
    bg.h.push_back(bg.g.value(n.h));
    bg.p_m.push_back(bg.g.value(n.p_m));
    double e1 = objective::entropy(bg.g.value(n.p_u1));
    double e2 = objective::entropy(bg.g.value(n.p_u2));
    selection::SampleEntropies se;
    se.m = objective::entropy(bg.p_m.back());
    se.u1 = swapped ? e2 : e1;
    se.u2 = swapped ? e1 : e2;
    bg.ents.push_back(se);
    objective::SampleNodes sn;
    sn.p_m = n.p_m;
    sn.p_u1 = swapped ? n.p_u2 : n.p_u1;
    sn.p_u2 = swapped ? n.p_u1 : n.p_u2;
    bg.outputs.push_back(sn);
  }
  return bg;
}

struct StepOutcome {
  StepReport report;
  StepDetail detail;
};

void fill_predictions(StepOutcome& out, const std::vector<MultimodalSample>& batch,
                      const std::vector<Tensor>& p_m) {
  out.detail.predictions.reserve(batch.size());
  for (size_t i = 0; i < batch.size(); ++i) {
    int pred = predict_class(p_m[i]);
    out.detail.predictions.push_back(pred);
    if (pred == batch[i].label) ++out.report.correct;
  }
}

StepOutcome source_step(const Model& m, const std::vector<MultimodalSample>& batch, int t) {
  StepOutcome out;
  out.report.t = out.detail.t = t;
  out.report.batch_size = static_cast<int>(batch.size());
  std::vector<model::ForwardOutputs> fw = kernels::forward_batch(m, batch);
  std::vector<Tensor> p_m;
  p_m.reserve(fw.size());
  for (model::ForwardOutputs& o : fw) {
    selection::SampleEntropies se;
    se.m = o.ent_m;
    se.u1 = o.ent_u1;
    se.u2 = o.ent_u2;
    out.detail.entropies.push_back(se);
    p_m.push_back(std::move(o.p_m));
  }
  out.detail.band.assign(batch.size(), false);
  out.detail.selected.assign(batch.size(), false);
  fill_predictions(out, batch, p_m);
  return out;
}

StepOutcome entropy_min_step(Model& m, AdamOptimizer& adam,
                             const std::vector<MultimodalSample>& batch, int t) {
  StepOutcome out;
  out.report.t = out.detail.t = t;
  out.report.batch_size = static_cast<int>(batch.size());

  Bindings bindings = Bindings::of(m.params);
  BatchGraph bg = forward_graph(m, batch, bindings, false);
  int total = -1;
  for (const model::ForwardNodes& n : bg.nodes) {
    int e = numkit::entropy_node(bg.g, n.p_m);
    total = total < 0 ? e : bg.g.add(total, e);
  }
  bg.g.set_output(total);
  out.report.loss = numkit::evaluate(bg.g, bindings).value();
  out.report.ent_sum = out.report.loss;
  out.report.band_count = out.report.batch_size;
  out.report.selected_count = out.report.batch_size;
  out.detail.band.assign(batch.size(), true);
  out.detail.selected.assign(batch.size(), true);
  out.detail.entropies = bg.ents;
  fill_predictions(out, batch, bg.p_m);

  GradMap grads = numkit::gradient(bg.g, m.params);
  adam.step(m.params, grads);
  return out;
}

// The gate-and-weight step shared by the full method and the gated
// baseline; the baseline runs it with every component switch off.
StepOutcome gated_step(Model& m, AdamOptimizer& adam, const std::vector<MultimodalSample>& batch,
                       const AdaptConfig& cfg, int t, int iter, OodMode mode) {
  StepOutcome out;
  out.report.t = out.detail.t = t;
  out.report.batch_size = static_cast<int>(batch.size());
  int n = static_cast<int>(batch.size());

  Bindings bindings = Bindings::of(m.params);
  BatchGraph bg = forward_graph(m, batch, bindings, cfg.swapped_modalities());

  selection::SmoothingSchedule sched{cfg.schedule, iter};
  double f = sched.value(t);
  out.report.f = out.detail.f = f;

  SelectionMask band;
  if (cfg.use_iqr) {
    selection::QuartileStats stats = selection::quartiles(bg.h, cfg.quantile_mode);
    band = selection::iqr_mask(bg.h, stats, sched, t, cfg.beta);
  } else {
    band.selected.assign(n, true);
    band.band_fraction.assign(n, 1.0);
  }
  double gamma_m = cfg.resolved_gamma_m(m.spec.classes);
  double gamma_u = cfg.use_ua ? cfg.gamma_u : 0.0;
  SelectionMask gate = selection::ua_mask(bg.ents, gamma_m, gamma_u, cfg.mu);
  SelectionMask sel = selection::intersect(band, gate);

  objective::LossNodes ln =
      objective::total_loss(bg.g, bg.outputs, sel, cfg, t, mode, iter, m.spec.classes);
  out.report.loss = numkit::evaluate(bg.g, bindings).value();
  out.report.ent_sum = ln.ent_sum >= 0 ? bg.g.value(ln.ent_sum).value() : 0.0;
  out.report.mis_sum = ln.mis_sum >= 0 ? bg.g.value(ln.mis_sum).value() : 0.0;
  out.report.balance = ln.balance >= 0 ? bg.g.value(ln.balance).value() : 0.0;
  out.report.lambda_eff = ln.lambda_eff;
  out.report.band_count = band.count();
  out.report.selected_count = sel.count();
  out.detail.band = band.selected;
  out.detail.selected = sel.selected;
  out.detail.entropies = bg.ents;
  fill_predictions(out, batch, bg.p_m);

  if (sel.count() > 0) {
    GradMap grads = numkit::gradient(bg.g, m.params);
    adam.step(m.params, grads);
  }
  return out;
}

}  // namespace

RunReport run_adaptation(Model& m, const std::vector<MultimodalSample>& stream,
                         AdapterKind kind, const AdaptConfig& config, const RunOptions& opts) {
  config.validate();
  if (stream.empty()) throw std::invalid_argument("run_adaptation: empty stream");
  int batch_size = config.batch_size;
  int n_batches =
      static_cast<int>((stream.size() + static_cast<size_t>(batch_size) - 1) / batch_size);
  int iter = opts.iter.value_or(n_batches);
  if (iter < n_batches)
    throw std::invalid_argument("run_adaptation: horizon " + std::to_string(iter) +
                                " is shorter than the stream's " + std::to_string(n_batches) +
                                " batches");

  AdaptConfig gated_off = config;
  gated_off.use_iqr = false;
  gated_off.use_ua = false;
  gated_off.use_mis = false;

  RunReport report;
  report.adapter = to_string(kind);
  report.mode = opts.mode;
  report.iter = iter;
  report.trace.reserve(static_cast<size_t>(n_batches));

  AdamOptimizer adam(config.learning_rate);
  for (int b = 0; b < n_batches; ++b) {
    int t = b + 1;
    size_t begin = static_cast<size_t>(b) * static_cast<size_t>(batch_size);
    size_t end = std::min(stream.size(), begin + static_cast<size_t>(batch_size));
    std::vector<MultimodalSample> batch(stream.begin() + static_cast<ptrdiff_t>(begin),
                                        stream.begin() + static_cast<ptrdiff_t>(end));
    StepOutcome out;
    switch (kind) {
      case AdapterKind::kSource: out = source_step(m, batch, t); break;
      case AdapterKind::kEntropyMin: out = entropy_min_step(m, adam, batch, t); break;
      case AdapterKind::kGatedEntropyMin:
        out = gated_step(m, adam, batch, gated_off, t, iter, opts.mode);
        break;
      case AdapterKind::kSumi:
        out = gated_step(m, adam, batch, config, t, iter, opts.mode);
        break;
    }
    report.total += out.report.batch_size;
    report.correct += out.report.correct;
    for (size_t i = 0; i < batch.size(); ++i) {
      DomainStat& ds = report.per_domain[batch[i].domain];
      ++ds.total;
      if (out.detail.predictions[i] == batch[i].label) ++ds.correct;
    }
    report.trace.push_back(out.report);
    if (opts.observer) opts.observer(out.detail);
  }
  report.accuracy = static_cast<double>(report.correct) / static_cast<double>(report.total);
  return report;
}

}  // namespace sumi::adapt
