#include "sumi/model.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include "json.hpp"
#include "sumi/objective.hpp"

namespace sumi::model {

using ordered_json = nlohmann::ordered_json;

Nonlinearity nonlinearity_from_string(const std::string& s) {
  if (s == "relu") return Nonlinearity::kRelu;
  if (s == "tanh") return Nonlinearity::kTanh;
  throw std::invalid_argument("unknown nonlinearity '" + s + "'");
}

std::string to_string(Nonlinearity n) {
  return n == Nonlinearity::kRelu ? "relu" : "tanh";
}

void ModelSpec::validate() const {
  if (dim_u1 < 1 || dim_u2 < 1 || hidden < 1 || repr < 1)
    throw std::invalid_argument("ModelSpec: all dims must be >= 1");
  if (classes < 2) throw std::invalid_argument("ModelSpec: classes must be >= 2");
}

namespace {

Tensor xavier(std::mt19937_64& rng, int rows, int cols) {
  double bound = std::sqrt(6.0 / (rows + cols));
  std::uniform_real_distribution<double> u(-bound, bound);
  Tensor t(rows, cols);
  for (int i = 0; i < t.size(); ++i) t[i] = u(rng);
  return t;
}

void add_encoder(ParamSet& params, std::mt19937_64& rng, const std::string& prefix, int in,
                 int hidden, int repr) {
  params.add(prefix + ".l1.w", xavier(rng, hidden, in), false);
  params.add(prefix + ".l1.b", Tensor::vector(hidden, 0.0), false);
  params.add(prefix + ".ln1.scale", Tensor::vector(hidden, 1.0), true);
  params.add(prefix + ".ln1.shift", Tensor::vector(hidden, 0.0), true);
  params.add(prefix + ".l2.w", xavier(rng, repr, hidden), false);
  params.add(prefix + ".l2.b", Tensor::vector(repr, 0.0), false);
  params.add(prefix + ".ln2.scale", Tensor::vector(repr, 1.0), true);
  params.add(prefix + ".ln2.shift", Tensor::vector(repr, 0.0), true);
}

}  // namespace

Model make_model(const ModelSpec& spec, uint64_t seed) {
  spec.validate();
  Model m;
  m.spec = spec;
  m.init_seed = seed;
  std::mt19937_64 rng(seed);
  add_encoder(m.params, rng, "enc1", spec.dim_u1, spec.hidden, spec.repr);
  add_encoder(m.params, rng, "enc2", spec.dim_u2, spec.hidden, spec.repr);
  m.params.add("head.w", xavier(rng, spec.classes, 2 * spec.repr), false);
  m.params.add("head.b", Tensor::vector(spec.classes, 0.0), false);
  return m;
}

std::vector<std::string> adaptable_names(const Model& m) { return m.params.adaptable_names(); }
std::vector<std::string> frozen_names(const Model& m) { return m.params.frozen_names(); }

namespace {

int build_encoder(Graph& g, const Model& m, const std::string& prefix, const Tensor& x, int in) {
  const ModelSpec& spec = m.spec;
  auto nonlin = [&](int node) {
    return spec.nonlinearity == Nonlinearity::kRelu ? g.relu(node) : g.tanh(node);
  };
  if (x.rows() != in || x.cols() != 1)
    throw std::invalid_argument("forward: input for " + prefix + " is " + x.shape_str() +
                                ", model expects " + std::to_string(in) + "x1");
  int xi = g.constant(x);
  int a1 = g.add(g.matvec(g.leaf(prefix + ".l1.w", spec.hidden, in), xi),
                 g.leaf(prefix + ".l1.b", spec.hidden));
  int n1 = g.layer_norm(a1, g.leaf(prefix + ".ln1.scale", spec.hidden),
                        g.leaf(prefix + ".ln1.shift", spec.hidden));
  int h1 = nonlin(n1);
  int a2 = g.add(g.matvec(g.leaf(prefix + ".l2.w", spec.repr, spec.hidden), h1),
                 g.leaf(prefix + ".l2.b", spec.repr));
  int n2 = g.layer_norm(a2, g.leaf(prefix + ".ln2.scale", spec.repr),
                        g.leaf(prefix + ".ln2.shift", spec.repr));
  return nonlin(n2);
}

}  // namespace

ForwardNodes build_forward(Graph& g, const Model& m, const Tensor& x_u1, const Tensor& x_u2) {
  const ModelSpec& spec = m.spec;
  ForwardNodes out;
  out.h_u1 = build_encoder(g, m, "enc1", x_u1, spec.dim_u1);
  out.h_u2 = build_encoder(g, m, "enc2", x_u2, spec.dim_u2);
  out.h = g.concat(out.h_u1, out.h_u2);

  int head_w = g.leaf("head.w", spec.classes, 2 * spec.repr);
  int head_b = g.leaf("head.b", spec.classes);
  auto head = [&](int repr_node) {
    return g.add(g.matvec(head_w, repr_node), head_b);
  };

  out.logits_m = head(out.h);
  out.p_m = g.softmax(out.logits_m);

  int zero = g.constant(Tensor::vector(spec.repr, 0.0));
  out.logits_u1 = head(g.concat(out.h_u1, zero));
  out.p_u1 = g.softmax(out.logits_u1);
  out.logits_u2 = head(g.concat(zero, out.h_u2));
  out.p_u2 = g.softmax(out.logits_u2);
  return out;
}

ForwardOutputs forward(const Model& m, const MultimodalSample& sample) {
  Graph g;
  ForwardNodes nodes = build_forward(g, m, sample.x_u1, sample.x_u2);
  g.set_output(nodes.p_m);
  evaluate(g, numkit::Bindings::of(m.params));

  ForwardOutputs out;
  out.h_u1 = g.value(nodes.h_u1);
  out.h_u2 = g.value(nodes.h_u2);
  out.h = g.value(nodes.h);
  out.logits_m = g.value(nodes.logits_m);
  out.p_m = g.value(nodes.p_m);
  out.p_u1 = g.value(nodes.p_u1);
  out.p_u2 = g.value(nodes.p_u2);
  out.ent_m = objective::entropy(out.p_m);
  out.ent_u1 = objective::entropy(out.p_u1);
  out.ent_u2 = objective::entropy(out.p_u2);
  return out;
}

namespace {

ordered_json tensor_to_json(const Tensor& t) {
  ordered_json j;
  j["rows"] = t.rows();
  j["cols"] = t.cols();
  j["data"] = t.data();
  return j;
}

Tensor tensor_from_json(const ordered_json& j) {
  Tensor t(j.at("rows").get<int>(), j.at("cols").get<int>());
  const auto& data = j.at("data");
  if (static_cast<int>(data.size()) != t.size())
    throw std::invalid_argument("checkpoint tensor data length mismatch");
  for (int i = 0; i < t.size(); ++i) t[i] = data[static_cast<size_t>(i)].get<double>();
  return t;
}

constexpr int kCheckpointVersion = 1;

}  // namespace

void save_model(const Model& m, const std::string& path) {
  ordered_json j;
  j["version"] = kCheckpointVersion;
  j["spec"] = {
      {"dim_u1", m.spec.dim_u1},   {"dim_u2", m.spec.dim_u2},
      {"hidden", m.spec.hidden},   {"repr", m.spec.repr},
      {"classes", m.spec.classes}, {"nonlinearity", to_string(m.spec.nonlinearity)},
  };
  j["init_seed"] = m.init_seed;
  ordered_json params = ordered_json::object();
  for (int i = 0; i < m.params.size(); ++i) {
    const auto& e = m.params.entry(i);
    ordered_json pj = tensor_to_json(e.value);
    pj["adaptable"] = e.adaptable;
    params[e.name] = std::move(pj);
  }
  j["params"] = std::move(params);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_model: cannot open '" + path + "'");
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error("save_model: write failed for '" + path + "'");
}

Model load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_model: cannot open '" + path + "'");
  ordered_json j = ordered_json::parse(in);
  if (j.at("version").get<int>() != kCheckpointVersion)
    throw std::runtime_error("load_model: unsupported checkpoint version");

  Model m;
  const auto& spec = j.at("spec");
  m.spec.dim_u1 = spec.at("dim_u1").get<int>();
  m.spec.dim_u2 = spec.at("dim_u2").get<int>();
  m.spec.hidden = spec.at("hidden").get<int>();
  m.spec.repr = spec.at("repr").get<int>();
  m.spec.classes = spec.at("classes").get<int>();
  m.spec.nonlinearity = nonlinearity_from_string(spec.at("nonlinearity").get<std::string>());
  m.spec.validate();
  m.init_seed = j.at("init_seed").get<uint64_t>();
  for (const auto& [name, pj] : j.at("params").items())
    m.params.add(name, tensor_from_json(pj), pj.at("adaptable").get<bool>());
  return m;
}

}  // namespace sumi::model
