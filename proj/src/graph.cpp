#include "sumi/graph.hpp"

#include <algorithm>
#include <cmath>

namespace sumi::numkit {

const char* op_name(Op op) {
  switch (op) {
    case Op::kLeaf: return "leaf";
    case Op::kConst: return "const";
    case Op::kMatVec: return "matvec";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kScale: return "scale";
    case Op::kRelu: return "relu";
    case Op::kTanh: return "tanh";
    case Op::kLayerNorm: return "layer_norm";
    case Op::kSoftmax: return "softmax";
    case Op::kLog: return "log";
    case Op::kSum: return "sum";
    case Op::kMean: return "mean";
    case Op::kConcat: return "concat";
  }
  return "?";
}

int ParamSet::add(std::string name, Tensor value, bool adaptable) {
  if (index_.count(name) > 0)
    throw GraphError("ParamSet: duplicate parameter '" + name + "'");
  int id = static_cast<int>(entries_.size());
  index_[name] = id;
  entries_.push_back(Entry{std::move(name), std::move(value), adaptable});
  return id;
}

ParamSet::Entry& ParamSet::entry(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw GraphError("ParamSet: unknown parameter '" + name + "'");
  return entries_[static_cast<size_t>(it->second)];
}

const ParamSet::Entry& ParamSet::entry(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw GraphError("ParamSet: unknown parameter '" + name + "'");
  return entries_[static_cast<size_t>(it->second)];
}

void ParamSet::set_adaptable(const std::string& name, bool adaptable) {
  entry(name).adaptable = adaptable;
}

void ParamSet::set_all_adaptable(bool adaptable) {
  for (auto& e : entries_) e.adaptable = adaptable;
}

std::vector<std::string> ParamSet::adaptable_names() const {
  std::vector<std::string> out;
  for (const auto& e : entries_)
    if (e.adaptable) out.push_back(e.name);
  return out;
}

std::vector<std::string> ParamSet::frozen_names() const {
  std::vector<std::string> out;
  for (const auto& e : entries_)
    if (!e.adaptable) out.push_back(e.name);
  return out;
}

Bindings Bindings::of(const ParamSet& params) {
  Bindings b;
  for (int i = 0; i < params.size(); ++i) b.bind(params.entry(i).name, params.entry(i).value);
  return b;
}

int Graph::push(Node n) {
  nodes_.push_back(std::move(n));
  evaluated_ = false;
  return static_cast<int>(nodes_.size()) - 1;
}

void Graph::check_input(int id, const char* ctx) const {
  if (id < 0 || id >= static_cast<int>(nodes_.size()))
    throw GraphError(std::string(ctx) + ": input node " + std::to_string(id) +
                     " does not exist yet");
}

void Graph::fail(int id, const std::string& msg) const {
  const Node& n = nodes_[static_cast<size_t>(id)];
  std::string where = "node " + std::to_string(id) + " (" + op_name(n.op);
  if (n.op == Op::kLeaf) where += " '" + n.name + "'";
  where += ")";
  throw GraphError(where + ": " + msg);
}

int Graph::leaf(const std::string& name, int rows, int cols) {
  if (rows <= 0 || cols <= 0) throw GraphError("leaf '" + name + "': non-positive shape");
  Node n;
  n.op = Op::kLeaf;
  n.name = name;
  n.rows = rows;
  n.cols = cols;
  return push(std::move(n));
}

int Graph::constant(Tensor t) {
  Node n;
  n.op = Op::kConst;
  n.rows = t.rows();
  n.cols = t.cols();
  n.payload = std::move(t);
  return push(std::move(n));
}

int Graph::matvec(int w, int x) {
  check_input(w, "matvec");
  check_input(x, "matvec");
  const Node& nw = nodes_[static_cast<size_t>(w)];
  const Node& nx = nodes_[static_cast<size_t>(x)];
  if (nx.cols != 1) fail(x, "matvec expects a column vector on the right, got " +
                                std::to_string(nx.rows) + "x" + std::to_string(nx.cols));
  if (nw.cols != nx.rows)
    fail(w, "matvec shape mismatch: " + std::to_string(nw.rows) + "x" +
                std::to_string(nw.cols) + " * " + std::to_string(nx.rows) + "x1");
  Node n;
  n.op = Op::kMatVec;
  n.a = w;
  n.b = x;
  n.rows = nw.rows;
  n.cols = 1;
  return push(std::move(n));
}

static const char* binop_name(Op op) { return op_name(op); }

int Graph::add(int a, int b) {
  check_input(a, "add");
  check_input(b, "add");
  const Node& na = nodes_[static_cast<size_t>(a)];
  const Node& nb = nodes_[static_cast<size_t>(b)];
  if (na.rows != nb.rows || na.cols != nb.cols)
    fail(a, std::string(binop_name(Op::kAdd)) + " shape mismatch: " + std::to_string(na.rows) +
                "x" + std::to_string(na.cols) + " vs " + std::to_string(nb.rows) + "x" +
                std::to_string(nb.cols));
  Node n;
  n.op = Op::kAdd;
  n.a = a;
  n.b = b;
  n.rows = na.rows;
  n.cols = na.cols;
  return push(std::move(n));
}

int Graph::sub(int a, int b) {
  check_input(a, "sub");
  check_input(b, "sub");
  const Node& na = nodes_[static_cast<size_t>(a)];
  const Node& nb = nodes_[static_cast<size_t>(b)];
  if (na.rows != nb.rows || na.cols != nb.cols)
    fail(a, "sub shape mismatch: " + std::to_string(na.rows) + "x" + std::to_string(na.cols) +
                " vs " + std::to_string(nb.rows) + "x" + std::to_string(nb.cols));
  Node n;
  n.op = Op::kSub;
  n.a = a;
  n.b = b;
  n.rows = na.rows;
  n.cols = na.cols;
  return push(std::move(n));
}

int Graph::mul(int a, int b) {
  check_input(a, "mul");
  check_input(b, "mul");
  const Node& na = nodes_[static_cast<size_t>(a)];
  const Node& nb = nodes_[static_cast<size_t>(b)];
  if (na.rows != nb.rows || na.cols != nb.cols)
    fail(a, "mul shape mismatch: " + std::to_string(na.rows) + "x" + std::to_string(na.cols) +
                " vs " + std::to_string(nb.rows) + "x" + std::to_string(nb.cols));
  Node n;
  n.op = Op::kMul;
  n.a = a;
  n.b = b;
  n.rows = na.rows;
  n.cols = na.cols;
  return push(std::move(n));
}

int Graph::scale(int a, double k) {
  check_input(a, "scale");
  const Node& na = nodes_[static_cast<size_t>(a)];
  Node n;
  n.op = Op::kScale;
  n.a = a;
  n.k = k;
  n.rows = na.rows;
  n.cols = na.cols;
  return push(std::move(n));
}

int Graph::relu(int a) {
  check_input(a, "relu");
  const Node& na = nodes_[static_cast<size_t>(a)];
  Node n;
  n.op = Op::kRelu;
  n.a = a;
  n.rows = na.rows;
  n.cols = na.cols;
  return push(std::move(n));
}

int Graph::tanh(int a) {
  check_input(a, "tanh");
  const Node& na = nodes_[static_cast<size_t>(a)];
  Node n;
  n.op = Op::kTanh;
  n.a = a;
  n.rows = na.rows;
  n.cols = na.cols;
  return push(std::move(n));
}

int Graph::layer_norm(int x, int scale, int shift) {
  check_input(x, "layer_norm");
  check_input(scale, "layer_norm");
  check_input(shift, "layer_norm");
  const Node& nx = nodes_[static_cast<size_t>(x)];
  const Node& ns = nodes_[static_cast<size_t>(scale)];
  const Node& nb = nodes_[static_cast<size_t>(shift)];
  if (nx.cols != 1) fail(x, "layer_norm expects a vector");
  if (ns.rows != nx.rows || ns.cols != 1)
    fail(scale, "layer_norm scale must be " + std::to_string(nx.rows) + "x1, got " +
                    std::to_string(ns.rows) + "x" + std::to_string(ns.cols));
  if (nb.rows != nx.rows || nb.cols != 1)
    fail(shift, "layer_norm shift must be " + std::to_string(nx.rows) + "x1, got " +
                    std::to_string(nb.rows) + "x" + std::to_string(nb.cols));
  Node n;
  n.op = Op::kLayerNorm;
  n.a = x;
  n.b = scale;
  n.c = shift;
  n.rows = nx.rows;
  n.cols = 1;
  return push(std::move(n));
}

int Graph::softmax(int a) {
  check_input(a, "softmax");
  const Node& na = nodes_[static_cast<size_t>(a)];
  if (na.cols != 1) fail(a, "softmax expects a vector");
  Node n;
  n.op = Op::kSoftmax;
  n.a = a;
  n.rows = na.rows;
  n.cols = 1;
  return push(std::move(n));
}

int Graph::log(int a) {
  check_input(a, "log");
  const Node& na = nodes_[static_cast<size_t>(a)];
  Node n;
  n.op = Op::kLog;
  n.a = a;
  n.rows = na.rows;
  n.cols = na.cols;
  return push(std::move(n));
}

int Graph::sum(int a) {
  check_input(a, "sum");
  Node n;
  n.op = Op::kSum;
  n.a = a;
  n.rows = 1;
  n.cols = 1;
  return push(std::move(n));
}

int Graph::mean(int a) {
  check_input(a, "mean");
  Node n;
  n.op = Op::kMean;
  n.a = a;
  n.rows = 1;
  n.cols = 1;
  return push(std::move(n));
}

int Graph::concat(int a, int b) {
  check_input(a, "concat");
  check_input(b, "concat");
  const Node& na = nodes_[static_cast<size_t>(a)];
  const Node& nb = nodes_[static_cast<size_t>(b)];
  if (na.cols != 1) fail(a, "concat expects vectors");
  if (nb.cols != 1) fail(b, "concat expects vectors");
  Node n;
  n.op = Op::kConcat;
  n.a = a;
  n.b = b;
  n.rows = na.rows + nb.rows;
  n.cols = 1;
  return push(std::move(n));
}

void Graph::set_output(int id) {
  check_input(id, "set_output");
  output_ = id;
}

const Tensor& Graph::value(int id) const {
  check_input(id, "value");
  if (!evaluated_) throw GraphError("Graph::value: graph has not been evaluated");
  return nodes_[static_cast<size_t>(id)].value;
}

Tensor evaluate(Graph& graph, const Bindings& bindings) {
  if (graph.nodes_.empty()) throw GraphError("evaluate: empty graph");
  for (size_t id = 0; id < graph.nodes_.size(); ++id) {
    Node& n = graph.nodes_[id];
    switch (n.op) {
      case Op::kLeaf: {
        const Tensor* t = bindings.find(n.name);
        if (t == nullptr) graph.fail(static_cast<int>(id), "unbound leaf");
        if (t->rows() != n.rows || t->cols() != n.cols)
          graph.fail(static_cast<int>(id),
                     "bound tensor is " + t->shape_str() + ", leaf declared " +
                         std::to_string(n.rows) + "x" + std::to_string(n.cols));
        n.value = *t;
        break;
      }
      case Op::kConst:
        n.value = n.payload;
        break;
      case Op::kMatVec: {
        const Tensor& w = graph.nodes_[static_cast<size_t>(n.a)].value;
        const Tensor& x = graph.nodes_[static_cast<size_t>(n.b)].value;
        Tensor y(n.rows, 1);
        for (int r = 0; r < w.rows(); ++r) {
          double acc = 0.0;
          for (int c = 0; c < w.cols(); ++c) acc += w.at(r, c) * x[c];
          y[r] = acc;
        }
        n.value = std::move(y);
        break;
      }
      case Op::kAdd: {
        const Tensor& a = graph.nodes_[static_cast<size_t>(n.a)].value;
        const Tensor& b = graph.nodes_[static_cast<size_t>(n.b)].value;
        Tensor y(n.rows, n.cols);
        for (int i = 0; i < y.size(); ++i) y[i] = a[i] + b[i];
        n.value = std::move(y);
        break;
      }
      case Op::kSub: {
        const Tensor& a = graph.nodes_[static_cast<size_t>(n.a)].value;
        const Tensor& b = graph.nodes_[static_cast<size_t>(n.b)].value;
        Tensor y(n.rows, n.cols);
        for (int i = 0; i < y.size(); ++i) y[i] = a[i] - b[i];
        n.value = std::move(y);
        break;
      }
      case Op::kMul: {
        const Tensor& a = graph.nodes_[static_cast<size_t>(n.a)].value;
        const Tensor& b = graph.nodes_[static_cast<size_t>(n.b)].value;
        Tensor y(n.rows, n.cols);
        for (int i = 0; i < y.size(); ++i) y[i] = a[i] * b[i];
        n.value = std::move(y);
        break;
      }
      case Op::kScale: {
        const Tensor& a = graph.nodes_[static_cast<size_t>(n.a)].value;
        Tensor y(n.rows, n.cols);
        for (int i = 0; i < y.size(); ++i) y[i] = n.k * a[i];
        n.value = std::move(y);
        break;
      }
      case Op::kRelu: {
        const Tensor& a = graph.nodes_[static_cast<size_t>(n.a)].value;
        Tensor y(n.rows, n.cols);
        for (int i = 0; i < y.size(); ++i) y[i] = a[i] > 0.0 ? a[i] : 0.0;
        n.value = std::move(y);
        break;
      }
      case Op::kTanh: {
        const Tensor& a = graph.nodes_[static_cast<size_t>(n.a)].value;
        Tensor y(n.rows, n.cols);
        for (int i = 0; i < y.size(); ++i) y[i] = std::tanh(a[i]);
        n.value = std::move(y);
        break;
      }
      case Op::kLayerNorm: {
        const Tensor& x = graph.nodes_[static_cast<size_t>(n.a)].value;
        const Tensor& gamma = graph.nodes_[static_cast<size_t>(n.b)].value;
        const Tensor& beta = graph.nodes_[static_cast<size_t>(n.c)].value;
        int d = x.rows();
        double mu = 0.0;
        for (int i = 0; i < d; ++i) mu += x[i];
        mu /= d;
        double var = 0.0;
        for (int i = 0; i < d; ++i) var += (x[i] - mu) * (x[i] - mu);
        var /= d;
        double inv_sigma = 1.0 / std::sqrt(var + kNormEps);
        Tensor y(d, 1);
        for (int i = 0; i < d; ++i) y[i] = gamma[i] * ((x[i] - mu) * inv_sigma) + beta[i];
        n.value = std::move(y);
        break;
      }
      case Op::kSoftmax: {
        const Tensor& a = graph.nodes_[static_cast<size_t>(n.a)].value;
        int d = a.rows();
        double m = a[0];
        for (int i = 1; i < d; ++i) m = std::max(m, a[i]);
        Tensor y(d, 1);
        double z = 0.0;
        for (int i = 0; i < d; ++i) {
          y[i] = std::exp(a[i] - m);
          z += y[i];
        }
        for (int i = 0; i < d; ++i) y[i] /= z;
        n.value = std::move(y);
        break;
      }
      case Op::kLog: {
        const Tensor& a = graph.nodes_[static_cast<size_t>(n.a)].value;
        Tensor y(n.rows, n.cols);
        for (int i = 0; i < y.size(); ++i) y[i] = std::log(std::max(a[i], kLogEps));
        n.value = std::move(y);
        break;
      }
      case Op::kSum: {
        const Tensor& a = graph.nodes_[static_cast<size_t>(n.a)].value;
        double acc = 0.0;
        for (int i = 0; i < a.size(); ++i) acc += a[i];
        n.value = Tensor::scalar(acc);
        break;
      }
      case Op::kMean: {
        const Tensor& a = graph.nodes_[static_cast<size_t>(n.a)].value;
        double acc = 0.0;
        for (int i = 0; i < a.size(); ++i) acc += a[i];
        n.value = Tensor::scalar(acc / a.size());
        break;
      }
      case Op::kConcat: {
        const Tensor& a = graph.nodes_[static_cast<size_t>(n.a)].value;
        const Tensor& b = graph.nodes_[static_cast<size_t>(n.b)].value;
        Tensor y(n.rows, 1);
        for (int i = 0; i < a.rows(); ++i) y[i] = a[i];
        for (int i = 0; i < b.rows(); ++i) y[a.rows() + i] = b[i];
        n.value = std::move(y);
        break;
      }
    }
  }
  graph.evaluated_ = true;
  int out = graph.output_ >= 0 ? graph.output_ : static_cast<int>(graph.nodes_.size()) - 1;
  return graph.nodes_[static_cast<size_t>(out)].value;
}

GradMap gradient(Graph& graph, const ParamSet& wrt) {
  if (!graph.evaluated_) throw GraphError("gradient: evaluate the graph first");
  int out = graph.output_ >= 0 ? graph.output_ : static_cast<int>(graph.nodes_.size()) - 1;
  Node& out_node = graph.nodes_[static_cast<size_t>(out)];
  if (!(out_node.value.is_scalar()))
    graph.fail(out, "gradient needs a scalar output, got " + out_node.value.shape_str());

  for (Node& n : graph.nodes_) n.adjoint = Tensor(n.value.rows(), n.value.cols(), 0.0);
  out_node.adjoint[0] = 1.0;

  for (int id = static_cast<int>(graph.nodes_.size()) - 1; id >= 0; --id) {
    Node& n = graph.nodes_[static_cast<size_t>(id)];
    const Tensor& dy = n.adjoint;
    switch (n.op) {
      case Op::kLeaf:
      case Op::kConst:
        break;
      case Op::kMatVec: {
        Node& wn = graph.nodes_[static_cast<size_t>(n.a)];
        Node& xn = graph.nodes_[static_cast<size_t>(n.b)];
        const Tensor& w = wn.value;
        const Tensor& x = xn.value;
        for (int r = 0; r < w.rows(); ++r)
          for (int c = 0; c < w.cols(); ++c) wn.adjoint.at(r, c) += dy[r] * x[c];
        for (int c = 0; c < w.cols(); ++c) {
          double acc = 0.0;
          for (int r = 0; r < w.rows(); ++r) acc += w.at(r, c) * dy[r];
          xn.adjoint[c] += acc;
        }
        break;
      }
      case Op::kAdd: {
        Node& a = graph.nodes_[static_cast<size_t>(n.a)];
        Node& b = graph.nodes_[static_cast<size_t>(n.b)];
        for (int i = 0; i < dy.size(); ++i) {
          a.adjoint[i] += dy[i];
          b.adjoint[i] += dy[i];
        }
        break;
      }
      case Op::kSub: {
        Node& a = graph.nodes_[static_cast<size_t>(n.a)];
        Node& b = graph.nodes_[static_cast<size_t>(n.b)];
        for (int i = 0; i < dy.size(); ++i) {
          a.adjoint[i] += dy[i];
          b.adjoint[i] -= dy[i];
        }
        break;
      }
      case Op::kMul: {
        Node& a = graph.nodes_[static_cast<size_t>(n.a)];
        Node& b = graph.nodes_[static_cast<size_t>(n.b)];
        for (int i = 0; i < dy.size(); ++i) {
          a.adjoint[i] += dy[i] * b.value[i];
          b.adjoint[i] += dy[i] * a.value[i];
        }
        break;
      }
      case Op::kScale: {
        Node& a = graph.nodes_[static_cast<size_t>(n.a)];
        for (int i = 0; i < dy.size(); ++i) a.adjoint[i] += n.k * dy[i];
        break;
      }
      case Op::kRelu: {
        Node& a = graph.nodes_[static_cast<size_t>(n.a)];
        for (int i = 0; i < dy.size(); ++i)
          if (a.value[i] > 0.0) a.adjoint[i] += dy[i];
        break;
      }
      case Op::kTanh: {
        Node& a = graph.nodes_[static_cast<size_t>(n.a)];
        for (int i = 0; i < dy.size(); ++i)
          a.adjoint[i] += dy[i] * (1.0 - n.value[i] * n.value[i]);
        break;
      }
      case Op::kLayerNorm: {
        Node& xn = graph.nodes_[static_cast<size_t>(n.a)];
        Node& gn = graph.nodes_[static_cast<size_t>(n.b)];
        Node& bn = graph.nodes_[static_cast<size_t>(n.c)];
        const Tensor& x = xn.value;
        const Tensor& gamma = gn.value;
        int d = x.rows();
        double mu = 0.0;
        for (int i = 0; i < d; ++i) mu += x[i];
        mu /= d;
        double var = 0.0;
        for (int i = 0; i < d; ++i) var += (x[i] - mu) * (x[i] - mu);
        var /= d;
        double inv_sigma = 1.0 / std::sqrt(var + kNormEps);
        // xhat_i = (x_i - mu) * inv_sigma; y = gamma .* xhat + beta
        double g_mean = 0.0, gx_mean = 0.0;
        std::vector<double> g(static_cast<size_t>(d)), xhat(static_cast<size_t>(d));
        for (int i = 0; i < d; ++i) {
          xhat[static_cast<size_t>(i)] = (x[i] - mu) * inv_sigma;
          g[static_cast<size_t>(i)] = dy[i] * gamma[i];
          g_mean += g[static_cast<size_t>(i)];
          gx_mean += g[static_cast<size_t>(i)] * xhat[static_cast<size_t>(i)];
        }
        g_mean /= d;
        gx_mean /= d;
        for (int i = 0; i < d; ++i) {
          xn.adjoint[i] += inv_sigma * (g[static_cast<size_t>(i)] - g_mean -
                                        xhat[static_cast<size_t>(i)] * gx_mean);
          gn.adjoint[i] += dy[i] * xhat[static_cast<size_t>(i)];
          bn.adjoint[i] += dy[i];
        }
        break;
      }
      case Op::kSoftmax: {
        Node& a = graph.nodes_[static_cast<size_t>(n.a)];
        const Tensor& p = n.value;
        double dot = 0.0;
        for (int i = 0; i < dy.size(); ++i) dot += dy[i] * p[i];
        for (int i = 0; i < dy.size(); ++i) a.adjoint[i] += p[i] * (dy[i] - dot);
        break;
      }
      case Op::kLog: {
        Node& a = graph.nodes_[static_cast<size_t>(n.a)];
        for (int i = 0; i < dy.size(); ++i)
          if (a.value[i] > kLogEps) a.adjoint[i] += dy[i] / a.value[i];
        break;
      }
      case Op::kSum: {
        Node& a = graph.nodes_[static_cast<size_t>(n.a)];
        for (int i = 0; i < a.adjoint.size(); ++i) a.adjoint[i] += dy[0];
        break;
      }
      case Op::kMean: {
        Node& a = graph.nodes_[static_cast<size_t>(n.a)];
        double s = dy[0] / a.adjoint.size();
        for (int i = 0; i < a.adjoint.size(); ++i) a.adjoint[i] += s;
        break;
      }
      case Op::kConcat: {
        Node& a = graph.nodes_[static_cast<size_t>(n.a)];
        Node& b = graph.nodes_[static_cast<size_t>(n.b)];
        int na = a.adjoint.rows();
        for (int i = 0; i < na; ++i) a.adjoint[i] += dy[i];
        for (int i = 0; i < b.adjoint.rows(); ++i) b.adjoint[i] += dy[na + i];
        break;
      }
    }
  }

  GradMap grads;
  for (const Node& n : graph.nodes_) {
    if (n.op != Op::kLeaf) continue;
    if (!wrt.contains(n.name) || !wrt.entry(n.name).adaptable) continue;
    auto it = grads.find(n.name);
    if (it == grads.end()) {
      grads.emplace(n.name, n.adjoint);
    } else {
      // Same parameter bound to several leaves: contributions add up.
      for (int i = 0; i < it->second.size(); ++i) it->second[i] += n.adjoint[i];
    }
  }
  return grads;
}

Tensor finite_diff_gradient(const std::function<double(const Tensor&)>& f, const Tensor& at,
                            double step) {
  Tensor grad(at.rows(), at.cols());
  Tensor x = at;
  for (int i = 0; i < x.size(); ++i) {
    double orig = x[i];
    x[i] = orig + step;
    double fp = f(x);
    x[i] = orig - step;
    double fm = f(x);
    x[i] = orig;
    grad[i] = (fp - fm) / (2.0 * step);
  }
  return grad;
}

GradMap finite_diff_param_gradient(Graph& graph, ParamSet& params, const Bindings& extra,
                                   double step) {
  Bindings bindings = extra;
  for (int i = 0; i < params.size(); ++i)
    bindings.bind(params.entry(i).name, params.entry(i).value);

  GradMap out;
  for (int i = 0; i < params.size(); ++i) {
    ParamSet::Entry& e = params.entry(i);
    if (!e.adaptable) continue;
    Tensor grad(e.value.rows(), e.value.cols());
    for (int j = 0; j < e.value.size(); ++j) {
      double orig = e.value[j];
      e.value[j] = orig + step;
      double fp = evaluate(graph, bindings).value();
      e.value[j] = orig - step;
      double fm = evaluate(graph, bindings).value();
      e.value[j] = orig;
      grad[j] = (fp - fm) / (2.0 * step);
    }
    out.emplace(e.name, std::move(grad));
  }
  return out;
}

int entropy_node(Graph& graph, int p) {
  int lp = graph.log(p);
  int plp = graph.mul(p, lp);
  int s = graph.sum(plp);
  return graph.scale(s, -1.0);
}

}  // namespace sumi::numkit
