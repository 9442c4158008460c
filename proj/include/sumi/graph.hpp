#pragma once

// Reverse-mode differentiable compute graph over a fixed operator set:
// matrix-vector product, bias add, elementwise arithmetic, ReLU/tanh,
// layer normalization with learnable scale/shift, softmax, clamped log,
// sum/mean reductions, concatenation and scalar scaling.
//
// Graphs are append-only arenas: node inputs always precede the node, so
// insertion order is a topological order. evaluate() caches forward values
// in the nodes; gradient() runs one reverse sweep from the designated
// scalar output. A graph instance must not be shared across threads while
// being evaluated; independent graphs (or copies) are safe concurrently.

#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sumi/tensor.hpp"

namespace sumi::numkit {

struct GraphError : std::runtime_error {
  explicit GraphError(const std::string& what) : std::runtime_error(what) {}
};

// Clamp floor for log arguments; 0*log(0) follows from 0*log(kLogEps).
inline constexpr double kLogEps = 1e-12;
// Variance guard inside layer normalization.
inline constexpr double kNormEps = 1e-5;

enum class Op {
  kLeaf,      // named input, bound at evaluation time
  kConst,     // owns its value
  kMatVec,    // (matrix, vector) -> vector
  kAdd,       // elementwise
  kSub,       // elementwise
  kMul,       // elementwise (Hadamard)
  kScale,     // multiply by a fixed scalar
  kRelu,
  kTanh,
  kLayerNorm, // (x, scale, shift) -> normalized vector
  kSoftmax,
  kLog,       // elementwise, argument clamped at kLogEps
  kSum,       // all elements -> scalar
  kMean,      // all elements -> scalar
  kConcat,    // (vector, vector) -> vector
};

const char* op_name(Op op);

struct Node {
  Op op = Op::kConst;
  int a = -1, b = -1, c = -1;  // input node ids
  double k = 0.0;              // kScale factor
  std::string name;            // kLeaf binding name
  int rows = 0, cols = 1;      // declared shape
  Tensor payload;              // kConst data
  Tensor value;                // cached forward value
  Tensor adjoint;              // reverse-sweep accumulator
};

class ParamSet {
 public:
  struct Entry {
    std::string name;
    Tensor value;
    bool adaptable = false;
  };

  int add(std::string name, Tensor value, bool adaptable = false);
  bool contains(const std::string& name) const { return index_.count(name) > 0; }
  Entry& entry(const std::string& name);
  const Entry& entry(const std::string& name) const;
  Entry& entry(int i) { return entries_[static_cast<size_t>(i)]; }
  const Entry& entry(int i) const { return entries_[static_cast<size_t>(i)]; }
  int size() const { return static_cast<int>(entries_.size()); }

  void set_adaptable(const std::string& name, bool adaptable);
  void set_all_adaptable(bool adaptable);
  std::vector<std::string> adaptable_names() const;
  std::vector<std::string> frozen_names() const;

 private:
  std::vector<Entry> entries_;
  std::map<std::string, int> index_;
};

// Non-owning name -> tensor view used to bind graph leaves. Bound tensors
// must outlive the evaluation call.
class Bindings {
 public:
  void bind(const std::string& name, const Tensor& t) { map_[name] = &t; }
  const Tensor* find(const std::string& name) const {
    auto it = map_.find(name);
    return it == map_.end() ? nullptr : it->second;
  }
  static Bindings of(const ParamSet& params);

 private:
  std::map<std::string, const Tensor*> map_;
};

using GradMap = std::map<std::string, Tensor>;

class Graph {
 public:
  // Builders. Shapes are checked at construction; violations throw
  // GraphError naming the offending node.
  int leaf(const std::string& name, int rows, int cols = 1);
  int constant(Tensor t);
  int matvec(int w, int x);
  int add(int a, int b);
  int sub(int a, int b);
  int mul(int a, int b);
  int scale(int a, double k);
  int relu(int a);
  int tanh(int a);
  int layer_norm(int x, int scale, int shift);
  int softmax(int a);
  int log(int a);
  int sum(int a);
  int mean(int a);
  int concat(int a, int b);

  void set_output(int id);
  int output() const { return output_; }
  int node_count() const { return static_cast<int>(nodes_.size()); }
  const Node& node(int id) const { return nodes_[static_cast<size_t>(id)]; }

  // Forward value of a node; valid after evaluate().
  const Tensor& value(int id) const;
  bool evaluated() const { return evaluated_; }

  friend Tensor evaluate(Graph& graph, const Bindings& bindings);
  friend GradMap gradient(Graph& graph, const ParamSet& wrt);

 private:
  int push(Node n);
  void check_input(int id, const char* ctx) const;
  [[noreturn]] void fail(int id, const std::string& msg) const;

  std::vector<Node> nodes_;
  int output_ = -1;
  bool evaluated_ = false;
};

// Computes every node in topological (insertion) order and returns the value
// of the designated output node (the last node when none is designated).
// Does not mutate the bindings; identical bindings give bitwise-identical
// results.
Tensor evaluate(Graph& graph, const Bindings& bindings);

// Reverse sweep from the scalar output. Returns d(output)/d(p) for every
// adaptable parameter bound to a leaf of the graph; frozen parameters get
// no entry. Requires evaluate() to have run on this graph.
GradMap gradient(Graph& graph, const ParamSet& wrt);

// Central-difference estimate of d(f)/d(at), one coordinate at a time.
Tensor finite_diff_gradient(const std::function<double(const Tensor&)>& f,
                            const Tensor& at, double step);

// Central-difference gradient of the graph output with respect to the named
// adaptable parameters. Forward evaluations only; independent of the
// reverse sweep, which it serves as an oracle for.
GradMap finite_diff_param_gradient(Graph& graph, ParamSet& params,
                                   const Bindings& extra, double step);

// Composite op: -sum(p * log(p)) for a probability vector node.
int entropy_node(Graph& graph, int p);

}  // namespace sumi::numkit
