#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "sumi/model.hpp"
#include "sumi/sample.hpp"

using namespace sumi;
using namespace sumi::model;

namespace {

MultimodalSample random_sample(std::mt19937_64& rng, int d1, int d2) {
  std::normal_distribution<double> n(0.0, 1.0);
  MultimodalSample s;
  s.x_u1 = numkit::Tensor(d1, 1);
  s.x_u2 = numkit::Tensor(d2, 1);
  for (int i = 0; i < d1; ++i) s.x_u1[i] = n(rng);
  for (int i = 0; i < d2; ++i) s.x_u2[i] = n(rng);
  return s;
}

ModelSpec small_spec() {
  ModelSpec spec;
  spec.dim_u1 = 5;
  spec.dim_u2 = 4;
  spec.hidden = 8;
  spec.repr = 6;
  spec.classes = 3;
  return spec;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("forward: probability outputs live on the simplex") {
  Model m = make_model(small_spec(), 11);
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    MultimodalSample s = random_sample(rng, 5, 4);
    ForwardOutputs out = forward(m, s);
    REQUIRE(out.p_m.rows() == 3);
    CHECK(out.h.rows() == 2 * m.spec.repr);
    for (const auto* p : {&out.p_m, &out.p_u1, &out.p_u2}) {
      double sum = 0.0;
      for (int i = 0; i < p->size(); ++i) {
        CHECK((*p)[i] >= 0.0);
        sum += (*p)[i];
      }
      CHECK(std::fabs(sum - 1.0) <= 1e-9);
    }
    CHECK(out.ent_m >= 0.0);
    CHECK(out.ent_m <= std::log(3.0) + 1e-12);
  }
}

TEST_CASE("forward: zero u2 representation makes multimodal equal the u1 path") {
  ModelSpec spec = small_spec();
  for (auto nonlin : {Nonlinearity::kRelu, Nonlinearity::kTanh}) {
    spec.nonlinearity = nonlin;
    Model m = make_model(spec, 21);
    // Zero affine output of the last enc2 norm layer; relu(0)=tanh(0)=0,
    // so h_u2 is exactly the zero vector.
    m.params.entry("enc2.ln2.scale").value.fill(0.0);
    m.params.entry("enc2.ln2.shift").value.fill(0.0);

    std::mt19937_64 rng(22);
    for (int trial = 0; trial < 10; ++trial) {
      MultimodalSample s = random_sample(rng, 5, 4);
      numkit::Graph g;
      ForwardNodes nodes = build_forward(g, m, s.x_u1, s.x_u2);
      evaluate(g, numkit::Bindings::of(m.params));
      CHECK(g.value(nodes.h_u2) == numkit::Tensor(spec.repr, 1, 0.0));
      CHECK(g.value(nodes.logits_m) == g.value(nodes.logits_u1));
      CHECK(g.value(nodes.p_m) == g.value(nodes.p_u1));
    }
  }
}

TEST_CASE("forward: determinism for fixed parameters and input") {
  Model m = make_model(small_spec(), 31);
  std::mt19937_64 rng(32);
  MultimodalSample s = random_sample(rng, 5, 4);
  ForwardOutputs a = forward(m, s);
  ForwardOutputs b = forward(m, s);
  CHECK(a.p_m == b.p_m);
  CHECK(a.p_u1 == b.p_u1);
  CHECK(a.p_u2 == b.p_u2);
  CHECK(a.h == b.h);
  CHECK(a.ent_m == b.ent_m);
}

TEST_CASE("forward: dimension mismatch is rejected") {
  Model m = make_model(small_spec(), 41);
  MultimodalSample s;
  s.x_u1 = numkit::Tensor(7, 1, 0.0);  // model expects 5
  s.x_u2 = numkit::Tensor(4, 1, 0.0);
  CHECK_THROWS_AS(forward(m, s), std::invalid_argument);
}

TEST_CASE("adaptable partition: exactly the eight norm affine tensors") {
  Model m = make_model(small_spec(), 51);
  auto adaptable = adaptable_names(m);
  auto frozen = frozen_names(m);
  CHECK(adaptable.size() == 8);
  CHECK(adaptable.size() + frozen.size() == static_cast<size_t>(m.params.size()));
  for (const auto& name : adaptable) CHECK(name.find(".ln") != std::string::npos);
  for (const auto& name : frozen) CHECK(name.find(".ln") == std::string::npos);
}

TEST_CASE("checkpoint: round-trip is bit-exact and re-save is byte-identical") {
  namespace fs = std::filesystem;
  Model m = make_model(small_spec(), 61);
  fs::path dir = fs::temp_directory_path();
  fs::path a = dir / "sumi_test_ckpt_a.json";
  fs::path b = dir / "sumi_test_ckpt_b.json";

  save_model(m, a.string());
  Model loaded = load_model(a.string());
  CHECK(loaded.spec.dim_u1 == m.spec.dim_u1);
  CHECK(loaded.spec.classes == m.spec.classes);
  CHECK(loaded.spec.nonlinearity == m.spec.nonlinearity);
  CHECK(loaded.init_seed == m.init_seed);
  REQUIRE(loaded.params.size() == m.params.size());
  for (int i = 0; i < m.params.size(); ++i) {
    CHECK(loaded.params.entry(i).name == m.params.entry(i).name);
    CHECK(loaded.params.entry(i).value == m.params.entry(i).value);
    CHECK(loaded.params.entry(i).adaptable == m.params.entry(i).adaptable);
  }

  save_model(loaded, b.string());
  CHECK(read_file(a) == read_file(b));
  fs::remove(a);
  fs::remove(b);
}

TEST_CASE("checkpoint: unreadable path and bad version are rejected") {
  CHECK_THROWS_AS(load_model("/nonexistent/dir/ckpt.json"), std::runtime_error);
}
