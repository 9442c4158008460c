#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <vector>

#include "sumi/datagen.hpp"
#include "sumi/kernels.hpp"
#include "sumi/model.hpp"
#include "sumi/selection.hpp"
#include "sumi/threads.hpp"

namespace {

using sumi::MultimodalSample;
using sumi::numkit::Tensor;

double best_of(int reps, const std::function<void()>& fn) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    auto t0 = std::chrono::steady_clock::now();
    fn();
    auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

void row(const char* name, double serial_ms, double parallel_ms) {
  std::printf("%-16s %10.3f %12.3f %9.2fx\n", name, serial_ms, parallel_ms,
              serial_ms / parallel_ms);
}

}  // namespace

int main(int argc, char** argv) {
  int reps = argc > 1 ? std::atoi(argv[1]) : 5;
  if (reps < 1) reps = 1;

  sumi::model::ModelSpec mspec;
  mspec.dim_u1 = 64;
  mspec.dim_u2 = 64;
  mspec.hidden = 128;
  mspec.repr = 64;
  mspec.classes = 16;
  sumi::model::Model m = sumi::model::make_model(mspec, 7);

  std::mt19937_64 rng(11);
  std::normal_distribution<double> unit(0.0, 1.0);
  std::vector<MultimodalSample> batch(256);
  for (auto& s : batch) {
    s.x_u1 = Tensor(mspec.dim_u1, 1);
    s.x_u2 = Tensor(mspec.dim_u2, 1);
    for (double& v : s.x_u1.data()) v = unit(rng);
    for (double& v : s.x_u2.data()) v = unit(rng);
    s.label = static_cast<int>(rng() % mspec.classes);
  }

  std::vector<Tensor> wide(512, Tensor(4096, 1));
  for (auto& t : wide)
    for (double& v : t.data()) v = unit(rng);

  std::vector<MultimodalSample> many(4096);
  std::vector<sumi::datagen::CorruptionKind> kinds(many.size(), {sumi::datagen::Corruption::kMix, 4});
  std::vector<uint64_t> seeds(many.size());
  for (size_t i = 0; i < many.size(); ++i) {
    many[i].x_u1 = Tensor(128, 1);
    many[i].x_u2 = Tensor(128, 1);
    for (double& v : many[i].x_u1.data()) v = unit(rng);
    for (double& v : many[i].x_u2.data()) v = unit(rng);
    many[i].label = 0;
    seeds[i] = rng();
  }

  std::printf("threads: %d, best of %d reps, times in ms\n\n", sumi::thread_budget(), reps);
  std::printf("%-16s %10s %12s %9s\n", "kernel", "serial", "parallel", "speedup");

  row("forward_batch",
      best_of(reps, [&] { sumi::kernels::forward_batch_serial(m, batch); }),
      best_of(reps, [&] { sumi::kernels::forward_batch(m, batch); }));
  row("ce_grad_batch",
      best_of(reps, [&] { sumi::kernels::ce_grad_batch_serial(m, batch); }),
      best_of(reps, [&] { sumi::kernels::ce_grad_batch(m, batch); }));
  row("quartiles",
      best_of(reps, [&] {
        sumi::selection::quartiles_serial(wide, sumi::selection::QuantileMode::kOrderStat);
      }),
      best_of(reps, [&] {
        sumi::selection::quartiles(wide, sumi::selection::QuantileMode::kOrderStat);
      }));
  row("corrupt_all",
      best_of(reps, [&] { sumi::datagen::corrupt_all_serial(many, kinds, 1.0, seeds); }),
      best_of(reps, [&] { sumi::datagen::corrupt_all(many, kinds, 1.0, seeds); }));
  return 0;
}
