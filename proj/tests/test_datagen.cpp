#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "sumi/adapt.hpp"
#include "sumi/datagen.hpp"

using namespace sumi;
using datagen::Corruption;
using datagen::CorruptionKind;
using datagen::StreamSpec;
using datagen::TaskSpec;
using numkit::Tensor;

namespace {

bool samples_equal(const MultimodalSample& a, const MultimodalSample& b) {
  return a.label == b.label && a.domain == b.domain && a.x_u1 == b.x_u1 && a.x_u2 == b.x_u2;
}

std::string sample_key(const MultimodalSample& s) {
  std::string key = std::to_string(s.label) + "|" + s.domain;
  char buf[32];
  for (int i = 0; i < s.x_u1.size(); ++i) {
    std::snprintf(buf, sizeof buf, "|%.17g", s.x_u1[i]);
    key += buf;
  }
  for (int i = 0; i < s.x_u2.size(); ++i) {
    std::snprintf(buf, sizeof buf, "|%.17g", s.x_u2[i]);
    key += buf;
  }
  return key;
}

// Nearest class-mean classifier on one modality.
double centroid_probe(const std::vector<MultimodalSample>& train,
                      const std::vector<MultimodalSample>& test, int classes, bool use_u1) {
  int dim = use_u1 ? train[0].x_u1.size() : train[0].x_u2.size();
  std::vector<std::vector<double>> means(static_cast<size_t>(classes),
                                         std::vector<double>(static_cast<size_t>(dim), 0.0));
  std::vector<int> counts(static_cast<size_t>(classes), 0);
  for (const MultimodalSample& s : train) {
    const Tensor& x = use_u1 ? s.x_u1 : s.x_u2;
    for (int d = 0; d < dim; ++d) means[static_cast<size_t>(s.label)][static_cast<size_t>(d)] += x[d];
    ++counts[static_cast<size_t>(s.label)];
  }
  for (int c = 0; c < classes; ++c)
    for (double& v : means[static_cast<size_t>(c)]) v /= counts[static_cast<size_t>(c)];
  int correct = 0;
  for (const MultimodalSample& s : test) {
    const Tensor& x = use_u1 ? s.x_u1 : s.x_u2;
    int best = 0;
    double best_d = 0.0;
    for (int c = 0; c < classes; ++c) {
      double d2 = 0.0;
      for (int d = 0; d < dim; ++d) {
        double diff = x[d] - means[static_cast<size_t>(c)][static_cast<size_t>(d)];
        d2 += diff * diff;
      }
      if (c == 0 || d2 < best_d) {
        best = c;
        best_d = d2;
      }
    }
    if (best == s.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

TaskSpec small_task() {
  TaskSpec spec;
  spec.train_count = 800;
  spec.test_count = 400;
  spec.seed = 5;
  return spec;
}

}  // namespace

TEST_CASE("make_task is deterministic in the seed") {
  TaskSpec spec = small_task();
  datagen::Task a = datagen::make_task(spec);
  datagen::Task b = datagen::make_task(spec);
  REQUIRE(a.train.size() == 800);
  REQUIRE(a.test.size() == 400);
  for (size_t i = 0; i < a.train.size(); ++i) CHECK(samples_equal(a.train[i], b.train[i]));
  for (size_t i = 0; i < a.test.size(); ++i) CHECK(samples_equal(a.test[i], b.test[i]));

  spec.seed = 6;
  datagen::Task c = datagen::make_task(spec);
  CHECK_FALSE(samples_equal(a.train[0], c.train[0]));
}

TEST_CASE("labels fill exact per-class quotas") {
  TaskSpec spec = small_task();
  spec.train_count = 4000;
  datagen::Task task = datagen::make_task(spec);
  std::map<int, int> hist;
  for (const MultimodalSample& s : task.train) ++hist[s.label];
  REQUIRE(hist.size() == 8);
  for (const auto& [label, count] : hist) CHECK(count == 500);

  spec.train_count = 10;  // 10 over 8 classes: two classes get one extra
  datagen::Task uneven = datagen::make_task(spec);
  std::map<int, int> small_hist;
  for (const MultimodalSample& s : uneven.train) ++small_hist[s.label];
  CHECK(small_hist[0] == 2);
  CHECK(small_hist[1] == 2);
  CHECK(small_hist[7] == 1);
}

TEST_CASE("each modality alone beats chance by a margin") {
  datagen::Task task = datagen::make_task(small_task());
  double chance = 1.0 / 8.0;
  CHECK(centroid_probe(task.train, task.test, 8, true) > chance + 0.1);
  CHECK(centroid_probe(task.train, task.test, 8, false) > chance + 0.1);
}

TEST_CASE("corrupt none is the identity") {
  datagen::Task task = datagen::make_task(small_task());
  CorruptionKind none;
  MultimodalSample out = datagen::corrupt(task.test[0], none, 1.0, 99);
  CHECK(samples_equal(out, task.test[0]));
}

TEST_CASE("missing modalities become zero vectors, the other side untouched") {
  datagen::Task task = datagen::make_task(small_task());
  const MultimodalSample& s = task.test[3];
  CorruptionKind miss1{Corruption::kMissU1, 3};
  MultimodalSample out = datagen::corrupt(s, miss1, 1.0, 7);
  for (int i = 0; i < out.x_u1.size(); ++i) CHECK(out.x_u1[i] == 0.0);
  CHECK(out.x_u2 == s.x_u2);
  CHECK(out.label == s.label);

  CorruptionKind miss2{Corruption::kMissU2, 1};
  MultimodalSample out2 = datagen::corrupt(s, miss2, 1.0, 7);
  CHECK(out2.x_u1 == s.x_u1);
  for (int i = 0; i < out2.x_u2.size(); ++i) CHECK(out2.x_u2[i] == 0.0);
}

TEST_CASE("mix drops exactly one side and perturbs the other") {
  datagen::Task task = datagen::make_task(small_task());
  const MultimodalSample& s = task.test[5];
  CorruptionKind mix{Corruption::kMix, 4};
  bool saw_u1_drop = false, saw_u2_drop = false;
  for (uint64_t seed = 0; seed < 24; ++seed) {
    MultimodalSample out = datagen::corrupt(s, mix, 1.0, seed);
    bool u1_zero = true, u2_zero = true;
    for (int i = 0; i < out.x_u1.size(); ++i) u1_zero &= out.x_u1[i] == 0.0;
    for (int i = 0; i < out.x_u2.size(); ++i) u2_zero &= out.x_u2[i] == 0.0;
    CHECK(u1_zero != u2_zero);
    if (u1_zero) {
      CHECK_FALSE(out.x_u2 == s.x_u2);
      saw_u1_drop = true;
    } else {
      CHECK_FALSE(out.x_u1 == s.x_u1);
      saw_u2_drop = true;
    }
  }
  CHECK(saw_u1_drop);
  CHECK(saw_u2_drop);
}

TEST_CASE("added noise has the advertised standard deviation") {
  TaskSpec spec = small_task();
  datagen::Task task = datagen::make_task(spec);
  CorruptionKind noisy{Corruption::kNoiseU1, 5};
  double sum = 0.0, sum_sq = 0.0;
  int n = 0;
  for (int rep = 0; rep < 40; ++rep) {
    const MultimodalSample& s = task.test[static_cast<size_t>(rep)];
    for (uint64_t seed = 0; seed < 16; ++seed) {
      MultimodalSample out = datagen::corrupt(s, noisy, 1.0, 1000 + seed * 131 + rep);
      for (int i = 0; i < out.x_u1.size(); ++i) {
        double delta = out.x_u1[i] - s.x_u1[i];
        sum += delta;
        sum_sq += delta * delta;
        ++n;
      }
    }
  }
  double mean = sum / n;
  double std_dev = std::sqrt(sum_sq / n - mean * mean);
  CHECK(std_dev == doctest::Approx(2.0).epsilon(0.05));
  CHECK(std::abs(mean) < 0.05);
}

TEST_CASE("corruption kind validation") {
  CorruptionKind bad_none{Corruption::kNone, 1};
  CHECK_THROWS_AS(bad_none.validate(), std::invalid_argument);
  CorruptionKind bad_sev{Corruption::kBoth, 6};
  CHECK_THROWS_AS(bad_sev.validate(), std::invalid_argument);
  CorruptionKind zero_sev{Corruption::kNoiseU1, 0};
  CHECK_THROWS_AS(zero_sev.validate(), std::invalid_argument);
  CHECK_THROWS_AS(datagen::corruption_from_string("fog"), std::invalid_argument);
  for (const char* name : {"none", "noise-u1", "noise-u2", "both", "miss-u1", "miss-u2", "mix"})
    CHECK(datagen::to_string(datagen::corruption_from_string(name)) == name);
}

TEST_CASE("parallel corruption matches serial bitwise") {
  datagen::Task task = datagen::make_task(small_task());
  std::vector<MultimodalSample> samples(task.test.begin(), task.test.begin() + 60);
  std::vector<CorruptionKind> kinds;
  std::vector<uint64_t> seeds;
  const Corruption cycle[] = {Corruption::kNone,   Corruption::kNoiseU1, Corruption::kBoth,
                              Corruption::kMissU2, Corruption::kMix};
  for (size_t i = 0; i < samples.size(); ++i) {
    Corruption c = cycle[i % 5];
    kinds.push_back({c, c == Corruption::kNone ? 0 : static_cast<int>(i % 5) + 1});
    seeds.push_back(7000 + i);
  }
  auto par = datagen::corrupt_all(samples, kinds, 1.0, seeds);
  auto ser = datagen::corrupt_all_serial(samples, kinds, 1.0, seeds);
  REQUIRE(par.size() == ser.size());
  for (size_t i = 0; i < par.size(); ++i) CHECK(samples_equal(par[i], ser[i]));

  kinds.pop_back();
  CHECK_THROWS_AS(datagen::corrupt_all(samples, kinds, 1.0, seeds), std::invalid_argument);
}

TEST_CASE("streams fill exact quotas and tag domains") {
  TaskSpec tspec = small_task();
  tspec.test_count = 1000;
  datagen::Task task = datagen::make_task(tspec);
  StreamSpec spec;
  spec.total = 1000;
  spec.shuffle_seed = 3;
  spec.parts = {{{Corruption::kNoiseU1, 3}, 0.5}, {{Corruption::kMix, 3}, 0.5}};
  auto stream = datagen::make_stream(task.test, spec, tspec.noise_scale);
  REQUIRE(stream.size() == 1000);
  std::map<std::string, int> tags;
  for (const MultimodalSample& s : stream) ++tags[s.domain];
  CHECK(tags["noise-u1"] == 500);
  CHECK(tags["mix"] == 500);
}

TEST_CASE("uneven ratios land on largest remainders") {
  TaskSpec tspec = small_task();
  datagen::Task task = datagen::make_task(tspec);
  StreamSpec spec;
  spec.total = 100;
  spec.parts = {{{Corruption::kNone, 0}, 1.0 / 3.0},
                {{Corruption::kNoiseU1, 2}, 1.0 / 3.0},
                {{Corruption::kMissU2, 2}, 1.0 / 3.0}};
  auto stream = datagen::make_stream(task.test, spec, tspec.noise_scale);
  std::map<std::string, int> tags;
  for (const MultimodalSample& s : stream) ++tags[s.domain];
  // 33.33 each; the first part takes the spare unit
  CHECK(tags["none"] == 34);
  CHECK(tags["noise-u1"] == 33);
  CHECK(tags["miss-u2"] == 33);
}

TEST_CASE("a pure none stream is a permutation of the clean set") {
  TaskSpec tspec = small_task();
  tspec.test_count = 200;
  datagen::Task task = datagen::make_task(tspec);
  StreamSpec spec;
  spec.total = 200;
  spec.shuffle_seed = 11;
  spec.parts = {{{Corruption::kNone, 0}, 1.0}};
  auto stream = datagen::make_stream(task.test, spec, tspec.noise_scale);

  std::vector<std::string> got, want;
  for (const MultimodalSample& s : stream) got.push_back(sample_key(s));
  for (const MultimodalSample& s : task.test) want.push_back(sample_key(s));
  std::sort(got.begin(), got.end());
  std::sort(want.begin(), want.end());
  CHECK(got == want);
  CHECK_FALSE(samples_equal(stream[0], task.test[0]));  // the shuffle did something

  auto again = datagen::make_stream(task.test, spec, tspec.noise_scale);
  for (size_t i = 0; i < stream.size(); ++i) CHECK(samples_equal(stream[i], again[i]));
}

TEST_CASE("mixed severity draws every level") {
  TaskSpec tspec = small_task();
  datagen::Task task = datagen::make_task(tspec);
  StreamSpec spec;
  spec.total = 400;
  spec.mixed_severity = true;
  spec.shuffle_seed = 17;
  spec.parts = {{{Corruption::kNoiseU1, 1}, 1.0}};
  auto stream = datagen::make_stream(task.test, spec, tspec.noise_scale);
  auto fixed = spec;
  fixed.mixed_severity = false;
  auto base = datagen::make_stream(task.test, fixed, tspec.noise_scale);
  int differs = 0;
  for (size_t i = 0; i < stream.size(); ++i)
    if (!(stream[i].x_u1 == base[i].x_u1)) ++differs;
  CHECK(differs > 100);  // most samples drew a severity other than the fixed 1
}

TEST_CASE("stream validation") {
  TaskSpec tspec = small_task();
  datagen::Task task = datagen::make_task(tspec);
  StreamSpec spec;
  spec.total = 100000;
  spec.parts = {{{Corruption::kNone, 0}, 1.0}};
  CHECK_THROWS_AS(datagen::make_stream(task.test, spec, 1.0), std::invalid_argument);
  spec.total = 100;
  spec.parts = {{{Corruption::kNone, 0}, 0.7}};
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec.parts = {{{Corruption::kNone, 0}, 1.5}, {{Corruption::kMix, 2}, -0.5}};
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec.parts.clear();
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
}

TEST_CASE("stream spec text form round-trips") {
  StreamSpec spec = datagen::parse_stream_spec(
      "total=2000,shuffle-seed=9,none=0.5,both:5=0.2,miss-u1:5=0.1,miss-u2:5=0.1,mix:5=0.1");
  CHECK(spec.total == 2000);
  CHECK(spec.shuffle_seed == 9);
  REQUIRE(spec.parts.size() == 5);
  CHECK(spec.parts[0].kind.kind == Corruption::kNone);
  CHECK(spec.parts[1].kind.severity == 5);
  CHECK(spec.parts[1].ratio == 0.2);
  CHECK_FALSE(spec.mixed_severity);
  CHECK(spec.any_strong());

  StreamSpec back = datagen::parse_stream_spec(datagen::to_string(spec));
  CHECK(back.total == spec.total);
  CHECK(back.shuffle_seed == spec.shuffle_seed);
  REQUIRE(back.parts.size() == spec.parts.size());
  for (size_t i = 0; i < back.parts.size(); ++i) {
    CHECK(back.parts[i].kind.kind == spec.parts[i].kind.kind);
    CHECK(back.parts[i].kind.severity == spec.parts[i].kind.severity);
    CHECK(back.parts[i].ratio == spec.parts[i].ratio);
  }

  StreamSpec mixed = datagen::parse_stream_spec("total=10,severity=mixed,noise-u1:1=1.0");
  CHECK(mixed.mixed_severity);
  CHECK_FALSE(mixed.any_strong());

  CHECK_THROWS_AS(datagen::parse_stream_spec("none"), std::invalid_argument);
  CHECK_THROWS_AS(datagen::parse_stream_spec("fog=1.0"), std::invalid_argument);
  CHECK_THROWS_AS(datagen::parse_stream_spec("none=0.9"), std::invalid_argument);
  CHECK_THROWS_AS(datagen::parse_stream_spec("severity=high,none=1.0"), std::invalid_argument);
}

TEST_CASE("dataset files round-trip bit-exactly") {
  TaskSpec tspec = small_task();
  tspec.test_count = 50;
  datagen::Task task = datagen::make_task(tspec);
  StreamSpec spec;
  spec.total = 50;
  spec.parts = {{{Corruption::kNone, 0}, 0.5}, {{Corruption::kBoth, 4}, 0.5}};
  datagen::Dataset data;
  data.dim_u1 = tspec.dim_u1;
  data.dim_u2 = tspec.dim_u2;
  data.classes = tspec.classes;
  data.samples = datagen::make_stream(task.test, spec, tspec.noise_scale);

  std::string path = (std::filesystem::temp_directory_path() / "sumi_dataset_rt.txt").string();
  datagen::save_dataset(data, path);
  datagen::Dataset back = datagen::load_dataset(path);
  CHECK(back.dim_u1 == data.dim_u1);
  CHECK(back.dim_u2 == data.dim_u2);
  CHECK(back.classes == data.classes);
  REQUIRE(back.samples.size() == data.samples.size());
  for (size_t i = 0; i < back.samples.size(); ++i)
    CHECK(samples_equal(back.samples[i], data.samples[i]));
  std::filesystem::remove(path);

  CHECK_THROWS_AS(datagen::load_dataset("/nonexistent/nowhere.txt"), std::runtime_error);
}

TEST_CASE("train_source learns the task and is deterministic") {
  TaskSpec tspec = small_task();
  tspec.train_count = 1200;
  tspec.test_count = 400;
  datagen::Task task = datagen::make_task(tspec);
  model::ModelSpec mspec;
  datagen::TrainOptions opts;
  opts.epochs = 3;
  opts.accuracy_floor = 0.85;
  datagen::TrainResult a = datagen::train_source(mspec, task.train, task.test, opts, 1);
  CHECK(a.clean_accuracy >= 0.85);
  CHECK(a.final_loss > 0.0);

  datagen::TrainResult b = datagen::train_source(mspec, task.train, task.test, opts, 1);
  CHECK(a.clean_accuracy == b.clean_accuracy);
  for (size_t i = 0; i < a.model.params.size(); ++i)
    CHECK(a.model.params.entry(static_cast<int>(i)).value ==
          b.model.params.entry(static_cast<int>(i)).value);
}

TEST_CASE("zero training epochs stay at chance level") {
  TaskSpec tspec = small_task();
  datagen::Task task = datagen::make_task(tspec);
  model::ModelSpec mspec;
  datagen::TrainOptions opts;
  opts.epochs = 0;
  opts.accuracy_floor = 0.0;
  datagen::TrainResult r = datagen::train_source(mspec, task.train, task.test, opts, 2);
  CHECK(r.clean_accuracy == doctest::Approx(0.125).epsilon(0.8));
  CHECK(std::abs(r.clean_accuracy - 0.125) <= 0.1);
}

TEST_CASE("an unreachable accuracy floor is a hard error") {
  TaskSpec tspec = small_task();
  datagen::Task task = datagen::make_task(tspec);
  model::ModelSpec mspec;
  datagen::TrainOptions opts;
  opts.epochs = 0;
  opts.accuracy_floor = 0.5;
  CHECK_THROWS_AS(datagen::train_source(mspec, task.train, task.test, opts, 3),
                  std::runtime_error);
}

TEST_CASE("severity degrades a trained source monotonically") {
  TaskSpec tspec = small_task();
  tspec.train_count = 1600;
  tspec.test_count = 800;
  datagen::Task task = datagen::make_task(tspec);
  model::ModelSpec mspec;
  datagen::TrainOptions opts;
  opts.epochs = 4;
  opts.accuracy_floor = 0.85;
  datagen::TrainResult trained = datagen::train_source(mspec, task.train, task.test, opts, 4);

  std::vector<double> acc;
  for (int sev = 1; sev <= 5; ++sev) {
    StreamSpec spec;
    spec.total = 800;
    spec.shuffle_seed = 21;
    spec.parts = {{{Corruption::kNoiseU1, sev}, 1.0}};
    auto stream = datagen::make_stream(task.test, spec, tspec.noise_scale);
    acc.push_back(adapt::evaluate_accuracy(trained.model, stream).accuracy);
  }
  int inversions = 0;
  for (size_t i = 1; i < acc.size(); ++i)
    if (acc[i] > acc[i - 1] + 1e-12) {
      ++inversions;
      CHECK(acc[i] - acc[i - 1] <= 0.005);
    }
  CHECK(inversions <= 1);
  CHECK(acc.back() < trained.clean_accuracy);

  // strong corruption at the same severity hurts more than weak
  StreamSpec strong;
  strong.total = 800;
  strong.shuffle_seed = 21;
  strong.parts = {{{Corruption::kBoth, 5}, 1.0}};
  auto strong_stream = datagen::make_stream(task.test, strong, tspec.noise_scale);
  double strong_acc = adapt::evaluate_accuracy(trained.model, strong_stream).accuracy;
  CHECK(strong_acc < acc.back());
}
