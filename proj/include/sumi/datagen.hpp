#pragma once

// Synthetic two-modality task: Gaussian class clusters observed through two
// feature vectors, supervised source training, feature-space corruptions,
// and mixture streams with exact quota assignment.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sumi/adapt.hpp"
#include "sumi/model.hpp"
#include "sumi/sample.hpp"

namespace sumi::datagen {

struct TaskSpec {
  int classes = 8;
  int dim_u1 = 16;
  int dim_u2 = 16;
  double separation = 1.5;   // class-center scale
  double noise_scale = 1.0;  // within-class spread
  double info_u1 = 1.0;      // per-modality label-signal weight
  double info_u2 = 1.0;
  int train_count = 4000;
  int test_count = 2000;
  uint64_t seed = 0;

  void validate() const;  // throws std::invalid_argument
};

struct Task {
  TaskSpec spec;
  std::vector<MultimodalSample> train;
  std::vector<MultimodalSample> test;
};

// Class centers drawn once per (class, modality), then samples scattered
// around them. Labels are exact per-class quotas, shuffled by the seed.
// Every sample's domain tag is "none".
Task make_task(const TaskSpec& spec);

enum class Corruption { kNone, kNoiseU1, kNoiseU2, kBoth, kMissU1, kMissU2, kMix };

Corruption corruption_from_string(const std::string& s);
std::string to_string(Corruption c);

// Strong kinds destroy or displace a whole modality; weak kinds only blur.
bool is_strong(Corruption c);

struct CorruptionKind {
  Corruption kind = Corruption::kNone;
  int severity = 0;  // 0 iff kind is none, otherwise 1..5

  void validate() const;  // throws std::invalid_argument
};

// Additive Gaussian noise has std 0.4 * severity * noise_scale; missing
// modalities become zero vectors; mix drops one side (chosen by the seed)
// and adds noise to the other. Labels and dimensions never change.
MultimodalSample corrupt(const MultimodalSample& s, const CorruptionKind& kind,
                         double noise_scale, uint64_t seed);

// Corruption of a whole stream, one independent seed per sample. The two
// variants agree bitwise.
std::vector<MultimodalSample> corrupt_all(const std::vector<MultimodalSample>& samples,
                                          const std::vector<CorruptionKind>& kinds,
                                          double noise_scale, const std::vector<uint64_t>& seeds);
std::vector<MultimodalSample> corrupt_all_serial(const std::vector<MultimodalSample>& samples,
                                                 const std::vector<CorruptionKind>& kinds,
                                                 double noise_scale,
                                                 const std::vector<uint64_t>& seeds);

struct StreamPart {
  CorruptionKind kind;
  double ratio = 0.0;
};

struct StreamSpec {
  int total = 2000;
  std::vector<StreamPart> parts;  // ratios >= 0 and sum to 1
  bool mixed_severity = false;    // draw severity 1..5 per corrupted sample
  uint64_t shuffle_seed = 0;

  void validate() const;  // throws std::invalid_argument
  bool any_strong() const;
};

// Text form used by the command line, a comma-separated list of
// kind[:severity]=ratio entries with optional total=N, shuffle-seed=N and
// severity=mixed fields, e.g. "none=0.5,both:5=0.25,mix:5=0.25".
StreamSpec parse_stream_spec(const std::string& text);
std::string to_string(const StreamSpec& spec);

// Takes the first spec.total samples of the clean set, assigns kinds by
// largest-remainder quotas in part order, shuffles, then corrupts with
// per-sample seeds derived from the shuffle seed and position. Domain tags
// name the corruption kind.
std::vector<MultimodalSample> make_stream(const std::vector<MultimodalSample>& clean_test,
                                          const StreamSpec& spec, double noise_scale);

struct TrainOptions {
  int epochs = 8;
  double learning_rate = 1e-3;
  int batch_size = 32;
  double accuracy_floor = 0.9;  // 0 disables the floor check
};

struct TrainResult {
  model::Model model;
  double clean_accuracy = 0.0;
  double final_loss = 0.0;
};

// Full-parameter supervised training with cross-entropy; deterministic in
// the seed. Throws std::runtime_error when the clean accuracy lands below
// the floor.
TrainResult train_source(const model::ModelSpec& mspec, const std::vector<MultimodalSample>& train,
                         const std::vector<MultimodalSample>& test, const TrainOptions& opts,
                         uint64_t seed);

struct Dataset {
  int dim_u1 = 0;
  int dim_u2 = 0;
  int classes = 0;
  std::vector<MultimodalSample> samples;
};

// Columnar text, one sample per row: label, domain tag, modality values.
// Doubles print with full precision, so a round trip is bit-exact.
void save_dataset(const Dataset& data, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace sumi::datagen
