#include "sumi/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "sumi/kernels.hpp"
#include "sumi/threads.hpp"

namespace sumi::datagen {

using numkit::Tensor;

namespace {

uint64_t splitmix64(uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

uint64_t mix_seed(uint64_t a, uint64_t b) {
  return splitmix64(a + 0x9e3779b97f4a7c15ULL * (b + 1));
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void TaskSpec::validate() const {
  if (classes < 2) throw std::invalid_argument("TaskSpec: classes must be >= 2");
  if (dim_u1 < 1 || dim_u2 < 1) throw std::invalid_argument("TaskSpec: dims must be >= 1");
  if (separation <= 0.0) throw std::invalid_argument("TaskSpec: separation must be positive");
  if (noise_scale < 0.0) throw std::invalid_argument("TaskSpec: noise scale must be >= 0");
  if (info_u1 <= 0.0 || info_u2 <= 0.0)
    throw std::invalid_argument("TaskSpec: informativeness weights must be positive");
  if (train_count < 1 || test_count < 1)
    throw std::invalid_argument("TaskSpec: sample counts must be >= 1");
}

namespace {

// Exact per-class quotas, remainder to the lowest class ids, then shuffled.
std::vector<int> balanced_labels(int n, int classes, std::mt19937_64& rng) {
  std::vector<int> labels;
  labels.reserve(static_cast<size_t>(n));
  int base = n / classes;
  int extra = n % classes;
  for (int c = 0; c < classes; ++c) {
    int quota = base + (c < extra ? 1 : 0);
    labels.insert(labels.end(), static_cast<size_t>(quota), c);
  }
  std::shuffle(labels.begin(), labels.end(), rng);
  return labels;
}

std::vector<MultimodalSample> draw_split(const TaskSpec& spec,
                                         const std::vector<std::vector<double>>& centers_u1,
                                         const std::vector<std::vector<double>>& centers_u2,
                                         int count, std::mt19937_64& rng) {
  std::normal_distribution<double> unit(0.0, 1.0);
  std::vector<int> labels = balanced_labels(count, spec.classes, rng);
  std::vector<MultimodalSample> out(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    MultimodalSample& s = out[static_cast<size_t>(i)];
    s.label = labels[static_cast<size_t>(i)];
    s.domain = "none";
    s.x_u1 = Tensor(spec.dim_u1, 1);
    s.x_u2 = Tensor(spec.dim_u2, 1);
    const std::vector<double>& c1 = centers_u1[static_cast<size_t>(s.label)];
    const std::vector<double>& c2 = centers_u2[static_cast<size_t>(s.label)];
    for (int d = 0; d < spec.dim_u1; ++d)
      s.x_u1[d] = spec.info_u1 * c1[static_cast<size_t>(d)] + spec.noise_scale * unit(rng);
    for (int d = 0; d < spec.dim_u2; ++d)
      s.x_u2[d] = spec.info_u2 * c2[static_cast<size_t>(d)] + spec.noise_scale * unit(rng);
  }
  return out;
}

}  // namespace

Task make_task(const TaskSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> unit(0.0, 1.0);

  std::vector<std::vector<double>> centers_u1(static_cast<size_t>(spec.classes));
  std::vector<std::vector<double>> centers_u2(static_cast<size_t>(spec.classes));
  for (int c = 0; c < spec.classes; ++c) {
    centers_u1[static_cast<size_t>(c)].resize(static_cast<size_t>(spec.dim_u1));
    for (double& v : centers_u1[static_cast<size_t>(c)]) v = spec.separation * unit(rng);
    centers_u2[static_cast<size_t>(c)].resize(static_cast<size_t>(spec.dim_u2));
    for (double& v : centers_u2[static_cast<size_t>(c)]) v = spec.separation * unit(rng);
  }

  Task task;
  task.spec = spec;
  task.train = draw_split(spec, centers_u1, centers_u2, spec.train_count, rng);
  task.test = draw_split(spec, centers_u1, centers_u2, spec.test_count, rng);
  return task;
}

Corruption corruption_from_string(const std::string& s) {
  if (s == "none") return Corruption::kNone;
  if (s == "noise-u1") return Corruption::kNoiseU1;
  if (s == "noise-u2") return Corruption::kNoiseU2;
  if (s == "both") return Corruption::kBoth;
  if (s == "miss-u1") return Corruption::kMissU1;
  if (s == "miss-u2") return Corruption::kMissU2;
  if (s == "mix") return Corruption::kMix;
  throw std::invalid_argument("unknown corruption '" + s + "'");
}

std::string to_string(Corruption c) {
  switch (c) {
    case Corruption::kNone: return "none";
    case Corruption::kNoiseU1: return "noise-u1";
    case Corruption::kNoiseU2: return "noise-u2";
    case Corruption::kBoth: return "both";
    case Corruption::kMissU1: return "miss-u1";
    case Corruption::kMissU2: return "miss-u2";
    case Corruption::kMix: return "mix";
  }
  throw std::invalid_argument("unknown corruption kind");
}

bool is_strong(Corruption c) {
  return c == Corruption::kBoth || c == Corruption::kMissU1 || c == Corruption::kMissU2 ||
         c == Corruption::kMix;
}

void CorruptionKind::validate() const {
  if (kind == Corruption::kNone) {
    if (severity != 0) throw std::invalid_argument("CorruptionKind: none requires severity 0");
  } else if (severity < 1 || severity > 5) {
    throw std::invalid_argument("CorruptionKind: severity must be 1..5 for " + to_string(kind));
  }
}

namespace {

void add_noise(Tensor& x, double std_dev, std::mt19937_64& rng) {
  std::normal_distribution<double> noise(0.0, std_dev);
  for (int i = 0; i < x.size(); ++i) x[i] += noise(rng);
}

void zero_out(Tensor& x) { x.fill(0.0); }

}  // namespace

MultimodalSample corrupt(const MultimodalSample& s, const CorruptionKind& kind,
                         double noise_scale, uint64_t seed) {
  kind.validate();
  if (kind.kind == Corruption::kNone) return s;

  MultimodalSample out = s;
  double std_dev = 0.4 * static_cast<double>(kind.severity) * noise_scale;
  std::mt19937_64 rng(seed);
  switch (kind.kind) {
    case Corruption::kNone: break;
    case Corruption::kNoiseU1: add_noise(out.x_u1, std_dev, rng); break;
    case Corruption::kNoiseU2: add_noise(out.x_u2, std_dev, rng); break;
    case Corruption::kBoth:
      add_noise(out.x_u1, std_dev, rng);
      add_noise(out.x_u2, std_dev, rng);
      break;
    case Corruption::kMissU1: zero_out(out.x_u1); break;
    case Corruption::kMissU2: zero_out(out.x_u2); break;
    case Corruption::kMix: {
      std::uniform_int_distribution<int> side(0, 1);
      if (side(rng) == 0) {
        zero_out(out.x_u1);
        add_noise(out.x_u2, std_dev, rng);
      } else {
        zero_out(out.x_u2);
        add_noise(out.x_u1, std_dev, rng);
      }
      break;
    }
  }
  return out;
}

namespace {

void check_corrupt_args(const std::vector<MultimodalSample>& samples,
                        const std::vector<CorruptionKind>& kinds,
                        const std::vector<uint64_t>& seeds) {
  if (samples.size() != kinds.size() || samples.size() != seeds.size())
    throw std::invalid_argument("corrupt_all: samples, kinds and seeds must have equal length");
  for (const CorruptionKind& k : kinds) k.validate();
}

}  // namespace

std::vector<MultimodalSample> corrupt_all(const std::vector<MultimodalSample>& samples,
                                          const std::vector<CorruptionKind>& kinds,
                                          double noise_scale, const std::vector<uint64_t>& seeds) {
  check_corrupt_args(samples, kinds, seeds);
  std::vector<MultimodalSample> out(samples.size());
  int n = static_cast<int>(samples.size());
#if defined(SUMI_HAVE_OPENMP)
#pragma omp parallel for schedule(static) num_threads(sumi::thread_budget())
#endif
  for (int i = 0; i < n; ++i) {
    size_t k = static_cast<size_t>(i);
    out[k] = corrupt(samples[k], kinds[k], noise_scale, seeds[k]);
  }
  return out;
}

std::vector<MultimodalSample> corrupt_all_serial(const std::vector<MultimodalSample>& samples,
                                                 const std::vector<CorruptionKind>& kinds,
                                                 double noise_scale,
                                                 const std::vector<uint64_t>& seeds) {
  check_corrupt_args(samples, kinds, seeds);
  std::vector<MultimodalSample> out;
  out.reserve(samples.size());
  for (size_t i = 0; i < samples.size(); ++i)
    out.push_back(corrupt(samples[i], kinds[i], noise_scale, seeds[i]));
  return out;
}

void StreamSpec::validate() const {
  if (total < 1) throw std::invalid_argument("StreamSpec: total must be >= 1");
  if (parts.empty()) throw std::invalid_argument("StreamSpec: at least one part required");
  double sum = 0.0;
  for (const StreamPart& p : parts) {
    p.kind.validate();
    if (p.ratio < 0.0) throw std::invalid_argument("StreamSpec: ratios must be >= 0");
    sum += p.ratio;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("StreamSpec: ratios sum to " + format_double(sum) + ", not 1");
}

bool StreamSpec::any_strong() const {
  for (const StreamPart& p : parts)
    if (p.ratio > 0.0 && is_strong(p.kind.kind)) return true;
  return false;
}

StreamSpec parse_stream_spec(const std::string& text) {
  StreamSpec spec;
  spec.parts.clear();
  std::stringstream ss(text);
  std::string token;
  while (std::getline(ss, token, ',')) {
    if (token.empty()) continue;
    size_t eq = token.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("stream spec: expected key=value in '" + token + "'");
    std::string key = token.substr(0, eq);
    std::string value = token.substr(eq + 1);
    try {
      if (key == "total") {
        spec.total = std::stoi(value);
      } else if (key == "shuffle-seed") {
        spec.shuffle_seed = std::stoull(value);
      } else if (key == "severity") {
        if (value != "mixed")
          throw std::invalid_argument("stream spec: severity accepts only 'mixed'");
        spec.mixed_severity = true;
      } else {
        StreamPart part;
        size_t colon = key.find(':');
        if (colon == std::string::npos) {
          part.kind.kind = corruption_from_string(key);
        } else {
          part.kind.kind = corruption_from_string(key.substr(0, colon));
          part.kind.severity = std::stoi(key.substr(colon + 1));
        }
        part.ratio = std::stod(value);
        spec.parts.push_back(part);
      }
    } catch (const std::invalid_argument&) {
      throw;
    } catch (const std::exception&) {
      throw std::invalid_argument("stream spec: cannot parse '" + token + "'");
    }
  }
  spec.validate();
  return spec;
}

std::string to_string(const StreamSpec& spec) {
  std::string out = "total=" + std::to_string(spec.total) +
                    ",shuffle-seed=" + std::to_string(spec.shuffle_seed);
  if (spec.mixed_severity) out += ",severity=mixed";
  for (const StreamPart& p : spec.parts) {
    out += "," + to_string(p.kind.kind);
    if (p.kind.kind != Corruption::kNone) out += ":" + std::to_string(p.kind.severity);
    out += "=" + format_double(p.ratio);
  }
  return out;
}

namespace {

// floor(ratio * n) per part, remaining units to the largest fractional
// parts, earlier parts winning ties.
std::vector<int> quota_counts(const std::vector<StreamPart>& parts, int n) {
  std::vector<int> counts(parts.size());
  std::vector<double> fractions(parts.size());
  int assigned = 0;
  for (size_t i = 0; i < parts.size(); ++i) {
    double exact = parts[i].ratio * static_cast<double>(n);
    counts[i] = static_cast<int>(std::floor(exact));
    fractions[i] = exact - std::floor(exact);
    assigned += counts[i];
  }
  std::vector<size_t> order(parts.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return fractions[a] > fractions[b]; });
  for (int r = 0; r < n - assigned; ++r) ++counts[order[static_cast<size_t>(r)]];
  return counts;
}

}  // namespace

std::vector<MultimodalSample> make_stream(const std::vector<MultimodalSample>& clean_test,
                                          const StreamSpec& spec, double noise_scale) {
  spec.validate();
  if (static_cast<size_t>(spec.total) > clean_test.size())
    throw std::invalid_argument("make_stream: spec wants " + std::to_string(spec.total) +
                                " samples, clean set has " + std::to_string(clean_test.size()));

  int n = spec.total;
  std::vector<int> counts = quota_counts(spec.parts, n);

  std::vector<size_t> part_of(static_cast<size_t>(n));
  size_t pos = 0;
  for (size_t p = 0; p < spec.parts.size(); ++p)
    for (int c = 0; c < counts[p]; ++c) part_of[pos++] = p;

  std::vector<size_t> perm(static_cast<size_t>(n));
  std::iota(perm.begin(), perm.end(), size_t{0});
  std::mt19937_64 shuffler(spec.shuffle_seed);
  std::shuffle(perm.begin(), perm.end(), shuffler);

  std::vector<MultimodalSample> base(static_cast<size_t>(n));
  std::vector<CorruptionKind> kinds(static_cast<size_t>(n));
  std::vector<uint64_t> seeds(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    size_t k = static_cast<size_t>(i);
    base[k] = clean_test[perm[k]];
    CorruptionKind kind = spec.parts[part_of[perm[k]]].kind;
    if (spec.mixed_severity && kind.kind != Corruption::kNone) {
      std::mt19937_64 sev_rng(mix_seed(spec.shuffle_seed ^ 0x5e5e5e5e5e5e5e5eULL, k));
      kind.severity = std::uniform_int_distribution<int>(1, 5)(sev_rng);
    }
    kinds[k] = kind;
    seeds[k] = mix_seed(spec.shuffle_seed, k);
    base[k].domain = to_string(kind.kind);
  }
  return corrupt_all(base, kinds, noise_scale, seeds);
}

TrainResult train_source(const model::ModelSpec& mspec, const std::vector<MultimodalSample>& train,
                         const std::vector<MultimodalSample>& test, const TrainOptions& opts,
                         uint64_t seed) {
  mspec.validate();
  if (train.empty()) throw std::invalid_argument("train_source: empty training set");
  if (opts.epochs < 0) throw std::invalid_argument("train_source: negative epoch count");
  if (opts.batch_size < 1) throw std::invalid_argument("train_source: batch size must be >= 1");

  TrainResult result{model::make_model(mspec, seed), 0.0, 0.0};

  std::mt19937_64 shuffler(splitmix64(seed));
  std::vector<size_t> order(train.size());
  std::iota(order.begin(), order.end(), size_t{0});
  adapt::AdamOptimizer adam(opts.learning_rate);
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffler);
    for (size_t begin = 0; begin < order.size(); begin += static_cast<size_t>(opts.batch_size)) {
      size_t end = std::min(order.size(), begin + static_cast<size_t>(opts.batch_size));
      std::vector<MultimodalSample> batch;
      batch.reserve(end - begin);
      for (size_t i = begin; i < end; ++i) batch.push_back(train[order[i]]);
      kernels::CeBatch cb = kernels::ce_grad_batch(result.model, batch);
      adam.step(result.model.params, cb.grads);
      result.final_loss = cb.loss;
    }
  }

  result.clean_accuracy = adapt::evaluate_accuracy(result.model, test).accuracy;
  if (result.clean_accuracy < opts.accuracy_floor)
    throw std::runtime_error("train_source: clean accuracy " +
                             format_double(result.clean_accuracy) + " below floor " +
                             format_double(opts.accuracy_floor) + " after " +
                             std::to_string(opts.epochs) + " epochs (seed " +
                             std::to_string(seed) + ")");
  return result;
}

void save_dataset(const Dataset& data, const std::string& path) {
  if (data.dim_u1 < 1 || data.dim_u2 < 1 || data.classes < 2)
    throw std::invalid_argument("save_dataset: bad header fields");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_dataset: cannot open '" + path + "'");
  out << "sumi-dataset 1\n";
  out << data.dim_u1 << ' ' << data.dim_u2 << ' ' << data.classes << '\n';
  for (const MultimodalSample& s : data.samples) {
    if (s.x_u1.size() != data.dim_u1 || s.x_u2.size() != data.dim_u2)
      throw std::invalid_argument("save_dataset: sample dims disagree with header");
    out << s.label << ' ' << (s.domain.empty() ? "none" : s.domain);
    for (int i = 0; i < s.x_u1.size(); ++i) out << ' ' << format_double(s.x_u1[i]);
    for (int i = 0; i < s.x_u2.size(); ++i) out << ' ' << format_double(s.x_u2[i]);
    out << '\n';
  }
  if (!out) throw std::runtime_error("save_dataset: write failed for '" + path + "'");
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_dataset: cannot open '" + path + "'");
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != "sumi-dataset" || version != 1)
    throw std::runtime_error("load_dataset: '" + path + "' is not a version-1 dataset");
  Dataset data;
  in >> data.dim_u1 >> data.dim_u2 >> data.classes;
  if (!in || data.dim_u1 < 1 || data.dim_u2 < 1 || data.classes < 2)
    throw std::runtime_error("load_dataset: bad header in '" + path + "'");
  MultimodalSample s;
  while (in >> s.label >> s.domain) {
    s.x_u1 = Tensor(data.dim_u1, 1);
    s.x_u2 = Tensor(data.dim_u2, 1);
    for (int i = 0; i < data.dim_u1; ++i) in >> s.x_u1[i];
    for (int i = 0; i < data.dim_u2; ++i) in >> s.x_u2[i];
    if (!in)
      throw std::runtime_error("load_dataset: truncated row " +
                               std::to_string(data.samples.size()) + " in '" + path + "'");
    data.samples.push_back(s);
  }
  return data;
}

}  // namespace sumi::datagen
