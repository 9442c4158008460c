#pragma once

// Sample identification: per-dimension quartile statistics over a batch of
// concatenated representations, the time-smoothed outlier band with its
// fraction rule, the smoothing-schedule family, and the entropy gate that
// keeps confident multimodal predictions whose unimodal heads still carry
// uncertainty worth exploiting.

#include <string>
#include <vector>

#include "sumi/tensor.hpp"

namespace sumi::selection {

using numkit::Tensor;

enum class ScheduleFamily { kLinear, kExponential, kLogarithmic };

ScheduleFamily schedule_family_from_string(const std::string& s);
std::string to_string(ScheduleFamily family);

struct SmoothingSchedule {
  ScheduleFamily family = ScheduleFamily::kLinear;
  int iter = 1;

  // f(t) in [0,1]; f(0)=0 and f(iter)=1 exactly for every family.
  // Throws std::out_of_range when t is outside [0, iter].
  double value(int t) const;
};

enum class QuantileMode { kMinmaxInterp, kOrderStat };

QuantileMode quantile_mode_from_string(const std::string& s);
std::string to_string(QuantileMode mode);

struct QuartileStats {
  Tensor q1, q3, iqr;  // per-dimension, over the batch
  QuantileMode mode = QuantileMode::kMinmaxInterp;
};

// Per-dimension quartiles over a nonempty batch of equal-length vectors.
// "minmax-interp": Q1 = min + 0.25(max-min), Q3 = min + 0.75(max-min).
// "order-stat": linear interpolation of sorted values at position (n-1)q.
// The default entry point may run dimensions on the OpenMP thread budget;
// quartiles_serial is the separately coded single-thread reference, and the
// two agree bitwise.
QuartileStats quartiles(const std::vector<Tensor>& batch, QuantileMode mode);
QuartileStats quartiles_serial(const std::vector<Tensor>& batch, QuantileMode mode);

struct SampleEntropies {
  double m = 0.0;   // multimodal prediction entropy
  double u1 = 0.0;  // first-modality unimodal entropy
  double u2 = 0.0;  // second-modality unimodal entropy
};

struct SelectionMask {
  std::vector<bool> selected;
  // Diagnostics, filled by whichever operation produced the mask.
  std::vector<double> band_fraction;           // from iqr_mask
  std::vector<SampleEntropies> entropies;      // from ua_mask

  int size() const { return static_cast<int>(selected.size()); }
  int count() const {
    int n = 0;
    for (bool b : selected) n += b ? 1 : 0;
    return n;
  }
};

// Outlier filter: sample i passes iff at least beta + (1-beta)f(t) of its
// dimensions d lie inside [Q1_d - 1.5 f(t) IQR_d, Q3_d + 1.5 f(t) IQR_d].
// All comparisons inclusive.
SelectionMask iqr_mask(const std::vector<Tensor>& batch, const QuartileStats& stats,
                       const SmoothingSchedule& schedule, int t, double beta);

// Entropy gate: sample passes iff ent_m <= gamma_m and
// ent_u1 + mu * ent_u2 >= gamma_u. mu weighs the modality listed second.
SelectionMask ua_mask(const std::vector<SampleEntropies>& entropies, double gamma_m,
                      double gamma_u, double mu);

// Per-sample conjunction; keeps the band diagnostics of `first` and the
// entropy diagnostics of `second`. The gate is evaluated only after the
// outlier filter, so the combined mask never selects outside `first`.
SelectionMask intersect(const SelectionMask& first, const SelectionMask& second);

}  // namespace sumi::selection
