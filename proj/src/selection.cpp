#include "sumi/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "sumi/threads.hpp"

namespace sumi::selection {

ScheduleFamily schedule_family_from_string(const std::string& s) {
  if (s == "linear") return ScheduleFamily::kLinear;
  if (s == "exponential") return ScheduleFamily::kExponential;
  if (s == "logarithmic") return ScheduleFamily::kLogarithmic;
  throw std::invalid_argument("unknown schedule family '" + s + "'");
}

std::string to_string(ScheduleFamily family) {
  switch (family) {
    case ScheduleFamily::kLinear: return "linear";
    case ScheduleFamily::kExponential: return "exponential";
    case ScheduleFamily::kLogarithmic: return "logarithmic";
  }
  return "?";
}

QuantileMode quantile_mode_from_string(const std::string& s) {
  if (s == "minmax-interp") return QuantileMode::kMinmaxInterp;
  if (s == "order-stat") return QuantileMode::kOrderStat;
  throw std::invalid_argument("unknown quantile mode '" + s + "'");
}

std::string to_string(QuantileMode mode) {
  switch (mode) {
    case QuantileMode::kMinmaxInterp: return "minmax-interp";
    case QuantileMode::kOrderStat: return "order-stat";
  }
  return "?";
}

double SmoothingSchedule::value(int t) const {
  if (iter < 1) throw std::out_of_range("SmoothingSchedule: iter must be >= 1");
  if (t < 0 || t > iter)
    throw std::out_of_range("SmoothingSchedule: t=" + std::to_string(t) +
                            " outside [0, " + std::to_string(iter) + "]");
  // Endpoints are exact by definition; the formulas only hit them up to
  // rounding, so short-circuit before evaluating.
  if (t == 0) return 0.0;
  if (t == iter) return 1.0;
  double x = static_cast<double>(t) / iter;
  double v = 0.0;
  switch (family) {
    case ScheduleFamily::kLinear:
      v = x;
      break;
    case ScheduleFamily::kExponential:
      v = std::exp(static_cast<double>(t) * std::numbers::ln2 / iter) - 1.0;
      break;
    case ScheduleFamily::kLogarithmic:
      v = std::log((std::numbers::e - 1.0) * x + 1.0);
      break;
  }
  return std::clamp(v, 0.0, 1.0);
}

namespace {

void check_batch(const std::vector<Tensor>& batch) {
  if (batch.empty()) throw std::invalid_argument("quartiles: empty batch");
  int d = batch.front().rows();
  for (const Tensor& h : batch)
    if (h.rows() != d || h.cols() != 1)
      throw std::invalid_argument("quartiles: ragged batch, expected " + std::to_string(d) +
                                  "x1, got " + h.shape_str());
}

// Sorted-order linear interpolation at position (n-1)*q.
double interp_quantile(std::vector<double>& column, double q) {
  std::sort(column.begin(), column.end());
  double pos = (static_cast<double>(column.size()) - 1.0) * q;
  auto lo = static_cast<size_t>(pos);
  double frac = pos - static_cast<double>(lo);
  if (lo + 1 >= column.size()) return column[lo];
  return column[lo] + frac * (column[lo + 1] - column[lo]);
}

void quartile_column(const std::vector<Tensor>& batch, int d, QuantileMode mode, double& q1_out,
                     double& q3_out) {
  if (mode == QuantileMode::kMinmaxInterp) {
    double mn = batch[0][d], mx = batch[0][d];
    for (const Tensor& h : batch) {
      mn = std::min(mn, h[d]);
      mx = std::max(mx, h[d]);
    }
    double range = mx - mn;
    q1_out = mn + 0.25 * range;
    q3_out = mn + 0.75 * range;
  } else {
    std::vector<double> column(batch.size());
    for (size_t i = 0; i < batch.size(); ++i) column[i] = batch[i][d];
    q1_out = interp_quantile(column, 0.25);
    std::vector<double> column2(batch.size());
    for (size_t i = 0; i < batch.size(); ++i) column2[i] = batch[i][d];
    q3_out = interp_quantile(column2, 0.75);
  }
}

}  // namespace

QuartileStats quartiles(const std::vector<Tensor>& batch, QuantileMode mode) {
  check_batch(batch);
  int dims = batch.front().rows();
  QuartileStats stats;
  stats.mode = mode;
  stats.q1 = Tensor::vector(dims);
  stats.q3 = Tensor::vector(dims);
  stats.iqr = Tensor::vector(dims);
#if defined(SUMI_HAVE_OPENMP)
#pragma omp parallel for schedule(static) num_threads(sumi::thread_budget())
#endif
  for (int d = 0; d < dims; ++d) {
    double q1 = 0.0, q3 = 0.0;
    quartile_column(batch, d, mode, q1, q3);
    stats.q1[d] = q1;
    stats.q3[d] = q3;
    stats.iqr[d] = q3 - q1;
  }
  return stats;
}

QuartileStats quartiles_serial(const std::vector<Tensor>& batch, QuantileMode mode) {
  check_batch(batch);
  int dims = batch.front().rows();
  int n = static_cast<int>(batch.size());
  QuartileStats stats;
  stats.mode = mode;
  stats.q1 = Tensor::vector(dims);
  stats.q3 = Tensor::vector(dims);
  stats.iqr = Tensor::vector(dims);
  std::vector<double> column(static_cast<size_t>(n));
  for (int d = 0; d < dims; ++d) {
    double q1, q3;
    if (mode == QuantileMode::kMinmaxInterp) {
      double mn = batch[0][d], mx = batch[0][d];
      for (int i = 1; i < n; ++i) {
        double v = batch[static_cast<size_t>(i)][d];
        if (v < mn) mn = v;
        if (v > mx) mx = v;
      }
      double range = mx - mn;
      q1 = mn + 0.25 * range;
      q3 = mn + 0.75 * range;
    } else {
      for (int i = 0; i < n; ++i) column[static_cast<size_t>(i)] = batch[static_cast<size_t>(i)][d];
      std::sort(column.begin(), column.end());
      auto pick = [&](double q) {
        double pos = (n - 1.0) * q;
        auto lo = static_cast<size_t>(pos);
        double frac = pos - static_cast<double>(lo);
        if (lo + 1 >= column.size()) return column[lo];
        return column[lo] + frac * (column[lo + 1] - column[lo]);
      };
      q1 = pick(0.25);
      q3 = pick(0.75);
    }
    stats.q1[d] = q1;
    stats.q3[d] = q3;
    stats.iqr[d] = q3 - q1;
  }
  return stats;
}

SelectionMask iqr_mask(const std::vector<Tensor>& batch, const QuartileStats& stats,
                       const SmoothingSchedule& schedule, int t, double beta) {
  check_batch(batch);
  if (beta < 0.0 || beta > 1.0) throw std::invalid_argument("iqr_mask: beta outside [0,1]");
  int dims = batch.front().rows();
  if (stats.q1.rows() != dims)
    throw std::invalid_argument("iqr_mask: stats computed for " + std::to_string(stats.q1.rows()) +
                                " dims, batch has " + std::to_string(dims));
  double f = schedule.value(t);
  double required = beta + (1.0 - beta) * f;

  SelectionMask mask;
  mask.selected.resize(batch.size());
  mask.band_fraction.resize(batch.size());
  for (size_t i = 0; i < batch.size(); ++i) {
    const Tensor& h = batch[i];
    int in_band = 0;
    for (int d = 0; d < dims; ++d) {
      double lo = stats.q1[d] - 1.5 * f * stats.iqr[d];
      double hi = stats.q3[d] + 1.5 * f * stats.iqr[d];
      if (h[d] >= lo && h[d] <= hi) ++in_band;
    }
    double fraction = static_cast<double>(in_band) / dims;
    mask.band_fraction[i] = fraction;
    mask.selected[i] = fraction >= required;
  }
  return mask;
}

SelectionMask ua_mask(const std::vector<SampleEntropies>& entropies, double gamma_m,
                      double gamma_u, double mu) {
  SelectionMask mask;
  mask.selected.resize(entropies.size());
  mask.entropies = entropies;
  for (size_t i = 0; i < entropies.size(); ++i) {
    const SampleEntropies& e = entropies[i];
    mask.selected[i] = e.m <= gamma_m && e.u1 + mu * e.u2 >= gamma_u;
  }
  return mask;
}

SelectionMask intersect(const SelectionMask& first, const SelectionMask& second) {
  if (first.size() != second.size())
    throw std::invalid_argument("intersect: mask sizes differ, " + std::to_string(first.size()) +
                                " vs " + std::to_string(second.size()));
  SelectionMask out;
  out.selected.resize(first.selected.size());
  for (size_t i = 0; i < out.selected.size(); ++i)
    out.selected[i] = first.selected[i] && second.selected[i];
  out.band_fraction = first.band_fraction;
  out.entropies = second.entropies;
  return out;
}

}  // namespace sumi::selection
