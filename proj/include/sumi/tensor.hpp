#pragma once

// Dense 64-bit tensors (vectors and matrices, row-major). The only data
// carrier used by the compute graph and the model.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace sumi::numkit {

class Tensor {
 public:
  Tensor() = default;
  Tensor(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols, fill) {
    if (rows < 0 || cols < 0) throw std::invalid_argument("Tensor: negative shape");
  }

  static Tensor vector(int n, double fill = 0.0) { return Tensor(n, 1, fill); }
  static Tensor vector(std::initializer_list<double> vals) {
    Tensor t(static_cast<int>(vals.size()), 1);
    int i = 0;
    for (double v : vals) t.data_[i++] = v;
    return t;
  }
  static Tensor matrix(int rows, int cols, double fill = 0.0) { return Tensor(rows, cols, fill); }
  static Tensor scalar(double v) { return Tensor(1, 1, v); }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int size() const { return static_cast<int>(data_.size()); }
  bool is_vector() const { return cols_ == 1; }
  bool is_scalar() const { return rows_ == 1 && cols_ == 1; }

  double& operator[](int i) { return data_[static_cast<size_t>(i)]; }
  double operator[](int i) const { return data_[static_cast<size_t>(i)]; }
  double& at(int r, int c) { return data_[static_cast<size_t>(r) * cols_ + c]; }
  double at(int r, int c) const { return data_[static_cast<size_t>(r) * cols_ + c]; }
  double value() const {
    if (!is_scalar()) throw std::logic_error("Tensor::value: not a scalar");
    return data_[0];
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool same_shape(const Tensor& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  std::string shape_str() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
  }
  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  void fill(double v) {
    for (double& x : data_) x = v;
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

}  // namespace sumi::numkit
