// SPDX-License-Identifier: Apache-2.0
//
// Dense row-major double tensor plus the arithmetic kernels shared by the
// tape's forward and backward execution. Every kernel validates shapes and
// rejects non-finite outputs: NaN/Inf is surfaced as an error at the op that
// produced it, never propagated.

#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <new>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace graphpoison {

// Fixed 64-byte alignment regardless of compile flags, so translation units
// built with different vector ISAs stay ABI-compatible.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::size_t alignment = 64;

  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t{alignment}));
  }
  void deallocate(T* p, std::size_t) noexcept {
    ::operator delete(p, std::align_val_t{alignment});
  }
  template <class U>
  bool operator==(const AlignedAllocator<U>&) const noexcept {
    return true;
  }
  template <class U>
  bool operator!=(const AlignedAllocator<U>&) const noexcept {
    return false;
  }
};

class Tensor {
 public:
  using Storage = std::vector<double, AlignedAllocator<double>>;

  Tensor() : rows_(0), cols_(0) {}

  Tensor(int rows, int cols)
      : rows_(rows), cols_(cols), v_(static_cast<std::size_t>(rows) * cols, 0.0) {
    if (rows < 0 || cols < 0) throw std::invalid_argument("Tensor: negative shape");
  }

  Tensor(int rows, int cols, Storage values)
      : rows_(rows), cols_(cols), v_(std::move(values)) {
    if (v_.size() != static_cast<std::size_t>(rows) * cols)
      throw std::invalid_argument("Tensor: values length must equal rows*cols");
  }

  // Row-major literal, e.g. Tensor::from({{1,2},{3,4}}).
  static Tensor from(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor zeros(int rows, int cols) { return Tensor(rows, cols); }
  static Tensor full(int rows, int cols, double value);
  static Tensor identity(int n);
  static Tensor scalar(double value) { return full(1, 1, value); }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return v_.size(); }

  double& operator()(int r, int c) { return v_[static_cast<std::size_t>(r) * cols_ + c]; }
  double operator()(int r, int c) const { return v_[static_cast<std::size_t>(r) * cols_ + c]; }

  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }
  std::span<const double> values() const { return {v_.data(), v_.size()}; }
  std::span<double> values() { return {v_.data(), v_.size()}; }

  bool same_shape(const Tensor& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
  bool is_scalar() const { return rows_ == 1 && cols_ == 1; }
  double scalar_value() const {
    if (!is_scalar()) throw std::invalid_argument("Tensor: not a scalar");
    return v_[0];
  }

  bool all_finite() const;
  double max_abs_diff(const Tensor& o) const;

 private:
  int rows_, cols_;
  Storage v_;
};

using TensorPtr = std::shared_ptr<const Tensor>;

inline TensorPtr make_tensor(Tensor t) { return std::make_shared<const Tensor>(std::move(t)); }

// Arithmetic kernels. Tape ops and raw-tensor code paths both route through
// these, so recorded and unrecorded computations are bit-identical.
namespace kernels {

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor matmul_tn(const Tensor& a, const Tensor& b);  // a^T . b
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // a . b^T
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
// Elementwise multiply by a 1x1 tensor broadcast over a.
Tensor smul(const Tensor& a, const Tensor& scalar);
Tensor row_softmax(const Tensor& a);
Tensor log_elem(const Tensor& a);
Tensor exp_elem(const Tensor& a);
Tensor relu(const Tensor& a);
// 1.0 where a > 0 else 0.0 (derivative of relu; its own derivative is zero).
Tensor gtzero_mask(const Tensor& a);
Tensor reciprocal(const Tensor& a);
Tensor rsqrt(const Tensor& a);
Tensor row_sum(const Tensor& a);   // NxK -> Nx1
Tensor col_sum(const Tensor& a);   // NxK -> 1xK
Tensor sum_all(const Tensor& a);   // NxK -> 1x1
Tensor transpose(const Tensor& a);
Tensor diag(const Tensor& v);       // Nx1 -> NxN
Tensor diag_part(const Tensor& m);  // NxN -> Nx1
Tensor gather_rows(const Tensor& a, const std::vector<int>& idx);
Tensor scatter_rows(const Tensor& a, const std::vector<int>& idx, int target_rows);
// out[i,0] = a[i, idx[i]]
Tensor select_cols(const Tensor& a, const std::vector<int>& idx);
// out[i, idx[i]] = a[i,0], zero elsewhere
Tensor scatter_cols(const Tensor& a, const std::vector<int>& idx, int target_cols);

}  // namespace kernels

}  // namespace graphpoison
