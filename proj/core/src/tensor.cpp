// SPDX-License-Identifier: Apache-2.0

#include "graphpoison/tensor.hpp"

#include <cmath>

namespace graphpoison {

namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const EMat>;
using MMap = Eigen::Map<EMat>;

CMap cmap(const Tensor& t) { return CMap(t.data(), t.rows(), t.cols()); }
MMap mmap(Tensor& t) { return MMap(t.data(), t.rows(), t.cols()); }

[[noreturn]] void shape_error(const char* op, const Tensor& a) {
  throw std::invalid_argument(std::string(op) + ": bad shape (" +
                              std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + ")");
}

[[noreturn]] void shape_error2(const char* op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(std::string(op) + ": shape mismatch (" +
                              std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                              " vs " + std::to_string(b.rows()) + "x" +
                              std::to_string(b.cols()) + ")");
}

Tensor checked(const char* op, Tensor t) {
  if (!t.all_finite())
    throw std::runtime_error(std::string(op) + ": non-finite value produced");
  return t;
}

}  // namespace

Tensor Tensor::from(std::initializer_list<std::initializer_list<double>> rows) {
  const int r = static_cast<int>(rows.size());
  const int c = r > 0 ? static_cast<int>(rows.begin()->size()) : 0;
  Tensor t(r, c);
  int i = 0;
  for (const auto& row : rows) {
    if (static_cast<int>(row.size()) != c)
      throw std::invalid_argument("Tensor::from: ragged rows");
    int j = 0;
    for (double v : row) t(i, j++) = v;
    ++i;
  }
  return t;
}

Tensor Tensor::full(int rows, int cols, double value) {
  Tensor t(rows, cols);
  for (double& v : t.values()) v = value;
  return t;
}

Tensor Tensor::identity(int n) {
  Tensor t(n, n);
  for (int i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

bool Tensor::all_finite() const {
  if (v_.empty()) return true;
  return Eigen::Map<const Eigen::ArrayXd>(v_.data(), v_.size()).isFinite().all();
}

double Tensor::max_abs_diff(const Tensor& o) const {
  if (!same_shape(o)) throw std::invalid_argument("max_abs_diff: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < v_.size(); ++i)
    m = std::max(m, std::abs(v_[i] - o.v_[i]));
  return m;
}

namespace kernels {

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) shape_error2("matmul", a, b);
  Tensor out(a.rows(), b.cols());
  mmap(out).noalias() = cmap(a) * cmap(b);
  return checked("matmul", std::move(out));
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows()) shape_error2("matmul_tn", a, b);
  Tensor out(a.cols(), b.cols());
  mmap(out).noalias() = cmap(a).transpose() * cmap(b);
  return checked("matmul_tn", std::move(out));
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.cols()) shape_error2("matmul_nt", a, b);
  Tensor out(a.rows(), b.rows());
  mmap(out).noalias() = cmap(a) * cmap(b).transpose();
  return checked("matmul_nt", std::move(out));
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) shape_error2("add", a, b);
  Tensor out(a.rows(), a.cols());
  mmap(out) = cmap(a) + cmap(b);
  return checked("add", std::move(out));
}

Tensor sub(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) shape_error2("sub", a, b);
  Tensor out(a.rows(), a.cols());
  mmap(out) = cmap(a) - cmap(b);
  return checked("sub", std::move(out));
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) shape_error2("mul", a, b);
  Tensor out(a.rows(), a.cols());
  mmap(out) = cmap(a).cwiseProduct(cmap(b));
  return checked("mul", std::move(out));
}

Tensor scale(const Tensor& a, double factor) {
  Tensor out(a.rows(), a.cols());
  mmap(out) = cmap(a) * factor;
  return checked("scale", std::move(out));
}

Tensor smul(const Tensor& a, const Tensor& scalar) {
  if (!scalar.is_scalar()) shape_error("smul", scalar);
  Tensor out(a.rows(), a.cols());
  mmap(out) = cmap(a) * scalar.scalar_value();
  return checked("smul", std::move(out));
}

Tensor row_softmax(const Tensor& a) {
  if (a.cols() < 1) shape_error("row_softmax", a);
  Tensor out(a.rows(), a.cols());
  for (int i = 0; i < a.rows(); ++i) {
    double mx = a(i, 0);
    for (int j = 1; j < a.cols(); ++j) mx = std::max(mx, a(i, j));
    double sum = 0.0;
    for (int j = 0; j < a.cols(); ++j) {
      out(i, j) = std::exp(a(i, j) - mx);
      sum += out(i, j);
    }
    for (int j = 0; j < a.cols(); ++j) out(i, j) /= sum;
  }
  return checked("row_softmax", std::move(out));
}

Tensor log_elem(const Tensor& a) {
  Tensor out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out.values()[i] = std::log(a.values()[i]);
  return checked("log", std::move(out));
}

Tensor exp_elem(const Tensor& a) {
  Tensor out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out.values()[i] = std::exp(a.values()[i]);
  return checked("exp", std::move(out));
}

Tensor relu(const Tensor& a) {
  Tensor out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i)
    out.values()[i] = a.values()[i] > 0.0 ? a.values()[i] : 0.0;
  return out;
}

Tensor gtzero_mask(const Tensor& a) {
  Tensor out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i)
    out.values()[i] = a.values()[i] > 0.0 ? 1.0 : 0.0;
  return out;
}

Tensor reciprocal(const Tensor& a) {
  Tensor out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out.values()[i] = 1.0 / a.values()[i];
  return checked("reciprocal", std::move(out));
}

Tensor rsqrt(const Tensor& a) {
  Tensor out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out.values()[i] = 1.0 / std::sqrt(a.values()[i]);
  return checked("rsqrt", std::move(out));
}

Tensor row_sum(const Tensor& a) {
  Tensor out(a.rows(), 1);
  for (int i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (int j = 0; j < a.cols(); ++j) s += a(i, j);
    out(i, 0) = s;
  }
  return checked("row_sum", std::move(out));
}

Tensor col_sum(const Tensor& a) {
  Tensor out(1, a.cols());
  for (int j = 0; j < a.cols(); ++j) {
    double s = 0.0;
    for (int i = 0; i < a.rows(); ++i) s += a(i, j);
    out(0, j) = s;
  }
  return checked("col_sum", std::move(out));
}

Tensor sum_all(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  return checked("sum_all", Tensor::scalar(s));
}

Tensor transpose(const Tensor& a) {
  Tensor out(a.cols(), a.rows());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

Tensor diag(const Tensor& v) {
  if (v.cols() != 1) shape_error("diag", v);
  Tensor out(v.rows(), v.rows());
  for (int i = 0; i < v.rows(); ++i) out(i, i) = v(i, 0);
  return out;
}

Tensor diag_part(const Tensor& m) {
  if (m.rows() != m.cols()) shape_error("diag_part", m);
  Tensor out(m.rows(), 1);
  for (int i = 0; i < m.rows(); ++i) out(i, 0) = m(i, i);
  return out;
}

Tensor gather_rows(const Tensor& a, const std::vector<int>& idx) {
  Tensor out(static_cast<int>(idx.size()), a.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= a.rows())
      throw std::invalid_argument("gather_rows: index out of range");
    for (int j = 0; j < a.cols(); ++j) out(static_cast<int>(i), j) = a(idx[i], j);
  }
  return out;
}

Tensor scatter_rows(const Tensor& a, const std::vector<int>& idx, int target_rows) {
  if (a.rows() != static_cast<int>(idx.size()))
    throw std::invalid_argument("scatter_rows: index count must equal rows");
  Tensor out(target_rows, a.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= target_rows)
      throw std::invalid_argument("scatter_rows: index out of range");
    for (int j = 0; j < a.cols(); ++j) out(idx[i], j) += a(static_cast<int>(i), j);
  }
  return checked("scatter_rows", std::move(out));
}

Tensor select_cols(const Tensor& a, const std::vector<int>& idx) {
  if (a.rows() != static_cast<int>(idx.size()))
    throw std::invalid_argument("select_cols: index count must equal rows");
  Tensor out(a.rows(), 1);
  for (int i = 0; i < a.rows(); ++i) {
    if (idx[i] < 0 || idx[i] >= a.cols())
      throw std::invalid_argument("select_cols: index out of range");
    out(i, 0) = a(i, idx[i]);
  }
  return out;
}

Tensor scatter_cols(const Tensor& a, const std::vector<int>& idx, int target_cols) {
  if (a.cols() != 1) shape_error("scatter_cols", a);
  if (a.rows() != static_cast<int>(idx.size()))
    throw std::invalid_argument("scatter_cols: index count must equal rows");
  Tensor out(a.rows(), target_cols);
  for (int i = 0; i < a.rows(); ++i) {
    if (idx[i] < 0 || idx[i] >= target_cols)
      throw std::invalid_argument("scatter_cols: index out of range");
    out(i, idx[i]) = a(i, 0);
  }
  return checked("scatter_cols", std::move(out));
}

}  // namespace kernels

}  // namespace graphpoison
