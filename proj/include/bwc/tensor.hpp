#pragma once

#include <complex>
#include <cstddef>
#include <initializer_list>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace bwc {

using cplx = std::complex<double>;
using Shape = std::vector<std::size_t>;
using MatrixXc = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic>;
using RowMatrixXc = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Dense complex tensor. Entries are stored with the last index running fastest.
class DenseTensor {
 public:
  DenseTensor() : shape_{}, data_(1, cplx(0.0)) {}
  explicit DenseTensor(Shape shape);
  DenseTensor(Shape shape, std::vector<cplx> data);

  static DenseTensor scalar(cplx value);
  static DenseTensor identity(std::size_t n);
  static DenseTensor from_matrix(const MatrixXc& m);

  std::size_t rank() const { return shape_.size(); }
  const Shape& shape() const { return shape_; }
  std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }

  const std::vector<cplx>& data() const { return data_; }
  std::vector<cplx>& data() { return data_; }
  cplx* raw() { return data_.data(); }
  const cplx* raw() const { return data_.data(); }

  cplx& operator[](std::size_t flat) { return data_[flat]; }
  const cplx& operator[](std::size_t flat) const { return data_[flat]; }
  cplx& at(std::initializer_list<std::size_t> idx);
  const cplx& at(std::initializer_list<std::size_t> idx) const;
  std::size_t flat_index(const std::vector<std::size_t>& idx) const;

  // Matrix view: the first `row_axes` axes form the row index.
  MatrixXc matrix(std::size_t row_axes) const;
  MatrixXc matrix() const { return matrix(rank() / 2); }

  DenseTensor reshaped(Shape shape) const;
  DenseTensor permuted(const std::vector<std::size_t>& perm) const;
  DenseTensor conj() const;
  DenseTensor adjoint() const;  // matrix adjoint for rank-2 tensors

  double norm() const;
  double max_abs() const;
  bool all_finite() const;

  DenseTensor& operator*=(cplx s);
  DenseTensor& operator+=(const DenseTensor& o);
  DenseTensor& operator-=(const DenseTensor& o);

 private:
  Shape shape_;
  std::vector<cplx> data_;
};

DenseTensor operator*(cplx s, DenseTensor t);
DenseTensor operator+(DenseTensor a, const DenseTensor& b);
DenseTensor operator-(DenseTensor a, const DenseTensor& b);

std::size_t shape_product(const Shape& s);

// Sum over the paired axes. Result axes: unpaired axes of a, then unpaired axes of b.
DenseTensor contract(const DenseTensor& a, const DenseTensor& b,
                     const std::vector<std::pair<std::size_t, std::size_t>>& pairs);

// Kronecker product of matrices.
DenseTensor kron(const DenseTensor& a, const DenseTensor& b);
DenseTensor matmul(const DenseTensor& a, const DenseTensor& b);

struct SvdResult {
  DenseTensor left_isometry;           // rows x k
  std::vector<double> singular_values; // descending
  DenseTensor right_isometry;          // k x cols, rows orthonormal (V^dagger)
  double discarded_weight = 0.0;
};

// Treats the first `row_axes` axes as the row index.
SvdResult truncated_svd(const DenseTensor& m, std::size_t row_axes, double cutoff,
                        std::size_t max_rank = 0);

// Plain matrix SVD with the phase convention applied; no truncation.
SvdResult svd(const MatrixXc& m);

DenseTensor polar_unitary(const DenseTensor& m, double tol = 1e-14);
MatrixXc polar_unitary(const MatrixXc& m, double tol = 1e-14);

DenseTensor hermitian_exp(const DenseTensor& h, double scale);
MatrixXc hermitian_exp(const MatrixXc& h, double scale);

double unitarity_defect(const MatrixXc& u);

}  // namespace bwc
