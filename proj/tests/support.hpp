#pragma once

#include <complex>
#include <random>

#include "bwc/tensor.hpp"

namespace testing {

using bwc::cplx;
using bwc::DenseTensor;
using bwc::MatrixXc;

inline MatrixXc random_matrix(std::mt19937_64& rng, int rows, int cols) {
  std::normal_distribution<double> nd;
  MatrixXc m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = cplx(nd(rng), nd(rng));
  return m;
}

inline DenseTensor random_tensor(std::mt19937_64& rng, bwc::Shape shape) {
  std::normal_distribution<double> nd;
  DenseTensor t(shape);
  for (auto& v : t.data()) v = cplx(nd(rng), nd(rng));
  return t;
}

inline MatrixXc haar_unitary(std::mt19937_64& rng, int d) {
  MatrixXc z = random_matrix(rng, d, d);
  Eigen::HouseholderQR<MatrixXc> qr(z);
  MatrixXc q = qr.householderQ();
  MatrixXc r = qr.matrixQR();
  for (int k = 0; k < d; ++k) q.col(k) *= r(k, k) / std::abs(r(k, k));
  return q;
}

inline MatrixXc random_hermitian(std::mt19937_64& rng, int d) {
  MatrixXc a = random_matrix(rng, d, d);
  return 0.5 * (a + a.adjoint());
}

// Distance between two unitaries after removing the best global phase.
inline double phase_distance(const MatrixXc& a, const MatrixXc& b) {
  cplx ov = (a.adjoint() * b).trace();
  cplx ph = std::abs(ov) > 0 ? ov / std::abs(ov) : cplx(1.0);
  return (a * ph - b).cwiseAbs().maxCoeff();
}

inline double op_norm(const MatrixXc& m) {
  Eigen::JacobiSVD<MatrixXc> s(m);
  return s.singularValues()(0);
}

}  // namespace testing
