#include "bwc/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bwc/errors.hpp"

namespace bwc {

std::size_t shape_product(const Shape& s) {
  std::size_t p = 1;
  for (auto e : s) p *= e;
  return p;
}

DenseTensor::DenseTensor(Shape shape) : shape_(std::move(shape)), data_(shape_product(shape_)) {
  for (auto e : shape_)
    if (e == 0) throw DimensionError("tensor extents must be positive");
}

DenseTensor::DenseTensor(Shape shape, std::vector<cplx> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  for (auto e : shape_)
    if (e == 0) throw DimensionError("tensor extents must be positive");
  if (data_.size() != shape_product(shape_)) throw DimensionError("data size does not match shape");
}

DenseTensor DenseTensor::scalar(cplx value) { return DenseTensor({}, {value}); }

DenseTensor DenseTensor::identity(std::size_t n) {
  DenseTensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t.data_[i * n + i] = 1.0;
  return t;
}

DenseTensor DenseTensor::from_matrix(const MatrixXc& m) {
  DenseTensor t({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
  Eigen::Map<RowMatrixXc>(t.raw(), m.rows(), m.cols()) = m;
  return t;
}

std::size_t DenseTensor::flat_index(const std::vector<std::size_t>& idx) const {
  if (idx.size() != shape_.size()) throw DimensionError("index rank mismatch");
  std::size_t f = 0;
  for (std::size_t a = 0; a < idx.size(); ++a) {
    if (idx[a] >= shape_[a]) throw DimensionError("index out of range");
    f = f * shape_[a] + idx[a];
  }
  return f;
}

cplx& DenseTensor::at(std::initializer_list<std::size_t> idx) {
  return data_[flat_index(std::vector<std::size_t>(idx))];
}

const cplx& DenseTensor::at(std::initializer_list<std::size_t> idx) const {
  return data_[flat_index(std::vector<std::size_t>(idx))];
}

MatrixXc DenseTensor::matrix(std::size_t row_axes) const {
  if (row_axes > rank()) throw ArgumentError("row axis count exceeds rank");
  std::size_t rows = 1;
  for (std::size_t a = 0; a < row_axes; ++a) rows *= shape_[a];
  std::size_t cols = size() / rows;
  return Eigen::Map<const RowMatrixXc>(raw(), rows, cols);
}

DenseTensor DenseTensor::reshaped(Shape shape) const {
  if (shape_product(shape) != size()) throw DimensionError("reshape changes the entry count");
  return DenseTensor(std::move(shape), data_);
}

DenseTensor DenseTensor::permuted(const std::vector<std::size_t>& perm) const {
  const std::size_t r = rank();
  if (perm.size() != r) throw ArgumentError("permutation rank mismatch");
  std::vector<bool> seen(r, false);
  for (auto p : perm) {
    if (p >= r || seen[p]) throw ArgumentError("invalid permutation");
    seen[p] = true;
  }
  bool trivial = true;
  for (std::size_t a = 0; a < r; ++a) trivial = trivial && perm[a] == a;
  if (trivial) return *this;

  Shape ns(r);
  for (std::size_t a = 0; a < r; ++a) ns[a] = shape_[perm[a]];
  std::vector<std::size_t> src_stride(r);
  std::size_t s = 1;
  for (std::size_t a = r; a-- > 0;) {
    src_stride[a] = s;
    s *= shape_[a];
  }
  // Stride in the source for each destination axis.
  std::vector<std::size_t> st(r);
  for (std::size_t a = 0; a < r; ++a) st[a] = src_stride[perm[a]];

  DenseTensor out(ns);
  const std::size_t n = size();
  if (n == 0) return out;
  const std::size_t inner = ns[r - 1];
  const std::size_t inner_stride = st[r - 1];
  std::vector<std::size_t> idx(r, 0);
  std::size_t src = 0;
  cplx* dst = out.raw();
  const cplx* in = raw();
  for (std::size_t done = 0; done < n; done += inner) {
    for (std::size_t k = 0; k < inner; ++k) dst[done + k] = in[src + k * inner_stride];
    for (std::size_t a = r - 1; a-- > 0;) {
      if (++idx[a] < ns[a]) {
        src += st[a];
        break;
      }
      src -= st[a] * (ns[a] - 1);
      idx[a] = 0;
    }
  }
  return out;
}

DenseTensor DenseTensor::conj() const {
  DenseTensor out(*this);
  for (auto& v : out.data_) v = std::conj(v);
  return out;
}

DenseTensor DenseTensor::adjoint() const {
  if (rank() != 2) throw ArgumentError("adjoint requires a matrix");
  return permuted({1, 0}).conj();
}

double DenseTensor::norm() const {
  double s = 0.0;
  for (const auto& v : data_) s += std::norm(v);
  return std::sqrt(s);
}

double DenseTensor::max_abs() const {
  double m = 0.0;
  for (const auto& v : data_) m = std::max(m, std::abs(v));
  return m;
}

bool DenseTensor::all_finite() const {
  for (const auto& v : data_)
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
  return true;
}

DenseTensor& DenseTensor::operator*=(cplx s) {
  for (auto& v : data_) v *= s;
  return *this;
}

DenseTensor& DenseTensor::operator+=(const DenseTensor& o) {
  if (o.shape_ != shape_) throw DimensionError("shape mismatch in addition");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

DenseTensor& DenseTensor::operator-=(const DenseTensor& o) {
  if (o.shape_ != shape_) throw DimensionError("shape mismatch in subtraction");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
  return *this;
}

DenseTensor operator*(cplx s, DenseTensor t) { return t *= s; }
DenseTensor operator+(DenseTensor a, const DenseTensor& b) { return a += b; }
DenseTensor operator-(DenseTensor a, const DenseTensor& b) { return a -= b; }

DenseTensor contract(const DenseTensor& a, const DenseTensor& b,
                     const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
  std::vector<bool> used_a(a.rank(), false), used_b(b.rank(), false);
  for (auto [ia, ib] : pairs) {
    if (ia >= a.rank() || ib >= b.rank()) throw ArgumentError("contraction axis out of range");
    if (used_a[ia] || used_b[ib]) throw ArgumentError("repeated contraction axis");
    used_a[ia] = used_b[ib] = true;
    if (a.extent(ia) != b.extent(ib)) throw DimensionError("paired extents differ");
  }
  std::vector<std::size_t> perm_a, perm_b;
  Shape out_shape;
  std::size_t m = 1, n = 1, k = 1;
  for (std::size_t i = 0; i < a.rank(); ++i)
    if (!used_a[i]) {
      perm_a.push_back(i);
      out_shape.push_back(a.extent(i));
      m *= a.extent(i);
    }
  for (auto [ia, ib] : pairs) {
    perm_a.push_back(ia);
    perm_b.push_back(ib);
    k *= a.extent(ia);
  }
  for (std::size_t i = 0; i < b.rank(); ++i)
    if (!used_b[i]) {
      perm_b.push_back(i);
      out_shape.push_back(b.extent(i));
      n *= b.extent(i);
    }
  DenseTensor pa = a.permuted(perm_a);
  DenseTensor pb = b.permuted(perm_b);
  DenseTensor out(out_shape);
  Eigen::Map<const RowMatrixXc> ma(pa.raw(), m, k);
  Eigen::Map<const RowMatrixXc> mb(pb.raw(), k, n);
  Eigen::Map<RowMatrixXc> mo(out.raw(), m, n);
  mo.noalias() = ma * mb;
  return out;
}

DenseTensor kron(const DenseTensor& a, const DenseTensor& b) {
  if (a.rank() != 2 || b.rank() != 2) throw ArgumentError("kron requires matrices");
  const std::size_t ar = a.extent(0), ac = a.extent(1), br = b.extent(0), bc = b.extent(1);
  DenseTensor out({ar * br, ac * bc});
  for (std::size_t i = 0; i < ar; ++i)
    for (std::size_t j = 0; j < ac; ++j) {
      const cplx av = a[i * ac + j];
      for (std::size_t k = 0; k < br; ++k)
        for (std::size_t l = 0; l < bc; ++l)
          out[(i * br + k) * (ac * bc) + j * bc + l] = av * b[k * bc + l];
    }
  return out;
}

DenseTensor matmul(const DenseTensor& a, const DenseTensor& b) { return contract(a, b, {{1, 0}}); }

namespace {

void fix_phases(MatrixXc& u, MatrixXc& v) {
  for (Eigen::Index k = 0; k < u.cols(); ++k) {
    Eigen::Index best = 0;
    double mag = -1.0;
    for (Eigen::Index i = 0; i < u.rows(); ++i) {
      double a = std::abs(u(i, k));
      if (a > mag * (1.0 + 1e-12) + 1e-300) {
        mag = a;
        best = i;
      }
    }
    if (mag <= 0.0) continue;
    cplx ph = std::conj(u(best, k)) / std::abs(u(best, k));
    u.col(k) *= ph;
    v.col(k) *= ph;
  }
}

}  // namespace

SvdResult svd(const MatrixXc& m) {
  if (m.rows() == 0 || m.cols() == 0) throw ArgumentError("empty matrix");
  MatrixXc u, v;
  Eigen::VectorXd s;
  if (std::min(m.rows(), m.cols()) <= 16) {
    Eigen::JacobiSVD<MatrixXc> solver(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    u = solver.matrixU();
    v = solver.matrixV();
    s = solver.singularValues();
  } else if (2 * m.rows() < 3 * m.cols() && 2 * m.cols() < 3 * m.rows()) {
    Eigen::BDCSVD<MatrixXc> solver(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    u = solver.matrixU();
    v = solver.matrixV();
    s = solver.singularValues();
  } else {
    // Strongly rectangular: reduce to the square triangular factor first.
    const bool wide = m.cols() > m.rows();
    const Eigen::Index k = std::min(m.rows(), m.cols());
    Eigen::HouseholderQR<MatrixXc> qr(wide ? MatrixXc(m.adjoint()) : m);
    MatrixXc q = qr.householderQ() * MatrixXc::Identity(qr.rows(), k);
    MatrixXc r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    Eigen::BDCSVD<MatrixXc> solver(wide ? MatrixXc(r.adjoint()) : r, Eigen::ComputeThinU | Eigen::ComputeThinV);
    s = solver.singularValues();
    if (wide) {
      u = solver.matrixU();
      v = q * solver.matrixV();
    } else {
      u = q * solver.matrixU();
      v = solver.matrixV();
    }
  }
  fix_phases(u, v);
  SvdResult r;
  r.left_isometry = DenseTensor::from_matrix(u);
  r.right_isometry = DenseTensor::from_matrix(v.adjoint());
  r.singular_values.assign(s.data(), s.data() + s.size());
  r.discarded_weight = 0.0;
  return r;
}

SvdResult truncated_svd(const DenseTensor& t, std::size_t row_axes, double cutoff,
                        std::size_t max_rank) {
  if (cutoff < 0.0) throw ArgumentError("cutoff must be non-negative");
  if (t.size() == 0) throw ArgumentError("empty matrix");
  MatrixXc m = t.matrix(row_axes);
  SvdResult full = svd(m);
  const auto& s = full.singular_values;
  const std::size_t r = s.size();
  double total = 0.0;
  for (double x : s) total += x * x;
  // tail[k] = sum of squares of s[k..]
  std::vector<double> tail(r + 1, 0.0);
  for (std::size_t k = r; k-- > 0;) tail[k] = tail[k + 1] + s[k] * s[k];
  std::size_t keep = r;
  if (total > 0.0) {
    keep = 1;
    while (keep < r && tail[keep] / total > cutoff) ++keep;
  } else {
    keep = 1;
  }
  if (max_rank > 0) keep = std::min(keep, max_rank);
  SvdResult out;
  MatrixXc u = full.left_isometry.matrix(1).leftCols(keep);
  MatrixXc vh = full.right_isometry.matrix(1).topRows(keep);
  out.left_isometry = DenseTensor::from_matrix(u);
  out.right_isometry = DenseTensor::from_matrix(vh);
  out.singular_values.assign(s.begin(), s.begin() + keep);
  out.discarded_weight = total > 0.0 ? std::clamp(tail[keep] / total, 0.0, 1.0) : 0.0;
  return out;
}

MatrixXc polar_unitary(const MatrixXc& m, double tol) {
  if (m.rows() != m.cols()) throw ArgumentError("polar decomposition requires a square matrix");
  Eigen::JacobiSVD<MatrixXc> solver(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& s = solver.singularValues();
  const double smax = s.size() ? s(0) : 0.0;
  const double smin = s.size() ? s(s.size() - 1) : 0.0;
  if (!(smin > tol * std::max(1.0, smax))) throw DegeneratePolarError(smin);
  return solver.matrixU() * solver.matrixV().adjoint();
}

DenseTensor polar_unitary(const DenseTensor& m, double tol) {
  return DenseTensor::from_matrix(polar_unitary(m.matrix(), tol));
}

MatrixXc hermitian_exp(const MatrixXc& h, double scale) {
  if (h.rows() != h.cols()) throw ArgumentError("hermitian_exp requires a square matrix");
  if ((h - h.adjoint()).cwiseAbs().maxCoeff() > 1e-12) throw ArgumentError("matrix is not Hermitian");
  if (scale == 0.0 || h.cwiseAbs().maxCoeff() == 0.0) return MatrixXc::Identity(h.rows(), h.cols());
  MatrixXc hs = 0.5 * (h + h.adjoint());
  Eigen::SelfAdjointEigenSolver<MatrixXc> es(hs);
  const auto& w = es.eigenvalues();
  Eigen::VectorXcd ph(w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) ph(i) = std::exp(cplx(0.0, -scale * w(i)));
  return es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
}

DenseTensor hermitian_exp(const DenseTensor& h, double scale) {
  return DenseTensor::from_matrix(hermitian_exp(h.matrix(), scale));
}

double unitarity_defect(const MatrixXc& u) {
  return (u.adjoint() * u - MatrixXc::Identity(u.cols(), u.cols())).cwiseAbs().maxCoeff();
}

}  // namespace bwc
