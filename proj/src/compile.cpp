#include "bwc/compile.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>

#include "bwc/errors.hpp"

namespace bwc {

namespace {

using Matrix4c = Eigen::Matrix<cplx, 4, 4>;
using Matrix4d = Eigen::Matrix4d;
using Vector4c = Eigen::Matrix<cplx, 4, 1>;
constexpr double kPi = std::numbers::pi;

MatrixXc rz_matrix(double t) {
  MatrixXc m = MatrixXc::Zero(2, 2);
  m(0, 0) = std::exp(cplx(0.0, -t / 2));
  m(1, 1) = std::exp(cplx(0.0, t / 2));
  return m;
}

MatrixXc ry_matrix(double t) {
  MatrixXc m(2, 2);
  m << std::cos(t / 2), -std::sin(t / 2), std::sin(t / 2), std::cos(t / 2);
  return m;
}

const Matrix4c& magic() {
  static const Matrix4c b = [] {
    const cplx i(0.0, 1.0);
    Matrix4c m;
    m << 1, 0, 0, i, 0, i, 1, 0, 0, i, -1, 0, 1, 0, 0, -i;
    return Matrix4c(m / std::sqrt(2.0));
  }();
  return b;
}

// U = phase * B K diag(r) O^T B^dagger with K, O in SO(4) and prod(r) = 1.
struct Kak {
  cplx phase;
  Matrix4d k, o;
  Vector4c r;
};

Kak kak(const Matrix4c& u) {
  Kak out;
  out.phase = std::pow(u.determinant(), 0.25);
  Matrix4c us = u / out.phase;
  Matrix4c ub = magic().adjoint() * us * magic();
  Matrix4c m = ub.transpose() * ub;
  // Re M and Im M commute; a generic combination has the common eigenbasis.
  bool ok = false;
  Matrix4c dm;
  for (double w : {0.5772156649015329, 1.4142135623730951, 2.718281828459045, 0.3183098861837907}) {
    Eigen::SelfAdjointEigenSolver<Matrix4d> es(m.real() + w * m.imag());
    out.o = es.eigenvectors();
    dm = out.o.transpose().cast<cplx>() * m * out.o.cast<cplx>();
    double off = 0.0;
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        if (a != b) off = std::max(off, std::abs(dm(a, b)));
    if (off < 1e-9) {
      ok = true;
      break;
    }
  }
  if (!ok) throw NumericalError("two-qubit canonical decomposition failed");
  if (out.o.determinant() < 0) out.o.col(0) *= -1.0;
  for (int a = 0; a < 4; ++a) out.r(a) = std::sqrt(dm(a, a));
  Matrix4c kc = ub * out.o.cast<cplx>();
  for (int a = 0; a < 4; ++a) kc.col(a) /= out.r(a);
  if (out.r.prod().real() < 0) {
    out.r(0) = -out.r(0);
    kc.col(0) *= -1.0;
  }
  out.k = kc.real();
  return out;
}

struct LocalMatch {
  Matrix4c left, right;  // u ~ left * t * right
};

// Finds locals with u = phase * left * t * right when u and t are locally equivalent.
std::optional<LocalMatch> match_locally(const Matrix4c& u, const Matrix4c& t) {
  Kak ku = kak(u), kt = kak(t);
  const cplx ws[] = {1.0, cplx(0.0, 1.0), -1.0, cplx(0.0, -1.0)};
  std::array<int, 4> perm{0, 1, 2, 3}, best_perm{};
  std::array<double, 4> best_sign{};
  double best = 1e300;
  do {
    for (cplx w : ws) {
      double res = 0.0;
      std::array<double, 4> sgn{};
      for (int a = 0; a < 4; ++a) {
        cplx s = ku.r(a) / (w * kt.r(perm[a]));
        sgn[a] = s.real() >= 0 ? 1.0 : -1.0;
        res = std::max(res, std::abs(s - sgn[a]));
      }
      if (res < best) {
        best = res;
        best_perm = perm;
        best_sign = sgn;
      }
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  if (best > 1e-6) return std::nullopt;
  Matrix4d p = Matrix4d::Zero(), s = Matrix4d::Zero();
  for (int a = 0; a < 4; ++a) {
    p(a, best_perm[a]) = 1.0;
    s(a, a) = best_sign[a];
  }
  if (p.determinant() < 0) p.col(0) *= -1.0;
  Matrix4d q1 = ku.k * s * p * kt.k.transpose();
  Matrix4d q2 = kt.o * p.transpose() * ku.o.transpose();
  LocalMatch lm;
  lm.left = magic() * q1.cast<cplx>() * magic().adjoint();
  lm.right = magic() * q2.cast<cplx>() * magic().adjoint();
  return lm;
}

// Splits a product operator a (x) b, rows o1*2+o2.
std::pair<MatrixXc, MatrixXc> split_local(const Matrix4c& l) {
  // rearranged(i1*2+j1, i2*2+j2) = a(i1,j1) b(i2,j2)
  Matrix4c r;
  for (int i1 = 0; i1 < 2; ++i1)
    for (int i2 = 0; i2 < 2; ++i2)
      for (int j1 = 0; j1 < 2; ++j1)
        for (int j2 = 0; j2 < 2; ++j2) r(i1 * 2 + j1, i2 * 2 + j2) = l(i1 * 2 + i2, j1 * 2 + j2);
  Eigen::Index row, col;
  r.cwiseAbs().maxCoeff(&row, &col);
  MatrixXc a(2, 2), b(2, 2);
  for (int k = 0; k < 4; ++k) {
    a(k / 2, k % 2) = r(k, col);
    b(k / 2, k % 2) = r(row, k) / r(row, col);
  }
  return {a, b};
}

void append_local(GateList& g, const Matrix4c& l, int q0) {
  auto [a, b] = split_local(l);
  g.u(a, q0);
  g.u(b, q0 + 1);
}

GateList three_cnot_core(double t1, double t2, double t3) {
  GateList g;
  g.n_qubits = 2;
  g.cx(1, 0);
  g.u(0.0, t3, 0.0, 1);
  g.cx(0, 1);
  g.rz(t1, 0);
  g.u(0.0, t2, 0.0, 1);
  g.cx(1, 0);
  return g;
}

GateList two_cnot_core(double a, double b) {
  GateList g;
  g.n_qubits = 2;
  g.cx(0, 1);
  MatrixXc rx = zyz_matrix(-kPi / 2, a, kPi / 2);
  g.u(rx, 0);
  g.rz(b, 1);
  g.cx(0, 1);
  return g;
}

// Wraps the core between the locals that map it onto `u`.
std::optional<GateList> wrap_core(const Matrix4c& u, const GateList& core) {
  Matrix4c t = gatelist_dense(core);
  auto lm = match_locally(u, t);
  if (!lm) return std::nullopt;
  GateList g;
  g.n_qubits = 2;
  append_local(g, lm->right, 0);
  g.append(core);
  append_local(g, lm->left, 0);
  if (phase_distance(gatelist_dense(g), u) > 1e-9) return std::nullopt;
  return g;
}

double wrap_angle(double a) { return std::remainder(a, 2 * kPi); }

}  // namespace

Connectivity parse_connectivity(const std::string& s) {
  if (s == "linear") return Connectivity::Linear;
  if (s == "next_nearest" || s == "nnn") return Connectivity::NextNearest;
  throw ArgumentError("unknown connectivity '" + s + "'");
}

void GateList::cx(int control, int target_q) {
  GateOp op;
  op.kind = OpKind::CX;
  op.q = control;
  op.target = target_q;
  ops.push_back(op);
}

void GateList::rz(double angle, int q) {
  GateOp op;
  op.kind = OpKind::RZ;
  op.q = q;
  op.angles[0] = angle;
  ops.push_back(op);
}

void GateList::h(int q) {
  GateOp op;
  op.kind = OpKind::H;
  op.q = q;
  ops.push_back(op);
}

void GateList::x(int q) {
  GateOp op;
  op.kind = OpKind::X;
  op.q = q;
  ops.push_back(op);
}

void GateList::u(double a, double b, double c, int q) {
  GateOp op;
  op.kind = OpKind::U;
  op.q = q;
  op.angles = {a, b, c};
  ops.push_back(op);
}

void GateList::u(const MatrixXc& m, int q) {
  auto e = zyz_angles(m);
  u(e[0], e[1], e[2], q);
}

void GateList::append(const GateList& other, int offset) {
  for (GateOp op : other.ops) {
    op.q += offset;
    if (op.kind == OpKind::CX) op.target += offset;
    op.layer = 0;
    ops.push_back(op);
  }
}

int GateList::annotate_layers() {
  std::vector<int> last(std::max(n_qubits, 0), 0);
  int depth = 0;
  for (auto& op : ops) {
    if (op.kind != OpKind::CX) {
      op.layer = 0;
      continue;
    }
    op.layer = std::max(last.at(op.q), last.at(op.target)) + 1;
    last[op.q] = last[op.target] = op.layer;
    depth = std::max(depth, op.layer);
  }
  return depth;
}

int GateList::cnot_count() const {
  return static_cast<int>(std::count_if(ops.begin(), ops.end(), [](const GateOp& o) { return o.kind == OpKind::CX; }));
}

int GateList::cnot_layer_count() const {
  int d = 0;
  for (const auto& op : ops) d = std::max(d, op.layer);
  return d;
}

void GateList::validate() const {
  for (const auto& op : ops) {
    if (op.q < 0 || op.q >= n_qubits) throw ArgumentError("qubit index out of range");
    if (op.kind == OpKind::CX) {
      if (op.target < 0 || op.target >= n_qubits) throw ArgumentError("CX target out of range");
      if (op.target == op.q) throw ArgumentError("CX control equals target");
    }
    for (double a : op.angles)
      if (!std::isfinite(a)) throw ArgumentError("non-finite angle");
  }
}

std::array<double, 3> zyz_angles(const MatrixXc& m) {
  if (m.rows() != 2 || m.cols() != 2) throw DimensionError("single-qubit gate must be 2x2");
  MatrixXc v = m / std::sqrt(m.determinant());
  const double c0 = std::abs(v(0, 0)), s0 = std::abs(v(1, 0));
  const double b = 2.0 * std::atan2(s0, c0);
  double sum = 0.0, diff = 0.0;  // a + c, a - c
  if (c0 > 1e-14) sum = 2.0 * std::arg(v(1, 1));
  if (s0 > 1e-14) diff = 2.0 * std::arg(v(1, 0));
  if (c0 <= 1e-14) sum = diff;  // only a - c is defined; pick c = 0
  if (s0 <= 1e-14) diff = sum;  // only a + c is defined; pick c = 0
  return {wrap_angle((sum + diff) / 2), b, wrap_angle((sum - diff) / 2)};
}

MatrixXc zyz_matrix(double a, double b, double c) { return rz_matrix(a) * ry_matrix(b) * rz_matrix(c); }

MatrixXc gatelist_dense(const GateList& g) {
  if (g.n_qubits > 10) throw CapacityError("dense gate list limited to 10 qubits");
  g.validate();
  const int n = g.n_qubits;
  const Eigen::Index d = Eigen::Index{1} << n;
  MatrixXc u = MatrixXc::Identity(d, d);
  const double r2 = 1.0 / std::sqrt(2.0);
  for (const auto& op : g.ops) {
    const Eigen::Index bit = Eigen::Index{1} << (n - 1 - op.q);
    if (op.kind == OpKind::CX) {
      const Eigen::Index tb = Eigen::Index{1} << (n - 1 - op.target);
      for (Eigen::Index s = 0; s < d; ++s)
        if ((s & bit) && !(s & tb)) u.row(s).swap(u.row(s | tb));
      continue;
    }
    MatrixXc m(2, 2);
    switch (op.kind) {
      case OpKind::RZ: m = rz_matrix(op.angles[0]); break;
      case OpKind::H: m << r2, r2, r2, -r2; break;
      case OpKind::X: m << 0, 1, 1, 0; break;
      case OpKind::U: m = zyz_matrix(op.angles[0], op.angles[1], op.angles[2]); break;
      default: break;
    }
    for (Eigen::Index s = 0; s < d; ++s) {
      if (s & bit) continue;
      Eigen::RowVectorXcd r0 = u.row(s), r1 = u.row(s | bit);
      u.row(s) = m(0, 0) * r0 + m(0, 1) * r1;
      u.row(s | bit) = m(1, 0) * r0 + m(1, 1) * r1;
    }
  }
  return u;
}

double phase_distance(const MatrixXc& a, const MatrixXc& b) {
  cplx ov = (a.adjoint() * b).trace();
  cplx ph = std::abs(ov) > 0 ? ov / std::abs(ov) : cplx(1.0);
  return (a * ph - b).cwiseAbs().maxCoeff();
}

GateList template_rzz(double theta) {
  GateList g;
  g.n_qubits = 2;
  g.cx(0, 1);
  g.rz(theta, 1);
  g.cx(0, 1);
  g.annotate_layers();
  return g;
}

GateList template_rzxz(double theta) {
  // R_zxz = (1 (x) H (x) 1) R_zzz (1 (x) H (x) 1), R_zzz from a parity ladder.
  GateList g;
  g.n_qubits = 3;
  g.h(1);
  g.cx(0, 1);
  g.cx(1, 2);
  g.rz(theta, 2);
  g.cx(1, 2);
  g.cx(0, 1);
  g.h(1);
  g.annotate_layers();
  return g;
}

GateList template_long_cx() {
  GateList g;
  g.n_qubits = 3;
  g.cx(0, 1);
  g.cx(1, 2);
  g.cx(0, 1);
  g.cx(1, 2);
  g.annotate_layers();
  return g;
}

namespace {

// Rz(phi) on `t` when `c` is |1>: two CNOTs and two Rz(+-phi/2).
void controlled_rz(GateList& g, double phi, int c, int t) {
  g.rz(phi / 2, t);
  g.cx(c, t);
  g.rz(-phi / 2, t);
  g.cx(c, t);
}

void cx_0_to_2(GateList& g, Connectivity conn, int base) {
  if (conn == Connectivity::NextNearest) {
    g.cx(base, base + 2);
  } else {
    g.append(template_long_cx(), base);
  }
}

}  // namespace

GateList template_rpxp(double theta, Connectivity conn) {
  // P (x) X (x) P = H_1 (P (x) Z (x) P) H_1 with P = |1><1|; the doubly controlled
  // Rz(theta) is built from three controlled Rz(theta/2) and two CNOTs between
  // the outer qubits.
  GateList g;
  g.n_qubits = 3;
  g.h(1);
  controlled_rz(g, theta / 2, 2, 1);
  cx_0_to_2(g, conn, 0);
  controlled_rz(g, -theta / 2, 2, 1);
  cx_0_to_2(g, conn, 0);
  controlled_rz(g, theta / 2, 0, 1);
  g.h(1);
  g.annotate_layers();
  return g;
}

GateList template_rxp(double theta, bool target_first) {
  GateList g;
  g.n_qubits = 2;
  const int t = target_first ? 0 : 1, c = 1 - t;
  g.h(t);
  controlled_rz(g, theta, c, t);
  g.h(t);
  g.annotate_layers();
  return g;
}

GateList decompose_two_qubit(const MatrixXc& gate, bool force_three) {
  if (gate.rows() != 4 || gate.cols() != 4) throw DimensionError("two-qubit gate must be 4x4");
  if (!gate.allFinite() || unitarity_defect(gate) > 1e-10) throw ArgumentError("gate is not unitary");
  Matrix4c u = gate;
  Kak k = kak(u);
  Vector4c d = k.r.cwiseProduct(k.r);

  if (!force_three) {
    double spread = 0.0;
    for (int a = 1; a < 4; ++a) spread = std::max(spread, std::abs(d(a) - d(0)));
    // an improper orthogonal matrix times a phase (e.g. SWAP) also has equal values
    if (spread < 1e-9 && std::abs(d(0) * d(0) - 1.0) < 1e-9) {
      GateList g;
      g.n_qubits = 2;
      append_local(g, u, 0);
      if (phase_distance(gatelist_dense(g), u) <= 1e-9) {
        g.annotate_layers();
        return g;
      }
    }
    if (std::abs(d.sum().imag()) < 1e-9) {
      // spectrum {e^{+-i alpha}, e^{+-i beta}}: pair conjugate eigenvalues
      std::array<double, 4> th;
      for (int a = 0; a < 4; ++a) th[a] = std::arg(d(a));
      const int pairings[3][4] = {{0, 1, 2, 3}, {0, 2, 1, 3}, {0, 3, 1, 2}};
      int bestp = 0;
      double bestr = 1e300;
      for (int p = 0; p < 3; ++p) {
        const auto* q = pairings[p];
        double r = std::abs(wrap_angle(th[q[0]] + th[q[1]])) + std::abs(wrap_angle(th[q[2]] + th[q[3]]));
        if (r < bestr) {
          bestr = r;
          bestp = p;
        }
      }
      const double al = std::abs(th[pairings[bestp][0]]), be = std::abs(th[pairings[bestp][2]]);
      for (auto [a, b] : {std::pair{(al + be) / 2, (be - al) / 2}, std::pair{(al + be) / 2 + kPi / 2, (be - al) / 2 + kPi / 2},
                          std::pair{(al + be) / 2, (be - al) / 2 + kPi}, std::pair{(al + be) / 2 + kPi, (be - al) / 2}}) {
        if (auto g = wrap_core(u, two_cnot_core(a, b))) {
          g->annotate_layers();
          return *g;
        }
      }
    }
  }

  // canonical coefficients from the magic-basis phases
  static const Eigen::Matrix4d pattern = [] {
    const cplx i(0.0, 1.0);
    Matrix4c xx, yy, zz;
    xx.setZero();
    yy.setZero();
    zz.setZero();
    xx(0, 3) = xx(1, 2) = xx(2, 1) = xx(3, 0) = 1.0;
    yy(0, 3) = yy(3, 0) = -1.0;
    yy(1, 2) = yy(2, 1) = 1.0;
    zz.diagonal() << 1.0, -1.0, -1.0, 1.0;
    Eigen::Matrix4d p;
    Matrix4c bx = magic().adjoint() * xx * magic(), by = magic().adjoint() * yy * magic(),
             bz = magic().adjoint() * zz * magic();
    for (int a = 0; a < 4; ++a) p.row(a) << bx(a, a).real(), by(a, a).real(), bz(a, a).real(), 1.0;
    (void)i;
    return p;
  }();
  Eigen::Vector4d ph;
  for (int a = 0; a < 4; ++a) ph(a) = std::arg(k.r(a));
  Eigen::Vector4d c = pattern.fullPivLu().solve(ph);
  if (auto g = wrap_core(u, three_cnot_core(kPi / 2 + 2 * c(0), kPi / 2 + 2 * c(1), kPi / 2 + 2 * c(2)))) {
    g->annotate_layers();
    return *g;
  }
  throw NumericalError("two-qubit synthesis failed to reconstruct");
}

GateList export_gatelist(const BrickwallCircuit& c, const ExportOptions& opt) {
  GateList g;
  g.n_qubits = c.n_sites;
  for (int m = 1; m <= c.depth; ++m)
    for (int k = 0; k < c.gates_in_layer(m); ++k) {
      const MatrixXc& gate = c.layers[m - 1][k];
      if (opt.elide_identities && phase_distance(gate, MatrixXc::Identity(4, 4)) < 1e-12) continue;
      g.append(decompose_two_qubit(gate, true), c.bond(m, k));
    }
  g.annotate_layers();
  return g;
}

GateList export_gatelist(const LayeredCircuit& c, const ExportOptions& opt) {
  GateList g;
  g.n_qubits = c.n_sites;
  for (const auto& layer : c.layers)
    for (const auto& gate : layer) {
      if (opt.elide_identities && phase_distance(gate.u, MatrixXc::Identity(gate.u.rows(), gate.u.cols())) < 1e-12)
        continue;
      if (gate.support.size() == 1) {
        g.u(gate.u, gate.support[0]);
      } else if (gate.support.size() == 2) {
        g.append(decompose_two_qubit(gate.u), gate.support[0]);
      } else {
        throw ArgumentError("generic export handles one- and two-site gates only");
      }
    }
  g.annotate_layers();
  return g;
}

namespace {

enum class TermKind { OneSite, ZZ, XP, PX, ZXZ, PXP, ZIZ, Other2, Other3 };

// Coefficient of `op` along `pattern` when op is proportional to it.
std::optional<double> proportional(const DenseTensor& op, const DenseTensor& pattern) {
  if (op.shape() != pattern.shape()) return std::nullopt;
  MatrixXc a = op.matrix(), p = pattern.matrix();
  cplx c = (p.adjoint() * a).trace() / (p.adjoint() * p).trace();
  if ((a - c * p).norm() > 1e-12 * std::max(1.0, a.norm()) || std::abs(c.imag()) > 1e-12) return std::nullopt;
  return c.real();
}

std::pair<TermKind, double> classify(const LocalTerm& t) {
  using namespace pauli;
  if (t.body() == 1) return {TermKind::OneSite, 0.0};
  if (t.body() == 2) {
    if (auto c = proportional(t.op, kron(Z(), Z()))) return {TermKind::ZZ, *c};
    if (auto c = proportional(t.op, kron(X(), P()))) return {TermKind::XP, *c};
    if (auto c = proportional(t.op, kron(P(), X()))) return {TermKind::PX, *c};
    return {TermKind::Other2, 0.0};
  }
  if (t.body() == 3) {
    if (auto c = proportional(t.op, kron(kron(Z(), X()), Z()))) return {TermKind::ZXZ, *c};
    if (auto c = proportional(t.op, kron(kron(P(), X()), P()))) return {TermKind::PXP, *c};
    if (auto c = proportional(t.op, kron(kron(Z(), I()), Z()))) return {TermKind::ZIZ, *c};
  }
  return {TermKind::Other3, 0.0};
}

bool skeleton_swap(int m, int bond) {
  if (m == 1) return bond % 4 == 2;
  if (m == 3) return bond % 2 == 0;
  if (m == 5) return bond % 4 == 0;
  return false;
}

MatrixXc swap_matrix() {
  MatrixXc s = MatrixXc::Zero(4, 4);
  s(0, 0) = s(1, 2) = s(2, 1) = s(3, 3) = 1.0;
  return s;
}

MatrixXc rzz_matrix(double theta) {
  MatrixXc m = MatrixXc::Zero(4, 4);
  const cplx a = std::exp(cplx(0.0, -theta / 2)), b = std::exp(cplx(0.0, theta / 2));
  m(0, 0) = a;
  m(1, 1) = b;
  m(2, 2) = b;
  m(3, 3) = a;
  return m;
}

// Applies exp(-i/2 sum theta_ij Z_i Z_j) over nearest and next-nearest pairs with a
// six-layer brickwall of SWAP and ZZ gates that ends in the original qubit order.
void append_diagonal_network(GateList& g, int n, std::map<std::pair<int, int>, double> angles) {
  std::vector<int> at(n);
  for (int j = 0; j < n; ++j) at[j] = j;
  for (int m = 1; m <= 6; ++m) {
    for (int b = BrickwallCircuit::offset(m); b + 1 < n; b += 2) {
      std::pair<int, int> key{std::min(at[b], at[b + 1]), std::max(at[b], at[b + 1])};
      auto it = angles.find(key);
      const bool swap = skeleton_swap(m, b);
      if (swap) {
        MatrixXc gate = swap_matrix();
        if (it != angles.end()) gate = gate * rzz_matrix(it->second);
        g.append(decompose_two_qubit(gate), b);
        std::swap(at[b], at[b + 1]);
      } else if (it != angles.end()) {
        g.append(template_rzz(it->second), b);
      }
      if (it != angles.end()) angles.erase(it);
    }
  }
  for (int j = 0; j < n; ++j)
    if (at[j] != j) throw NumericalError("SWAP network does not restore the qubit order");
  if (!angles.empty()) throw ArgumentError("SWAP network cannot reach every coupled pair");
}

}  // namespace

GateList export_trotter(const HamiltonianSpec& spec, double dt, int order, const ExportOptions& opt) {
  auto groups = commuting_groups(spec);
  auto steps = trotter_steps(groups.size(), dt, order);
  GateList g;
  g.n_qubits = spec.n_sites;

  bool has_nnn = false;
  for (const auto& t : spec.terms)
    if (classify(t).first == TermKind::ZIZ) has_nnn = true;
  auto diagonal_group = [&](const std::vector<LocalTerm>& grp) {
    for (const auto& t : grp) {
      auto k = classify(t).first;
      if (k != TermKind::ZZ && k != TermKind::ZIZ) return false;
    }
    return true;
  };

  std::map<std::pair<int, int>, double> pending;
  auto flush = [&] {
    if (!pending.empty()) append_diagonal_network(g, spec.n_sites, pending);
    pending.clear();
  };

  for (const auto& step : steps) {
    const auto& grp = groups[step.group];
    const double tau = step.time;
    if (has_nnn && diagonal_group(grp)) {
      for (const auto& t : grp) {
        auto [kind, c] = classify(t);
        pending[{t.support.front(), t.support.back()}] += 2 * c * tau;
      }
      continue;
    }
    flush();
    for (const auto& t : grp) {
      auto [kind, c] = classify(t);
      const int q = t.first();
      const double theta = 2 * c * tau;
      switch (kind) {
        case TermKind::OneSite: g.u(hermitian_exp(t.op.matrix(), tau), q); break;
        case TermKind::ZZ: g.append(template_rzz(theta), q); break;
        case TermKind::XP: g.append(template_rxp(theta, true), q); break;
        case TermKind::PX: g.append(template_rxp(theta, false), q); break;
        case TermKind::ZXZ: g.append(template_rzxz(theta), q); break;
        case TermKind::PXP: g.append(template_rpxp(theta, opt.connectivity), q); break;
        case TermKind::ZIZ:
        case TermKind::Other2:
          if (t.body() != 2) throw ArgumentError("no template for this three-site term");
          g.append(decompose_two_qubit(hermitian_exp(t.op.matrix(), tau)), q);
          break;
        case TermKind::Other3: throw ArgumentError("no template for this three-site term");
      }
    }
  }
  flush();
  g.annotate_layers();
  return g;
}

int cnot_layers_brickwall(int depth) {
  if (depth < 1) throw ArgumentError("depth must be positive");
  return 3 * depth;
}

int cnot_layers_trotter(Model model, int order, Connectivity conn, const ModelParams& params) {
  if (order != 1 && order != 2) throw ArgumentError("order must be 1 or 2");
  switch (model) {
    case Model::ClusterIsing: return order == 1 ? 16 : 28;
    case Model::Pxp:
      if (conn == Connectivity::Linear) return order == 1 ? 42 : 70;
      return order == 1 ? 24 : 40;
    case Model::Nnni: return params.gzz == 0.0 ? 13 : 15;
  }
  throw ArgumentError("unknown model");
}

std::string render_gatelist(const GateList& g) {
  std::ostringstream os;
  char buf[128];
  os << "QUBITS " << g.n_qubits << '\n';
  for (const auto& op : g.ops) {
    switch (op.kind) {
      case OpKind::CX: os << "CX " << op.q << ' ' << op.target << '\n'; break;
      case OpKind::H: os << "H " << op.q << '\n'; break;
      case OpKind::X: os << "X " << op.q << '\n'; break;
      case OpKind::RZ:
        std::snprintf(buf, sizeof buf, "RZ %.17g %d\n", op.angles[0], op.q);
        os << buf;
        break;
      case OpKind::U:
        std::snprintf(buf, sizeof buf, "U %.17g %.17g %.17g %d\n", op.angles[0], op.angles[1], op.angles[2], op.q);
        os << buf;
        break;
    }
  }
  return os.str();
}

GateList parse_gatelist(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  GateList g;
  bool header = false;
  int lineno = 0;
  auto number = [&](std::istringstream& ls) {
    std::string tok;
    if (!(ls >> tok)) throw ArgumentError("line " + std::to_string(lineno) + ": missing angle");
    char* end = nullptr;
    double v = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size()) throw ArgumentError("line " + std::to_string(lineno) + ": bad number");
    return v;
  };
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (!header) {
      if (word != "QUBITS" || !(ls >> g.n_qubits)) throw ArgumentError("gate list must start with QUBITS n");
      header = true;
      continue;
    }
    int a = 0, b = 0;
    if (word == "CX") {
      if (!(ls >> a >> b)) throw ArgumentError("line " + std::to_string(lineno) + ": CX needs two qubits");
      g.cx(a, b);
    } else if (word == "H" || word == "X") {
      if (!(ls >> a)) throw ArgumentError("line " + std::to_string(lineno) + ": missing qubit");
      word == "H" ? g.h(a) : g.x(a);
    } else if (word == "RZ") {
      double t = number(ls);
      if (!(ls >> a)) throw ArgumentError("line " + std::to_string(lineno) + ": missing qubit");
      g.rz(t, a);
    } else if (word == "U") {
      double x = number(ls), y = number(ls), z = number(ls);
      if (!(ls >> a)) throw ArgumentError("line " + std::to_string(lineno) + ": missing qubit");
      g.u(x, y, z, a);
    } else {
      throw ArgumentError("line " + std::to_string(lineno) + ": unknown op '" + word + "'");
    }
    std::string rest;
    if (ls >> rest) throw ArgumentError("line " + std::to_string(lineno) + ": trailing tokens");
  }
  if (!header) throw ArgumentError("empty gate list");
  g.validate();
  g.annotate_layers();
  return g;
}

}  // namespace bwc
