#include "bwc/mpo.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "bwc/errors.hpp"

namespace bwc {

namespace {

// Singular values whose squared weight falls below this fraction are numerically zero.
constexpr double kRankFloor = 1e-28;

int log2_exact(std::size_t d) {
  int r = 0;
  while ((std::size_t{1} << r) < d) ++r;
  if ((std::size_t{1} << r) != d) throw DimensionError("dimension is not a power of two");
  return r;
}

}  // namespace

Mpo::Mpo(std::vector<DenseTensor> tensors) : tensors_(std::move(tensors)) { validate(); }

void Mpo::validate() const {
  if (tensors_.empty()) throw ArgumentError("MPO needs at least one site");
  for (std::size_t j = 0; j < tensors_.size(); ++j) {
    const auto& t = tensors_[j];
    if (t.rank() != 4 || t.extent(1) != 2 || t.extent(2) != 2)
      throw DimensionError("MPO site " + std::to_string(j) + " has the wrong shape");
    if (j > 0 && tensors_[j - 1].extent(3) != t.extent(0))
      throw DimensionError("bond mismatch between sites " + std::to_string(j - 1) + " and " + std::to_string(j));
  }
  if (tensors_.front().extent(0) != 1 || tensors_.back().extent(3) != 1)
    throw DimensionError("MPO boundary bonds must have extent 1");
}

std::vector<std::size_t> Mpo::bond_dims() const {
  std::vector<std::size_t> b;
  for (std::size_t j = 0; j + 1 < tensors_.size(); ++j) b.push_back(tensors_[j].extent(3));
  return b;
}

std::size_t Mpo::max_bond() const {
  std::size_t m = 1;
  for (auto b : bond_dims()) m = std::max(m, b);
  return m;
}

Mpo Mpo::adjoint() const {
  std::vector<DenseTensor> t;
  for (const auto& w : tensors_) t.push_back(w.permuted({0, 2, 1, 3}).conj());
  return Mpo(std::move(t));
}

DenseTensor Mpo::to_dense() const {
  if (n_sites() > 14) throw CapacityError("dense MPO contraction limited to 14 sites");
  // acc axes: (out, in, bond)
  DenseTensor acc = tensors_[0].reshaped({2, 2, tensors_[0].extent(3)});
  std::size_t dim = 2;
  for (std::size_t j = 1; j < n_sites(); ++j) {
    DenseTensor t = contract(acc, tensors_[j], {{2, 0}});  // (O, I, o, i, r)
    t = t.permuted({0, 2, 1, 3, 4});
    dim *= 2;
    acc = t.reshaped({dim, dim, tensors_[j].extent(3)});
  }
  return acc.reshaped({dim, dim});
}

Mpo identity_mpo(int n) {
  if (n < 1) throw ArgumentError("identity MPO needs at least one site");
  std::vector<DenseTensor> t(n, DenseTensor({1, 2, 2, 1}, {1.0, 0.0, 0.0, 1.0}));
  return Mpo(std::move(t));
}

Mpo mpo_from_dense(const DenseTensor& u, double cutoff) {
  if (u.rank() != 2 || u.extent(0) != u.extent(1)) throw DimensionError("expected a square matrix");
  const int n = log2_exact(u.extent(0));
  if (n > 12) throw CapacityError("dense-to-MPO conversion limited to 12 sites");
  if (n == 0) throw ArgumentError("empty chain");
  Shape s(2 * n, 2);
  std::vector<std::size_t> perm;
  for (int j = 0; j < n; ++j) {
    perm.push_back(j);
    perm.push_back(n + j);
  }
  DenseTensor rem = u.reshaped(s).permuted(perm);  // (o0 i0 o1 i1 ...)
  std::vector<DenseTensor> sites;
  std::size_t chi = 1;
  std::size_t rest = rem.size();
  for (int j = 0; j + 1 < n; ++j) {
    rest /= 4;
    DenseTensor m = rem.reshaped({chi * 4, rest});
    SvdResult r = truncated_svd(m, 1, std::max(cutoff, kRankFloor));
    const std::size_t k = r.singular_values.size();
    sites.push_back(r.left_isometry.reshaped({chi, 2, 2, k}));
    DenseTensor sv = r.right_isometry;
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = 0; b < rest; ++b) sv[a * rest + b] *= r.singular_values[a];
    rem = sv;
    chi = k;
  }
  sites.push_back(rem.reshaped({chi, 2, 2, 1}));
  return Mpo(std::move(sites));
}

MpoEvolver::MpoEvolver(Mpo mpo, double cutoff, std::size_t max_bond)
    : mpo_(std::move(mpo)), cutoff_(cutoff), max_bond_(max_bond) {
  if (cutoff < 0) throw ArgumentError("cutoff must be non-negative");
  center_ = static_cast<int>(mpo_.n_sites()) - 1;
  move_center(0);
}

void MpoEvolver::move_center(int j) {
  const int n = static_cast<int>(mpo_.n_sites());
  if (j < 0 || j >= n) throw ArgumentError("center out of range");
  while (center_ < j) {
    DenseTensor& w = mpo_.site(center_);
    const std::size_t l = w.extent(0), r = w.extent(3);
    MatrixXc m = w.matrix(3);
    Eigen::HouseholderQR<MatrixXc> qr(m);
    const Eigen::Index k = std::min<Eigen::Index>(m.rows(), m.cols());
    MatrixXc q = qr.householderQ() * MatrixXc::Identity(m.rows(), k);
    MatrixXc rr = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    w = DenseTensor::from_matrix(q).reshaped({l, 2, 2, static_cast<std::size_t>(k)});
    DenseTensor& next = mpo_.site(center_ + 1);
    next = contract(DenseTensor::from_matrix(rr), next, {{1, 0}});
    (void)r;
    ++center_;
  }
  while (center_ > j) {
    DenseTensor& w = mpo_.site(center_);
    const std::size_t l = w.extent(0), r = w.extent(3);
    MatrixXc m = w.matrix(1).adjoint();  // (o i r) x l
    Eigen::HouseholderQR<MatrixXc> qr(m);
    const Eigen::Index k = std::min<Eigen::Index>(m.rows(), m.cols());
    MatrixXc q = qr.householderQ() * MatrixXc::Identity(m.rows(), k);
    MatrixXc rr = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    w = DenseTensor::from_matrix(q.adjoint()).reshaped({static_cast<std::size_t>(k), 2, 2, r});
    DenseTensor& prev = mpo_.site(center_ - 1);
    prev = contract(prev, DenseTensor::from_matrix(rr.adjoint()), {{3, 0}});
    (void)l;
    --center_;
  }
}

void MpoEvolver::apply(const MatrixXc& gate, int first, GateSide side, bool center_right) {
  const int n = static_cast<int>(mpo_.n_sites());
  if (gate.rows() != gate.cols()) throw DimensionError("gate must be square");
  const int r = log2_exact(static_cast<std::size_t>(gate.rows()));
  if (first < 0 || first + r > n || r < 1) throw ArgumentError("gate support out of range");
  if (center_ < first) move_center(first);
  if (center_ > first + r - 1) move_center(first + r - 1);

  DenseTensor theta = mpo_.site(first);
  for (int k = 1; k < r; ++k) theta = contract(theta, mpo_.site(first + k), {{theta.rank() - 1, 0}});
  // theta axes: l, o1, i1, ..., or, ir, right
  Shape gs(2 * r, 2);
  DenseTensor g = DenseTensor::from_matrix(gate).reshaped(gs);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<std::size_t> perm;
  if (side == GateSide::Left) {
    // sum over theta's out legs against the gate's input legs
    for (int k = 0; k < r; ++k) pairs.emplace_back(r + k, 1 + 2 * k);
    DenseTensor t = contract(g, theta, pairs);  // (o'1..o'r, l, i1..ir, right)
    perm.push_back(r);
    for (int k = 0; k < r; ++k) {
      perm.push_back(k);
      perm.push_back(r + 1 + k);
    }
    perm.push_back(2 * r + 1);
    theta = t.permuted(perm);
  } else {
    for (int k = 0; k < r; ++k) pairs.emplace_back(2 + 2 * k, k);
    DenseTensor t = contract(theta, g, pairs);  // (l, o1..or, right, i'1..i'r)
    perm.push_back(0);
    for (int k = 0; k < r; ++k) {
      perm.push_back(1 + k);
      perm.push_back(r + 2 + k);
    }
    perm.push_back(r + 1);
    theta = t.permuted(perm);
  }
  split(std::move(theta), first, r, center_right);
}

void MpoEvolver::split(DenseTensor theta, int first, int r, bool center_right) {
  if (r == 1) {
    mpo_.site(first) = std::move(theta);
    center_ = first;
    return;
  }
  const double cut = std::max(cutoff_, kRankFloor);
  auto check = [&](std::size_t k, int link) {
    if (max_bond_ > 0 && k > max_bond_)
      throw CapacityError("bond between sites " + std::to_string(link) + " and " + std::to_string(link + 1) +
                          " reached " + std::to_string(k) + " > max_bond " + std::to_string(max_bond_));
  };
  if (center_right) {
    std::size_t chi = theta.extent(0);
    std::size_t rest = theta.size() / (chi * 4);
    DenseTensor rem = std::move(theta);
    for (int k = 0; k + 1 < r; ++k) {
      DenseTensor m = rem.reshaped({chi * 4, rest});
      SvdResult s = truncated_svd(m, 1, cut);
      const std::size_t kk = s.singular_values.size();
      check(kk, first + k);
      discarded_ += s.discarded_weight;
      mpo_.site(first + k) = s.left_isometry.reshaped({chi, 2, 2, kk});
      DenseTensor sv = s.right_isometry;
      for (std::size_t a = 0; a < kk; ++a)
        for (std::size_t b = 0; b < rest; ++b) sv[a * rest + b] *= s.singular_values[a];
      rem = std::move(sv);
      chi = kk;
      rest /= 4;
    }
    mpo_.site(first + r - 1) = rem.reshaped({chi, 2, 2, rem.size() / (chi * 4)});
    center_ = first + r - 1;
  } else {
    const std::size_t right = theta.extent(theta.rank() - 1);
    std::size_t chi = right;
    std::size_t rest = theta.size() / (chi * 4);
    DenseTensor rem = std::move(theta);
    for (int k = r - 1; k > 0; --k) {
      DenseTensor m = rem.reshaped({rest, 4 * chi});
      SvdResult s = truncated_svd(m, 1, cut);
      const std::size_t kk = s.singular_values.size();
      check(kk, first + k - 1);
      discarded_ += s.discarded_weight;
      mpo_.site(first + k) = s.right_isometry.reshaped({kk, 2, 2, chi});
      DenseTensor us = s.left_isometry;
      for (std::size_t a = 0; a < rest; ++a)
        for (std::size_t b = 0; b < kk; ++b) us[a * kk + b] *= s.singular_values[b];
      rem = std::move(us);
      chi = kk;
      rest /= 4;
    }
    mpo_.site(first) = rem.reshaped({rem.size() / (4 * chi), 2, 2, chi});
    center_ = first;
  }
}

void MpoEvolver::apply_layer(const std::vector<CircuitGate>& layer, GateSide side, bool left_to_right) {
  std::vector<const CircuitGate*> order;
  for (const auto& g : layer) order.push_back(&g);
  std::sort(order.begin(), order.end(),
            [](const CircuitGate* a, const CircuitGate* b) { return a->support.front() < b->support.front(); });
  if (!left_to_right) std::reverse(order.begin(), order.end());
  for (const auto* g : order) apply(g->u, g->support.front(), side, left_to_right);
}

Mpo apply_gate(const Mpo& mpo, const MatrixXc& gate, int first, GateSide side, double cutoff) {
  MpoEvolver ev(mpo, cutoff);
  ev.apply(gate, first, side);
  return ev.release();
}

Mpo build_propagator(const HamiltonianSpec& spec, double dt, const PropagatorOptions& opt) {
  if (!std::isfinite(dt)) throw ArgumentError("time step must be finite");
  if (opt.substeps < 1) throw ArgumentError("substeps must be positive");
  const int n = spec.n_sites;
  if (dt == 0.0) return identity_mpo(n);
  auto groups = commuting_groups(spec);
  const double tau = dt / opt.substeps;
  // Consecutive half steps of the same group across substeps are merged.
  std::vector<FormulaStep> steps;
  for (int s = 0; s < opt.substeps; ++s)
    for (const auto& st : trotter_steps(groups.size(), tau, 2)) {
      if (!steps.empty() && steps.back().group == st.group)
        steps.back().time += st.time;
      else
        steps.push_back(st);
    }
  std::map<std::pair<std::size_t, double>, std::vector<CircuitGate>> cache;
  MpoEvolver ev(identity_mpo(n), opt.cutoff, opt.max_bond);
  bool ltr = true;
  for (const auto& st : steps) {
    auto key = std::make_pair(st.group, st.time);
    auto it = cache.find(key);
    if (it == cache.end()) {
      std::vector<CircuitGate> layer;
      for (const auto& t : groups[st.group]) layer.push_back({t.support, hermitian_exp(t.op.matrix(), st.time)});
      it = cache.emplace(key, std::move(layer)).first;
    }
    ev.apply_layer(it->second, GateSide::Left, ltr);
    ltr = !ltr;
  }
  return ev.release();
}

cplx trace_product(const Mpo& a, const Mpo& b) {
  if (a.n_sites() != b.n_sites()) throw DimensionError("MPO size mismatch");
  DenseTensor e({1, 1}, {1.0});
  for (std::size_t j = 0; j < a.n_sites(); ++j) {
    DenseTensor t = contract(e, b.site(j), {{1, 0}});                      // (a1, o, i, b2)
    e = contract(a.site(j).conj(), t, {{0, 0}, {1, 1}, {2, 2}});            // (a2, b2)
  }
  return e[0];
}

Mpo layered_to_mpo(const LayeredCircuit& c, double cutoff) {
  MpoEvolver ev(identity_mpo(c.n_sites), cutoff);
  bool ltr = true;
  for (const auto& layer : c.layers) {
    ev.apply_layer(layer, GateSide::Left, ltr);
    ltr = !ltr;
  }
  return ev.release();
}

Mpo brickwall_to_mpo(const BrickwallCircuit& c, double cutoff) { return layered_to_mpo(to_layered(c), cutoff); }

Mpo mpo_product(const Mpo& a, const Mpo& b) {
  if (a.n_sites() != b.n_sites()) throw DimensionError("MPO size mismatch");
  std::vector<DenseTensor> t;
  for (std::size_t j = 0; j < a.n_sites(); ++j) {
    const auto& A = a.site(j);
    const auto& B = b.site(j);
    DenseTensor c = contract(A, B, {{2, 1}});  // (a1, o, a2, b1, i, b2)
    c = c.permuted({0, 3, 1, 4, 2, 5});
    t.push_back(c.reshaped({A.extent(0) * B.extent(0), 2, 2, A.extent(3) * B.extent(3)}));
  }
  return Mpo(std::move(t));
}

Mpo mpo_sum(const Mpo& a, const Mpo& b, cplx alpha, cplx beta) {
  if (a.n_sites() != b.n_sites()) throw DimensionError("MPO size mismatch");
  const std::size_t n = a.n_sites();
  std::vector<DenseTensor> t;
  for (std::size_t j = 0; j < n; ++j) {
    const auto& A = a.site(j);
    const auto& B = b.site(j);
    const bool first = j == 0, last = j + 1 == n;
    const std::size_t la = A.extent(0), ra = A.extent(3), lb = B.extent(0), rb = B.extent(3);
    const std::size_t l = first ? 1 : la + lb;
    const std::size_t r = last ? 1 : ra + rb;
    DenseTensor c({l, 2, 2, r});
    const cplx sa = first ? alpha : 1.0, sb = first ? beta : 1.0;
    for (std::size_t x = 0; x < la; ++x)
      for (std::size_t p = 0; p < 4; ++p)
        for (std::size_t y = 0; y < ra; ++y) c[(x * 4 + p) * r + y] += sa * A[(x * 4 + p) * ra + y];
    const std::size_t ol = first ? 0 : la, orr = last ? 0 : ra;
    for (std::size_t x = 0; x < lb; ++x)
      for (std::size_t p = 0; p < 4; ++p)
        for (std::size_t y = 0; y < rb; ++y) c[((ol + x) * 4 + p) * r + orr + y] += sb * B[(x * 4 + p) * rb + y];
    t.push_back(std::move(c));
  }
  return Mpo(std::move(t));
}

double mpo_frobenius_norm(const Mpo& a) {
  DenseTensor carry({1, 1}, {1.0});
  for (std::size_t j = 0; j < a.n_sites(); ++j) {
    DenseTensor w = contract(carry, a.site(j), {{1, 0}});  // (k, o, i, r)
    if (j + 1 == a.n_sites()) return w.norm();
    MatrixXc m = w.matrix(3);
    Eigen::HouseholderQR<MatrixXc> qr(m);
    const Eigen::Index k = std::min<Eigen::Index>(m.rows(), m.cols());
    MatrixXc rr = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    carry = DenseTensor::from_matrix(rr);
  }
  return 0.0;
}

Mpo scaled(const Mpo& a, cplx s) {
  std::vector<DenseTensor> t = a.tensors();
  t[0] *= s;
  return Mpo(std::move(t));
}

}  // namespace bwc
