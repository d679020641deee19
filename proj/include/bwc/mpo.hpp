#pragma once

#include <cstddef>
#include <vector>

#include "bwc/brickwall.hpp"
#include "bwc/hamiltonian.hpp"
#include "bwc/tensor.hpp"
#include "bwc/trotter.hpp"

namespace bwc {

// Operator as a chain of rank-4 tensors with axes (left bond, phys out, phys in, right bond).
class Mpo {
 public:
  Mpo() = default;
  explicit Mpo(std::vector<DenseTensor> tensors);

  std::size_t n_sites() const { return tensors_.size(); }
  const DenseTensor& site(std::size_t j) const { return tensors_.at(j); }
  DenseTensor& site(std::size_t j) { return tensors_.at(j); }
  const std::vector<DenseTensor>& tensors() const { return tensors_; }

  // Extents of the n-1 internal links.
  std::vector<std::size_t> bond_dims() const;
  std::size_t max_bond() const;
  void validate() const;

  Mpo adjoint() const;
  DenseTensor to_dense() const;

 private:
  std::vector<DenseTensor> tensors_;
};

enum class GateSide { Left, Right };

Mpo identity_mpo(int n);
Mpo mpo_from_dense(const DenseTensor& u, double cutoff);

// Keeps an orthogonality center so that every truncation is done on the center tensor.
class MpoEvolver {
 public:
  MpoEvolver(Mpo mpo, double cutoff, std::size_t max_bond = 0);

  // Applies an r-site gate on first..first+r-1. With `center_right` the
  // orthogonality center ends at the last site of the support, else at the first.
  void apply(const MatrixXc& gate, int first, GateSide side, bool center_right = true);
  // Applies a set of disjoint gates, sweeping left-to-right or right-to-left.
  void apply_layer(const std::vector<CircuitGate>& layer, GateSide side, bool left_to_right);
  void move_center(int j);

  const Mpo& mpo() const { return mpo_; }
  Mpo release() { return std::move(mpo_); }
  int center() const { return center_; }
  double discarded_weight() const { return discarded_; }

 private:
  void split(DenseTensor theta, int first, int r, bool center_right);
  Mpo mpo_;
  int center_ = 0;
  double cutoff_;
  std::size_t max_bond_;
  double discarded_ = 0.0;
};

Mpo apply_gate(const Mpo& mpo, const MatrixXc& gate, int first, GateSide side, double cutoff);

struct PropagatorOptions {
  int substeps = 100;
  double cutoff = 1e-16;
  std::size_t max_bond = 0;  // 0: unbounded
};

Mpo build_propagator(const HamiltonianSpec& spec, double dt, const PropagatorOptions& opt = {});

// Tr[a^dagger b]
cplx trace_product(const Mpo& a, const Mpo& b);

Mpo layered_to_mpo(const LayeredCircuit& c, double cutoff = 0.0);
Mpo brickwall_to_mpo(const BrickwallCircuit& c, double cutoff = 0.0);

// a*b as an operator product (bond dimensions multiply).
Mpo mpo_product(const Mpo& a, const Mpo& b);
// alpha*a + beta*b via direct sum of bonds.
Mpo mpo_sum(const Mpo& a, const Mpo& b, cplx alpha, cplx beta);
// Frobenius norm computed through orthogonal (QR) sweeps, avoiding trace cancellation.
double mpo_frobenius_norm(const Mpo& a);
Mpo scaled(const Mpo& a, cplx s);

}  // namespace bwc
