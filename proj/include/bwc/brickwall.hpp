#pragma once

#include <vector>

#include "bwc/tensor.hpp"

namespace bwc {

// Depth-M brickwall of two-qubit gates. Layer m (1-based) acts on bonds
// offset(m), offset(m)+2, ... with offset 0 for odd m and 1 for even m.
// Bond b couples sites b and b+1. Layer 1 is applied first.
// Gate matrices use rows o1*2+o2 and columns i1*2+i2, o1/i1 on the left site.
struct BrickwallCircuit {
  int n_sites = 0;
  int depth = 0;
  std::vector<std::vector<MatrixXc>> layers;  // layers[m-1][k] acts on bond offset(m)+2k

  BrickwallCircuit() = default;
  BrickwallCircuit(int n, int m);  // all gates identity

  static int offset(int m) { return (m % 2 == 1) ? 0 : 1; }
  int gates_in_layer(int m) const { return (n_sites - offset(m)) / 2; }
  int bond(int m, int k) const { return offset(m) + 2 * k; }
  // Left site of the gate touching `site` in layer m, or -1 if the site is idle there.
  int gate_bond_at(int m, int site) const;
  MatrixXc& gate(int m, int bond_left_site);
  const MatrixXc& gate(int m, int bond_left_site) const;
  int gate_count() const;
};

DenseTensor circuit_dense(const BrickwallCircuit& c);

}  // namespace bwc
