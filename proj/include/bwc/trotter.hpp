#pragma once

#include <vector>

#include "bwc/brickwall.hpp"
#include "bwc/hamiltonian.hpp"
#include "bwc/tensor.hpp"

namespace bwc {

struct CircuitGate {
  std::vector<int> support;  // contiguous sites
  MatrixXc u;                // 2^r x 2^r
};

struct LayeredCircuit {
  int n_sites = 0;
  std::vector<std::vector<CircuitGate>> layers;  // applied first to last
  double dt = 0.0;
  int order = 0;  // 0 when not a product formula
};

// Group labels and step sizes of a product formula, before exponentiation.
struct FormulaStep {
  std::size_t group;
  double time;
};
std::vector<FormulaStep> trotter_steps(std::size_t n_groups, double dt, int order);

LayeredCircuit trotter_circuit(const HamiltonianSpec& spec, double dt, int order);
LayeredCircuit to_layered(const BrickwallCircuit& c);

// Applies r-site gate `u` on sites first..first+r-1 to the leading 2^n index of `target`.
void apply_gate_dense(DenseTensor& target, int n, const MatrixXc& u, int first);
DenseTensor apply_layered_dense(const LayeredCircuit& c, const DenseTensor& target);
DenseTensor layered_dense(const LayeredCircuit& c);

}  // namespace bwc
