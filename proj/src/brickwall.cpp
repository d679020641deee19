#include "bwc/brickwall.hpp"

#include "bwc/errors.hpp"
#include "bwc/trotter.hpp"

namespace bwc {

BrickwallCircuit::BrickwallCircuit(int n, int m) : n_sites(n), depth(m) {
  if (n < 2) throw ArgumentError("brickwall needs at least two sites");
  if (m < 1) throw ArgumentError("depth must be at least 1");
  layers.resize(m);
  for (int l = 1; l <= m; ++l) layers[l - 1].assign(gates_in_layer(l), MatrixXc::Identity(4, 4));
}

int BrickwallCircuit::gate_bond_at(int m, int site) const {
  const int off = offset(m);
  if (site < off) return -1;
  int b = site - ((site - off) % 2);
  if (b + 1 >= n_sites) return -1;
  return b;
}

MatrixXc& BrickwallCircuit::gate(int m, int b) {
  if (m < 1 || m > depth || b < offset(m) || (b - offset(m)) % 2 != 0 || b + 1 >= n_sites)
    throw ArgumentError("no gate at the requested layer and bond");
  return layers[m - 1][(b - offset(m)) / 2];
}

const MatrixXc& BrickwallCircuit::gate(int m, int b) const {
  return const_cast<BrickwallCircuit*>(this)->gate(m, b);
}

int BrickwallCircuit::gate_count() const {
  int c = 0;
  for (const auto& l : layers) c += static_cast<int>(l.size());
  return c;
}

DenseTensor circuit_dense(const BrickwallCircuit& c) { return layered_dense(to_layered(c)); }

}  // namespace bwc
