#include "bwc/trotter.hpp"

#include <cmath>

#include "bwc/errors.hpp"

namespace bwc {

std::vector<FormulaStep> trotter_steps(std::size_t k, double dt, int order) {
  std::vector<FormulaStep> s;
  if (k == 0) return s;
  if (order == 1) {
    for (std::size_t g = 0; g < k; ++g) s.push_back({g, dt});
  } else if (order == 2) {
    for (std::size_t g = 0; g + 1 < k; ++g) s.push_back({g, dt / 2});
    s.push_back({k - 1, dt});
    for (std::size_t g = k - 1; g-- > 0;) s.push_back({g, dt / 2});
  } else {
    throw ArgumentError("order must be 1 or 2");
  }
  return s;
}

LayeredCircuit trotter_circuit(const HamiltonianSpec& spec, double dt, int order) {
  if (!std::isfinite(dt)) throw ArgumentError("time step must be finite");
  auto groups = commuting_groups(spec);
  LayeredCircuit c;
  c.n_sites = spec.n_sites;
  c.dt = dt;
  c.order = order;
  for (const auto& step : trotter_steps(groups.size(), dt, order)) {
    std::vector<CircuitGate> layer;
    for (const auto& t : groups[step.group]) layer.push_back({t.support, hermitian_exp(t.op.matrix(), step.time)});
    c.layers.push_back(std::move(layer));
  }
  return c;
}

LayeredCircuit to_layered(const BrickwallCircuit& bw) {
  LayeredCircuit c;
  c.n_sites = bw.n_sites;
  for (int m = 1; m <= bw.depth; ++m) {
    std::vector<CircuitGate> layer;
    for (int k = 0; k < bw.gates_in_layer(m); ++k) {
      int b = bw.bond(m, k);
      layer.push_back({{b, b + 1}, bw.layers[m - 1][k]});
    }
    c.layers.push_back(std::move(layer));
  }
  return c;
}

void apply_gate_dense(DenseTensor& target, int n, const MatrixXc& u, int first) {
  const std::size_t d = std::size_t{1} << n;
  if (target.rank() == 0 || target.extent(0) != d) throw DimensionError("target does not match chain size");
  const std::size_t cols = target.size() / d;
  const std::size_t dr = static_cast<std::size_t>(u.rows());
  int r = 0;
  while ((std::size_t{1} << r) < dr) ++r;
  if (first < 0 || first + r > n) throw ArgumentError("gate support out of range");
  const std::size_t left = std::size_t{1} << first;
  const std::size_t right = (std::size_t{1} << (n - first - r)) * cols;
  std::vector<cplx> buf(dr), res(dr);
  cplx* p = target.raw();
  for (std::size_t a = 0; a < left; ++a)
    for (std::size_t b = 0; b < right; ++b) {
      for (std::size_t k = 0; k < dr; ++k) buf[k] = p[(a * dr + k) * right + b];
      for (std::size_t o = 0; o < dr; ++o) {
        cplx s = 0.0;
        for (std::size_t k = 0; k < dr; ++k) s += u(o, k) * buf[k];
        res[o] = s;
      }
      for (std::size_t k = 0; k < dr; ++k) p[(a * dr + k) * right + b] = res[k];
    }
}

DenseTensor apply_layered_dense(const LayeredCircuit& c, const DenseTensor& target) {
  if (c.n_sites > 14) throw CapacityError("dense simulation limited to 14 sites");
  DenseTensor out = target;
  for (const auto& layer : c.layers)
    for (const auto& g : layer) apply_gate_dense(out, c.n_sites, g.u, g.support.front());
  return out;
}

DenseTensor layered_dense(const LayeredCircuit& c) {
  if (c.n_sites > 14) throw CapacityError("dense simulation limited to 14 sites");
  return apply_layered_dense(c, DenseTensor::identity(std::size_t{1} << c.n_sites));
}

}  // namespace bwc
