#pragma once

#include <array>
#include <string>
#include <vector>

#include "bwc/brickwall.hpp"
#include "bwc/hamiltonian.hpp"
#include "bwc/trotter.hpp"

namespace bwc {

enum class OpKind { CX, RZ, H, X, U };

// One gate of a CNOT + single-qubit circuit. For CX, `q` is the control and
// `target` the target. RZ stores its angle in angles[0]; U stores ZYZ Euler
// angles (a, b, c) with matrix Rz(a) Ry(b) Rz(c).
struct GateOp {
  OpKind kind = OpKind::H;
  int q = 0;
  int target = -1;
  std::array<double, 3> angles{0.0, 0.0, 0.0};
  int layer = 0;  // CNOT layer (1-based) for CX, 0 otherwise

  bool operator==(const GateOp&) const = default;
};

enum class Connectivity { Linear, NextNearest };
Connectivity parse_connectivity(const std::string& s);

struct GateList {
  int n_qubits = 0;
  std::vector<GateOp> ops;

  void cx(int control, int target);
  void rz(double angle, int q);
  void h(int q);
  void x(int q);
  void u(double a, double b, double c, int q);
  // Appends a 2x2 unitary as ZYZ Euler angles, global phase dropped.
  void u(const MatrixXc& m, int q);
  void append(const GateList& other, int offset = 0);

  // Greedy as-soon-as-possible packing of CNOTs into layers of disjoint pairs.
  // Single-qubit gates keep their order but occupy no layer.
  int annotate_layers();
  int cnot_count() const;
  int cnot_layer_count() const;
  void validate() const;

  bool operator==(const GateList&) const = default;
};

// ZYZ angles (a, b, c) with m = e^{i phi} Rz(a) Ry(b) Rz(c).
std::array<double, 3> zyz_angles(const MatrixXc& m);
MatrixXc zyz_matrix(double a, double b, double c);

// Dense unitary of the list, N <= 10.
MatrixXc gatelist_dense(const GateList& g);

// Phase-insensitive max-entry distance between two unitaries.
double phase_distance(const MatrixXc& a, const MatrixXc& b);

// Fixed templates. Angles follow R_P(theta) = exp(-i theta/2 P).
GateList template_rzz(double theta);
GateList template_rzxz(double theta);
GateList template_rpxp(double theta, Connectivity conn);
// exp(-i theta/2 X (x) P) for `target_first`, else exp(-i theta/2 P (x) X).
GateList template_rxp(double theta, bool target_first);
// CNOT from qubit 0 to qubit 2 using neighbouring CNOTs only.
GateList template_long_cx();

// At most three CNOTs: 0 for products, 2 when the gate is locally equivalent to
// exp(i(a XX + b YY)), else 3. `force_three` always uses the 3-CNOT form.
GateList decompose_two_qubit(const MatrixXc& g, bool force_three = false);

struct ExportOptions {
  Connectivity connectivity = Connectivity::Linear;
  bool elide_identities = false;
};

// Brickwall gates use the 3-CNOT form each, so the CNOT depth is 3M.
GateList export_gatelist(const BrickwallCircuit& c, const ExportOptions& opt = {});
// Generic layered circuit: 1- and 2-site gates only.
GateList export_gatelist(const LayeredCircuit& c, const ExportOptions& opt = {});
// Product-formula circuit built from model templates; next-nearest diagonal
// couplings go through a SWAP network.
GateList export_trotter(const HamiltonianSpec& spec, double dt, int order, const ExportOptions& opt = {});

// Closed-form CNOT layer counts per time step.
int cnot_layers_brickwall(int depth);
int cnot_layers_trotter(Model model, int order, Connectivity conn, const ModelParams& params = {});

std::string render_gatelist(const GateList& g);
GateList parse_gatelist(const std::string& text);

}  // namespace bwc
