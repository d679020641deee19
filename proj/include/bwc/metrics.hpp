#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "bwc/brickwall.hpp"
#include "bwc/mpo.hpp"
#include "bwc/trotter.hpp"

namespace bwc {

// delta = sqrt(2 - Re(Tr[U_MPO^dagger U_C])^{1/N}). Throws NumericalError when the
// trace has non-positive real part.
double error_density(const Mpo& target, const Mpo& circuit);
double error_density(const Mpo& target, const BrickwallCircuit& c);
double error_density(const Mpo& target, const LayeredCircuit& c);

// ||[V, O]||_F / ||O||_F (or unnormalized), from the difference MPO VO - OV.
double commutator_norm(const Mpo& v, const Mpo& op, bool normalize = true);
double commutator_norm(const BrickwallCircuit& c, const Mpo& op, bool normalize = true);
double commutator_norm(const LayeredCircuit& c, const Mpo& op, bool normalize = true);
// Same quantity through 2Tr[O^dagger O] - 2Re Tr[O^dagger V^dagger O V]; only valid for unitary V
// and limited by cancellation to about sqrt(machine epsilon) relative accuracy.
double commutator_norm_trace_identity(const Mpo& v, const Mpo& op, bool normalize = true);

// Two-site operator `op2` (4x4) placed on sites j, j+1 of an n-site chain.
Mpo bond_operator_mpo(const MatrixXc& op2, int j, int n);
// Mean over bonds j of the normalized commutator with Q_j Q_{j+1}.
double pxp_constraint_commutator(const Mpo& v);

// F^a = 2^{-N} sum_s |<s|U_MPO^dagger U_C|s>|^2.
double algorithmic_fidelity(const Mpo& target, const Mpo& circuit);
double algorithmic_fidelity(const Mpo& target, const BrickwallCircuit& c);
// Site average of 2^{-N} sum_s sum_{s': s'_j = s_j} |<s'|U_MPO^dagger U_C|s>|^2.
double local_algorithmic_fidelity(const Mpo& target, const Mpo& circuit);
double local_algorithmic_fidelity(const Mpo& target, const BrickwallCircuit& c);
// Single-site terms of the local fidelity, one per site.
std::vector<double> local_fidelity_terms(const Mpo& target, const Mpo& circuit);

struct BoundCheck {
  double infidelity = 0.0;  // 1 - F^a of n applications
  double bound = 0.0;       // n^2 E^2, E the operator norm of U - V
  bool holds() const { return infidelity <= bound + 1e-10; }
};

// Dense check of the product bound for `applications` repetitions, N <= 10.
BoundCheck infidelity_bound_check(const MatrixXc& exact, const MatrixXc& approx, int applications = 1);

// F^a as a function of dt sampled on a grid, interpolated log-log in 1 - F.
class FidelityTable {
 public:
  FidelityTable() = default;
  FidelityTable(std::vector<double> dt, std::vector<double> fidelity);

  double operator()(double dt) const;
  double min_dt() const { return dt_.front(); }
  double max_dt() const { return dt_.back(); }
  const std::vector<double>& dts() const { return dt_; }
  const std::vector<double>& fidelities() const { return f_; }

 private:
  std::vector<double> dt_, f_;
};

struct PlanRow {
  int n = 0;
  double dt = 0.0;
  double infidelity = 0.0;
  bool clamped = false;  // n^2 (1 - F^a) exceeded 1
};

struct TimestepPlan {
  double total_time = 0.0;
  double eta = 0.0;
  std::vector<PlanRow> rows;  // ascending n
  double dt_opt = 0.0;
  int n_opt = 0;
  double infidelity_opt = 0.0;

  // True when the minimum sits strictly inside the scanned range.
  bool interior_minimum() const;
};

// Estimated infidelity 1 - e^{-eta n}[1 - n^2(1 - F^a(t/n))] minimized over n in `n_grid`.
// Ties go to the smaller n.
TimestepPlan plan_timestep(double t, double eta, const std::function<double(double)>& fidelity,
                           const std::vector<int>& n_grid);
// Uses every n whose dt = t/n lies inside the table range.
TimestepPlan plan_timestep(double t, double eta, const FidelityTable& table, int n_max = 1000);

struct EchoPoint {
  int applications = 0;  // forward plus reverse
  double fidelity = 0.0;        // raw return probability
  double local_fidelity = 0.0;  // raw per-site agreement
  double normalized_fidelity = 0.0;
  double normalized_local_fidelity = 0.0;
};

struct EchoOptions {
  double eta_layer = 0.0;  // decay per CNOT-equivalent layer
  int cnot_layers = 1;     // CNOT layers in one application of the circuit
  int shots = 8192;
};

// Forward k applications followed by k inverse applications under per-qubit
// depolarizing noise, sampled shot by shot. N <= 12.
std::vector<EchoPoint> noisy_echo(const LayeredCircuit& c, const std::vector<int>& forward_counts,
                                  const EchoOptions& opt, std::mt19937_64& rng);
std::vector<EchoPoint> noisy_echo(const BrickwallCircuit& c, const std::vector<int>& forward_counts,
                                  const EchoOptions& opt, std::mt19937_64& rng);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);
// Least squares of log(value) against log(dt).
LineFit fit_scaling(const std::vector<std::pair<double, double>>& points);
// Decay exponent of y = A e^{-eta x}, skipping non-positive samples.
double fit_decay(const std::vector<double>& x, const std::vector<double>& y);

struct MetricsReport {
  double dt = 0.0;
  int depth = 0;
  double delta = 0.0;
  double energy_commutator = 0.0;
  std::map<std::string, double> conserved_commutators;
  double fidelity = 0.0;
  double local_fidelity = 0.0;
  int sweeps_used = 0;
  bool converged = false;
};

// Full report for a brickwall against its target; `hamiltonian` feeds the energy commutator.
MetricsReport evaluate(const Mpo& target, const BrickwallCircuit& c, const Mpo& hamiltonian, double dt);
// Product-formula circuits report their gate-layer count as depth.
MetricsReport evaluate(const Mpo& target, const LayeredCircuit& c, const Mpo& hamiltonian, double dt);

std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsReport& r);
void write_metrics_csv(std::ostream& os, const std::vector<MetricsReport>& rows);

}  // namespace bwc
