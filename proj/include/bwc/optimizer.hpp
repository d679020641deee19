#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "bwc/brickwall.hpp"
#include "bwc/hamiltonian.hpp"
#include "bwc/mpo.hpp"
#include "bwc/network.hpp"

namespace bwc {

// Left/right environment blocks of the overlap network Tr[U_MPO^dagger U_BW].
//
// L_j holds the conjugated MPO tensors on sites 0..j and every gate on bonds < j.
// R_j holds sites j..N-1 and every gate on bonds >= j. Open legs are the MPO link
// at the block edge plus the wire segments of the edge site that touch the gates
// still outside the block.
class EnvironmentCache {
 public:
  EnvironmentCache(const Mpo& mpo, int depth);

  int n_sites() const { return n_; }
  int depth() const { return depth_; }

  bool left_valid(int j) const { return left_valid_.at(j); }
  bool right_valid(int j) const { return right_valid_.at(j); }
  const LabeledTensor& left(int j) const;
  const LabeledTensor& right(int j) const;
  void set_left(int j, LabeledTensor t);
  void set_right(int j, LabeledTensor t);

  // A changed gate on `bond` stales every block that contains it.
  void invalidate_bond(int bond);
  void invalidate_all();

  int link_label(int j) const { return j; }
  // Label of the wire on `site` right after layer k (k = 0 is the input), merged
  // across layers where the site is idle.
  int segment_label(int site, int k) const;
  LabeledTensor gate_tensor(const BrickwallCircuit& c, int m, int bond) const;
  const LabeledTensor& mpo_tensor(int j) const { return conj_sites_.at(j); }

  std::size_t block_entries(int j, bool left) const;

 private:
  int n_;
  int depth_;
  std::vector<LabeledTensor> conj_sites_;
  std::vector<LabeledTensor> left_, right_;
  std::vector<char> left_valid_, right_valid_;
};

enum class Direction { Left, Right };

// Builds L_j from L_{j-1} (direction Left) or R_j from R_{j+1} (direction Right).
void extend_environment(EnvironmentCache& cache, const BrickwallCircuit& c, Direction dir, int j);

// From-scratch contraction of a block, the oracle for cached values.
LabeledTensor block_from_scratch(const EnvironmentCache& cache, const BrickwallCircuit& c, Direction dir,
                                 int j);

// Environment of the gate (layer m, bond) seen from pivot site l, which must
// touch the gate. Returns G~ with Tr[U_MPO^dagger U_BW] = Tr[G~^dagger G].
MatrixXc gate_environment(const EnvironmentCache& cache, const BrickwallCircuit& c, int l, int m, int bond);

// Replaces the gate by polar(G~). Returns false and leaves the gate untouched
// when G~ is rank deficient.
bool update_gate(BrickwallCircuit& c, int m, int bond, const MatrixXc& env);

struct UpdateEvent {
  int pivot = 0;
  int layer = 0;
  int bond = 0;
  double overlap_before = 0.0;  // Re Tr[G~^dagger G_old]
  double overlap_after = 0.0;   // Re Tr[G~^dagger G_new]
  double unitarity_defect = 0.0;
  bool stalled = false;
};

using UpdateObserver = std::function<void(const UpdateEvent&)>;

struct SweepResult {
  double overlap = 0.0;  // Re Tr[U_MPO^dagger U_BW] after the sweep
  int updates = 0;
  int stalls = 0;
};

// One left-to-right plus right-to-left pass over pivots 1..N-2.
SweepResult sweep(BrickwallCircuit& c, EnvironmentCache& cache, const UpdateObserver& observer = {});

// F = ||U_MPO - U_BW||_F from the overlap, using Tr[U_BW^dagger U_BW] = 2^N.
double frobenius_cost(double mpo_norm_sq, int n, double overlap);

// Tr[U_MPO^dagger U_BW] contracted through the environment network, without
// converting the circuit to an MPO.
cplx circuit_overlap(const Mpo& target, const BrickwallCircuit& c);

enum class InitStrategy { NearIdentity, SwapSkeleton, Explicit };
enum class AnnealKind { None, Time, Parameter };

struct OptimizerConfig {
  double epsilon = 1e-6;
  int max_sweeps = 20000;
  InitStrategy init = InitStrategy::NearIdentity;
  double init_sigma = 0.01;
  std::optional<BrickwallCircuit> explicit_circuit;
  AnnealKind anneal = AnnealKind::None;
  double anneal_start_dt = 1.0;
  int anneal_rungs = 6;
  double anneal_start_g = -1.0;
  double anneal_g_step = 0.05;
  double reseed_sigma = 1e-3;
  std::uint64_t seed = 0;
  UpdateObserver observer;

  void validate() const;
};

BrickwallCircuit init_circuit(int n, int depth, InitStrategy strategy, double sigma, std::mt19937_64& rng,
                              const BrickwallCircuit* explicit_circuit = nullptr);
InitStrategy parse_init(const std::string& s);
AnnealKind parse_anneal(const std::string& s);

struct OptimizeResult {
  BrickwallCircuit circuit;
  std::vector<double> history;  // F after each sweep at the final target
  double initial_cost = 0.0;
  int sweeps_used = 0;          // all sweeps, anneal rungs included
  bool converged = false;
  int stalls = 0;
  int reseeds = 0;
};

// Sweeps until the relative decrease of F drops below epsilon. `seed_circuit`
// overrides the configured initial strategy.
OptimizeResult optimize(const Mpo& target, int depth, const OptimizerConfig& config,
                        const BrickwallCircuit* seed_circuit = nullptr);

enum class TargetMode { Auto, Propagator, DenseExact };

// A physical target e^{-i dt H(model, params)} on n sites.
struct ModelTarget {
  Model model = Model::ClusterIsing;
  int n_sites = 8;
  ModelParams params;
  double dt = 0.1;
  PropagatorOptions mpo;
  TargetMode mode = TargetMode::Auto;
};

// Auto uses the exactly exponentiated Hamiltonian for n <= 10 and the
// product-formula MPO beyond.
Mpo build_target(const ModelTarget& t);

// Runs the configured anneal ladder and finishes at the requested target.
OptimizeResult optimize(const ModelTarget& target, int depth, const OptimizerConfig& config);

// Rungs of the time ladder, geometric from start to the target dt.
std::vector<double> time_ladder(double start, double dt, int rungs);
std::vector<double> parameter_ladder(double start, double target, double step);

}  // namespace bwc
