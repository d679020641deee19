#include "bwc/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bwc/errors.hpp"

namespace bwc {

namespace {

bool has_gate(int n, int m, int bond) {
  const int off = BrickwallCircuit::offset(m);
  return bond >= off && (bond - off) % 2 == 0 && bond + 1 < n && bond >= 0;
}

int bond_at(int n, int m, int site) {
  const int off = BrickwallCircuit::offset(m);
  if (site < off) return -1;
  const int b = site - ((site - off) % 2);
  return b + 1 < n ? b : -1;
}

MatrixXc complex_normal(std::mt19937_64& rng, int d) {
  std::normal_distribution<double> nd(0.0, 1.0 / std::sqrt(2.0));
  MatrixXc r(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) r(i, j) = cplx(nd(rng), nd(rng));
  return r;
}

MatrixXc near_identity_gate(std::mt19937_64& rng, double sigma) {
  if (sigma == 0.0) return MatrixXc::Identity(4, 4);
  return polar_unitary(MatrixXc(MatrixXc::Identity(4, 4) + sigma * complex_normal(rng, 4)));
}

MatrixXc swap_gate() {
  MatrixXc s = MatrixXc::Zero(4, 4);
  s(0, 0) = s(1, 2) = s(2, 1) = s(3, 3) = 1.0;
  return s;
}

// Odd layers 1, 3, 5 carry SWAPs on bonds 4k+2, all even bonds, and bonds 4k.
bool skeleton_swap(int m, int bond) {
  if (m == 1) return bond % 4 == 2;
  if (m == 3) return bond % 2 == 0;
  if (m == 5) return bond % 4 == 0;
  return false;
}

double real_overlap(const MatrixXc& env, const MatrixXc& g) { return (env.conjugate().cwiseProduct(g)).sum().real(); }

}  // namespace

EnvironmentCache::EnvironmentCache(const Mpo& mpo, int depth) : n_(static_cast<int>(mpo.n_sites())), depth_(depth) {
  mpo.validate();
  if (n_ < 3) throw ArgumentError("environment sweeps need at least three sites");
  if (depth < 1) throw ArgumentError("depth must be at least 1");
  for (int j = 0; j < n_; ++j) {
    DenseTensor w = mpo.site(j).conj();
    const Shape& s = w.shape();
    if (s[1] != 2 || s[2] != 2) throw DimensionError("optimizer expects qubit sites");
    std::vector<int> labels;
    Shape shape;
    if (j > 0) {
      labels.push_back(link_label(j - 1));
      shape.push_back(s[0]);
    }
    labels.push_back(segment_label(j, depth_));
    labels.push_back(segment_label(j, 0));
    shape.push_back(2);
    shape.push_back(2);
    if (j < n_ - 1) {
      labels.push_back(link_label(j));
      shape.push_back(s[3]);
    }
    conj_sites_.push_back({w.reshaped(shape), labels});
  }
  left_.resize(n_);
  right_.resize(n_);
  left_valid_.assign(n_, 0);
  right_valid_.assign(n_, 0);
}

int EnvironmentCache::segment_label(int site, int k) const {
  int kk = k;
  while (kk > 0 && bond_at(n_, kk, site) < 0) --kk;
  return n_ + site * (depth_ + 1) + kk;
}

LabeledTensor EnvironmentCache::gate_tensor(const BrickwallCircuit& c, int m, int bond) const {
  DenseTensor g = DenseTensor::from_matrix(c.gate(m, bond)).reshaped({2, 2, 2, 2});
  return {g, {segment_label(bond, m), segment_label(bond + 1, m), segment_label(bond, m - 1),
              segment_label(bond + 1, m - 1)}};
}

const LabeledTensor& EnvironmentCache::left(int j) const {
  if (!left_valid_.at(j)) throw StalenessError("left block " + std::to_string(j) + " is stale");
  return left_[j];
}

const LabeledTensor& EnvironmentCache::right(int j) const {
  if (!right_valid_.at(j)) throw StalenessError("right block " + std::to_string(j) + " is stale");
  return right_[j];
}

void EnvironmentCache::set_left(int j, LabeledTensor t) {
  left_.at(j) = std::move(t);
  left_valid_[j] = 1;
}

void EnvironmentCache::set_right(int j, LabeledTensor t) {
  right_.at(j) = std::move(t);
  right_valid_[j] = 1;
}

void EnvironmentCache::invalidate_bond(int bond) {
  for (int j = bond + 1; j < n_; ++j) left_valid_[j] = 0;
  for (int j = 0; j <= bond && j < n_; ++j) right_valid_[j] = 0;
}

void EnvironmentCache::invalidate_all() {
  std::fill(left_valid_.begin(), left_valid_.end(), 0);
  std::fill(right_valid_.begin(), right_valid_.end(), 0);
}

std::size_t EnvironmentCache::block_entries(int j, bool is_left) const {
  return (is_left ? left(j) : right(j)).t.size();
}

namespace {

void check_shapes(const EnvironmentCache& cache, const BrickwallCircuit& c) {
  if (c.n_sites != cache.n_sites() || c.depth != cache.depth())
    throw DimensionError("circuit does not match the environment cache");
}

std::vector<LabeledTensor> block_parts(const EnvironmentCache& cache, const BrickwallCircuit& c, Direction dir,
                                       int j) {
  std::vector<LabeledTensor> parts{cache.mpo_tensor(j)};
  const int bond = dir == Direction::Left ? j - 1 : j;
  if (bond >= 0 && bond + 1 < c.n_sites)
    for (int m = 1; m <= c.depth; ++m)
      if (has_gate(c.n_sites, m, bond)) parts.push_back(cache.gate_tensor(c, m, bond));
  return parts;
}

}  // namespace

void extend_environment(EnvironmentCache& cache, const BrickwallCircuit& c, Direction dir, int j) {
  check_shapes(cache, c);
  const int n = c.n_sites;
  if (j < 0 || j >= n) throw ArgumentError("block index out of range");
  auto parts = block_parts(cache, c, dir, j);
  if (dir == Direction::Left) {
    if (j > 0) parts.push_back(cache.left(j - 1));
    cache.set_left(j, contract_network(std::move(parts)));
  } else {
    if (j < n - 1) parts.push_back(cache.right(j + 1));
    cache.set_right(j, contract_network(std::move(parts)));
  }
}

LabeledTensor block_from_scratch(const EnvironmentCache& cache, const BrickwallCircuit& c, Direction dir, int j) {
  check_shapes(cache, c);
  std::vector<LabeledTensor> parts;
  if (dir == Direction::Left) {
    for (int s = 0; s <= j; ++s) {
      auto p = block_parts(cache, c, dir, s);
      parts.insert(parts.end(), p.begin(), p.end());
    }
  } else {
    for (int s = j; s < c.n_sites; ++s) {
      auto p = block_parts(cache, c, dir, s);
      parts.insert(parts.end(), p.begin(), p.end());
    }
  }
  return contract_network(std::move(parts));
}

MatrixXc gate_environment(const EnvironmentCache& cache, const BrickwallCircuit& c, int l, int m, int bond) {
  check_shapes(cache, c);
  const int n = c.n_sites;
  if (l < 1 || l > n - 2) throw ArgumentError("pivot must lie in 1..N-2");
  if (bond != l - 1 && bond != l) throw ArgumentError("gate does not touch the pivot");
  if (!has_gate(n, m, bond)) throw ArgumentError("no gate at the requested layer and bond");
  std::vector<LabeledTensor> parts{cache.left(l - 1), cache.mpo_tensor(l), cache.right(l + 1)};
  for (int b : {l - 1, l})
    for (int mm = 1; mm <= c.depth; ++mm)
      if (has_gate(n, mm, b) && !(mm == m && b == bond)) parts.push_back(cache.gate_tensor(c, mm, b));
  LabeledTensor env = contract_network(std::move(parts));
  const LabeledTensor g = cache.gate_tensor(c, m, bond);
  // Tr = sum E[o, i] G[o, i], hence G~ = conj(E).
  return arrange(env, g.labels).reshaped({4, 4}).matrix().conjugate();
}

bool update_gate(BrickwallCircuit& c, int m, int bond, const MatrixXc& env) {
  try {
    c.gate(m, bond) = polar_unitary(env);
  } catch (const DegeneratePolarError&) {
    return false;
  }
  return true;
}

double frobenius_cost(double mpo_norm_sq, int n, double overlap) {
  const double f2 = mpo_norm_sq + std::ldexp(1.0, n) - 2.0 * overlap;
  return std::sqrt(std::max(0.0, f2));
}

namespace {

void ensure_left(EnvironmentCache& cache, const BrickwallCircuit& c, int j) {
  int i = j;
  while (i >= 0 && !cache.left_valid(i)) --i;
  for (int k = i + 1; k <= j; ++k) extend_environment(cache, c, Direction::Left, k);
}

void ensure_right(EnvironmentCache& cache, const BrickwallCircuit& c, int j) {
  int i = j;
  while (i < c.n_sites && !cache.right_valid(i)) ++i;
  for (int k = i - 1; k >= j; --k) extend_environment(cache, c, Direction::Right, k);
}

}  // namespace

SweepResult sweep(BrickwallCircuit& c, EnvironmentCache& cache, const UpdateObserver& observer) {
  check_shapes(cache, c);
  const int n = c.n_sites, depth = c.depth;
  SweepResult res;
  auto visit = [&](int l, int m) {
    const int bond = bond_at(n, m, l);
    if (bond < 0) return;
    MatrixXc env = gate_environment(cache, c, l, m, bond);
    UpdateEvent ev;
    ev.pivot = l;
    ev.layer = m;
    ev.bond = bond;
    ev.overlap_before = real_overlap(env, c.gate(m, bond));
    ev.stalled = !update_gate(c, m, bond, env);
    if (!ev.stalled) cache.invalidate_bond(bond);
    ev.overlap_after = real_overlap(env, c.gate(m, bond));
    ev.unitarity_defect = unitarity_defect(c.gate(m, bond));
    res.overlap = ev.overlap_after;
    ++res.updates;
    if (ev.stalled) ++res.stalls;
    if (observer) observer(ev);
  };
  for (int l = 1; l <= n - 2; ++l) {
    ensure_left(cache, c, l - 1);
    ensure_right(cache, c, l + 1);
    for (int m = 1; m <= depth; ++m) visit(l, m);
  }
  for (int l = n - 2; l >= 1; --l) {
    ensure_left(cache, c, l - 1);
    ensure_right(cache, c, l + 1);
    for (int m = depth; m >= 1; --m) visit(l, m);
  }
  return res;
}

cplx circuit_overlap(const Mpo& target, const BrickwallCircuit& c) {
  if (c.n_sites < 3) return trace_product(target, brickwall_to_mpo(c));
  EnvironmentCache cache(target, c.depth);
  check_shapes(cache, c);
  ensure_left(cache, c, 0);
  ensure_right(cache, c, 2);
  MatrixXc env = gate_environment(cache, c, 1, 1, 0);
  return (env.adjoint() * c.gate(1, 0)).trace();
}

void OptimizerConfig::validate() const {
  if (!(epsilon > 0.0)) throw ArgumentError("epsilon must be positive");
  if (max_sweeps < 1) throw ArgumentError("max_sweeps must be at least 1");
  if (!(init_sigma >= 0.0) || !(reseed_sigma >= 0.0)) throw ArgumentError("noise scales must be non-negative");
  if (anneal_rungs < 1) throw ArgumentError("anneal needs at least one rung");
  if (!(anneal_g_step > 0.0)) throw ArgumentError("anneal parameter step must be positive");
  if (anneal == AnnealKind::Time && !(anneal_start_dt > 0.0)) throw ArgumentError("anneal start time must be positive");
  if (init == InitStrategy::Explicit && !explicit_circuit) throw ArgumentError("explicit init needs a circuit");
}

BrickwallCircuit init_circuit(int n, int depth, InitStrategy strategy, double sigma, std::mt19937_64& rng,
                              const BrickwallCircuit* explicit_circuit) {
  BrickwallCircuit c(n, depth);
  switch (strategy) {
    case InitStrategy::NearIdentity:
      for (auto& layer : c.layers)
        for (auto& g : layer) g = near_identity_gate(rng, sigma);
      break;
    case InitStrategy::SwapSkeleton:
      for (int m = 1; m <= depth; ++m)
        for (int k = 0; k < c.gates_in_layer(m); ++k)
          if (skeleton_swap(m, c.bond(m, k))) c.layers[m - 1][k] = swap_gate();
      break;
    case InitStrategy::Explicit:
      if (!explicit_circuit) throw ArgumentError("explicit init needs a circuit");
      if (explicit_circuit->n_sites != n || explicit_circuit->depth != depth)
        throw DimensionError("explicit circuit has the wrong shape");
      c = *explicit_circuit;
      break;
  }
  return c;
}

InitStrategy parse_init(const std::string& s) {
  if (s == "near_identity") return InitStrategy::NearIdentity;
  if (s == "swap_skeleton") return InitStrategy::SwapSkeleton;
  if (s == "explicit") return InitStrategy::Explicit;
  throw ArgumentError("unknown init strategy: " + s);
}

AnnealKind parse_anneal(const std::string& s) {
  if (s == "none") return AnnealKind::None;
  if (s == "time") return AnnealKind::Time;
  if (s == "parameter") return AnnealKind::Parameter;
  throw ArgumentError("unknown anneal kind: " + s);
}

OptimizeResult optimize(const Mpo& target, int depth, const OptimizerConfig& config,
                        const BrickwallCircuit* seed_circuit) {
  config.validate();
  const int n = static_cast<int>(target.n_sites());
  std::mt19937_64 rng(config.seed);
  OptimizeResult res;
  if (seed_circuit) {
    if (seed_circuit->n_sites != n || seed_circuit->depth != depth)
      throw DimensionError("seed circuit has the wrong shape");
    res.circuit = *seed_circuit;
  } else {
    res.circuit = init_circuit(n, depth, config.init, config.init_sigma, rng,
                               config.explicit_circuit ? &*config.explicit_circuit : nullptr);
  }
  EnvironmentCache cache(target, depth);
  const double norm_sq = trace_product(target, target).real();
  // Below this F^2 the cost is rounding noise of the three trace terms.
  const double floor_sq = 64.0 * std::numeric_limits<double>::epsilon() * (norm_sq + std::ldexp(1.0, n));
  double prev = frobenius_cost(norm_sq, n, trace_product(target, brickwall_to_mpo(res.circuit)).real());
  res.initial_cost = prev;
  for (int s = 1; s <= config.max_sweeps; ++s) {
    SweepResult sr = sweep(res.circuit, cache, config.observer);
    res.sweeps_used = s;
    res.stalls += sr.stalls;
    if (sr.updates > 0 && sr.stalls == sr.updates) {
      for (auto& layer : res.circuit.layers)
        for (auto& g : layer) g = g * near_identity_gate(rng, config.reseed_sigma);
      cache.invalidate_all();
      ++res.reseeds;
      continue;
    }
    const double f = frobenius_cost(norm_sq, n, sr.overlap);
    res.history.push_back(f);
    if (f * f <= floor_sq || (prev > 0.0 && (prev - f) / prev < config.epsilon)) {
      res.converged = true;
      break;
    }
    prev = f;
  }
  return res;
}

Mpo build_target(const ModelTarget& t) {
  HamiltonianSpec spec = build_model(t.model, t.n_sites, t.params);
  TargetMode mode = t.mode;
  if (mode == TargetMode::Auto) mode = t.n_sites <= 10 ? TargetMode::DenseExact : TargetMode::Propagator;
  if (mode == TargetMode::DenseExact) return mpo_from_dense(hermitian_exp(to_dense(spec), t.dt), t.mpo.cutoff);
  return build_propagator(spec, t.dt, t.mpo);
}

std::vector<double> time_ladder(double start, double dt, int rungs) {
  if (rungs <= 1 || !(dt > 0.0) || dt >= start) return {dt};
  std::vector<double> out;
  for (int i = 0; i < rungs - 1; ++i) out.push_back(start * std::pow(dt / start, static_cast<double>(i) / (rungs - 1)));
  out.push_back(dt);
  return out;
}

std::vector<double> parameter_ladder(double start, double target, double step) {
  if (!(step > 0.0)) throw ArgumentError("ladder step must be positive");
  const double gap = target - start;
  const int count = static_cast<int>(std::ceil(std::abs(gap) / step - 1e-9));
  std::vector<double> out;
  const double sign = gap >= 0 ? 1.0 : -1.0;
  for (int i = 0; i < count; ++i) out.push_back(start + sign * step * i);
  out.push_back(target);
  return out;
}

OptimizeResult optimize(const ModelTarget& target, int depth, const OptimizerConfig& config) {
  config.validate();
  std::vector<ModelTarget> rungs;
  if (config.anneal == AnnealKind::Time) {
    for (double dt : time_ladder(config.anneal_start_dt, target.dt, config.anneal_rungs)) {
      rungs.push_back(target);
      rungs.back().dt = dt;
    }
  } else if (config.anneal == AnnealKind::Parameter) {
    if (target.model != Model::ClusterIsing) throw ArgumentError("parameter anneal is defined for the cluster Ising model");
    for (double g : parameter_ladder(config.anneal_start_g, target.params.g, config.anneal_g_step)) {
      rungs.push_back(target);
      rungs.back().params.g = g;
    }
  } else {
    rungs.push_back(target);
  }
  OptimizeResult total;
  std::optional<BrickwallCircuit> seed;
  for (const auto& r : rungs) {
    OptimizeResult step = optimize(build_target(r), depth, config, seed ? &*seed : nullptr);
    seed = step.circuit;
    step.sweeps_used += total.sweeps_used;
    step.stalls += total.stalls;
    step.reseeds += total.reseeds;
    total = std::move(step);
  }
  return total;
}

}  // namespace bwc
