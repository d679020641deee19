#include <doctest.h>

#include <cmath>

#include "bwc/errors.hpp"
#include "bwc/optimizer.hpp"
#include "support.hpp"

using namespace bwc;

namespace {

BrickwallCircuit random_circuit(std::mt19937_64& rng, int n, int m) {
  BrickwallCircuit c(n, m);
  for (auto& layer : c.layers)
    for (auto& g : layer) g = testing::haar_unitary(rng, 4);
  return c;
}

Mpo random_mpo(std::mt19937_64& rng, int n, std::size_t chi) {
  std::vector<DenseTensor> t;
  for (int j = 0; j < n; ++j) {
    std::size_t l = j == 0 ? 1 : chi, r = j == n - 1 ? 1 : chi;
    t.push_back(testing::random_tensor(rng, {l, 2, 2, r}));
  }
  return Mpo(t);
}

void build_all(EnvironmentCache& cache, const BrickwallCircuit& c) {
  for (int j = 0; j < c.n_sites; ++j) extend_environment(cache, c, Direction::Left, j);
  for (int j = c.n_sites - 1; j >= 0; --j) extend_environment(cache, c, Direction::Right, j);
}

double block_gap(const LabeledTensor& a, const LabeledTensor& b) {
  return (arrange(a, b.labels) - b.t).max_abs();
}

cplx dense_overlap(const Mpo& m, const BrickwallCircuit& c) {
  return (m.to_dense().matrix().adjoint() * circuit_dense(c).matrix()).trace();
}

}  // namespace

TEST_CASE("init_circuit strategies") {
  std::mt19937_64 rng(31);
  BrickwallCircuit zero = init_circuit(7, 4, InitStrategy::NearIdentity, 0.0, rng);
  for (const auto& layer : zero.layers)
    for (const auto& g : layer) CHECK((g - MatrixXc::Identity(4, 4)).cwiseAbs().maxCoeff() == 0.0);

  BrickwallCircuit sk = init_circuit(6, 6, InitStrategy::SwapSkeleton, 0.0, rng);
  MatrixXc p = circuit_dense(sk).matrix();
  bool permutation = true;
  for (int i = 0; i < p.rows(); ++i) {
    int ones = 0;
    for (int j = 0; j < p.cols(); ++j) {
      if (std::abs(p(i, j) - 1.0) < 1e-14) ++ones;
      else if (std::abs(p(i, j)) > 1e-14) permutation = false;
    }
    permutation = permutation && ones == 1;
  }
  CHECK(permutation);
  // SWAPs sit in layers 1, 3, 5 and undo each other over the full depth
  int swaps = 0;
  for (const auto& layer : sk.layers)
    for (const auto& g : layer) swaps += std::abs(g(1, 2) - 1.0) < 1e-15 ? 1 : 0;
  CHECK(swaps == 6);
  CHECK((p - MatrixXc::Identity(64, 64)).cwiseAbs().maxCoeff() < 1e-15);

  double worst = 0.0;
  for (int s = 0; s < 1000; ++s) {
    BrickwallCircuit c = init_circuit(3, 1, InitStrategy::NearIdentity, 0.01, rng);
    worst = std::max(worst, testing::op_norm(c.layers[0][0] - MatrixXc::Identity(4, 4)));
    CHECK(unitarity_defect(c.layers[0][0]) < 1e-12);
  }
  CHECK(worst < 0.1);

  std::mt19937_64 a(5), b(5);
  auto ca = init_circuit(6, 3, InitStrategy::NearIdentity, 0.01, a);
  auto cb = init_circuit(6, 3, InitStrategy::NearIdentity, 0.01, b);
  CHECK((circuit_dense(ca) - circuit_dense(cb)).max_abs() == 0.0);
  CHECK_THROWS_AS(init_circuit(6, 3, InitStrategy::Explicit, 0.0, rng), ArgumentError);
  CHECK_THROWS_AS(parse_init("random"), ArgumentError);
}

TEST_CASE("environment blocks match from-scratch contractions") {
  std::mt19937_64 rng(32);
  {
    BrickwallCircuit c(6, 3);
    Mpo id = identity_mpo(6);
    EnvironmentCache cache(id, 3);
    build_all(cache, c);
    for (int j = 0; j < 6; ++j) {
      CHECK(block_gap(cache.left(j), block_from_scratch(cache, c, Direction::Left, j)) < 1e-12);
      CHECK(block_gap(cache.right(j), block_from_scratch(cache, c, Direction::Right, j)) < 1e-12);
    }
  }
  for (int depth : {1, 2, 3, 4}) {
    BrickwallCircuit c = random_circuit(rng, 6, depth);
    Mpo m = random_mpo(rng, 6, 3);
    EnvironmentCache cache(m, depth);
    build_all(cache, c);
    for (int j = 0; j < 6; ++j) {
      LabeledTensor l = block_from_scratch(cache, c, Direction::Left, j);
      LabeledTensor r = block_from_scratch(cache, c, Direction::Right, j);
      CHECK(block_gap(cache.left(j), l) < 1e-12 * std::max(1.0, l.t.max_abs()));
      CHECK(block_gap(cache.right(j), r) < 1e-12 * std::max(1.0, r.t.max_abs()));
      // storage bound chi * d^(2 ceil(M/2))
      CHECK(cache.block_entries(j, true) <= 3 * (std::size_t{1} << (2 * ((depth + 1) / 2))));
    }
    // the full left block is the overlap itself
    cplx tr = cache.left(5).t[0];
    cplx ref = dense_overlap(m, c);
    CHECK(std::abs(tr - ref) < 1e-10 * std::abs(ref));
  }
}

TEST_CASE("cache invalidation is local") {
  std::mt19937_64 rng(33);
  BrickwallCircuit c = random_circuit(rng, 7, 3);
  Mpo m = random_mpo(rng, 7, 2);
  EnvironmentCache cache(m, 3);
  build_all(cache, c);
  std::vector<DenseTensor> before;
  for (int j = 0; j < 7; ++j) before.push_back(cache.left(j).t);
  c.gate(1, 4) = testing::haar_unitary(rng, 4);
  cache.invalidate_bond(4);
  for (int j = 0; j <= 4; ++j) {
    REQUIRE(cache.left_valid(j));
    CHECK((cache.left(j).t - before[j]).max_abs() == 0.0);
  }
  for (int j = 5; j < 7; ++j) CHECK_FALSE(cache.left_valid(j));
  for (int j = 0; j <= 4; ++j) CHECK_FALSE(cache.right_valid(j));
  CHECK(cache.right_valid(5));
  CHECK_THROWS_AS(extend_environment(cache, c, Direction::Left, 6), StalenessError);
  CHECK_THROWS_AS(cache.right(2), StalenessError);
}

TEST_CASE("gate environments") {
  std::mt19937_64 rng(34);
  SUBCASE("perfect overlap") {
    BrickwallCircuit c = random_circuit(rng, 6, 3);
    Mpo m = brickwall_to_mpo(c);
    EnvironmentCache cache(m, 3);
    build_all(cache, c);
    for (int l = 1; l <= 4; ++l)
      for (int mm = 1; mm <= 3; ++mm) {
        int b = c.gate_bond_at(mm, l);
        if (b < 0) continue;
        MatrixXc env = gate_environment(cache, c, l, mm, b);
        CHECK(std::abs((env.adjoint() * c.gate(mm, b)).trace() - cplx(64.0)) < 1e-10);
      }
  }
  SUBCASE("dense trace and linearity") {
    for (int inst = 0; inst < 5; ++inst) {
      BrickwallCircuit c = random_circuit(rng, 6, 2);
      Mpo m = random_mpo(rng, 6, 3);
      EnvironmentCache cache(m, 2);
      build_all(cache, c);
      cplx ref = dense_overlap(m, c);
      for (int l = 1; l <= 4; ++l)
        for (int mm = 1; mm <= 2; ++mm) {
          int b = c.gate_bond_at(mm, l);
          if (b < 0) continue;
          MatrixXc env = gate_environment(cache, c, l, mm, b);
          CHECK(std::abs((env.adjoint() * c.gate(mm, b)).trace() - ref) < 1e-10 * std::abs(ref));
          BrickwallCircuit c2 = c;
          MatrixXc g2 = testing::haar_unitary(rng, 4);
          c2.gate(mm, b) = g2;
          cplx ref2 = dense_overlap(m, c2);
          CHECK(std::abs(ref2 - ref - (env.adjoint() * (g2 - c.gate(mm, b))).trace()) < 1e-10 * std::abs(ref));
        }
    }
  }
  BrickwallCircuit c(5, 2);
  EnvironmentCache cache(identity_mpo(5), 2);
  CHECK_THROWS_AS(gate_environment(cache, c, 1, 1, 0), StalenessError);
  build_all(cache, c);
  CHECK_THROWS_AS(gate_environment(cache, c, 1, 1, 2), ArgumentError);
  CHECK_THROWS_AS(gate_environment(cache, c, 0, 1, 0), ArgumentError);
}

TEST_CASE("update_gate") {
  std::mt19937_64 rng(35);
  BrickwallCircuit c(4, 2);
  MatrixXc u = testing::haar_unitary(rng, 4);
  REQUIRE(update_gate(c, 1, 0, u));
  CHECK((c.gate(1, 0) - u).cwiseAbs().maxCoeff() < 1e-14);
  REQUIRE(update_gate(c, 1, 2, 2.0 * MatrixXc::Identity(4, 4)));
  CHECK((c.gate(1, 2) - MatrixXc::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-15);
  for (int s = 0; s < 1000; ++s) {
    MatrixXc env = testing::random_matrix(rng, 4, 4);
    MatrixXc old = testing::haar_unitary(rng, 4);
    c.gate(2, 1) = old;
    REQUIRE(update_gate(c, 2, 1, env));
    CHECK((env.adjoint() * c.gate(2, 1)).trace().real() >= (env.adjoint() * old).trace().real() - 1e-12);
  }
  MatrixXc singular = MatrixXc::Zero(4, 4);
  singular(0, 0) = 1.0;
  c.gate(2, 1) = u;
  CHECK_FALSE(update_gate(c, 2, 1, singular));
  CHECK((c.gate(2, 1) - u).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("sweeps") {
  std::mt19937_64 rng(36);
  SUBCASE("already optimal") {
    BrickwallCircuit c = random_circuit(rng, 6, 3);
    Mpo m = brickwall_to_mpo(c);
    EnvironmentCache cache(m, 3);
    BrickwallCircuit c2 = c;
    SweepResult r = sweep(c2, cache);
    CHECK(frobenius_cost(trace_product(m, m).real(), 6, r.overlap) < 1e-6);
    for (int mm = 1; mm <= 3; ++mm)
      for (int k = 0; k < c.gates_in_layer(mm); ++k)
        CHECK((c.layers[mm - 1][k] - c2.layers[mm - 1][k]).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("cost matches the dense norm") {
    auto h = build_model("cluster_ising", 6, {.g = -0.75});
    Mpo m = mpo_from_dense(hermitian_exp(to_dense(h), 0.2), 0.0);
    std::mt19937_64 r2(1);
    BrickwallCircuit c = init_circuit(6, 3, InitStrategy::NearIdentity, 0.01, r2);
    EnvironmentCache cache(m, 3);
    const double nsq = trace_product(m, m).real();
    MatrixXc md = m.to_dense().matrix();
    for (int s = 0; s < 3; ++s) {
      SweepResult r = sweep(c, cache);
      double dense = (md - circuit_dense(c).matrix()).norm();
      CHECK(std::abs(frobenius_cost(nsq, 6, r.overlap) - dense) < 1e-8);
    }
  }
  SUBCASE("monotone with unitary gates") {
    auto h = build_model("cluster_ising", 8, {.g = -0.75});
    Mpo m = build_target({Model::ClusterIsing, 8, {.g = -0.75}, 0.1});
    std::mt19937_64 r2(2);
    BrickwallCircuit c = init_circuit(8, 3, InitStrategy::NearIdentity, 0.01, r2);
    EnvironmentCache cache(m, 3);
    double worst_drop = 0.0, worst_defect = 0.0;
    double last = -std::numeric_limits<double>::infinity();
    bool sweep_monotone = true;
    auto obs = [&](const UpdateEvent& e) {
      worst_drop = std::max(worst_drop, e.overlap_before - e.overlap_after);
      worst_defect = std::max(worst_defect, e.unitarity_defect);
    };
    for (int s = 0; s < 20; ++s) {
      SweepResult r = sweep(c, cache, obs);
      sweep_monotone = sweep_monotone && r.overlap >= last - 1e-10;
      last = r.overlap;
    }
    CHECK(sweep_monotone);
    CHECK(worst_drop <= 1e-10);
    CHECK(worst_defect <= 1e-12);
  }
}

TEST_CASE("ladders") {
  auto t = time_ladder(1.0, 0.1, 6);
  REQUIRE(t.size() == 6);
  CHECK(t.front() == 1.0);
  CHECK(t.back() == 0.1);
  for (std::size_t i = 1; i < t.size(); ++i) CHECK(std::abs(t[i] / t[i - 1] - std::pow(0.1, 0.2)) < 1e-12);
  CHECK(time_ladder(1.0, 1.5, 6).size() == 1);
  CHECK(time_ladder(1.0, 0.0, 6).size() == 1);
  auto g = parameter_ladder(-1.0, -0.75, 0.05);
  REQUIRE(g.size() == 6);
  CHECK(g.front() == -1.0);
  CHECK(g.back() == -0.75);
  CHECK(std::abs(g[1] + 0.95) < 1e-12);
  CHECK(parameter_ladder(-1.0, -1.0, 0.05).size() == 1);
}

TEST_CASE("optimize") {
  SUBCASE("identity target") {
    OptimizerConfig cfg;
    cfg.seed = 3;
    ModelTarget t{Model::ClusterIsing, 8, {.g = -0.75}, 0.0};
    Mpo m = build_target(t);
    OptimizeResult r = optimize(m, 3, cfg);
    CHECK(r.converged);
    CHECK(r.sweeps_used <= 2);
    double tr = trace_product(m, brickwall_to_mpo(r.circuit)).real();
    double delta = std::sqrt(std::max(0.0, -2.0 * std::expm1(std::log(tr / 256.0) / 8.0)));
    CHECK(delta <= 1e-8);
  }
  SUBCASE("deterministic and annealed") {
    OptimizerConfig cfg;
    cfg.seed = 4;
    cfg.max_sweeps = 30;
    ModelTarget t{Model::Pxp, 6, {}, 0.3};
    OptimizeResult a = optimize(t, 3, cfg), b = optimize(t, 3, cfg);
    CHECK(a.history == b.history);
    CHECK(a.initial_cost > a.history.back());
    cfg.anneal = AnnealKind::Time;
    cfg.max_sweeps = 10;
    OptimizeResult c = optimize(t, 3, cfg);
    CHECK(c.sweeps_used > 10);
    cfg.anneal = AnnealKind::Parameter;
    CHECK_THROWS_AS(optimize(t, 3, cfg), ArgumentError);
    t.model = Model::ClusterIsing;
    OptimizeResult d = optimize(t, 3, cfg);
    CHECK(d.sweeps_used > 10);
  }
  OptimizerConfig bad;
  bad.epsilon = 0.0;
  CHECK_THROWS_AS(bad.validate(), ArgumentError);
}
