#include <doctest.h>

#include <cmath>
#include <sstream>

#include "bwc/errors.hpp"
#include "bwc/metrics.hpp"
#include "support.hpp"

using namespace bwc;

namespace {

BrickwallCircuit random_circuit(std::mt19937_64& rng, int n, int m) {
  BrickwallCircuit c(n, m);
  for (auto& layer : c.layers)
    for (auto& g : layer) g = testing::haar_unitary(rng, 4);
  return c;
}

// Gates of the form polar(I + s R): close to the identity for small s.
BrickwallCircuit near_identity(std::mt19937_64& rng, int n, int m, double s) {
  BrickwallCircuit c(n, m);
  for (auto& layer : c.layers)
    for (auto& g : layer) g = polar_unitary(MatrixXc(MatrixXc::Identity(4, 4) + s * testing::random_matrix(rng, 4, 4)));
  return c;
}

double brute_fidelity(const MatrixXc& u, const MatrixXc& v) {
  MatrixXc w = u.adjoint() * v;
  double f = 0.0;
  for (Eigen::Index i = 0; i < w.rows(); ++i) f += std::norm(w(i, i));
  return f / w.rows();
}

double brute_local_fidelity(const MatrixXc& u, const MatrixXc& v, int n) {
  MatrixXc w = u.adjoint() * v;
  const Eigen::Index d = w.rows();
  double total = 0.0;
  for (int j = 0; j < n; ++j) {
    const Eigen::Index bit = Eigen::Index{1} << (n - 1 - j);
    double f = 0.0;
    for (Eigen::Index s = 0; s < d; ++s)
      for (Eigen::Index t = 0; t < d; ++t)
        if ((s & bit) == (t & bit)) f += std::norm(w(t, s));
    total += f / d;
  }
  return total / n;
}

double dense_commutator(const MatrixXc& v, const MatrixXc& o) { return (v * o - o * v).norm() / o.norm(); }

}  // namespace

TEST_CASE("error density") {
  std::mt19937_64 rng(31);
  BrickwallCircuit c = random_circuit(rng, 6, 3);
  Mpo m = brickwall_to_mpo(c);
  CHECK(error_density(m, c) < 1e-7);
  // matches the closed form against a dense trace
  BrickwallCircuit d = near_identity(rng, 6, 3, 0.05);
  Mpo md = brickwall_to_mpo(d);
  double ref = std::sqrt(2.0 - std::pow(trace_product(md, m).real(), 1.0 / 6));
  CHECK(std::abs(error_density(md, c) - ref) < 1e-10);
  // anti-aligned circuit: Re Tr = -2^N
  BrickwallCircuit neg(4, 1);
  neg.layers[0][0] = -MatrixXc::Identity(4, 4);
  CHECK_THROWS_AS(error_density(identity_mpo(4), neg), NumericalError);
}

TEST_CASE("commutator norms") {
  std::mt19937_64 rng(32);
  auto h = build_model("cluster_ising", 6, {.g = -0.75});
  Mpo hm = to_mpo(h);
  CHECK(commutator_norm(identity_mpo(6), hm) == doctest::Approx(0.0));
  MatrixXc hd = to_dense(h).matrix();
  for (int k = 0; k < 3; ++k) {
    BrickwallCircuit c = random_circuit(rng, 6, 1 + k);
    MatrixXc v = circuit_dense(c).matrix();
    double ref = dense_commutator(v, hd);
    CHECK(std::abs(commutator_norm(c, hm) - ref) < 1e-10);
    CHECK(std::abs(commutator_norm_trace_identity(brickwall_to_mpo(c), hm) - ref) < 1e-10);
    CHECK(std::abs(commutator_norm(c, hm, false) - (v * hd - hd * v).norm()) < 1e-9);
  }
  // the exact propagator commutes with its generator
  Mpo u = mpo_from_dense(DenseTensor::from_matrix(hermitian_exp(hd, 0.3)), 0.0);
  CHECK(commutator_norm(u, hm) < 1e-12);
  // a near-commuting pair: the difference route stays accurate
  BrickwallCircuit small = near_identity(rng, 8, 2, 1e-7);
  auto h8 = build_model("cluster_ising", 8, {.g = -0.75});
  MatrixXc v8 = circuit_dense(small).matrix(), h8d = to_dense(h8).matrix();
  double ref8 = dense_commutator(v8, h8d);
  CHECK(std::abs(commutator_norm(small, to_mpo(h8)) - ref8) < 1e-10 * std::max(1.0, ref8) + 1e-14);
}

TEST_CASE("trotter circuits of the constrained model keep Q_j Q_j+1") {
  auto h = build_model("pxp", 8);
  for (int order : {1, 2}) {
    Mpo v = layered_to_mpo(trotter_circuit(h, 0.3, order));
    CHECK(pxp_constraint_commutator(v) <= 1e-12);
  }
  // a generic circuit does not
  std::mt19937_64 rng(33);
  CHECK(pxp_constraint_commutator(brickwall_to_mpo(random_circuit(rng, 8, 2))) > 1e-2);
  MatrixXc qq = kron(pauli::Q(), pauli::Q()).matrix();
  CHECK((bond_operator_mpo(qq, 2, 5).to_dense() - pad_operator(DenseTensor::from_matrix(qq), 2, 5)).max_abs() < 1e-14);
}

TEST_CASE("algorithmic fidelities match basis sums") {
  std::mt19937_64 rng(34);
  for (int inst = 0; inst < 20; ++inst) {
    const int n = 3 + inst % 4;
    BrickwallCircuit c = near_identity(rng, n, 1 + inst % 4, inst % 2 ? 0.3 : 3.0);
    MatrixXc u = testing::haar_unitary(rng, 1 << n);
    if (inst % 3 == 0) u = circuit_dense(near_identity(rng, n, 2, 0.2)).matrix();
    Mpo target = mpo_from_dense(DenseTensor::from_matrix(u), 0.0);
    MatrixXc v = circuit_dense(c).matrix();
    CHECK(std::abs(algorithmic_fidelity(target, c) - brute_fidelity(u, v)) < 1e-10);
    CHECK(std::abs(local_algorithmic_fidelity(target, c) - brute_local_fidelity(u, v, n)) < 1e-10);
  }
  BrickwallCircuit c = random_circuit(rng, 5, 3);
  Mpo m = brickwall_to_mpo(c);
  CHECK(algorithmic_fidelity(m, c) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(local_algorithmic_fidelity(m, c) == doctest::Approx(1.0).epsilon(1e-10));
  // local fidelity never falls below the global one
  BrickwallCircuit d = near_identity(rng, 5, 3, 0.4);
  CHECK(local_algorithmic_fidelity(m, d) >= algorithmic_fidelity(m, d));
}

TEST_CASE("infidelity bound") {
  std::mt19937_64 rng(35);
  const char* models[] = {"cluster_ising", "pxp", "nnni"};
  std::uniform_real_distribution<double> udt(0.05, 0.5);
  for (int inst = 0; inst < 20; ++inst) {
    const int n = 4 + inst % 3;
    auto h = build_model(models[inst % 3], n);
    const double dt = udt(rng);
    MatrixXc exact = hermitian_exp(to_dense(h).matrix(), dt);
    MatrixXc approx = layered_dense(trotter_circuit(h, dt, 1 + inst % 2)).matrix();
    for (int apps = 1; apps <= 5; ++apps) {
      BoundCheck b = infidelity_bound_check(exact, approx, apps);
      CHECK(b.holds());
      CHECK(b.infidelity >= -1e-12);
    }
  }
  MatrixXc u = testing::haar_unitary(rng, 16);
  BoundCheck same = infidelity_bound_check(u, u, 3);
  CHECK(std::abs(same.infidelity) < 1e-12);
  CHECK(same.bound == 0.0);
  CHECK_THROWS_AS(infidelity_bound_check(MatrixXc::Identity(2048, 2048), MatrixXc::Identity(2048, 2048)), CapacityError);
}

TEST_CASE("timestep planning") {
  FidelityTable table({0.05, 0.1, 0.2, 0.4}, {1 - 1e-8, 1 - 6.4e-7, 1 - 4.1e-5, 1 - 2.6e-3});
  // exact at nodes, log-log between
  CHECK(table(0.1) == doctest::Approx(1 - 6.4e-7).epsilon(1e-14));
  CHECK(1 - table(std::sqrt(0.1 * 0.2)) == doctest::Approx(std::sqrt(6.4e-7 * 4.1e-5)).epsilon(1e-9));
  CHECK_THROWS_AS(table(0.5), ArgumentError);

  auto p0 = plan_timestep(1.0, 0.0, table);
  CHECK(p0.dt_opt == doctest::Approx(0.05));
  FidelityTable perfect({0.05, 0.4}, {1.0, 1.0});
  auto pp = plan_timestep(1.0, 0.03, perfect);
  CHECK(pp.n_opt == 3);  // dt = 1/3, the largest step inside the table

  // scaling the infidelity model leaves the argmin alone when eta = 0
  std::vector<int> grid{2, 3, 4, 5, 6, 8, 10};
  auto model = [](double s) { return [s](double dt) { return 1.0 - s * std::pow(dt, 6); }; };
  CHECK(plan_timestep(1.0, 0.0, model(1.0), grid).n_opt == plan_timestep(1.0, 0.0, model(7.0), grid).n_opt);

  // noise pushes toward fewer steps, errors toward more
  auto mid = plan_timestep(2.0, 0.03, [](double dt) { return 1.0 - 0.05 * std::pow(dt, 6); }, {1, 2, 3, 4, 5, 6, 8, 10, 20});
  CHECK(mid.interior_minimum());
  auto big = plan_timestep(1.0, 0.0, [](double) { return 0.5; }, {1, 2});
  CHECK(big.rows[1].clamped);
  CHECK(big.rows[1].infidelity == 1.0);
  CHECK_THROWS_AS(plan_timestep(1.0, 0.0, model(1.0), {}), ArgumentError);
  CHECK_THROWS_AS(plan_timestep(100.0, 0.0, table, 10), ArgumentError);
  CHECK_THROWS_AS(plan_timestep(-1.0, 0.0, model(1.0), grid), ArgumentError);
}

TEST_CASE("scaling fits") {
  std::vector<std::pair<double, double>> cube, sq;
  for (double dt : {0.05, 0.1, 0.2, 0.4}) {
    cube.push_back({dt, dt * dt * dt});
    sq.push_back({dt, 7 * dt * dt});
  }
  auto f3 = fit_scaling(cube);
  CHECK(f3.slope == doctest::Approx(3.0));
  CHECK(f3.r2 == doctest::Approx(1.0));
  auto f2 = fit_scaling(sq);
  CHECK(f2.slope == doctest::Approx(2.0));
  CHECK(f2.intercept == doctest::Approx(std::log(7.0)));
  CHECK_THROWS_AS(fit_scaling({{0.1, 1.0}, {0.2, 0.0}, {0.3, 1.0}}), ArgumentError);
  CHECK_THROWS_AS(fit_scaling({{0.1, 1.0}, {0.2, 2.0}}), ArgumentError);
  CHECK(fit_decay({0, 2, 4, 6}, {1.0, std::exp(-0.4), std::exp(-0.8), std::exp(-1.2)}) == doctest::Approx(0.2));
}

TEST_CASE("noisy echo") {
  std::mt19937_64 rng(36);
  auto h = build_model("cluster_ising", 5, {.g = -0.5});
  LayeredCircuit c = trotter_circuit(h, 0.25, 2);
  EchoOptions clean;
  clean.cnot_layers = 10;
  clean.shots = 512;
  for (const auto& pt : noisy_echo(c, {0, 1, 3}, clean, rng)) {
    CHECK(pt.normalized_fidelity >= 0.99);
    CHECK(pt.normalized_local_fidelity >= 0.99);
  }
  EchoOptions noisy = clean;
  noisy.eta_layer = 0.05;
  auto pts = noisy_echo(c, {1, 4}, noisy, rng);
  CHECK(pts[0].applications == 2);
  CHECK(pts[1].applications == 8);
  CHECK(pts[1].normalized_fidelity < pts[0].normalized_fidelity);
  CHECK(pts[1].local_fidelity >= pts[1].fidelity);

  // same generator state, same samples
  std::mt19937_64 a(5), b(5);
  auto ra = noisy_echo(c, {2}, noisy, a), rb = noisy_echo(c, {2}, noisy, b);
  CHECK(ra[0].fidelity == rb[0].fidelity);

  LayeredCircuit wide{13, {{}}, 0, 0};
  CHECK_THROWS_AS(noisy_echo(wide, {1}, clean, rng), CapacityError);
}

TEST_CASE("metrics report csv") {
  std::mt19937_64 rng(37);
  auto h = build_model("cluster_ising", 6, {.g = -0.75});
  BrickwallCircuit c = random_circuit(rng, 6, 2);
  MetricsReport r = evaluate(brickwall_to_mpo(c), c, to_mpo(h), 0.1);
  CHECK(r.delta < 1e-7);
  CHECK(r.fidelity == doctest::Approx(1.0));
  r.sweeps_used = 12;
  r.converged = true;
  std::ostringstream os;
  write_metrics_csv(os, {r});
  std::string text = os.str();
  CHECK(text.rfind("dt,depth,delta,energy_commutator,fidelity,local_fidelity,sweeps,converged\n", 0) == 0);
  CHECK(text.find("0.10000000000000001,2,") != std::string::npos);
  CHECK(text.substr(text.size() - 9) == ",12,true\n");
}
