// Acceptance checks. Prints one PASS/FAIL line per criterion; tolerances are
// fixed below. Usage: acceptance [criterion ...]   (no argument runs all)

#include <algorithm>
#include <cstdarg>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "bwc/compile.hpp"
#include "bwc/metrics.hpp"
#include "bwc/optimizer.hpp"

using namespace bwc;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void check(bool ok, const char* fmt, ...) __attribute__((format(printf, 3, 4)));
};

void Outcome::check(bool ok, const char* fmt, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, fmt);
  std::vsnprintf(buf, sizeof buf, fmt, ap);
  va_end(ap);
  if (!detail.empty()) detail += "; ";
  detail += buf;
  if (!ok) {
    detail += " [miss]";
    pass = false;
  }
}

bool within(double v, double ref, double rel) { return std::abs(v - ref) <= rel * std::abs(ref); }

ModelTarget model_target(Model m, int n, double dt, ModelParams p = {}) {
  ModelTarget t;
  t.model = m;
  t.n_sites = n;
  t.params = p;
  t.dt = dt;
  return t;
}

ModelParams ci(double g) {
  ModelParams p;
  p.g = g;
  return p;
}

// How each model is optimized in these checks.
OptimizerConfig model_config(Model m, std::uint64_t seed) {
  OptimizerConfig c;
  c.seed = seed;
  if (m == Model::Pxp) c.anneal = AnnealKind::Time;
  if (m == Model::Nnni) c.init = InitStrategy::SwapSkeleton;
  return c;
}

constexpr int kSeeds = 5;

struct Best {
  double delta = 1e300;
  OptimizeResult result;
};

Best best_of_seeds(const ModelTarget& t, int depth, int seeds = kSeeds) {
  Mpo target = build_target(t);
  Best b;
  for (int s = 0; s < seeds; ++s) {
    OptimizeResult r = optimize(t, depth, model_config(t.model, 1000 + s));
    double d = error_density(target, r.circuit);
    if (d < b.delta) {
      b.delta = d;
      b.result = std::move(r);
    }
  }
  return b;
}

double trotter_delta(Model m, int n, double dt, int order, ModelParams p = {}) {
  auto t = model_target(m, n, dt, p);
  auto h = build_model(m, n, p);
  return error_density(build_target(t), trotter_circuit(h, dt, order));
}

MatrixXc random_unitary(std::mt19937_64& rng, int d) {
  std::normal_distribution<double> nd;
  MatrixXc z(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) z(i, j) = cplx(nd(rng), nd(rng));
  Eigen::HouseholderQR<MatrixXc> qr(z);
  MatrixXc q = qr.householderQ();
  MatrixXc r = qr.matrixQR();
  for (int k = 0; k < d; ++k) q.col(k) *= r(k, k) / std::abs(r(k, k));
  return q;
}

BrickwallCircuit perturbed_circuit(std::mt19937_64& rng, int n, int m, double s) {
  std::normal_distribution<double> nd;
  BrickwallCircuit c(n, m);
  for (auto& layer : c.layers)
    for (auto& g : layer) {
      MatrixXc h(4, 4);
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) h(i, j) = cplx(nd(rng), nd(rng));
      g = polar_unitary(MatrixXc(MatrixXc::Identity(4, 4) + s * h));
    }
  return c;
}

// ---------------------------------------------------------------------------

Outcome c1_unitarity() {
  Outcome o;
  auto t = model_target(Model::ClusterIsing, 8, 0.1, ci(-0.75));
  OptimizerConfig cfg;
  cfg.epsilon = 1e-300;  // run the full 50 sweeps
  cfg.max_sweeps = 50;
  double worst = 0.0;
  long updates = 0;
  cfg.observer = [&](const UpdateEvent& e) {
    worst = std::max(worst, e.unitarity_defect);
    ++updates;
  };
  OptimizeResult r = optimize(build_target(t), 3, cfg);
  o.check(r.sweeps_used == 50, "sweeps %d (50)", r.sweeps_used);
  o.check(worst <= 1e-12, "max ||G^dag G - I||_max = %.3e over %ld updates (<= 1e-12)", worst, updates);
  return o;
}

Outcome c2_monotonicity() {
  Outcome o;
  const std::pair<Model, int> runs[] = {{Model::ClusterIsing, 3}, {Model::Pxp, 4}, {Model::Nnni, 6}};
  for (auto [m, depth] : runs) {
    auto t = model_target(m, 8, 0.1);
    OptimizerConfig cfg = model_config(m, 1000);
    double worst = 0.0;
    long updates = 0;
    cfg.observer = [&](const UpdateEvent& e) {
      worst = std::max(worst, e.overlap_before - e.overlap_after);
      ++updates;
    };
    optimize(t, depth, cfg);
    o.check(worst <= 1e-10, "%s M=%d largest decrease %.3e over %ld updates", model_name(m).c_str(), depth, worst,
            updates);
  }
  return o;
}

Outcome c3_propagator() {
  Outcome o;
  auto h = build_model(Model::ClusterIsing, 8, ci(-0.75));
  MatrixXc exact = hermitian_exp(to_dense(h).matrix(), 0.1);
  PropagatorOptions opt;  // 100 substeps, cutoff 1e-16
  Mpo m = build_propagator(h, 0.1, opt);
  const double scale = std::sqrt(256.0);
  double err = (m.to_dense().matrix() - exact).norm() / scale;
  MatrixXc product = layered_dense(trotter_circuit(h, 0.1 / opt.substeps, 2)).matrix();
  MatrixXc power = MatrixXc::Identity(256, 256);
  for (int s = 0; s < opt.substeps; ++s) power = product * power;
  double trunc = (m.to_dense().matrix() - power).norm() / scale;
  o.check(err <= 1e-8, "||dense(MPO) - exp(-i dt H)||_F / 2^{N/2} = %.3e (<= 1e-8)", err);
  o.check(true, "truncation alone (MPO vs dense product formula) %.3e", trunc);
  return o;
}

Outcome c4_table() {
  Outcome o;
  const double dt = 0.1;
  double d;
  d = trotter_delta(Model::ClusterIsing, 8, dt, 1, ci(-0.75));
  o.check(within(d, 3.03e-2, 0.05), "CI trotter k=1 %.4e (3.03e-2 +-5%%)", d);
  d = trotter_delta(Model::ClusterIsing, 8, dt, 2, ci(-0.75));
  o.check(within(d, 6.32e-3, 0.05), "CI trotter k=2 %.4e (6.32e-3 +-5%%)", d);
  d = best_of_seeds(model_target(Model::ClusterIsing, 8, dt, ci(-0.75)), 3).delta;
  o.check(d <= 6.1e-3, "CI BW M=3 %.4e (<= 6.1e-3)", d);
  d = trotter_delta(Model::Pxp, 8, dt, 1);
  o.check(within(d, 1.87e-3, 0.05), "PXP trotter k=1 %.4e (1.87e-3 +-5%%)", d);
  d = trotter_delta(Model::Pxp, 8, dt, 2);
  o.check(within(d, 4.23e-5, 0.05), "PXP trotter k=2 %.4e (4.23e-5 +-5%%)", d);
  d = best_of_seeds(model_target(Model::Pxp, 8, dt), 4).delta;
  o.check(d <= 1.4e-3, "PXP BW M=4 %.4e (<= 1.4e-3)", d);
  d = best_of_seeds(model_target(Model::Pxp, 8, dt), 5).delta;
  o.check(d <= 6.2e-5, "PXP BW M=5 %.4e (<= 6.2e-5)", d);
  d = trotter_delta(Model::Nnni, 8, dt, 2);
  o.check(within(d, 1.81e-3, 0.05), "NNNI trotter k=2 %.4e (1.81e-3 +-5%%)", d);
  d = best_of_seeds(model_target(Model::Nnni, 8, dt), 6).delta;
  o.check(d <= 2.1e-3, "NNNI BW M=6 swap seed %.4e (<= 2.1e-3)", d);
  return o;
}

Outcome c5_slopes() {
  Outcome o;
  const std::vector<double> grid{0.05, 0.1, 0.2, 0.4};
  auto slope_of = [&](const std::function<double(double)>& delta) {
    std::vector<std::pair<double, double>> pts;
    for (double dt : grid) pts.push_back({dt, delta(dt)});
    return fit_scaling(pts).slope;
  };
  double s1 = slope_of([](double dt) { return trotter_delta(Model::ClusterIsing, 8, dt, 1, ci(-0.75)); });
  o.check(std::abs(s1 - 2.0) <= 0.2, "CI trotter k=1 slope %.3f (2.0 +-0.2)", s1);
  double s2 = slope_of([](double dt) { return trotter_delta(Model::ClusterIsing, 8, dt, 2, ci(-0.75)); });
  o.check(std::abs(s2 - 3.0) <= 0.3, "CI trotter k=2 slope %.3f (3.0 +-0.3)", s2);
  double s3 = slope_of([](double dt) { return best_of_seeds(model_target(Model::ClusterIsing, 8, dt, ci(-0.75)), 3).delta; });
  o.check(std::abs(s3 - 3.0) <= 0.3, "CI BW M=3 slope %.3f (3.0 +-0.3)", s3);
  double s4 = slope_of([](double dt) { return best_of_seeds(model_target(Model::Pxp, 8, dt), 4).delta; });
  o.check(std::abs(s4 - 2.0) <= 0.3, "PXP BW M=4 slope %.3f (2.0 +-0.3)", s4);
  return o;
}

Outcome c6_conservation() {
  Outcome o;
  auto h = build_model(Model::Pxp, 8);
  for (int k : {1, 2}) {
    double c = pxp_constraint_commutator(layered_to_mpo(trotter_circuit(h, 0.1, k)));
    o.check(c <= 1e-12, "PXP trotter k=%d <||[V, Q_j Q_j+1]||> = %.3e (<= 1e-12)", k, c);
  }
  return o;
}

Outcome c7_cnot_layers() {
  Outcome o;
  bool brick = true;
  std::mt19937_64 rng(7);
  for (int m = 1; m <= 6; ++m) {
    BrickwallCircuit c(8, m);
    for (auto& layer : c.layers)
      for (auto& g : layer) g = random_unitary(rng, 4);
    brick = brick && cnot_layers_brickwall(m) == 3 * m && export_gatelist(c).cnot_layer_count() == 3 * m;
  }
  o.check(brick, "brickwall M=1..6 -> 3M");

  struct Row {
    const char* label;
    Model model;
    int order;
    Connectivity conn;
    double gzz;
    int table;
  };
  const Row rows[] = {{"CI k=1", Model::ClusterIsing, 1, Connectivity::Linear, 1.0, 16},
                      {"CI k=2", Model::ClusterIsing, 2, Connectivity::Linear, 1.0, 28},
                      {"PXP k=1 linear", Model::Pxp, 1, Connectivity::Linear, 1.0, 42},
                      {"PXP k=2 linear", Model::Pxp, 2, Connectivity::Linear, 1.0, 70},
                      {"PXP k=1 nnn", Model::Pxp, 1, Connectivity::NextNearest, 1.0, 24},
                      {"PXP k=2 nnn", Model::Pxp, 2, Connectivity::NextNearest, 1.0, 40},
                      {"NNNI g_zz=0", Model::Nnni, 2, Connectivity::Linear, 0.0, 13},
                      {"NNNI g_zz=1", Model::Nnni, 2, Connectivity::Linear, 1.0, 15}};
  for (const auto& r : rows) {
    ModelParams p;
    p.gzz = r.gzz;
    ExportOptions opt;
    opt.connectivity = r.conn;
    const int closed = cnot_layers_trotter(r.model, r.order, r.conn, p);
    const int n8 = export_trotter(build_model(r.model, 8, p), 0.1, r.order, opt).cnot_layer_count();
    const int n12 = export_trotter(build_model(r.model, 12, p), 0.1, r.order, opt).cnot_layer_count();
    o.check(closed == r.table && n8 == r.table && n12 == r.table, "%s closed %d, exported N=8 %d, N=12 %d (%d)",
            r.label, closed, n8, n12, r.table);
  }
  const int pxp14 = template_rpxp(0.5, Connectivity::Linear).cnot_count();
  o.check(pxp14 == 14, "R_pxp linear %d CNOTs (14)", pxp14);
  return o;
}

// Brute-force fidelities from the dense overlap W = U^dag V.
std::pair<double, double> brute_fidelities(const MatrixXc& u, const MatrixXc& v, int n) {
  MatrixXc w = u.adjoint() * v;
  const Eigen::Index d = w.rows();
  double f = 0.0;
  for (Eigen::Index s = 0; s < d; ++s) f += std::norm(w(s, s));
  double local = 0.0;
  for (int j = 0; j < n; ++j) {
    const Eigen::Index bit = Eigen::Index{1} << (n - 1 - j);
    for (Eigen::Index s = 0; s < d; ++s)
      for (Eigen::Index r = 0; r < d; ++r)
        if ((r & bit) == (s & bit)) local += std::norm(w(r, s));
  }
  return {f / d, local / d / n};
}

Outcome c8_fidelity_oracle() {
  Outcome o;
  std::mt19937_64 rng(88);
  double worst = 0.0;
  int count = 0;
  for (int n = 3; n <= 6; ++n)
    for (int i = 0; i < 20; ++i) {
      BrickwallCircuit c = perturbed_circuit(rng, n, 2 + i % 3, 0.3);
      MatrixXc u = random_unitary(rng, 1 << n);
      // mix the instances: half near the circuit, half generic
      if (i % 2 == 0) u = circuit_dense(perturbed_circuit(rng, n, 2, 0.05)).matrix() * circuit_dense(c).matrix();
      Mpo target = mpo_from_dense(DenseTensor::from_matrix(u), 0.0);
      auto [f, fl] = brute_fidelities(u, circuit_dense(c).matrix(), n);
      worst = std::max(worst, std::abs(algorithmic_fidelity(target, c) - f));
      worst = std::max(worst, std::abs(local_algorithmic_fidelity(target, c) - fl));
      ++count;
    }
  o.check(worst <= 1e-10, "max |network - basis sum| = %.3e over %d instances, N=3..6 (<= 1e-10)", worst, count);
  return o;
}

Outcome c9_bound() {
  Outcome o;
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> ud(0.05, 0.5);
  int violations = 0, checks = 0;
  double worst_margin = -1e300;
  const Model models[] = {Model::ClusterIsing, Model::Pxp, Model::Nnni};
  for (int i = 0; i < 20; ++i) {
    const Model m = models[i % 3];
    const int n = 3 + i % 4;
    const double dt = ud(rng);
    ModelParams p = ci(-1.0 + ud(rng));
    auto h = build_model(m, n, p);
    MatrixXc exact = hermitian_exp(to_dense(h).matrix(), dt);
    MatrixXc approx = layered_dense(trotter_circuit(h, dt, 1 + i % 2)).matrix();
    for (int a = 1; a <= 5; ++a) {
      BoundCheck b = infidelity_bound_check(exact, approx, a);
      ++checks;
      if (!b.holds()) ++violations;
      worst_margin = std::max(worst_margin, b.infidelity - b.bound);
    }
  }
  o.check(violations == 0, "%d/%d violations of 1 - F <= n^2 E^2 (+1e-10), max(1-F - bound) = %.3e", violations, checks,
          worst_margin);
  return o;
}

Outcome c10_decomposition() {
  Outcome o;
  using namespace pauli;
  auto pexp = [](const DenseTensor& p, double th) { return hermitian_exp(p.matrix(), th / 2); };
  double worst_t = 0.0;
  for (double th : {0.0, 0.5, -1.3, 2.2}) {
    worst_t = std::max(worst_t, phase_distance(gatelist_dense(template_rzz(th)), pexp(kron(Z(), Z()), th)));
    worst_t = std::max(worst_t, phase_distance(gatelist_dense(template_rzxz(th)), pexp(kron(kron(Z(), X()), Z()), th)));
    for (auto conn : {Connectivity::Linear, Connectivity::NextNearest})
      worst_t = std::max(worst_t, phase_distance(gatelist_dense(template_rpxp(th, conn)), pexp(kron(kron(P(), X()), P()), th)));
  }
  o.check(worst_t <= 1e-9, "templates max distance %.3e", worst_t);
  std::mt19937_64 rng(1010);
  double worst = 0.0;
  int max_cx = 0;
  for (int i = 0; i < 200; ++i) {
    MatrixXc u = random_unitary(rng, 4);
    GateList g = decompose_two_qubit(u);
    worst = std::max(worst, phase_distance(gatelist_dense(g), u));
    max_cx = std::max(max_cx, g.cnot_count());
  }
  o.check(worst <= 1e-9 && max_cx <= 3, "200 Haar gates max distance %.3e, max CNOTs %d", worst, max_cx);
  return o;
}

Outcome c11_convergence() {
  Outcome o;
  const std::vector<double> grid{0.1, 0.15, 0.2, 0.3, 0.4, 0.5};
  std::map<int, std::vector<int>> sweeps;
  for (int n : {16, 32})
    for (double dt : grid) {
      auto t = model_target(Model::ClusterIsing, n, dt, ci(-0.5));
      OptimizerConfig cfg;
      sweeps[n].push_back(optimize(build_target(t), 3, cfg).sweeps_used);
    }
  std::vector<std::pair<double, double>> pts;
  std::string counts;
  double worst_ratio = 1.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    pts.push_back({grid[i], static_cast<double>(sweeps[16][i])});
    double a = sweeps[16][i], b = sweeps[32][i];
    worst_ratio = std::max(worst_ratio, std::max(a, b) / std::max(1.0, std::min(a, b)));
    counts += (i ? " " : "") + std::to_string(sweeps[16][i]) + "/" + std::to_string(sweeps[32][i]);
  }
  const double alpha = -fit_scaling(pts).slope;
  o.check(std::abs(alpha - 2.0) <= 0.5, "alpha %.3f from N=16 sweeps (2.0 +-0.5)", alpha);
  o.check(worst_ratio <= 2.0, "N=16/N=32 sweeps %s, worst ratio %.2f (<= 2)", counts.c_str(), worst_ratio);
  auto big = model_target(Model::ClusterIsing, 64, 0.25, ci(-0.5));
  OptimizeResult r = optimize(build_target(big), 3, OptimizerConfig{});
  o.check(r.converged, "N=64 M=3 dt=0.25 converged after %d sweeps", r.sweeps_used);
  return o;
}

Outcome c12_planner() {
  Outcome o;
  const std::vector<double> grid{0.05, 0.1, 0.15, 0.2, 0.3, 0.4, 0.5, 0.6, 0.8, 1.0};
  std::vector<double> fid;
  for (double dt : grid) {
    auto t = model_target(Model::ClusterIsing, 8, dt, ci(-0.75));
    Mpo target = build_target(t);
    OptimizeResult r = optimize(target, 3, OptimizerConfig{});
    fid.push_back(algorithmic_fidelity(target, r.circuit));
  }
  FidelityTable table(grid, fid);
  double prev = 1e300;
  bool monotone = true, interior = false;
  std::string plan;
  for (double t : {1.0, 2.0, 4.0, 8.0}) {
    TimestepPlan p = plan_timestep(t, 0.03, table);
    monotone = monotone && p.dt_opt <= prev;
    interior = interior || p.interior_minimum();
    prev = p.dt_opt;
    char buf[96];
    std::snprintf(buf, sizeof buf, "%st=%g:dt=%.4g%s", plan.empty() ? "" : " ", t, p.dt_opt,
                  p.interior_minimum() ? "*" : "");
    plan += buf;
  }
  o.check(monotone, "dt_opt non-increasing (%s)", plan.c_str());
  o.check(interior, "strict interior minimum for some t (* marks)");
  return o;
}

// The injected decay eta is per circuit application, spread over its L CNOT
// layers; fits run against the application count.
Outcome c13_echo() {
  Outcome o;
  auto t = model_target(Model::ClusterIsing, 5, 0.25, ci(-0.5));
  OptimizerConfig cfg;
  cfg.seed = 1;
  OptimizeResult r = optimize(t, 3, cfg);
  const int layers = export_gatelist(r.circuit).cnot_layer_count();
  std::vector<int> counts{1, 2, 3, 4, 5, 6};
  for (double eta : {0.05, 0.2}) {
    EchoOptions opt;
    opt.eta_layer = eta / layers;
    opt.cnot_layers = layers;
    opt.shots = 8192;
    std::mt19937_64 rng(7);
    auto pts = noisy_echo(r.circuit, counts, opt, rng);
    std::vector<double> x, yg, yl;
    for (const auto& p : pts) {
      x.push_back(static_cast<double>(p.applications));
      yg.push_back(p.normalized_fidelity);
      yl.push_back(p.normalized_local_fidelity);
    }
    const double eg = fit_decay(x, yg), el = fit_decay(x, yl);
    o.check(within(eg, eta, 0.10), "eta %.2f: global fit %.4f", eta, eg);
    o.check(within(el, eta, 0.10), "eta %.2f: local fit %.4f", eta, el);
  }
  o.check(layers == 9, "L = %d CNOT layers", layers);
  return o;
}

struct Criterion {
  int id;
  const char* title;
  Outcome (*fn)();
};

const Criterion kCriteria[] = {
    {1, "unitarity after every update", c1_unitarity},
    {2, "monotone overlap per update", c2_monotonicity},
    {3, "propagator vs dense exponential", c3_propagator},
    {4, "error regression at dt=0.1", c4_table},
    {5, "scaling exponents", c5_slopes},
    {6, "exact PXP constraint conservation", c6_conservation},
    {7, "CNOT layer counts", c7_cnot_layers},
    {8, "fidelity network vs basis sums", c8_fidelity_oracle},
    {9, "infidelity bound", c9_bound},
    {10, "two-qubit decomposition", c10_decomposition},
    {11, "convergence benchmark", c11_convergence},
    {12, "time-step planner", c12_planner},
    {13, "synthetic echo self-consistency (note)", c13_echo},
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.push_back(std::atoi(argv[i]));
  int failed = 0;
  for (const auto& c : kCriteria) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.id) == wanted.end()) continue;
    auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %2d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.title, o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
