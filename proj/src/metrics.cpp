#include "bwc/metrics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <sstream>

#include "bwc/errors.hpp"
#include "bwc/optimizer.hpp"

namespace bwc {

namespace {

constexpr double kFidelityWindow = 1e-10;

double clamp_fidelity(double f, const char* what) {
  if (!std::isfinite(f) || f < -kFidelityWindow || f > 1.0 + kFidelityWindow)
    throw NumericalError(std::string(what) + " outside [0, 1]: " + std::to_string(f));
  return std::clamp(f, 0.0, 1.0);
}

// Slices M_{oi}[a, b] of an MPO site tensor (a, o, i, b).
std::vector<MatrixXc> site_slices(const DenseTensor& w) {
  const std::size_t a = w.extent(0), d = w.extent(1), b = w.extent(3);
  std::vector<MatrixXc> out(d * d, MatrixXc(a, b));
  for (std::size_t l = 0; l < a; ++l)
    for (std::size_t o = 0; o < d; ++o)
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t r = 0; r < b; ++r) out[o * d + i](l, r) = w[((l * d + o) * d + i) * b + r];
  return out;
}

// Left carry through one site; `diagonal` keeps only o == i (the delta tensor).
MatrixXc push_left(const MatrixXc& carry, const DenseTensor& w, bool diagonal) {
  const std::size_t d = w.extent(1);
  auto m = site_slices(w);
  MatrixXc out = MatrixXc::Zero(w.extent(3), w.extent(3));
  for (std::size_t o = 0; o < d; ++o)
    for (std::size_t i = 0; i < d; ++i) {
      if (diagonal && o != i) continue;
      const MatrixXc& s = m[o * d + i];
      out.noalias() += s.transpose() * carry * s.conjugate();
    }
  return out;
}

MatrixXc push_right(const MatrixXc& carry, const DenseTensor& w, bool diagonal) {
  const std::size_t d = w.extent(1);
  auto m = site_slices(w);
  MatrixXc out = MatrixXc::Zero(w.extent(0), w.extent(0));
  for (std::size_t o = 0; o < d; ++o)
    for (std::size_t i = 0; i < d; ++i) {
      if (diagonal && o != i) continue;
      const MatrixXc& s = m[o * d + i];
      out.noalias() += s * carry * s.adjoint();
    }
  return out;
}

Mpo difference_operator(const Mpo& target, const Mpo& circuit) {
  if (target.n_sites() != circuit.n_sites()) throw DimensionError("MPO size mismatch");
  return mpo_product(target.adjoint(), circuit);
}

}  // namespace

namespace {

double density_from_trace(double re, double n) {
  if (!(re > 0.0)) throw NumericalError("error density undefined: Re Tr = " + std::to_string(re));
  // 2 - re^{1/N} written to keep precision near re = 2^N
  double arg = -2.0 * std::expm1((std::log(re) - n * std::log(2.0)) / n);
  if (arg < 0.0) {
    if (arg < -1e-12) throw NumericalError("error density argument negative: " + std::to_string(arg));
    arg = 0.0;
  }
  return std::sqrt(arg);
}

}  // namespace

double error_density(const Mpo& target, const Mpo& circuit) {
  return density_from_trace(trace_product(target, circuit).real(), static_cast<double>(target.n_sites()));
}

// Contracting the gates directly avoids the rounding of the SVD splits, which
// sets a floor near 1e-8 on delta otherwise.
double error_density(const Mpo& target, const BrickwallCircuit& c) {
  if (static_cast<int>(target.n_sites()) != c.n_sites) throw DimensionError("circuit and target sizes differ");
  return density_from_trace(circuit_overlap(target, c).real(), static_cast<double>(c.n_sites));
}

double error_density(const Mpo& target, const LayeredCircuit& c) { return error_density(target, layered_to_mpo(c)); }

double commutator_norm(const Mpo& v, const Mpo& op, bool normalize) {
  Mpo diff = mpo_sum(mpo_product(v, op), mpo_product(op, v), 1.0, -1.0);
  double c = mpo_frobenius_norm(diff);
  if (!normalize) return c;
  double o = mpo_frobenius_norm(op);
  if (o == 0.0) throw ArgumentError("commutator with a zero operator");
  return c / o;
}

double commutator_norm(const BrickwallCircuit& c, const Mpo& op, bool normalize) {
  return commutator_norm(brickwall_to_mpo(c), op, normalize);
}

double commutator_norm(const LayeredCircuit& c, const Mpo& op, bool normalize) {
  return commutator_norm(layered_to_mpo(c), op, normalize);
}

double commutator_norm_trace_identity(const Mpo& v, const Mpo& op, bool normalize) {
  const double oo = trace_product(op, op).real();
  const double cross = trace_product(op, mpo_product(v.adjoint(), mpo_product(op, v))).real();
  double sq = 2.0 * oo - 2.0 * cross;
  if (sq < 0.0) {
    if (sq < -1e-10 * std::max(1.0, oo)) throw NumericalError("negative commutator norm");
    sq = 0.0;
  }
  double c = std::sqrt(sq);
  return normalize ? c / std::sqrt(oo) : c;
}

Mpo bond_operator_mpo(const MatrixXc& op2, int j, int n) {
  if (op2.rows() != 4 || op2.cols() != 4) throw DimensionError("bond operator must be 4x4");
  if (j < 0 || j + 1 >= n) throw ArgumentError("bond outside the chain");
  return apply_gate(identity_mpo(n), op2, j, GateSide::Left, 0.0);
}

double pxp_constraint_commutator(const Mpo& v) {
  const int n = static_cast<int>(v.n_sites());
  MatrixXc qq = kron(pauli::Q(), pauli::Q()).matrix();
  double sum = 0.0;
  for (int j = 0; j + 1 < n; ++j) sum += commutator_norm(v, bond_operator_mpo(qq, j, n));
  return sum / (n - 1);
}

double algorithmic_fidelity(const Mpo& target, const Mpo& circuit) {
  Mpo w = difference_operator(target, circuit);
  MatrixXc carry = MatrixXc::Ones(1, 1);
  for (std::size_t j = 0; j < w.n_sites(); ++j) carry = push_left(carry, w.site(j), true);
  double f = carry(0, 0).real() / std::ldexp(1.0, static_cast<int>(w.n_sites()));
  return clamp_fidelity(f, "algorithmic fidelity");
}

double algorithmic_fidelity(const Mpo& target, const BrickwallCircuit& c) {
  return algorithmic_fidelity(target, brickwall_to_mpo(c));
}

std::vector<double> local_fidelity_terms(const Mpo& target, const Mpo& circuit) {
  Mpo w = difference_operator(target, circuit);
  const std::size_t n = w.n_sites();
  std::vector<MatrixXc> right(n + 1);
  right[n] = MatrixXc::Ones(1, 1);
  for (std::size_t j = n; j-- > 0;) right[j] = push_right(right[j + 1], w.site(j), false);
  std::vector<double> terms;
  MatrixXc left = MatrixXc::Ones(1, 1);
  const double scale = std::ldexp(1.0, -static_cast<int>(n));
  for (std::size_t j = 0; j < n; ++j) {
    MatrixXc probed = push_left(left, w.site(j), true);
    terms.push_back(clamp_fidelity(probed.cwiseProduct(right[j + 1]).sum().real() * scale, "local fidelity"));
    left = push_left(left, w.site(j), false);
  }
  return terms;
}

double local_algorithmic_fidelity(const Mpo& target, const Mpo& circuit) {
  auto t = local_fidelity_terms(target, circuit);
  double s = 0.0;
  for (double x : t) s += x;
  return s / static_cast<double>(t.size());
}

double local_algorithmic_fidelity(const Mpo& target, const BrickwallCircuit& c) {
  return local_algorithmic_fidelity(target, brickwall_to_mpo(c));
}

BoundCheck infidelity_bound_check(const MatrixXc& exact, const MatrixXc& approx, int applications) {
  if (exact.rows() != approx.rows() || exact.cols() != approx.cols() || exact.rows() != exact.cols())
    throw DimensionError("bound check needs equal square matrices");
  if (exact.rows() > 1024) throw CapacityError("dense bound check is limited to 10 sites");
  if (applications < 1) throw ArgumentError("applications must be positive");
  MatrixXc un = MatrixXc::Identity(exact.rows(), exact.cols()), vn = un;
  for (int k = 0; k < applications; ++k) {
    un = exact * un;
    vn = approx * vn;
  }
  MatrixXc w = un.adjoint() * vn;
  double f = 0.0;
  for (Eigen::Index i = 0; i < w.rows(); ++i) f += std::norm(w(i, i));
  f /= static_cast<double>(w.rows());
  Eigen::JacobiSVD<MatrixXc> svd(exact - approx);
  double e = svd.singularValues()(0);
  BoundCheck out;
  out.infidelity = 1.0 - f;
  out.bound = static_cast<double>(applications) * applications * e * e;
  return out;
}

FidelityTable::FidelityTable(std::vector<double> dt, std::vector<double> fidelity) {
  if (dt.size() != fidelity.size() || dt.empty()) throw ArgumentError("fidelity table needs matching non-empty columns");
  std::vector<std::size_t> idx(dt.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return dt[a] < dt[b]; });
  for (auto i : idx) {
    if (!(dt[i] > 0.0)) throw ArgumentError("fidelity table dt must be positive");
    if (!dt_.empty() && dt[i] == dt_.back()) throw ArgumentError("duplicate dt in fidelity table");
    dt_.push_back(dt[i]);
    f_.push_back(fidelity[i]);
  }
}

double FidelityTable::operator()(double dt) const {
  const double tol = 1e-12 * dt_.back();
  if (dt < dt_.front() - tol || dt > dt_.back() + tol) throw ArgumentError("dt outside the fidelity table");
  if (dt_.size() == 1) return f_[0];
  auto it = std::lower_bound(dt_.begin(), dt_.end(), dt);
  std::size_t hi = std::clamp<std::size_t>(it - dt_.begin(), 1, dt_.size() - 1);
  std::size_t lo = hi - 1;
  const double i0 = 1.0 - f_[lo], i1 = 1.0 - f_[hi];
  if (i0 > 0.0 && i1 > 0.0) {
    double s = (std::log(dt) - std::log(dt_[lo])) / (std::log(dt_[hi]) - std::log(dt_[lo]));
    return 1.0 - std::exp(std::log(i0) + s * (std::log(i1) - std::log(i0)));
  }
  double s = (dt - dt_[lo]) / (dt_[hi] - dt_[lo]);
  return f_[lo] + s * (f_[hi] - f_[lo]);
}

bool TimestepPlan::interior_minimum() const {
  if (rows.size() < 3) return false;
  return n_opt != rows.front().n && n_opt != rows.back().n;
}

TimestepPlan plan_timestep(double t, double eta, const std::function<double(double)>& fidelity,
                           const std::vector<int>& n_grid) {
  if (!(t > 0.0)) throw ArgumentError("total time must be positive");
  if (!(eta >= 0.0)) throw ArgumentError("eta must be non-negative");
  if (n_grid.empty()) throw ArgumentError("empty step-count grid");
  std::vector<int> ns = n_grid;
  std::sort(ns.begin(), ns.end());
  ns.erase(std::unique(ns.begin(), ns.end()), ns.end());
  if (ns.front() < 1) throw ArgumentError("step counts must be positive");
  TimestepPlan plan;
  plan.total_time = t;
  plan.eta = eta;
  double best = std::numeric_limits<double>::infinity();
  for (int n : ns) {
    PlanRow row;
    row.n = n;
    row.dt = t / n;
    double bracket = 1.0 - static_cast<double>(n) * n * (1.0 - fidelity(row.dt));
    if (bracket < 0.0) {
      row.clamped = true;
      row.infidelity = 1.0;
    } else {
      row.infidelity = 1.0 - std::exp(-eta * n) * bracket;
    }
    if (row.infidelity < best) {
      best = row.infidelity;
      plan.n_opt = n;
      plan.dt_opt = row.dt;
    }
    plan.rows.push_back(row);
  }
  plan.infidelity_opt = best;
  return plan;
}

TimestepPlan plan_timestep(double t, double eta, const FidelityTable& table, int n_max) {
  if (!(t > 0.0)) throw ArgumentError("total time must be positive");
  std::vector<int> grid;
  const double tol = 1e-12;
  for (int n = 1; n <= n_max; ++n) {
    double dt = t / n;
    if (dt >= table.min_dt() * (1 - tol) && dt <= table.max_dt() * (1 + tol)) grid.push_back(n);
  }
  if (grid.empty()) throw ArgumentError("no step count maps into the fidelity table");
  return plan_timestep(t, eta, [&](double dt) { return table(dt); }, grid);
}

namespace {

// Applies a gate on contiguous sites first..first+r-1 of an n-qubit state; site 0
// is the most significant bit.
void apply_on_state(std::vector<cplx>& psi, int n, const MatrixXc& u, int first) {
  const int r = static_cast<int>(std::lround(std::log2(static_cast<double>(u.rows()))));
  const std::size_t d = std::size_t{1} << r;
  const int shift = n - first - r;
  const std::size_t low = std::size_t{1} << shift;
  const std::size_t high = psi.size() >> (shift + r);
  std::vector<cplx> in(d), out(d);
  for (std::size_t h = 0; h < high; ++h)
    for (std::size_t l = 0; l < low; ++l) {
      const std::size_t base = (h << (shift + r)) | l;
      for (std::size_t k = 0; k < d; ++k) in[k] = psi[base | (k << shift)];
      for (std::size_t a = 0; a < d; ++a) {
        cplx s = 0.0;
        for (std::size_t b = 0; b < d; ++b) s += u(a, b) * in[b];
        out[a] = s;
      }
      for (std::size_t k = 0; k < d; ++k) psi[base | (k << shift)] = out[k];
    }
}

// Pauli 1 = X, 2 = Y, 3 = Z on qubit q, global phases dropped.
void apply_pauli(std::vector<cplx>& psi, int n, int q, int which) {
  const std::size_t bit = std::size_t{1} << (n - 1 - q);
  const cplx i1(0.0, 1.0);
  for (std::size_t s = 0; s < psi.size(); ++s) {
    if (which == 3) {
      if (s & bit) psi[s] = -psi[s];
      continue;
    }
    if (s & bit) continue;
    cplx a = psi[s], b = psi[s | bit];
    if (which == 1) {
      psi[s] = b;
      psi[s | bit] = a;
    } else {
      psi[s] = -i1 * b;
      psi[s | bit] = i1 * a;
    }
  }
}

}  // namespace

std::vector<EchoPoint> noisy_echo(const LayeredCircuit& c, const std::vector<int>& forward_counts,
                                  const EchoOptions& opt, std::mt19937_64& rng) {
  const int n = c.n_sites;
  if (n > 12) throw CapacityError("noisy echo simulates at most 12 qubits");
  if (n < 1) throw ArgumentError("empty circuit");
  if (opt.shots < 1) throw ArgumentError("shots must be positive");
  if (opt.cnot_layers < 0 || !(opt.eta_layer >= 0.0)) throw ArgumentError("invalid noise settings");

  // Each CNOT layer is followed by one round of independent single-qubit depolarizing
  // noise; a qubit is hit by X, Y or Z with total probability p, so a whole round is
  // error free with probability (1 - p)^n = e^{-eta_layer}.
  const double p = -std::expm1(-opt.eta_layer / n);
  const std::size_t nl = c.layers.size();
  std::vector<int> rounds(nl, 0);
  if (nl == 0) throw ArgumentError("circuit has no layers");
  for (std::size_t l = 0; l < nl; ++l) {
    int upto = static_cast<int>((static_cast<long long>(l + 1) * opt.cnot_layers) / static_cast<long long>(nl));
    int before = static_cast<int>((static_cast<long long>(l) * opt.cnot_layers) / static_cast<long long>(nl));
    rounds[l] = upto - before;
  }
  std::vector<std::vector<CircuitGate>> inverse(nl);
  for (std::size_t l = 0; l < nl; ++l)
    for (const auto& g : c.layers[nl - 1 - l]) inverse[l].push_back({g.support, g.u.adjoint()});

  std::uniform_int_distribution<std::size_t> basis(0, (std::size_t{1} << n) - 1);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::uniform_int_distribution<int> pick(1, 3);
  const std::size_t dim = std::size_t{1} << n;

  auto noise = [&](std::vector<cplx>& psi, int count) {
    for (int r = 0; r < count; ++r)
      for (int q = 0; q < n; ++q)
        if (p > 0.0 && unif(rng) < p) apply_pauli(psi, n, q, pick(rng));
  };
  auto run_layers = [&](std::vector<cplx>& psi, const std::vector<std::vector<CircuitGate>>& layers, bool reversed) {
    for (std::size_t l = 0; l < nl; ++l) {
      for (const auto& g : layers[l]) apply_on_state(psi, n, g.u, g.support.front());
      noise(psi, reversed ? rounds[nl - 1 - l] : rounds[l]);
    }
  };

  std::vector<EchoPoint> out;
  std::vector<double> cdf(dim);
  for (int k : forward_counts) {
    if (k < 0) throw ArgumentError("negative application count");
    long long hits = 0;
    double agree = 0.0;
    for (int shot = 0; shot < opt.shots; ++shot) {
      const std::size_t s0 = basis(rng);
      std::vector<cplx> psi(dim, 0.0);
      psi[s0] = 1.0;
      for (int a = 0; a < k; ++a) run_layers(psi, c.layers, false);
      for (int a = 0; a < k; ++a) run_layers(psi, inverse, true);
      double acc = 0.0;
      for (std::size_t s = 0; s < dim; ++s) cdf[s] = (acc += std::norm(psi[s]));
      const double x = unif(rng) * acc;
      std::size_t outcome = std::min<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), x) - cdf.begin(), dim - 1);
      if (outcome == s0) ++hits;
      agree += static_cast<double>(n - std::popcount(outcome ^ s0)) / n;
    }
    EchoPoint pt;
    pt.applications = 2 * k;
    pt.fidelity = static_cast<double>(hits) / opt.shots;
    pt.local_fidelity = agree / opt.shots;
    const double floor = 1.0 / static_cast<double>(dim);
    pt.normalized_fidelity = (pt.fidelity - floor) / (1.0 - floor);
    pt.normalized_local_fidelity = 2.0 * pt.local_fidelity - 1.0;
    out.push_back(pt);
  }
  return out;
}

std::vector<EchoPoint> noisy_echo(const BrickwallCircuit& c, const std::vector<int>& forward_counts,
                                  const EchoOptions& opt, std::mt19937_64& rng) {
  return noisy_echo(to_layered(c), forward_counts, opt, rng);
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw ArgumentError("fit needs matching columns");
  if (x.size() < 2) throw ArgumentError("fit needs at least two points");
  const double m = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= m;
  my /= m;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw ArgumentError("fit needs distinct abscissae");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  return f;
}

LineFit fit_scaling(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 3) throw ArgumentError("scaling fit needs at least three points");
  std::vector<double> x, y;
  for (auto [dt, v] : points) {
    if (!(dt > 0.0) || !(v > 0.0)) throw ArgumentError("scaling fit needs positive values");
    x.push_back(std::log(dt));
    y.push_back(std::log(v));
  }
  return fit_line(x, y);
}

double fit_decay(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < x.size() && i < y.size(); ++i)
    if (y[i] > 0.0) {
      xs.push_back(x[i]);
      ys.push_back(std::log(y[i]));
    }
  return -fit_line(xs, ys).slope;
}

MetricsReport evaluate(const Mpo& target, const BrickwallCircuit& c, const Mpo& hamiltonian, double dt) {
  Mpo v = brickwall_to_mpo(c);
  MetricsReport r;
  r.dt = dt;
  r.depth = c.depth;
  r.delta = error_density(target, c);
  r.energy_commutator = commutator_norm(v, hamiltonian);
  r.fidelity = algorithmic_fidelity(target, v);
  r.local_fidelity = local_algorithmic_fidelity(target, v);
  return r;
}

MetricsReport evaluate(const Mpo& target, const LayeredCircuit& c, const Mpo& hamiltonian, double dt) {
  Mpo v = layered_to_mpo(c);
  MetricsReport r;
  r.dt = dt;
  r.depth = static_cast<int>(c.layers.size());
  r.delta = error_density(target, v);
  r.energy_commutator = commutator_norm(v, hamiltonian);
  r.fidelity = algorithmic_fidelity(target, v);
  r.local_fidelity = local_algorithmic_fidelity(target, v);
  return r;
}

std::string metrics_csv_header() { return "dt,depth,delta,energy_commutator,fidelity,local_fidelity,sweeps,converged"; }

std::string metrics_csv_row(const MetricsReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%.17g,%d,%.17g,%.17g,%.17g,%.17g,%d,%s", r.dt, r.depth, r.delta,
                r.energy_commutator, r.fidelity, r.local_fidelity, r.sweeps_used, r.converged ? "true" : "false");
  return buf;
}

void write_metrics_csv(std::ostream& os, const std::vector<MetricsReport>& rows) {
  os << metrics_csv_header() << '\n';
  for (const auto& r : rows) os << metrics_csv_row(r) << '\n';
}

}  // namespace bwc
