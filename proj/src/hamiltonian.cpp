#include "bwc/hamiltonian.hpp"

#include <algorithm>
#include <map>

#include "bwc/errors.hpp"
#include "bwc/mpo.hpp"

namespace bwc {

namespace pauli {
DenseTensor I() { return DenseTensor::identity(2); }
DenseTensor X() { return DenseTensor({2, 2}, {0.0, 1.0, 1.0, 0.0}); }
DenseTensor Y() { return DenseTensor({2, 2}, {0.0, cplx(0, -1), cplx(0, 1), 0.0}); }
DenseTensor Z() { return DenseTensor({2, 2}, {1.0, 0.0, 0.0, -1.0}); }
DenseTensor P() { return DenseTensor({2, 2}, {0.0, 0.0, 0.0, 1.0}); }
DenseTensor Q() { return DenseTensor({2, 2}, {1.0, 0.0, 0.0, 0.0}); }
}  // namespace pauli

Model parse_model(const std::string& name) {
  if (name == "cluster_ising" || name == "ci") return Model::ClusterIsing;
  if (name == "pxp") return Model::Pxp;
  if (name == "nnni") return Model::Nnni;
  throw ArgumentError("unknown model: " + name);
}

std::string model_name(Model m) {
  switch (m) {
    case Model::ClusterIsing: return "cluster_ising";
    case Model::Pxp: return "pxp";
    case Model::Nnni: return "nnni";
  }
  return "";
}

void validate(const HamiltonianSpec& spec) {
  if (spec.local_dim != 2) throw ArgumentError("only qubits are supported");
  for (const auto& t : spec.terms) {
    if (t.support.empty() || t.support.size() > 3) throw ArgumentError("terms act on 1 to 3 sites");
    for (std::size_t k = 0; k < t.support.size(); ++k) {
      if (t.support[k] < 0 || t.support[k] >= spec.n_sites) throw ArgumentError("support out of range");
      if (k > 0 && t.support[k] != t.support[k - 1] + 1) throw ArgumentError("support must be contiguous");
    }
    const std::size_t d = std::size_t{1} << t.support.size();
    if (t.op.shape() != Shape{d, d}) throw DimensionError("term operator has the wrong shape");
    MatrixXc m = t.op.matrix();
    if ((m - m.adjoint()).cwiseAbs().maxCoeff() > 1e-12) throw ArgumentError("term is not Hermitian");
  }
}

HamiltonianSpec canonicalize(const HamiltonianSpec& spec) {
  validate(spec);
  std::map<std::pair<int, int>, DenseTensor> merged;  // (body, first) -> op
  for (const auto& t : spec.terms) {
    auto key = std::make_pair(t.body(), t.first());
    auto it = merged.find(key);
    if (it == merged.end())
      merged.emplace(key, t.op);
    else
      it->second += t.op;
  }
  HamiltonianSpec out;
  out.n_sites = spec.n_sites;
  out.local_dim = spec.local_dim;
  out.label = spec.label;
  for (auto& [key, op] : merged) {
    if (op.max_abs() == 0.0) continue;
    LocalTerm t;
    for (int k = 0; k < key.first; ++k) t.support.push_back(key.second + k);
    t.op = op;
    out.terms.push_back(std::move(t));
  }
  return out;
}

namespace {

LocalTerm term(std::vector<int> support, DenseTensor op) { return {std::move(support), std::move(op)}; }

DenseTensor kron3(const DenseTensor& a, const DenseTensor& b, const DenseTensor& c) {
  return kron(kron(a, b), c);
}

}  // namespace

HamiltonianSpec build_model(Model model, int n, const ModelParams& p) {
  if (n < 3) throw ArgumentError("models need at least 3 sites");
  using namespace pauli;
  HamiltonianSpec h;
  h.n_sites = n;
  switch (model) {
    case Model::ClusterIsing: {
      const double g = p.g;
      for (int j = 0; j < n; ++j) h.terms.push_back(term({j}, cplx(-(1 + g) * (1 + g)) * X()));
      for (int j = 0; j + 1 < n; ++j)
        h.terms.push_back(term({j, j + 1}, cplx(-2 * (1 - g * g)) * kron(Z(), Z())));
      for (int j = 0; j + 2 < n; ++j)
        h.terms.push_back(term({j, j + 1, j + 2}, cplx((g - 1) * (g - 1)) * kron3(Z(), X(), Z())));
      h.label = "cluster_ising";
      break;
    }
    case Model::Pxp: {
      h.terms.push_back(term({0, 1}, kron(X(), P())));
      for (int j = 1; j + 1 < n; ++j) h.terms.push_back(term({j - 1, j, j + 1}, kron3(P(), X(), P())));
      h.terms.push_back(term({n - 2, n - 1}, kron(P(), X())));
      h.label = "pxp";
      break;
    }
    case Model::Nnni: {
      for (int j = 0; j < n; ++j) h.terms.push_back(term({j}, cplx(p.gx) * X()));
      for (int j = 0; j + 1 < n; ++j) h.terms.push_back(term({j, j + 1}, cplx(p.gzz) * kron(Z(), Z())));
      for (int j = 0; j + 2 < n; ++j)
        h.terms.push_back(term({j, j + 1, j + 2}, cplx(p.gz1z) * kron3(Z(), I(), Z())));
      h.label = "nnni";
      break;
    }
  }
  return canonicalize(h);
}

HamiltonianSpec build_model(const std::string& model, int n, const ModelParams& params) {
  return build_model(parse_model(model), n, params);
}

DenseTensor pad_operator(const DenseTensor& op, int first, int n) {
  const int r = static_cast<int>(std::log2(static_cast<double>(op.extent(0))) + 0.5);
  if (first < 0 || first + r > n) throw ArgumentError("operator support out of range");
  DenseTensor left = DenseTensor::identity(std::size_t{1} << first);
  DenseTensor right = DenseTensor::identity(std::size_t{1} << (n - first - r));
  return kron(kron(left, op), right);
}

DenseTensor to_dense(const HamiltonianSpec& spec) {
  if (spec.n_sites > 14) throw CapacityError("dense Hamiltonian limited to 14 sites");
  const std::size_t d = std::size_t{1} << spec.n_sites;
  // Accumulate each padded term without forming the Kronecker product explicitly.
  DenseTensor h({d, d});
  for (const auto& t : spec.terms) {
    const int r = t.body();
    const std::size_t dr = std::size_t{1} << r;
    const std::size_t right = std::size_t{1} << (spec.n_sites - t.first() - r);
    const std::size_t left = std::size_t{1} << t.first();
    for (std::size_t a = 0; a < left; ++a)
      for (std::size_t o = 0; o < dr; ++o)
        for (std::size_t i = 0; i < dr; ++i) {
          const cplx v = t.op[o * dr + i];
          if (v == cplx(0.0)) continue;
          for (std::size_t b = 0; b < right; ++b) {
            const std::size_t row = (a * dr + o) * right + b;
            const std::size_t col = (a * dr + i) * right + b;
            h[row * d + col] += v;
          }
        }
  }
  return h;
}

namespace {

// Operator-Schmidt split of a 2-site operator: op = sum_k A_k (x) B_k.
void schmidt2(const DenseTensor& op, std::vector<DenseTensor>& a, std::vector<DenseTensor>& b) {
  // op[(o1 o2),(i1 i2)] -> R[(o1 i1),(o2 i2)]
  DenseTensor r = op.reshaped({2, 2, 2, 2}).permuted({0, 2, 1, 3});
  SvdResult s = truncated_svd(r, 2, 1e-28);
  const double smax = s.singular_values.empty() ? 0.0 : s.singular_values[0];
  for (std::size_t k = 0; k < s.singular_values.size(); ++k) {
    if (s.singular_values[k] <= 1e-14 * smax) break;
    DenseTensor ak({2, 2}), bk({2, 2});
    for (std::size_t x = 0; x < 4; ++x) {
      ak[x] = s.left_isometry[x * s.singular_values.size() + k] * s.singular_values[k];
      bk[x] = s.right_isometry[k * 4 + x];
    }
    a.push_back(ak);
    b.push_back(bk);
  }
}

struct Channel3 {
  std::vector<DenseTensor> a;                // r1 ops on the first site
  std::vector<std::vector<DenseTensor>> b;   // b[x][y] on the middle site
  std::vector<DenseTensor> c;                // r2 ops on the last site
};

Channel3 schmidt3(const DenseTensor& op) {
  // op[(o1 o2 o3),(i1 i2 i3)] -> R[(o1 i1),(o2 i2 o3 i3)]
  DenseTensor r = op.reshaped({2, 2, 2, 2, 2, 2}).permuted({0, 3, 1, 4, 2, 5});
  SvdResult s1 = truncated_svd(r, 2, 1e-28);
  const double smax = s1.singular_values.empty() ? 0.0 : s1.singular_values[0];
  std::size_t r1 = 0;
  while (r1 < s1.singular_values.size() && s1.singular_values[r1] > 1e-14 * smax) ++r1;
  const std::size_t k1 = s1.singular_values.size();
  Channel3 ch;
  for (std::size_t x = 0; x < r1; ++x) {
    DenseTensor ax({2, 2});
    for (std::size_t e = 0; e < 4; ++e) ax[e] = s1.left_isometry[e * k1 + x] * s1.singular_values[x];
    ch.a.push_back(ax);
  }
  // Remainder T[x,(o2 i2),(o3 i3)] for x < r1.
  DenseTensor rem({r1 * 4, 4});
  for (std::size_t x = 0; x < r1; ++x)
    for (std::size_t e = 0; e < 16; ++e) rem[x * 16 + e] = s1.right_isometry[x * 16 + e];
  SvdResult s2 = truncated_svd(rem, 1, 1e-28);
  const double smax2 = s2.singular_values.empty() ? 0.0 : s2.singular_values[0];
  std::size_t r2 = 0;
  while (r2 < s2.singular_values.size() && s2.singular_values[r2] > 1e-14 * smax2) ++r2;
  const std::size_t k2 = s2.singular_values.size();
  ch.b.assign(r1, std::vector<DenseTensor>(r2, DenseTensor({2, 2})));
  for (std::size_t x = 0; x < r1; ++x)
    for (std::size_t e = 0; e < 4; ++e)
      for (std::size_t y = 0; y < r2; ++y)
        ch.b[x][y][e] = s2.left_isometry[(x * 4 + e) * k2 + y] * s2.singular_values[y];
  for (std::size_t y = 0; y < r2; ++y) {
    DenseTensor cy({2, 2});
    for (std::size_t e = 0; e < 4; ++e) cy[e] = s2.right_isometry[y * 4 + e];
    ch.c.push_back(cy);
  }
  return ch;
}

}  // namespace

Mpo to_mpo(const HamiltonianSpec& spec0) {
  HamiltonianSpec spec = canonicalize(spec0);
  const int n = spec.n_sites;
  if (n < 1) throw ArgumentError("empty chain");
  // Per internal bond: state 0 = nothing placed yet, 1 = term completed, then channels.
  std::vector<int> bond_states(std::max(n - 1, 0), 2);
  struct Entry {
    int site;
    int from;  // state on the left bond
    int to;    // state on the right bond
    DenseTensor op;
  };
  std::vector<Entry> entries;
  constexpr int kStart = 0, kDone = 1;
  for (const auto& t : spec.terms) {
    const int j = t.first();
    if (t.body() == 1) {
      entries.push_back({j, kStart, kDone, t.op});
    } else if (t.body() == 2) {
      std::vector<DenseTensor> a, b;
      schmidt2(t.op, a, b);
      for (std::size_t k = 0; k < a.size(); ++k) {
        int c = bond_states[j]++;
        entries.push_back({j, kStart, c, a[k]});
        entries.push_back({j + 1, c, kDone, b[k]});
      }
    } else {
      Channel3 ch = schmidt3(t.op);
      std::vector<int> cx, cy;
      for (std::size_t x = 0; x < ch.a.size(); ++x) cx.push_back(bond_states[j]++);
      for (std::size_t y = 0; y < ch.c.size(); ++y) cy.push_back(bond_states[j + 1]++);
      for (std::size_t x = 0; x < ch.a.size(); ++x) entries.push_back({j, kStart, cx[x], ch.a[x]});
      for (std::size_t x = 0; x < ch.a.size(); ++x)
        for (std::size_t y = 0; y < ch.c.size(); ++y) entries.push_back({j + 1, cx[x], cy[y], ch.b[x][y]});
      for (std::size_t y = 0; y < ch.c.size(); ++y) entries.push_back({j + 2, cy[y], kDone, ch.c[y]});
    }
  }
  // Boundary bonds: left of site 0 only holds "start", right of site n-1 only "done".
  auto left_dim = [&](int j) { return j == 0 ? 1 : bond_states[j - 1]; };
  auto right_dim = [&](int j) { return j == n - 1 ? 1 : bond_states[j]; };
  auto left_index = [&](int j, int s) { return j == 0 ? (s == kStart ? 0 : -1) : s; };
  auto right_index = [&](int j, int s) { return j == n - 1 ? (s == kDone ? 0 : -1) : s; };

  std::vector<DenseTensor> w;
  const DenseTensor id = pauli::I();
  for (int j = 0; j < n; ++j) {
    const std::size_t dl = left_dim(j), dr = right_dim(j);
    DenseTensor t({dl, 2, 2, dr});
    auto add = [&](int from, int to, const DenseTensor& op) {
      int a = left_index(j, from), b = right_index(j, to);
      if (a < 0 || b < 0) return;
      for (std::size_t o = 0; o < 2; ++o)
        for (std::size_t i = 0; i < 2; ++i) t[((a * 2 + o) * 2 + i) * dr + b] += op[o * 2 + i];
    };
    add(kStart, kStart, id);
    add(kDone, kDone, id);
    for (const auto& e : entries)
      if (e.site == j) add(e.from, e.to, e.op);
    w.push_back(std::move(t));
  }
  return Mpo(std::move(w));
}

std::vector<std::vector<LocalTerm>> commuting_groups(const HamiltonianSpec& spec0) {
  HamiltonianSpec spec = canonicalize(spec0);
  std::vector<std::vector<LocalTerm>> slots(6);
  for (const auto& t : spec.terms) {
    std::size_t slot = 0;
    if (t.body() == 1) slot = 0;
    else if (t.body() == 2) slot = 1 + static_cast<std::size_t>(t.first() % 2);
    else slot = 3 + static_cast<std::size_t>(t.first() % 3);
    slots[slot].push_back(t);
  }
  std::vector<std::vector<LocalTerm>> out;
  for (auto& s : slots)
    if (!s.empty()) out.push_back(std::move(s));
  return out;
}

}  // namespace bwc
