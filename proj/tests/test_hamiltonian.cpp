#include <doctest.h>

#include "bwc/errors.hpp"
#include "bwc/hamiltonian.hpp"
#include "bwc/mpo.hpp"
#include "support.hpp"

using namespace bwc;

namespace {

DenseTensor kron_chain(const std::vector<DenseTensor>& ops) {
  DenseTensor r = ops[0];
  for (std::size_t k = 1; k < ops.size(); ++k) r = kron(r, ops[k]);
  return r;
}

// Places single-site operators at given sites, identity elsewhere.
DenseTensor string_op(int n, const std::vector<std::pair<int, DenseTensor>>& at, cplx coeff) {
  std::vector<DenseTensor> ops(n, pauli::I());
  for (const auto& [site, op] : at) ops[site] = op;
  return coeff * kron_chain(ops);
}

}  // namespace

TEST_CASE("cluster Ising limits") {
  auto h1 = build_model("cluster_ising", 6, {.g = 1.0});
  CHECK(h1.terms.size() == 6);
  for (const auto& t : h1.terms) {
    CHECK(t.body() == 1);
    CHECK((t.op - cplx(-4.0) * pauli::X()).max_abs() < 1e-15);
  }
  auto hm = build_model("cluster_ising", 6, {.g = -1.0});
  CHECK(hm.terms.size() == 4);
  for (const auto& t : hm.terms) {
    CHECK(t.body() == 3);
    CHECK((t.op - cplx(4.0) * kron(kron(pauli::Z(), pauli::X()), pauli::Z())).max_abs() < 1e-15);
  }
  CHECK_THROWS_AS(build_model("cluster_ising", 2), ArgumentError);
  CHECK_THROWS_AS(build_model("heisenberg", 5), ArgumentError);
}

TEST_CASE("PXP with three sites") {
  auto h = build_model("pxp", 3);
  REQUIRE(h.terms.size() == 3);
  // canonical order is by body count, then first site
  CHECK(h.terms[0].support == std::vector<int>{0, 1});
  CHECK((h.terms[0].op - kron(pauli::X(), pauli::P())).max_abs() == 0.0);
  CHECK(h.terms[1].support == std::vector<int>{1, 2});
  CHECK((h.terms[1].op - kron(pauli::P(), pauli::X())).max_abs() == 0.0);
  CHECK(h.terms[2].support == std::vector<int>{0, 1, 2});
  CHECK((h.terms[2].op - kron(kron(pauli::P(), pauli::X()), pauli::P())).max_abs() == 0.0);
}

TEST_CASE("to_dense") {
  HamiltonianSpec empty{4, 2, {}, ""};
  CHECK(to_dense(empty).max_abs() == 0.0);

  auto h = build_model("nnni", 3, {.gx = 1.0, .gzz = 0.0, .gz1z = 0.0});
  DenseTensor ref = string_op(3, {{0, pauli::X()}}, 1.0) + string_op(3, {{1, pauli::X()}}, 1.0) +
                    string_op(3, {{2, pauli::X()}}, 1.0);
  CHECK((to_dense(h) - ref).max_abs() < 1e-15);

  const int n = 8;
  const double g = -0.75;
  DenseTensor ci({256, 256});
  for (int j = 0; j < n; ++j) ci += string_op(n, {{j, pauli::X()}}, -(1 + g) * (1 + g));
  for (int j = 0; j + 1 < n; ++j) ci += string_op(n, {{j, pauli::Z()}, {j + 1, pauli::Z()}}, -2 * (1 - g * g));
  for (int j = 0; j + 2 < n; ++j)
    ci += string_op(n, {{j, pauli::Z()}, {j + 1, pauli::X()}, {j + 2, pauli::Z()}}, (g - 1) * (g - 1));
  DenseTensor d = to_dense(build_model("cluster_ising", n, {.g = g}));
  CHECK((d - ci).max_abs() < 1e-13);
  CHECK((d.matrix() - d.matrix().adjoint()).cwiseAbs().maxCoeff() < 1e-12);

  HamiltonianSpec big{15, 2, {}, ""};
  CHECK_THROWS_AS(to_dense(big), CapacityError);
}

TEST_CASE("to_mpo matches the dense Hamiltonian") {
  auto single = build_model("cluster_ising", 6, {.g = 1.0});
  CHECK(to_mpo(single).max_bond() == 2);
  for (const auto& h : {build_model("cluster_ising", 6, {.g = 0.0}), build_model("pxp", 6),
                        build_model("nnni", 7, {.gx = 0.3, .gzz = -1.1, .gz1z = 0.7}),
                        build_model("cluster_ising", 5, {.g = -0.75})}) {
    Mpo m = to_mpo(h);
    CHECK((m.to_dense() - to_dense(h)).max_abs() < 1e-12);
    // 2 + one 2-site channel + two 3-site channels for these models
    CHECK(m.max_bond() <= 5);
  }
}

TEST_CASE("commuting groups") {
  auto ci = build_model("cluster_ising", 8, {.g = -0.75});
  CHECK(commuting_groups(ci).size() == 6);
  CHECK(commuting_groups(build_model("cluster_ising", 8, {.g = 1.0})).size() == 1);

  auto pxp = build_model("pxp", 5);
  auto groups = commuting_groups(pxp);
  std::size_t total = 0;
  for (const auto& g : groups) {
    total += g.size();
    for (std::size_t a = 0; a < g.size(); ++a)
      for (std::size_t b = a + 1; b < g.size(); ++b) {
        MatrixXc x = pad_operator(g[a].op, g[a].first(), 5).matrix();
        MatrixXc y = pad_operator(g[b].op, g[b].first(), 5).matrix();
        CHECK((x * y - y * x).cwiseAbs().maxCoeff() < 1e-12);
      }
  }
  CHECK(total == pxp.terms.size());
  // regrouping restores the spec
  HamiltonianSpec back{pxp.n_sites, 2, {}, ""};
  for (const auto& g : groups)
    for (const auto& t : g) back.terms.push_back(t);
  back = canonicalize(back);
  CHECK((to_dense(back) - to_dense(pxp)).max_abs() == 0.0);
}
