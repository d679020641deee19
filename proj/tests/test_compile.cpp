#include <doctest.h>

#include <cmath>

#include "bwc/compile.hpp"
#include "bwc/errors.hpp"
#include "support.hpp"

using namespace bwc;

namespace {

MatrixXc pauli_exp(const DenseTensor& p, double theta) { return hermitian_exp(p.matrix(), theta / 2); }

DenseTensor kron3(const DenseTensor& a, const DenseTensor& b, const DenseTensor& c) { return kron(kron(a, b), c); }

}  // namespace

TEST_CASE("zyz angles reproduce the gate up to phase") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 50; ++i) {
    MatrixXc u = testing::haar_unitary(rng, 2);
    auto a = zyz_angles(u);
    CHECK(phase_distance(zyz_matrix(a[0], a[1], a[2]), u) < 1e-12);
  }
  MatrixXc d = MatrixXc::Zero(2, 2);
  d(0, 0) = 1.0;
  d(1, 1) = cplx(0.0, 1.0);
  auto a = zyz_angles(d);
  CHECK(phase_distance(zyz_matrix(a[0], a[1], a[2]), d) < 1e-12);
  MatrixXc x = pauli::X().matrix();
  a = zyz_angles(x);
  CHECK(phase_distance(zyz_matrix(a[0], a[1], a[2]), x) < 1e-12);
}

TEST_CASE("templates match exponentials of Pauli strings") {
  using namespace pauli;
  for (double th : {0.0, 0.37, -1.2, 2.9}) {
    GateList zz = template_rzz(th);
    CHECK(phase_distance(gatelist_dense(zz), pauli_exp(kron(Z(), Z()), th)) < 1e-12);
    CHECK(zz.cnot_count() == 2);

    GateList zxz = template_rzxz(th);
    CHECK(phase_distance(gatelist_dense(zxz), pauli_exp(kron3(Z(), X(), Z()), th)) < 1e-12);
    CHECK(zxz.cnot_count() == 4);

    GateList pxp = template_rpxp(th, Connectivity::NextNearest);
    CHECK(phase_distance(gatelist_dense(pxp), pauli_exp(kron3(P(), X(), P()), th)) < 1e-12);
    CHECK(pxp.cnot_count() == 8);
    CHECK(std::none_of(pxp.ops.begin(), pxp.ops.end(), [](const GateOp& o) { return o.kind == OpKind::X; }));

    GateList pxl = template_rpxp(th, Connectivity::Linear);
    CHECK(phase_distance(gatelist_dense(pxl), pauli_exp(kron3(P(), X(), P()), th)) < 1e-12);
    CHECK(pxl.cnot_count() == 14);
    for (const auto& op : pxl.ops)
      if (op.kind == OpKind::CX) CHECK(std::abs(op.q - op.target) == 1);

    CHECK(phase_distance(gatelist_dense(template_rxp(th, true)), pauli_exp(kron(X(), P()), th)) < 1e-12);
    CHECK(phase_distance(gatelist_dense(template_rxp(th, false)), pauli_exp(kron(P(), X()), th)) < 1e-12);
  }
  GateList lc = template_long_cx();
  GateList direct;
  direct.n_qubits = 3;
  direct.cx(0, 2);
  CHECK(phase_distance(gatelist_dense(lc), gatelist_dense(direct)) < 1e-14);
}

TEST_CASE("two-qubit synthesis on Haar-random gates") {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 200; ++i) {
    MatrixXc u = testing::haar_unitary(rng, 4);
    GateList g = decompose_two_qubit(u);
    CHECK(g.cnot_count() <= 3);
    CHECK(phase_distance(gatelist_dense(g), u) <= 1e-9);
    GateList f = decompose_two_qubit(u, true);
    CHECK(f.cnot_count() == 3);
    CHECK(phase_distance(gatelist_dense(f), u) <= 1e-9);
  }
}

TEST_CASE("two-qubit synthesis uses the minimal CNOT count on known classes") {
  std::mt19937_64 rng(5);
  using namespace pauli;
  MatrixXc swap = MatrixXc::Zero(4, 4);
  swap(0, 0) = swap(1, 2) = swap(2, 1) = swap(3, 3) = 1.0;
  GateList s = decompose_two_qubit(swap);
  CHECK(s.cnot_count() == 3);
  CHECK(phase_distance(gatelist_dense(s), swap) < 1e-9);

  GateList id = decompose_two_qubit(MatrixXc::Identity(4, 4));
  CHECK(id.cnot_count() == 0);

  for (int i = 0; i < 20; ++i) {
    MatrixXc a = testing::haar_unitary(rng, 2), b = testing::haar_unitary(rng, 2), c = testing::haar_unitary(rng, 2),
             d = testing::haar_unitary(rng, 2);
    MatrixXc ab(4, 4), cd(4, 4);
    ab = kron(DenseTensor::from_matrix(a), DenseTensor::from_matrix(b)).matrix();
    cd = kron(DenseTensor::from_matrix(c), DenseTensor::from_matrix(d)).matrix();
    CHECK(decompose_two_qubit(ab).cnot_count() == 0);

    MatrixXc rzz = ab * pauli_exp(kron(Z(), Z()), 0.3 + 0.1 * i) * cd;
    GateList g = decompose_two_qubit(rzz);
    CHECK(g.cnot_count() == 2);
    CHECK(phase_distance(gatelist_dense(g), rzz) < 1e-9);

    MatrixXc xy = ab * pauli_exp(kron(X(), X()), 0.2 + 0.05 * i) * pauli_exp(kron(Y(), Y()), 0.7 - 0.03 * i) * cd;
    g = decompose_two_qubit(xy);
    CHECK(g.cnot_count() == 2);
    CHECK(phase_distance(gatelist_dense(g), xy) < 1e-9);
  }
  CHECK_THROWS_AS(decompose_two_qubit(MatrixXc::Ones(4, 4)), ArgumentError);
}

TEST_CASE("brickwall export") {
  std::mt19937_64 rng(8);
  BrickwallCircuit c(8, 3);
  for (auto& layer : c.layers)
    for (auto& g : layer) g = testing::haar_unitary(rng, 4);
  GateList g = export_gatelist(c);
  CHECK(g.cnot_layer_count() == cnot_layers_brickwall(3));
  CHECK(g.cnot_count() == 3 * (4 + 3 + 4));
  CHECK(phase_distance(gatelist_dense(g), circuit_dense(c).matrix()) < 1e-8);

  BrickwallCircuit ident(8, 4);
  for (auto& layer : ident.layers)
    for (auto& u : layer) u = MatrixXc::Identity(4, 4);
  CHECK(export_gatelist(ident).cnot_layer_count() == 12);
  ExportOptions elide;
  elide.elide_identities = true;
  CHECK(export_gatelist(ident, elide).cnot_count() == 0);
}

TEST_CASE("product-formula export reproduces the Trotter circuit") {
  for (Model m : {Model::ClusterIsing, Model::Pxp, Model::Nnni}) {
    for (int order : {1, 2}) {
      for (Connectivity conn : {Connectivity::Linear, Connectivity::NextNearest}) {
        for (int n : {5, 6, 7}) {
          auto spec = build_model(m, n);
          ExportOptions opt;
          opt.connectivity = conn;
          GateList g = export_trotter(spec, 0.2, order, opt);
          MatrixXc ref = layered_dense(trotter_circuit(spec, 0.2, order)).matrix();
          CAPTURE(model_name(m));
          CAPTURE(order);
          CAPTURE(n);
          CHECK(phase_distance(gatelist_dense(g), ref) < 1e-10);
        }
      }
    }
  }
}

TEST_CASE("product-formula CNOT layers agree with the closed form") {
  for (int n : {8, 12}) {
    for (int order : {1, 2}) {
      auto ci = build_model(Model::ClusterIsing, n);
      CHECK(export_trotter(ci, 0.1, order).cnot_layer_count() ==
            cnot_layers_trotter(Model::ClusterIsing, order, Connectivity::Linear));
      for (Connectivity conn : {Connectivity::Linear, Connectivity::NextNearest}) {
        ExportOptions opt;
        opt.connectivity = conn;
        auto pxp = build_model(Model::Pxp, n);
        CAPTURE(n);
        CAPTURE(order);
        // the two boundary X(x)P gates shift the packed depth by at most their own two layers
        const int packed = export_trotter(pxp, 0.1, order, opt).cnot_layer_count();
        CHECK(std::abs(packed - cnot_layers_trotter(Model::Pxp, order, conn)) <= 2);
        if (n == 8 && order == 2) CHECK(packed == cnot_layers_trotter(Model::Pxp, order, conn));
      }
      for (double gzz : {0.0, 1.0}) {
        ModelParams p;
        p.gzz = gzz;
        auto nn = build_model(Model::Nnni, n, p);
        CHECK(export_trotter(nn, 0.1, order).cnot_layer_count() ==
              cnot_layers_trotter(Model::Nnni, order, Connectivity::Linear, p));
      }
    }
  }
}

TEST_CASE("gate list text round trip") {
  std::mt19937_64 rng(2);
  BrickwallCircuit c(4, 2);
  for (auto& layer : c.layers)
    for (auto& g : layer) g = testing::haar_unitary(rng, 4);
  GateList g = export_gatelist(c);
  g.h(1);
  g.x(2);
  GateList back = parse_gatelist(render_gatelist(g));
  CHECK(back == g);
  CHECK(render_gatelist(back) == render_gatelist(g));
  CHECK_THROWS_AS(parse_gatelist("CX 0 1\n"), ArgumentError);
  CHECK_THROWS_AS(parse_gatelist("QUBITS 2\nCX 0 0\n"), ArgumentError);
  CHECK_THROWS_AS(parse_gatelist("QUBITS 2\nRZ abc 0\n"), ArgumentError);
  CHECK_THROWS_AS(parse_gatelist("QUBITS 2\nFOO 0\n"), ArgumentError);
}
