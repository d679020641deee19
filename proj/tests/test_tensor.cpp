#include <doctest.h>

#include <cmath>

#include "bwc/errors.hpp"
#include "bwc/network.hpp"
#include "bwc/tensor.hpp"
#include "support.hpp"

using namespace bwc;
using testing::random_tensor;

TEST_CASE("contract: identity with a vector and a full trace") {
  DenseTensor v({2}, {cplx(1, 2), cplx(-3, 0.5)});
  DenseTensor r = contract(DenseTensor::identity(2), v, {{1, 0}});
  CHECK(r.shape() == Shape{2});
  CHECK(std::abs(r[0] - v[0]) == 0.0);
  CHECK(std::abs(r[1] - v[1]) == 0.0);
  DenseTensor s = contract(DenseTensor::identity(2), DenseTensor::identity(2), {{0, 0}, {1, 1}});
  CHECK(s.rank() == 0);
  CHECK(std::abs(s[0] - cplx(2.0)) < 1e-15);
}

TEST_CASE("contract: matrix product against naive loops") {
  std::mt19937_64 rng(11);
  DenseTensor a = random_tensor(rng, {2, 3});
  DenseTensor b = random_tensor(rng, {3, 4});
  DenseTensor c = contract(a, b, {{1, 0}});
  double err = 0;
  for (int i = 0; i < 2; ++i)
    for (int k = 0; k < 4; ++k) {
      cplx s = 0;
      for (int j = 0; j < 3; ++j) s += a.at({std::size_t(i), std::size_t(j)}) * b.at({std::size_t(j), std::size_t(k)});
      err = std::max(err, std::abs(s - c.at({std::size_t(i), std::size_t(k)})));
    }
  CHECK(err < 1e-14);
}

TEST_CASE("contract: random shapes agree with explicit index loops") {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> ext(1, 4);
  for (int trial = 0; trial < 200; ++trial) {
    int ra = 1 + trial % 3, rb = 1 + (trial / 3) % 3;
    int npair = std::min({ra, rb, 1 + trial % 2});
    if (ra + rb > 6) continue;
    Shape sa(ra), sb(rb);
    for (auto& e : sa) e = ext(rng);
    for (auto& e : sb) e = ext(rng);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (int p = 0; p < npair; ++p) {
      std::size_t ia = (p + trial) % ra, ib = (2 * p + trial) % rb;
      bool clash = false;
      for (auto [x, y] : pairs) clash = clash || x == ia || y == ib;
      if (clash) continue;
      sb[ib] = sa[ia];
      pairs.emplace_back(ia, ib);
    }
    DenseTensor a = random_tensor(rng, sa), b = random_tensor(rng, sb);
    DenseTensor c = contract(a, b, pairs);
    // explicit loop oracle
    std::vector<std::size_t> ia(ra, 0), ib(rb, 0);
    DenseTensor ref(c.shape());
    for (std::size_t fa = 0; fa < a.size(); ++fa) {
      std::size_t t = fa;
      for (int k = ra; k-- > 0;) { ia[k] = t % sa[k]; t /= sa[k]; }
      for (std::size_t fb = 0; fb < b.size(); ++fb) {
        std::size_t u = fb;
        for (int k = rb; k-- > 0;) { ib[k] = u % sb[k]; u /= sb[k]; }
        bool ok = true;
        for (auto [x, y] : pairs) ok = ok && ia[x] == ib[y];
        if (!ok) continue;
        std::vector<std::size_t> out;
        for (int k = 0; k < ra; ++k) {
          bool paired = false;
          for (auto [x, y] : pairs) paired = paired || x == std::size_t(k);
          if (!paired) out.push_back(ia[k]);
        }
        for (int k = 0; k < rb; ++k) {
          bool paired = false;
          for (auto [x, y] : pairs) paired = paired || y == std::size_t(k);
          if (!paired) out.push_back(ib[k]);
        }
        ref[out.empty() ? 0 : ref.flat_index(out)] += a[fa] * b[fb];
      }
    }
    CHECK((c - ref).max_abs() < 1e-12);
  }
}

TEST_CASE("contract: errors") {
  DenseTensor a({2, 3}), b({2, 3});
  CHECK_THROWS_AS(contract(a, b, {{1, 1}, {1, 0}}), ArgumentError);
  CHECK_THROWS_AS(contract(a, b, {{0, 1}}), DimensionError);
}

TEST_CASE("permute round trip") {
  std::mt19937_64 rng(3);
  DenseTensor t = random_tensor(rng, {2, 3, 4, 2});
  DenseTensor p = t.permuted({2, 0, 3, 1});
  CHECK(p.shape() == Shape{4, 2, 2, 3});
  CHECK(std::abs(p.at({3, 1, 0, 2}) - t.at({1, 2, 3, 0})) == 0.0);
  DenseTensor back = p.permuted({1, 3, 0, 2});
  CHECK((back - t).max_abs() == 0.0);
}

TEST_CASE("truncated_svd") {
  SUBCASE("rank one") {
    DenseTensor u({3}, {1.0, 2.0, cplx(0, 1)}), v({4}, {1.0, -1.0, 0.5, 2.0});
    DenseTensor m = contract(u, v, {});
    SvdResult s = truncated_svd(m, 1, 1e-16);
    CHECK(s.singular_values.size() == 1);
    CHECK(s.discarded_weight < 1e-30);
  }
  SUBCASE("small singular value dropped only when its weight is within the cutoff") {
    DenseTensor m({2, 2}, {1.0, 0.0, 0.0, 1e-9});
    SvdResult cut = truncated_svd(m, 1, 1e-16);
    CHECK(cut.singular_values.size() == 1);
    CHECK(std::abs(cut.discarded_weight - 1e-18) < 1e-30);
    SvdResult kept = truncated_svd(m, 1, 1e-20);
    CHECK(kept.singular_values.size() == 2);
  }
  SUBCASE("max rank against the full spectrum") {
    std::mt19937_64 rng(5);
    DenseTensor m = random_tensor(rng, {8, 8});
    SvdResult full = svd(m.matrix());
    SvdResult s = truncated_svd(m, 1, 0.0, 3);
    REQUIRE(s.singular_values.size() == 3);
    MatrixXc rec = s.left_isometry.matrix() * Eigen::Map<const Eigen::VectorXd>(s.singular_values.data(), 3).cast<cplx>().asDiagonal() *
                   s.right_isometry.matrix();
    double err = (rec - m.matrix()).norm();
    double tail = 0;
    for (std::size_t k = 3; k < 8; ++k) tail += full.singular_values[k] * full.singular_values[k];
    CHECK(std::abs(err - std::sqrt(tail)) < 1e-12);
    CHECK(std::abs(std::sqrt(s.discarded_weight) * m.norm() - err) < 1e-12);
  }
  SUBCASE("isometries, ordering and exact reconstruction") {
    std::mt19937_64 rng(6);
    DenseTensor m = random_tensor(rng, {3, 2, 5});
    SvdResult s = truncated_svd(m, 2, 0.0);
    MatrixXc u = s.left_isometry.matrix(), vh = s.right_isometry.matrix();
    CHECK((u.adjoint() * u - MatrixXc::Identity(u.cols(), u.cols())).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((vh * vh.adjoint() - MatrixXc::Identity(vh.rows(), vh.rows())).cwiseAbs().maxCoeff() < 1e-12);
    for (std::size_t k = 1; k < s.singular_values.size(); ++k) CHECK(s.singular_values[k] <= s.singular_values[k - 1]);
    MatrixXc rec = u * Eigen::Map<const Eigen::VectorXd>(s.singular_values.data(), s.singular_values.size()).cast<cplx>().asDiagonal() * vh;
    CHECK((rec - m.matrix(2)).norm() / m.norm() < 1e-12);
    // phase convention: largest entry of each left vector is real and non-negative
    for (Eigen::Index k = 0; k < u.cols(); ++k) {
      Eigen::Index i;
      u.col(k).cwiseAbs().maxCoeff(&i);
      CHECK(std::abs(u(i, k).imag()) < 1e-14);
      CHECK(u(i, k).real() >= 0.0);
    }
  }
  SUBCASE("deterministic") {
    std::mt19937_64 rng(7);
    DenseTensor m = random_tensor(rng, {6, 9});
    SvdResult a = truncated_svd(m, 1, 1e-10), b = truncated_svd(m, 1, 1e-10);
    CHECK(a.left_isometry.data() == b.left_isometry.data());
    CHECK(a.right_isometry.data() == b.right_isometry.data());
  }
  CHECK_THROWS_AS(truncated_svd(DenseTensor({2, 2}), 1, -1.0), ArgumentError);
}

TEST_CASE("polar_unitary") {
  CHECK((polar_unitary(MatrixXc(MatrixXc::Identity(4, 4))) - MatrixXc::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-14);
  MatrixXc d = MatrixXc::Zero(4, 4);
  d.diagonal() << 2.0, 0.5, 3.0, 1.0;
  CHECK((polar_unitary(d) - MatrixXc::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-14);
  std::mt19937_64 rng(8);
  MatrixXc m = testing::random_matrix(rng, 4, 4);
  MatrixXc w = polar_unitary(m);
  CHECK(unitarity_defect(w) < 1e-12);
  double best = (m.adjoint() * w).trace().real();
  int violations = 0;
  for (int k = 0; k < 1000; ++k) {
    MatrixXc v = testing::haar_unitary(rng, 4);
    if ((m.adjoint() * v).trace().real() > best + 1e-12) ++violations;
  }
  CHECK(violations == 0);
  MatrixXc sing = MatrixXc::Zero(4, 4);
  sing(0, 0) = 1.0;
  CHECK_THROWS_AS(polar_unitary(sing), DegeneratePolarError);
}

TEST_CASE("hermitian_exp") {
  CHECK((hermitian_exp(MatrixXc(MatrixXc::Zero(3, 3)), 0.7) - MatrixXc::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-15);
  MatrixXc z = MatrixXc::Zero(2, 2);
  z(0, 0) = 1.0;
  z(1, 1) = -1.0;
  MatrixXc ez = hermitian_exp(z, 0.4);
  CHECK(std::abs(ez(0, 0) - std::exp(cplx(0, -0.4))) < 1e-15);
  CHECK(std::abs(ez(1, 1) - std::exp(cplx(0, 0.4))) < 1e-15);
  std::mt19937_64 rng(9);
  MatrixXc h = testing::random_hermitian(rng, 8);
  // Taylor oracle with scaling and squaring
  const int squarings = 6;
  MatrixXc a = cplx(0, -0.3 / (1 << squarings)) * h;
  MatrixXc term = MatrixXc::Identity(8, 8), sum = MatrixXc::Identity(8, 8);
  for (int k = 1; k <= 40; ++k) {
    term = term * a / double(k);
    sum += term;
  }
  for (int s = 0; s < squarings; ++s) sum = sum * sum;
  MatrixXc e = hermitian_exp(h, 0.3);
  CHECK((e - sum).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(unitarity_defect(e) < 1e-12);
  CHECK((hermitian_exp(h, 0.2) * hermitian_exp(h, 0.5) - hermitian_exp(h, 0.7)).cwiseAbs().maxCoeff() < 1e-12);
  MatrixXc nh = testing::random_matrix(rng, 3, 3);
  CHECK_THROWS_AS(hermitian_exp(nh, 1.0), ArgumentError);
}

TEST_CASE("labelled network contraction") {
  std::mt19937_64 rng(10);
  DenseTensor a = random_tensor(rng, {2, 3, 3});
  // trace over a repeated label
  LabeledTensor tr = trace_repeated({a, {1, 2, 2}});
  for (std::size_t i = 0; i < 2; ++i) {
    cplx s = a.at({i, 0, 0}) + a.at({i, 1, 1}) + a.at({i, 2, 2});
    CHECK(std::abs(tr.t[i] - s) < 1e-14);
  }
  DenseTensor b = random_tensor(rng, {3, 4}), c = random_tensor(rng, {4, 2});
  LabeledTensor r = contract_network({{a, {1, 2, 3}}, {b, {3, 4}}, {c, {4, 5}}});
  DenseTensor ref = contract(contract(a, b, {{2, 0}}), c, {{2, 0}});
  CHECK((arrange(r, {1, 2, 5}) - ref).max_abs() < 1e-12);
}
