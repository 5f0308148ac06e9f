#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "siso/errors.hpp"
#include "siso/harness.hpp"
#include "siso/transform.hpp"

using namespace siso;

namespace {

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

Matrix random_matrix(int r, int c, std::mt19937_64& rng) {
  std::normal_distribution<double> N(0.0, 1.0);
  Matrix M(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) M(i, j) = N(rng);
  return M;
}

void check_split(const Matrix& H, const FeedthroughSplit& s) {
  const auto l = H.rows(), p = H.cols();
  Matrix U(l, l), V(p, p);
  U << s.U1, s.U2;
  V << s.V1, s.V2;
  CHECK((U.transpose() * U - Matrix::Identity(l, l)).norm() < 1e-10);
  CHECK((V.transpose() * V - Matrix::Identity(p, p)).norm() < 1e-10);
  CHECK((s.U1 * s.Sigma * s.V1.transpose() - H).norm() < 1e-10 * std::max(1.0, H.norm()));
  CHECK((H * s.V2).norm() < 1e-10 * std::max(1.0, H.norm()));
}

}  // namespace

TEST_CASE("feedthrough split of the examples") {
  FeedthroughSplit z = decompose_feedthrough(Matrix::Zero(1, 1));
  CHECK(z.p_H == 0);
  CHECK(std::abs(z.U2(0, 0)) == doctest::Approx(1.0));
  CHECK(std::abs(z.V2(0, 0)) == doctest::Approx(1.0));
  CHECK(z.U1.cols() == 0);
  CHECK(z.Sigma.size() == 0);

  FeedthroughSplit id = decompose_feedthrough(Matrix::Identity(3, 3));
  CHECK(id.p_H == 3);
  CHECK(id.Sigma.isApprox(Matrix::Identity(3, 3)));
  CHECK(id.U2.cols() == 0);
  CHECK(id.V2.cols() == 0);
  check_split(Matrix::Identity(3, 3), id);

  Matrix H(2, 1);
  H << 0.011, 0.02;
  FeedthroughSplit r = decompose_feedthrough(H);
  CHECK(r.p_H == 1);
  CHECK(r.Sigma(0, 0) == doctest::Approx(H.norm()).epsilon(1e-12));
  // U1 = H / ||H|| up to the sign shared with V1
  CHECK((r.U1 * r.V1(0, 0) - H / H.norm()).norm() < 1e-12);
  check_split(H, r);
}

TEST_CASE("feedthrough split invariants on random data") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const int l = 1 + trial % 4;
    const int p = trial % (l + 1);
    const int rank = p == 0 ? 0 : trial % (p + 1);
    const Matrix H = random_matrix(l, rank, rng) * random_matrix(rank, p, rng);
    const FeedthroughSplit s = decompose_feedthrough(H);
    CHECK(s.p_H == rank);
    check_split(H, s);
    // [T1; T2] is an isometry
    Matrix T(l, l);
    T << s.U1.transpose(), s.U2.transpose();
    const Vector v = random_matrix(l, 1, rng);
    CHECK(std::abs((T * v).norm() - v.norm()) < 1e-12 * std::max(1.0, v.norm()));
  }
}

TEST_CASE("transformed benchmark") {
  const Scenario sc = builtin_scenario("tanh_benchmark");
  const TransformedSystem T = transform_system(sc.system());
  CHECK(T.p_H == 0);
  CHECK(T.C2.cwiseAbs().isApprox(sc.plant.sys.C.cwiseAbs()));
  CHECK(T.G2.cwiseAbs().isApprox(sc.plant.sys.G.cwiseAbs()));
  CHECK(T.C1.rows() == 0);
  CHECK(T.rank_condition);
  CHECK(std::abs((T.C2 * T.G2)(0, 0)) == doctest::Approx(0.65));
}

TEST_CASE("transformed robot") {
  const Scenario sc = builtin_scenario("flex_joint");
  const NonlinearSystem s = sc.system();
  CHECK(s.n == 4);
  Matrix H(2, 1);
  H << 0.011, 0.02;
  CHECK(s.H.isApprox(H));
  const TransformedSystem T = transform_system(s);
  CHECK(T.p_H == 1);
  CHECK(T.G1.isApprox(s.G * T.V1));
  CHECK(T.G2.cols() == 0);
  CHECK((s.H * T.V2).norm() < 1e-14);
  CHECK(T.rank_condition);

  // Both channels lumped: d = [d_G; d_H] with G = [G^ 0], H = [0 H^].
  const LumpedInputs li = lump_unknown_inputs(s.G, s.H);
  NonlinearSystem s2 = s;
  s2.p = 2;
  s2.G = li.G;
  s2.H = li.H;
  const TransformedSystem T2 = transform_system(s2);
  CHECK(T2.p_H == 1);
  CHECK(T2.G1.isApprox(li.G * T2.V1));
  CHECK(T2.G2.isApprox(li.G * T2.V2));
  CHECK((li.H * T2.V2).norm() < 1e-14);
}

TEST_CASE("full-rank feedthrough leaves no second channel") {
  NonlinearSystem s;
  s.n = 2;
  s.l = 2;
  s.p = 2;
  s.m = 0;
  s.f = [](int, const Vector& x) { return Vector(0.5 * x); };
  s.G = Matrix::Identity(2, 2);
  s.C = Matrix::Identity(2, 2);
  s.H = Matrix::Identity(2, 2);
  s.W = Matrix::Identity(2, 2);
  s.x0_hat = Vector::Zero(2);
  const TransformedSystem T = transform_system(s);
  CHECK(T.p_H == 2);
  CHECK(T.C2.rows() == 0);
  CHECK(T.rank_condition);
}

TEST_CASE("rank condition") {
  Matrix C2(1, 2), G2(2, 1);
  C2 << 0, 1;
  G2 << 1, -0.65;
  CHECK(rank_condition(C2, G2, 1, 0));
  CHECK_FALSE(rank_condition(Matrix::Zero(1, 2), G2, 1, 0));
  CHECK(rank_condition(Matrix(0, 2), Matrix(2, 0), 1, 1));
}

TEST_CASE("invariant zeros of scalar tuples") {
  // det [z - 0.5, -1; 1, 1] = z + 0.5
  InvariantZeros z = invariant_zeros(scalar(0.5), scalar(1), scalar(1), scalar(1));
  REQUIRE(z.zeros.size() == 1);
  CHECK(z.zeros[0].real() == doctest::Approx(-0.5));
  CHECK(strong_detectability(scalar(0.5), scalar(1), scalar(1), scalar(1)));

  // det [z - 2, -1; 1, 0] = 1
  z = invariant_zeros(scalar(2), scalar(1), scalar(1), scalar(0));
  CHECK(z.zeros.empty());
  CHECK_FALSE(z.identically_deficient);
  CHECK(strong_detectability(scalar(2), scalar(1), scalar(1), scalar(0)));

  // det [z - 1.5, -1; 1, 2] = 2z - 2
  z = invariant_zeros(scalar(1.5), scalar(1), scalar(1), scalar(2));
  REQUIRE(z.zeros.size() == 1);
  CHECK(z.zeros[0].real() == doctest::Approx(1.0));
  CHECK_FALSE(strong_detectability(scalar(1.5), scalar(1), scalar(1), scalar(2)));
}

TEST_CASE("invariant zeros agree with the pencil determinant") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + trial % 3;
    const Matrix A = random_matrix(n, n, rng), G = random_matrix(n, 1, rng);
    const Matrix C = random_matrix(1, n, rng), H = random_matrix(1, 1, rng);
    const InvariantZeros z = invariant_zeros(A, G, C, H);
    CHECK(static_cast<int>(z.zeros.size()) <= n);
    for (const auto& zz : z.zeros) CHECK(pencil_rank_gap(A, G, C, H, zz) < 1e-7);
  }
}

TEST_CASE("benchmark linear part is not minimum phase") {
  const Scenario sc = builtin_scenario("tanh_benchmark");
  const auto& s = sc.plant.sys;
  const InvariantZeros z = invariant_zeros(*sc.plant.linear_part, s.G, s.C, s.H);
  REQUIRE(z.zeros.size() == 1);
  CHECK(std::abs(z.zeros[0]) > 1.0);
  CHECK_FALSE(strong_detectability(*sc.plant.linear_part, s.G, s.C, s.H));
}

TEST_CASE("LPV necessary condition") {
  const Matrix G = scalar(1), C = scalar(1);
  CHECK(lpv_strong_detectability_necessary({scalar(0.5), scalar(0.5)}, G, C, scalar(1)));
  CHECK_FALSE(lpv_strong_detectability_necessary({scalar(0.5), scalar(1.5)}, G, C, scalar(1) * 2));
  CHECK(lpv_strong_detectability_necessary({scalar(0.5)}, G, C, scalar(1)) ==
        strong_detectability(scalar(0.5), G, C, scalar(1)));
}
