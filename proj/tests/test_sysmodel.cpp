#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "siso/errors.hpp"
#include "siso/sysmodel.hpp"

using namespace siso;

namespace {

std::vector<std::pair<Vector, Vector>> pairs_in_box(int n, double lo, double hi, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(lo, hi);
  std::vector<std::pair<Vector, Vector>> out;
  for (int i = 0; i < count; ++i) {
    Vector a(n), b(n);
    for (int j = 0; j < n; ++j) {
      a(j) = U(rng);
      b(j) = U(rng);
    }
    out.emplace_back(a, b);
  }
  return out;
}

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

NonlinearSystem small_system() {
  NonlinearSystem s;
  s.n = 2;
  s.m = 1;
  s.l = 1;
  s.p = 1;
  s.f = [](int, const Vector& x) { return Vector(0.5 * x); };
  s.G = Matrix::Ones(2, 1);
  s.C = Matrix::Ones(1, 2);
  s.H = Matrix::Zero(1, 1);
  s.W = Matrix::Identity(2, 2);
  s.x0_hat = Vector::Zero(2);
  s.class_spec = ClassLipschitz{0.5};
  return s;
}

}  // namespace

TEST_CASE("Lipschitz to delta-QC") {
  const QcCertificate c = qc_from_lipschitz(1.0, 2);
  CHECK(c.M11().isApprox(-Matrix::Identity(2, 2)));
  CHECK(c.M22().isApprox(Matrix::Identity(2, 2)));
  CHECK(c.M12().isZero());
  CHECK(c.gamma == 0.0);

  const double L = 3.33 * 0.01;
  CHECK(qc_from_lipschitz(L, 4).M22().isApprox(L * L * Matrix::Identity(4, 4)));

  auto sinf = [](const Vector& x) { return Vector(x.array().sin()); };
  const auto rep = qc_holds_on_samples(sinf, qc_from_lipschitz(1.0, 1).M, 0.0, pairs_in_box(1, -10, 10, 10000, 1));
  CHECK(rep.holds);
  CHECK(rep.violations == 0);
  CHECK_THROWS_AS(qc_from_lipschitz(0.0, 1), ContractViolation);
}

TEST_CASE("bounded decomposition to QC*") {
  CHECK(qcstar_from_bounded_decomposition(Matrix::Identity(2, 2), 0.0).gamma == 0.0);
  const ClassQCStar q = qcstar_from_bounded_decomposition(Matrix::Zero(1, 1), 1.0);
  CHECK(q.gamma == doctest::Approx(-4.0));
  // A bounded map with ||g|| <= 1: increments never exceed 2 in norm.
  auto g = [](const Vector& x) { return Vector(x.array().cos()); };
  CHECK(qc_holds_on_samples(g, qcstar_multiplier(q.A), q.gamma, pairs_in_box(1, -20, 20, 10000, 2)).holds);

  // x -> A x + h + g(x) with ||g|| <= r
  Matrix A(2, 2);
  A << 0.9, 0.1, -0.2, 0.7;
  const double r = 0.3;
  const ClassQCStar qa = qcstar_from_bounded_decomposition(A, r);
  auto fa = [&](const Vector& x) {
    Vector h(2);
    h << 1.0, -2.0;
    return Vector(A * x + h + r * Vector(x.array().sin()) / std::sqrt(2.0));
  };
  CHECK(qc_holds_on_samples(fa, qcstar_multiplier(qa.A), qa.gamma, pairs_in_box(2, -5, 5, 10000, 3)).holds);
}

TEST_CASE("bounded-domain Lipschitz to QC*") {
  const ClassQCStar q = qcstar_from_bounded_lipschitz(2.0, 1.5, 1);
  CHECK(q.gamma == doctest::Approx(-4 * 1.5 * 1.5 * 4.0));
  CHECK(q.A.isZero());
  auto f = [](const Vector& x) { return Vector(2.0 * x.array().tanh()); };
  CHECK(qc_holds_on_samples(f, qcstar_multiplier(q.A), q.gamma, pairs_in_box(1, -1.5, 1.5, 10000, 4)).holds);
}

TEST_CASE("QC to QC*") {
  Matrix M = Matrix::Zero(2, 2);
  M(0, 0) = -1;
  auto a = qcstar_from_qc(M);
  REQUIRE(a);
  CHECK(a->isZero());

  Matrix M0(2, 2);
  M0 << -1, 1, 1, -1;
  a = qcstar_from_qc(M0);
  REQUIRE(a);
  CHECK((*a)(0, 0) == doctest::Approx(1.0));
  // M - qcstar_multiplier(A) must be negative semidefinite
  CHECK(sym_eig_extremes(M0 - qcstar_multiplier(*a)).second <= 1e-9);

  Matrix bad = Matrix::Zero(2, 2);
  bad(0, 0) = -1;
  bad(1, 1) = 1;
  CHECK_FALSE(qcstar_from_qc(bad));
}

TEST_CASE("QC* and LPV to Lipschitz") {
  CHECK(*lipschitz_from_qcstar(Matrix::Identity(2, 2), 0.0) == doctest::Approx(1.0));
  Matrix d = Matrix::Zero(2, 2);
  d.diagonal() << 3, 4;
  CHECK(*lipschitz_from_qcstar(d, 0.0) == doctest::Approx(4.0));
  Matrix rot(2, 2);
  rot << std::cos(0.7), -std::sin(0.7), std::sin(0.7), std::cos(0.7);
  CHECK(*lipschitz_from_qcstar(0.5 * rot, 0.0) == doctest::Approx(0.5));
  CHECK_FALSE(lipschitz_from_qcstar(d, -1.0));

  CHECK(lipschitz_from_lpv({Matrix::Identity(2, 2)}) == doctest::Approx(1.0));
  Matrix a1 = 0.5 * Matrix::Identity(2, 2), a2 = Matrix::Zero(2, 2);
  a2.diagonal() << 0.9, 0.1;
  CHECK(lipschitz_from_lpv({a1, a2}) == doctest::Approx(0.9));
  Matrix J(2, 2);
  J << 0, 1, -1, 0;
  const double L = lipschitz_from_lpv({0.3 * J, 0.7 * J});
  CHECK(L == doctest::Approx(0.7));

  // the bound covers every convex combination
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(0, 1);
  for (int i = 0; i < 1000; ++i) {
    const double t = U(rng);
    CHECK(spectral_norm(t * a1 + (1 - t) * a2) <= lipschitz_from_lpv({a1, a2}) + 1e-12);
  }
}

TEST_CASE("rescaling multipliers") {
  Matrix M0(2, 2);
  M0 << -1, 1, 1, -1;
  const QcCertificate c{M0, -9.0};
  const QcCertificate same = qc_rescale(c, 1.0, 1.0);
  CHECK(same.M.isApprox(M0));
  CHECK(same.gamma == -9.0);
  const QcCertificate twice = qc_rescale(c, 2.0, 1.0);
  CHECK(twice.M.isApprox(2 * M0));
  CHECK(twice.gamma == -18.0);
  const QcCertificate zero = qc_rescale(c, 0.0, 3.0);
  CHECK(zero.M.isZero());
  CHECK(zero.gamma == 0.0);
  CHECK_THROWS_AS(qc_rescale(c, 1.0, 0.5), ContractViolation);

  auto sq = [](const Vector& x) { return Vector(x.array().square()); };
  const auto pairs = pairs_in_box(1, -1, 1, 10000, 6);
  CHECK(qc_holds_on_samples(sq, M0, -9.0, pairs).holds);
  CHECK(qc_holds_on_samples(sq, twice.M, twice.gamma, pairs).holds);
  // with a negative level, nu also scales gamma
  const QcCertificate mixed = qc_rescale(c, 0.5, 2.0);
  CHECK(mixed.gamma == doctest::Approx(-9.0));
  CHECK(qc_holds_on_samples(sq, mixed.M, mixed.gamma, pairs).holds);
  CHECK_FALSE(qc_holds_on_samples(sq, 2.0 * M0, -9.0, pairs).holds);
  const QcCertificate lip = qc_rescale(qc_from_lipschitz(1.0, 1), 1.0, 3.0);
  CHECK(lip.gamma == 0.0);
  auto sinf = [](const Vector& x) { return Vector(x.array().sin()); };
  CHECK(qc_holds_on_samples(sinf, lip.M, lip.gamma, pairs_in_box(1, -5, 5, 10000, 9)).holds);
}

TEST_CASE("sample-based falsifier") {
  Matrix mono = Matrix::Zero(2, 2);
  mono(0, 1) = mono(1, 0) = 1;
  auto id = [](const Vector& x) { return x; };
  CHECK(qc_holds_on_samples(id, mono, 0.0, pairs_in_box(1, -3, 3, 1000, 7)).holds);

  auto twice = [](const Vector& x) { return Vector(2 * x); };
  const auto rep = qc_holds_on_samples(twice, qc_from_lipschitz(1.0, 1).M, 0.0, pairs_in_box(1, -3, 3, 1000, 8));
  CHECK_FALSE(rep.holds);
  CHECK(rep.worst_margin < 0);
}

TEST_CASE("lumping unknown inputs") {
  LumpedInputs a = lump_unknown_inputs(Matrix::Identity(2, 2), Matrix(1, 0));
  CHECK(a.G.isApprox(Matrix::Identity(2, 2)));
  CHECK(a.H.rows() == 1);
  CHECK(a.H.cols() == 2);
  CHECK(a.H.isZero());

  const double Ts = 0.01;
  Matrix Gh(4, 1), Hh(2, 1);
  Gh << 5, 5, 2, 1;
  Hh << 1.1, 2;
  Gh *= Ts;
  Hh *= Ts;
  LumpedInputs r = lump_unknown_inputs(Gh, Hh);
  REQUIRE(r.G.cols() == 2);
  CHECK(r.G.col(0).isApprox(Gh));
  CHECK(r.G.col(1).isZero());
  CHECK(r.H.col(0).isZero());
  CHECK(r.H.col(1).isApprox(Hh));

  LumpedInputs h = lump_unknown_inputs(Matrix(3, 0), scalar(1));
  CHECK(h.G.isZero());
  CHECK(h.G.rows() == 3);
  CHECK(h.H(0, 0) == 1.0);
}

TEST_CASE("system validation") {
  NonlinearSystem s = small_system();
  CHECK_NOTHROW(s.validate());

  NonlinearSystem bad = s;
  bad.C = Matrix::Ones(1, 3);
  CHECK_THROWS_AS(bad.validate(), ModelInvalid);

  bad = s;
  bad.G = Matrix::Zero(2, 1);  // rk[G' H'] = 0 < p
  CHECK_THROWS_AS(bad.validate(), ModelInvalid);

  bad = s;
  bad.eta_w = -1;
  CHECK_THROWS_AS(bad.validate(), ModelInvalid);

  bad = s;
  Matrix M = Matrix::Zero(4, 4);
  M(0, 1) = 1;
  bad.class_spec = ClassQC0{{M, 0.0}, std::nullopt, std::nullopt};
  CHECK_THROWS_AS(bad.validate(), ModelInvalid);

  CHECK_NOTHROW(validate_lpv_weights(Vector::Constant(2, 0.5), 2));
  CHECK_THROWS_AS(validate_lpv_weights(Vector::Constant(2, 0.6), 2), InputValidation);
  Vector neg(2);
  neg << -0.5, 1.5;
  CHECK_THROWS_AS(validate_lpv_weights(neg, 2), InputValidation);
}

TEST_CASE("class names") {
  CHECK(class_name(ClassQC0{}) == "0");
  CHECK(class_name(ClassLipschitz{1}) == "I");
  CHECK(class_name(ClassQCStar{}) == "II");
  CHECK(class_name(ClassLPV{}) == "III");
}
