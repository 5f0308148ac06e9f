#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "siso/bounds.hpp"
#include "siso/errors.hpp"
#include "siso/harness.hpp"
#include "siso/synthesis.hpp"

using namespace siso;

namespace {

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

NonlinearSystem scalar_system(double a, double c, const FunctionClassSpec& cls) {
  NonlinearSystem s;
  s.n = s.l = 1;
  s.p = s.m = 0;
  s.f = [a](int, const Vector& x) { return Vector(a * x); };
  s.G = Matrix(1, 0);
  s.H = Matrix(1, 0);
  s.C = scalar(c);
  s.W = scalar(1);
  s.x0_hat = Vector::Zero(1);
  s.class_spec = cls;
  return s;
}

struct Prepared {
  TransformedSystem T;
  FixedGains g;
  MultiplierBlocks mb;
};

Prepared prepare(const NonlinearSystem& s) {
  Prepared p;
  p.T = transform_system(s);
  p.g = fixed_gains(p.T, s.W);
  p.mb = class_multiplier_blocks(s.class_spec, s.n);
  return p;
}

SynthesisOptions coarse() {
  SynthesisOptions o;
  o.alpha_grid = {0.4, 0.6, 0.8};
  o.eps_grid = {0.1, 1.0, 10.0, 100.0, 1000.0};
  o.refine = false;
  return o;
}

Scenario contractive() { return load_scenario(std::string(SISO_TEST_DATA) + "/contractive.json"); }

Matrix random_matrix(int r, int c, std::mt19937_64& rng) {
  std::normal_distribution<double> N(0.0, 1.0);
  Matrix M(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) M(i, j) = N(rng);
  return M;
}

}  // namespace

TEST_CASE("fixed gains of the benchmark") {
  const Scenario sc = builtin_scenario("tanh_benchmark");
  const NonlinearSystem s = sc.system();
  const TransformedSystem T = transform_system(s);
  const FixedGains g = fixed_gains(T, s.W);
  CHECK(std::abs(g.M2(0, 0)) == doctest::Approx(1 / 0.65));
  CHECK((g.M2 * T.C2 * T.G2 - Matrix::Identity(1, 1)).norm() < 1e-12);
  Matrix Phi(2, 2);
  Phi << 1, 1 / 0.65, 0, 0;
  CHECK((g.Phi - Phi).norm() < 1e-12);
  CHECK((g.Phi * T.G2).norm() < 1e-12);
  CHECK(g.Psi.isZero());
  CHECK(g.R.rows() == 2);
  CHECK(g.R.cols() == 2 * 1 + 2);
  CHECK(g.Q.rows() == 1);
  CHECK(g.Q.cols() == 4);
  CHECK((g.Omega - (T.C2 * g.R - g.Q)).norm() < 1e-15);
  // C2 Phi = 0 here, so the gain cannot act on the state error.
  CHECK((T.C2 * g.Phi).norm() < 1e-12);
}

TEST_CASE("fixed gains without a second input channel") {
  const Prepared p0 = prepare(scalar_system(0.5, 1, ClassLipschitz{0.5}));
  CHECK(p0.g.M1.size() == 0);
  CHECK(p0.g.M2.size() == 0);
  CHECK(p0.g.Phi.isApprox(Matrix::Identity(1, 1)));
  CHECK(p0.g.Psi.isZero());

  const Scenario robot = builtin_scenario("flex_joint");
  const NonlinearSystem s = robot.system();
  const TransformedSystem T = transform_system(s);
  const FixedGains g = fixed_gains(T, s.W);
  CHECK(T.p_H == T.p);
  CHECK(g.M2.size() == 0);
  CHECK(g.Phi.isApprox(Matrix::Identity(4, 4)));
  CHECK((g.M1 * T.Sigma - Matrix::Identity(1, 1)).norm() < 1e-10);
}

TEST_CASE("gain identities on random systems") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 40; ++trial) {
    const int p = 1 + trial % 3;
    const int l = p + trial % 2;
    const int n = l + 1 + trial % 2;
    const int pH = trial % (p + 1);
    NonlinearSystem s;
    s.n = n;
    s.l = l;
    s.p = p;
    s.m = 0;
    s.f = [](int, const Vector& x) { return x; };
    s.G = random_matrix(n, p, rng);
    s.C = random_matrix(l, n, rng);
    s.H = random_matrix(l, pH, rng) * random_matrix(pH, p, rng);
    s.W = Matrix::Identity(n, n);
    s.x0_hat = Vector::Zero(n);
    const TransformedSystem T = transform_system(s);
    REQUIRE(T.p_H == pH);
    REQUIRE(T.rank_condition);
    const FixedGains g = fixed_gains(T, s.W);
    CHECK((g.M1 * T.Sigma - Matrix::Identity(pH, pH)).norm() < 1e-10);
    CHECK((g.M2 * T.C2 * T.G2 - Matrix::Identity(p - pH, p - pH)).norm() < 1e-10);
  }
}

TEST_CASE("rank condition failure is a certified impossibility") {
  NonlinearSystem s = scalar_system(0.5, 1, ClassLipschitz{0.5});
  s.n = 2;
  s.p = 1;
  s.f = [](int, const Vector& x) { return Vector(0.5 * x); };
  s.G = Matrix(2, 1);
  s.G << 0, 1;
  s.C = Matrix(1, 2);
  s.C << 1, 0;
  s.H = Matrix::Zero(1, 1);
  s.W = Matrix::Identity(2, 2);
  s.x0_hat = Vector::Zero(2);
  const TransformedSystem T = transform_system(s);
  CHECK_FALSE(T.rank_condition);
  CHECK_THROWS_AS(fixed_gains(T, s.W), DesignImpossible);
}

TEST_CASE("multiplier blocks per class") {
  const double L = 3.33 * 0.01;
  MultiplierBlocks mb = class_multiplier_blocks(ClassLipschitz{L}, 4);
  CHECK(mb.M11.isApprox(-Matrix::Identity(4, 4)));
  CHECK(mb.M12.isZero());
  CHECK(mb.M22.isApprox(L * L * Matrix::Identity(4, 4)));

  const Scenario robot = builtin_scenario("flex_joint");
  const Matrix A = *robot.plant.linear_part;
  mb = class_multiplier_blocks(ClassQCStar{A, 0.0}, 4);
  CHECK(mb.M11.isApprox(-Matrix::Identity(4, 4)));
  CHECK(mb.M12.isApprox(A));
  CHECK(mb.M22.isApprox(-A.transpose() * A));

  mb = class_multiplier_blocks(ClassLPV{{0.5 * Matrix::Identity(2, 2), 0.8 * Matrix::Identity(2, 2)}, {}}, 2);
  CHECK(mb.M22.isApprox(0.64 * Matrix::Identity(2, 2)));

  Matrix M0(2, 2);
  M0 << -1, 1, 1, -1;
  CHECK_THROWS_AS(class_multiplier_blocks(ClassQC0{{M0, -9.0}, std::nullopt, std::nullopt}, 1), DesignImpossible);
  CHECK_THROWS_AS(class_multiplier_blocks(ClassQCStar{scalar(1), -1.0}, 1), DesignImpossible);
}

TEST_CASE("quadratic stability on scalar plants") {
  // |x~+| <= 0.5 |x~| without correction: P = 1 gives 0.25 - 1 < 0.
  const Prepared ok = prepare(scalar_system(0.5, 1, ClassLipschitz{0.5}));
  const SynthesisResult r = stability_feasibility(ok.T, ok.g, ok.mb, 0.0);
  CHECK(r.feasible);
  REQUIRE(r.P.size() == 1);
  CHECK(r.P(0, 0) > 0);

  // Unobservable and expanding: no gain helps.
  const Prepared bad = prepare(scalar_system(2.0, 0, ClassLipschitz{2.0}));
  for (double a : {0.0, 0.5, 1.0}) CHECK_FALSE(stability_feasibility(bad.T, bad.g, bad.mb, a).feasible);
  CHECK_FALSE(stability_search(bad.T, bad.g, bad.mb).feasible);

  // L~ = 0 already certifies alpha = 0.75 (0.25 P - P = -0.75 P); the search must reach it
  const SynthesisResult s = stability_search(ok.T, ok.g, ok.mb);
  REQUIRE(s.feasible);
  CHECK(s.alpha >= 0.75 - 1e-3);
}

TEST_CASE("unreduced dissipation check") {
  // Lipschitz class: M12 = 0 and the reduction is exact.
  const Prepared ok = prepare(scalar_system(0.5, 1, ClassLipschitz{0.5}));
  const SynthesisResult r = stability_feasibility(ok.T, ok.g, ok.mb, 0.5);
  REQUIRE(r.feasible);
  CHECK(r.unreduced_margin > -1e-6);

  // f = 2x, C = 0 under QC*: Psi = 0, so the five LMIs reduce to kappa >= P and pass at
  // alpha = 1 although the error doubles every step. Directly, det = -4 kappa P < 0.
  const Prepared qc = prepare(scalar_system(2.0, 0, ClassQCStar{scalar(2.0), 0.0}));
  const SynthesisResult q = stability_feasibility(qc.T, qc.g, qc.mb, 1.0);
  REQUIRE(q.feasible);
  CHECK(q.unreduced_margin < 0);
}

TEST_CASE("instability probe") {
  // f = 2x with C = 0: P~ = 1.5 satisfies [[P~+1, -2], [-2, 4-P~]] > 0 (det 2.25).
  const Prepared bad = prepare(scalar_system(2.0, 0, ClassQCStar{scalar(2.0), 0.0}));
  const double Pt = 1.5;
  Matrix Pi(2, 2);
  Pi << Pt + 1, -2, -2, 4 - Pt;
  CHECK(sym_eig_extremes(Pi).first > 0);
  const ProbeVerdict v = instability_probe(bad.T, bad.g, bad.mb, {0.2, 0.5, 0.8});
  CHECK(v.no_stable_observer);
  CHECK(v.verdict() == "no Lyapunov-stable observer exists");

  // A feasible point only shows that the gain P~^-1 Y~ is destabilizing. For the stable plant
  // f = 0.5x, C = 1, P~ = 0.05 and Y~ = -0.22 (gain -4.4, error factor 2.7) pass at eta = 0.8,
  // although L~ = 0 gives a stable observer.
  const Prepared ok = prepare(scalar_system(0.5, 1, ClassQCStar{scalar(0.5), 0.0}));
  CHECK(instability_probe(ok.T, ok.g, ok.mb, {0.8}).no_stable_observer);
  CHECK(stability_feasibility(ok.T, ok.g, ok.mb, 0.5).feasible);
  CHECK_THROWS_AS(instability_probe(ok.T, ok.g, ok.mb, {1.0}), ContractViolation);
  CHECK_THROWS_AS(instability_probe(ok.T, ok.g, ok.mb, {0.0}), ContractViolation);
}

TEST_CASE("H-infinity design on a contractive plant") {
  const Scenario sc = contractive();
  const NonlinearSystem s = sc.system();
  const Prepared p = prepare(s);
  const SynthesisResult r = hinf_design(p.T, p.g, p.mb, coarse());
  REQUIRE(r.feasible);
  CHECK(std::isfinite(r.rho));
  CHECK(r.rho > 0);
  CHECK(sym_eig_extremes(r.P).first > 0);
  CHECK((r.L_tilde - r.P.ldlt().solve(r.Y)).norm() < 1e-8 * std::max(1.0, r.L_tilde.norm()));
  // the stated form of Pi: P - Y Y' >= 0
  CHECK(sym_eig_extremes(sym(r.P - r.Y * r.Y.transpose())).first > -1e-6);

  // the probe cannot contradict a successful design
  CHECK_FALSE(instability_probe(p.T, p.g, p.mb, {0.3, 0.6}).no_stable_observer);

  const SynthesisResult c = hinf_design_convergent(p.T, p.g, p.mb, coarse());
  REQUIRE(c.feasible);
  CHECK(theta1_of(c.P) < 1);
  CHECK(c.rho >= r.rho * (1 - 1e-6));
}

TEST_CASE("reference examples admit no H-infinity design") {
  SynthesisOptions o = coarse();
  o.alpha_grid = {0.8, 0.9};
  o.eps_grid = {0.1, 1.0};
  const Scenario bench = builtin_scenario("tanh_benchmark");
  const Prepared p = prepare(bench.system());
  CHECK_THROWS_AS(hinf_design(p.T, p.g, p.mb, o), SynthesisInfeasible);
  CHECK_FALSE(stability_feasibility(p.T, p.g, p.mb, 0.0).feasible);
}

TEST_CASE("LTI design follows strong detectability") {
  CHECK(lti_design(scalar(0.5), scalar(1), scalar(1), scalar(1)).result.feasible);
  CHECK_FALSE(lti_design(scalar(1.5), scalar(1), scalar(1), scalar(2)).result.feasible);
  // deadbeat plant without unknown input
  const LtiDesign d = lti_design(scalar(0.0), Matrix(1, 0), scalar(1), Matrix(1, 0));
  REQUIRE(d.result.feasible);
  CHECK(d.result.L_tilde.rows() == 1);
}
