#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "siso/errors.hpp"
#include "siso/harness.hpp"
#include "siso/observer.hpp"

using namespace siso;

namespace {

ObserverDesign reference_design(const std::string& name) {
  const Scenario sc = builtin_scenario(name);
  const SuppliedDesign& s = sc.designs.at("I");
  return make_design(sc.system(), s.P, s.L_tilde, s.rho, s.alpha, "supplied");
}

Vector random_vector(int n, double scale, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(-scale, scale);
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = U(rng);
  return v;
}

// Plant rollout: x_{k+1} = f(x_k) + B u_k + G d_k + W w_k, y_k = C x_k + D u_k + H d_k + v_k.
struct Rollout {
  std::vector<Vector> x, y, u, d, w, v;
};

Rollout rollout(const NonlinearSystem& s, const Vector& x0, int K, std::mt19937_64& rng, double d_scale,
                double noise) {
  Rollout r;
  r.x.push_back(x0);
  for (int k = 0; k <= K; ++k) {
    r.u.push_back(random_vector(s.m, 1.0, rng));
    r.d.push_back(random_vector(s.p, d_scale, rng));
    r.w.push_back(random_vector(s.n, noise, rng));
    r.v.push_back(random_vector(s.l, noise, rng));
    const Vector& x = r.x.back();
    r.y.push_back(s.C * x + s.D_at(k) * r.u[k] + s.H * r.d[k] + r.v[k]);
    if (k < K) r.x.push_back(s.f(k, x) + s.B_at(k) * r.u[k] + s.G * r.d[k] + s.W * r.w[k]);
  }
  return r;
}

// Observer run with exact knowledge of x0; returns x_hat_k and d_hat_{k-1}.
std::pair<std::vector<Vector>, std::vector<Vector>> observe(const ObserverDesign& d, const Rollout& r,
                                                            const Vector& x0_hat) {
  ObserverState s = initialize_from_output(d, x0_hat, 0.0, r.y[0], r.u[0]);
  std::vector<Vector> xh{s.x_hat}, dh;
  for (std::size_t k = 1; k < r.y.size(); ++k) {
    const StepOutput o = step(d, s, r.y[k], r.u[k]);
    s = o.state;
    xh.push_back(o.x.center);
    dh.push_back(o.d_prev.center);
  }
  return {xh, dh};
}

}  // namespace

TEST_CASE("benchmark one-step oracle") {
  const ObserverDesign d = reference_design("tanh_benchmark");
  const auto& s = d.sys;
  Vector x0(2);
  x0 << 1, 0;
  const Vector u = Vector::Zero(1);
  const Vector d0 = Vector::Constant(1, 5.0);
  const Vector x1 = s.f(0, x0) + s.G * d0;
  const Vector y0 = s.C * x0, y1 = s.C * x1;
  const ObserverState s0 = initialize_from_output(d, x0, 0.0, y0, u);
  const StepOutput o = step(d, s0, y1, u);
  CHECK(o.d_prev.center(0) == doctest::Approx(5.0).epsilon(1e-12));
  CHECK((o.x.center - x1).norm() < 1e-12);
  CHECK(o.state.k == 1);
}

TEST_CASE("noise-free fixed point with exact initialization") {
  for (const char* name : {"tanh_benchmark", "flex_joint"}) {
    const ObserverDesign d = reference_design(name);
    std::mt19937_64 rng(3);
    const Vector x0 = random_vector(d.sys.n, 1.0, rng);
    // The reference gains are not contracting, so rounding grows a few-fold per step.
    const Rollout r = rollout(d.sys, x0, 12, rng, 10.0, 0.0);
    const auto [xh, dh] = observe(d, r, x0);
    for (int k = 0; k <= 12; ++k) CHECK((xh[k] - r.x[k]).norm() <= 1e-8 * std::max(1.0, r.x[k].norm()));
    for (int k = 1; k <= 12; ++k) CHECK((dh[k - 1] - r.d[k - 1]).norm() <= 1e-8 * std::max(1.0, r.d[k - 1].norm()));
  }
}

TEST_CASE("state error does not depend on the unknown input") {
  // Affine plant: the linear part of the robot.
  const Scenario sc = builtin_scenario("flex_joint");
  NonlinearSystem lin = sc.system();
  const Matrix A = *sc.plant.linear_part;
  lin.f = [A](int, const Vector& x) { return Vector(A * x); };
  const SuppliedDesign& sd = sc.designs.at("I");
  const ObserverDesign d = make_design(lin, sd.P, sd.L_tilde, sd.rho, sd.alpha, "supplied");
  std::mt19937_64 rng_a(9), rng_b(9);
  const Vector x0 = Vector::Zero(d.sys.n);
  // Short horizon: the reference gain does not contract, so rounding grows per step.
  Rollout a = rollout(d.sys, x0, 12, rng_a, 0.0, 0.01);
  // Same noise and known inputs, very different unknown inputs.
  Rollout b = rollout(d.sys, x0, 12, rng_b, 0.0, 0.01);
  std::mt19937_64 rd(4);
  for (auto& dk : b.d) dk = random_vector(d.sys.p, 100.0, rd);
  b.x.resize(1);
  b.y.clear();
  for (int k = 0; k <= 12; ++k) {
    const Vector& x = b.x.back();
    b.y.push_back(d.sys.C * x + d.sys.D_at(k) * b.u[k] + d.sys.H * b.d[k] + b.v[k]);
    if (k < 12) b.x.push_back(d.sys.f(k, x) + d.sys.B_at(k) * b.u[k] + d.sys.G * b.d[k] + d.sys.W * b.w[k]);
  }
  const Vector x0_hat = Vector::Constant(d.sys.n, 0.1);
  const auto ea = observe(d, a, x0_hat).first, eb = observe(d, b, x0_hat).first;
  for (int k = 0; k <= 12; ++k) {
    const Vector ta = ea[k] - a.x[k], tb = eb[k] - b.x[k];
    CHECK((ta - tb).norm() <= 1e-8 * std::max(1.0, b.x[k].norm()));
  }
}

TEST_CASE("error dynamics reproduce the observer error") {
  for (const char* name : {"tanh_benchmark", "flex_joint"}) {
    const ObserverDesign d = reference_design(name);
    const ErrorDynamics e = error_dynamics_matrices(d);
    CHECK(e.W_err.rows() == d.sys.n);
    CHECK(e.W_err.cols() == 2 * d.sys.l + d.sys.n);
    std::mt19937_64 rng(17);
    const Vector x0 = random_vector(d.sys.n, 1.0, rng);
    const Rollout r = rollout(d.sys, x0, 25, rng, 3.0, 0.05);
    const Vector x0_hat = x0 + random_vector(d.sys.n, 0.2, rng);
    const auto xh = observe(d, r, x0_hat).first;
    const double s2 = std::sqrt(2.0);
    for (int k = 1; k <= 25; ++k) {
      // x~ = x_hat - x; stacked noise [-v_{k-1}/sqrt2; w_{k-1}; -v_k/sqrt2]
      const Vector prev = xh[k - 1] - r.x[k - 1];
      const Vector df = d.sys.f(k - 1, xh[k - 1]) - d.sys.f(k - 1, r.x[k - 1]);
      Vector om(2 * d.sys.l + d.sys.n);
      om << -r.v[k - 1] / s2, r.w[k - 1], -r.v[k] / s2;
      const Vector predicted = e.propagate(prev, df) + e.W_err * om;
      const double scale = std::max({1.0, r.x[k].norm(), xh[k].norm(), xh[k - 1].norm()});
      CHECK((predicted - (xh[k] - r.x[k])).norm() <= 1e-12 * scale);
    }
  }
}

TEST_CASE("zero gain gives the bare error map") {
  const Scenario sc = builtin_scenario("tanh_benchmark");
  const NonlinearSystem s = sc.system();
  const ObserverDesign d = make_design(s, Matrix::Identity(2, 2), Matrix::Zero(2, 1), 1.0, 0.5, "supplied");
  const ErrorDynamics e = error_dynamics_matrices(d);
  Vector xt(2), df(2);
  xt << 0.3, -0.4;
  df << 1.5, 2.0;
  CHECK((e.propagate(xt, df) - d.gains.Phi * (df - d.gains.Psi * xt)).norm() < 1e-14);
  CHECK((e.W_err - d.gains.R).norm() < 1e-14);
}

TEST_CASE("radius sequence matches the bounds module") {
  const ObserverDesign d = reference_design("tanh_benchmark");
  const RadiiSequences seq = radii_sequences(d.radii, 0.8, 30);
  ObserverState s = initialize(d, Vector::Zero(2), 0.8, Vector::Zero(0), Vector::Zero(1));
  CHECK(s.delta_x_bar == 0.8);
  double prev = s.delta_x_bar;
  for (int k = 1; k <= 30; ++k) {
    const StepOutput o = step(d, s, Vector::Zero(1), Vector::Zero(1));
    CHECK(o.x.radius == doctest::Approx(seq.delta_x[k]));
    CHECK(o.d_prev.radius == doctest::Approx(d.radii.beta * prev + d.radii.alpha_bar));
    prev = o.x.radius;
    s = o.state;
  }
}

TEST_CASE("input validation") {
  const ObserverDesign d = reference_design("tanh_benchmark");
  const ObserverState s = initialize(d, Vector::Zero(2), 1.0, Vector::Zero(0), Vector::Zero(1));
  CHECK_THROWS_AS(step(d, s, Vector::Constant(1, std::nan("")), Vector::Zero(1)), InputValidation);
  CHECK_THROWS_AS(step(d, s, Vector::Zero(2), Vector::Zero(1)), InputValidation);
  CHECK_THROWS_AS(initialize(d, Vector::Zero(3), 1.0, Vector::Zero(0), Vector::Zero(1)), InputValidation);
  CHECK_THROWS_AS(initialize(d, Vector::Zero(2), -1.0, Vector::Zero(0), Vector::Zero(1)), InputValidation);
  CHECK_THROWS_AS(make_design(d.sys, Matrix::Identity(3, 3), Matrix::Zero(2, 1), 1, 0, "x"), ContractViolation);
}
