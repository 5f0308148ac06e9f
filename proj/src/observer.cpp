#include "siso/observer.hpp"

#include "siso/errors.hpp"

namespace siso {

ObserverDesign make_design(const NonlinearSystem& sys, const Matrix& P, const Matrix& L_tilde, double rho,
                           double alpha, const std::string& source, bool qcstar_sqrt) {
  ObserverDesign d;
  d.sys = sys;
  d.T = transform_system(sys);
  d.gains = fixed_gains(d.T, sys.W);
  if (P.rows() != sys.n || P.cols() != sys.n) throw ContractViolation("make_design: P must be n x n");
  if (L_tilde.rows() != sys.n || L_tilde.cols() != d.T.l - d.T.p_H)
    throw ContractViolation("make_design: L_tilde must be n x (l - p_H)");
  d.P = sym(P);
  d.L_tilde = L_tilde;
  d.rho = rho;
  d.alpha = alpha;
  d.source = source;
  const ClassRadii c = class_radii_params(sys.class_spec, d.gains, L_tilde, d.T, sys.W, sys.eta_w, sys.eta_v,
                                          qcstar_sqrt);
  d.radii = make_radii_params(d.P, rho, c, sys.eta_w, sys.eta_v);
  return d;
}

ObserverDesign make_design(const NonlinearSystem& sys, const SynthesisResult& r, bool qcstar_sqrt) {
  if (!r.feasible) throw ContractViolation("make_design: synthesis result is not feasible");
  return make_design(sys, r.P, r.L_tilde, r.rho, r.alpha, "synthesized", qcstar_sqrt);
}

namespace {

void check_vector(const Vector& v, Eigen::Index n, const char* what) {
  if (v.size() != n) throw InputValidation(std::string(what) + ": wrong length");
  if (!all_finite(v)) throw InputValidation(std::string(what) + ": non-finite entries");
}

Vector known_input(const ObserverDesign& d, const Vector& u) {
  if (d.sys.m == 0) return Vector::Zero(0);
  return u;
}

}  // namespace

ObserverState initialize(const ObserverDesign& d, const Vector& x0_hat, double delta0_x, const Vector& z1_0,
                         const Vector& u_0) {
  check_vector(x0_hat, d.sys.n, "initialize: x0_hat");
  check_vector(z1_0, d.T.p_H, "initialize: z1_0");
  const Vector u = known_input(d, u_0);
  check_vector(u, d.sys.m, "initialize: u_0");
  if (!(delta0_x >= 0)) throw InputValidation("initialize: delta0_x must be >= 0");
  ObserverState s;
  s.k = 0;
  s.x_hat = x0_hat;
  s.u_prev = u;
  s.delta0_x = delta0_x;
  s.delta_x_bar = delta0_x;
  s.d1_hat_prev = d.gains.M1 * (z1_0 - d.T.C1 * x0_hat - d.T.D1_at(0) * u);
  return s;
}

ObserverState initialize_from_output(const ObserverDesign& d, const Vector& x0_hat, double delta0_x,
                                     const Vector& y_0, const Vector& u_0) {
  check_vector(y_0, d.sys.l, "initialize: y_0");
  return initialize(d, x0_hat, delta0_x, d.T.T1 * y_0, u_0);
}

StepOutput step(const ObserverDesign& d, const ObserverState& s, const Vector& y_k, const Vector& u_k) {
  check_vector(y_k, d.sys.l, "step: y_k");
  const Vector u = known_input(d, u_k);
  check_vector(u, d.sys.m, "step: u_k");
  const int k = s.k + 1;
  const auto& T = d.T;
  const auto& g = d.gains;

  const Vector z1 = T.T1 * y_k;
  const Vector z2 = T.T2 * y_k;
  // Prediction uses the model at k-1.
  const Vector x_pred = d.sys.f(k - 1, s.x_hat) + d.sys.B_at(k - 1) * s.u_prev + T.G1 * s.d1_hat_prev;
  const Vector d2_hat = g.M2 * (z2 - T.C2 * x_pred - T.D2_at(k) * u);
  const Vector d_hat = T.V1 * s.d1_hat_prev + T.V2 * d2_hat;
  const double delta_d = (d.radii.beta == 0 || s.delta_x_bar == 0 ? 0.0 : d.radii.beta * s.delta_x_bar) +
                         d.radii.alpha_bar;
  const Vector x_star = x_pred + T.G2 * d2_hat;
  const Vector x_hat = x_star + d.L_tilde * (z2 - T.C2 * x_star - T.D2_at(k) * u);

  StepOutput out;
  out.state.k = k;
  out.state.x_hat = x_hat;
  out.state.u_prev = u;
  out.state.delta0_x = s.delta0_x;
  out.state.delta_x_bar = state_radius_at(d.radii, s.delta0_x, k).value();
  out.state.d1_hat_prev = g.M1 * (z1 - T.C1 * x_hat - T.D1_at(k) * u);
  out.x = {x_hat, out.state.delta_x_bar};
  out.d_prev = {d_hat, delta_d};
  return out;
}

ErrorDynamics error_dynamics_matrices(const ObserverDesign& d) {
  const auto n = d.sys.n;
  const Matrix K = (Matrix::Identity(n, n) - d.L_tilde * d.T.C2) * d.gains.Phi;
  const Matrix Psi = d.gains.Psi;
  ErrorDynamics e;
  e.propagate = [K, Psi](const Vector& xt, const Vector& df) -> Vector { return K * (df - Psi * xt); };
  e.W_err = (Matrix::Identity(n, n) - d.L_tilde * d.T.C2) * d.gains.R + d.L_tilde * d.gains.Q;
  return e;
}

}  // namespace siso
