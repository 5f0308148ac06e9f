#pragma once

#include <functional>
#include <string>

#include "siso/bounds.hpp"
#include "siso/numerics.hpp"
#include "siso/synthesis.hpp"
#include "siso/sysmodel.hpp"
#include "siso/transform.hpp"

namespace siso {

struct BallEstimate {
  Vector center;
  double radius = 0;
};

// Everything the recursion needs: plant model, split, fixed gains, L~ and radii constants.
struct ObserverDesign {
  NonlinearSystem sys;
  TransformedSystem T;
  FixedGains gains;
  Matrix P;
  Matrix L_tilde;
  double rho = kInf;
  double alpha = 0;
  RadiiParams radii;
  std::string source;  // "synthesized" or "supplied"
};

// Assemble a design from a certificate (P, L~, rho). The radii constants follow the
// system's function class. Throws ContractViolation on shape mismatch.
ObserverDesign make_design(const NonlinearSystem& sys, const Matrix& P, const Matrix& L_tilde, double rho,
                           double alpha, const std::string& source, bool qcstar_sqrt = false);
ObserverDesign make_design(const NonlinearSystem& sys, const SynthesisResult& r, bool qcstar_sqrt = false);

struct ObserverState {
  int k = 0;
  Vector x_hat;        // x_{k|k}
  Vector d1_hat_prev;  // d_{1,k}, consumed at the next step as d_{1,k-1}
  Vector u_prev;       // u_k, consumed at the next step as u_{k-1}
  double delta0_x = 0;
  double delta_x_bar = 0;
};

ObserverState initialize(const ObserverDesign& d, const Vector& x0_hat, double delta0_x, const Vector& z1_0,
                         const Vector& u_0);
// Same, taking the raw first measurement y_0.
ObserverState initialize_from_output(const ObserverDesign& d, const Vector& x0_hat, double delta0_x,
                                     const Vector& y_0, const Vector& u_0);

struct StepOutput {
  ObserverState state;
  BallEstimate x;       // state set at k
  BallEstimate d_prev;  // input set at k-1
};

// One recursion k-1 -> k. Throws InputValidation on non-finite or mis-sized data.
StepOutput step(const ObserverDesign& d, const ObserverState& s, const Vector& y_k, const Vector& u_k);

struct ErrorDynamics {
  // x~ -> (I - L~ C2) Phi (df - Psi x~)
  std::function<Vector(const Vector& x_tilde, const Vector& df)> propagate;
  Matrix W_err;  // (I - L~ C2) R + L~ Q, n x (2l + n)
};

ErrorDynamics error_dynamics_matrices(const ObserverDesign& d);

}  // namespace siso
