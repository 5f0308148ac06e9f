#pragma once

#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "siso/numerics.hpp"
#include "siso/synthesis.hpp"
#include "siso/sysmodel.hpp"
#include "siso/transform.hpp"

namespace siso {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct RadiiParams {
  double theta1 = kInf, theta2 = kInf;
  double beta = 0, alpha_bar = 0, eta_bar = 0;
  double rho = kInf;
  double lambda_min_P = 1;
  double eta_w = 0, eta_v = 0;
};

// |lambda_max(P) - 1| / lambda_min(P). Throws ContractViolation unless P is positive definite.
double theta1_of(const Matrix& P);

struct ClassRadii {
  double theta2 = kInf, beta = 0, alpha_bar = 0, eta_bar = 0;
};

// theta2 and beta per function class, alpha_bar and eta_bar from the noise bounds.
// eta_bar bounds the per-step noise forcing of the state error, which passes through
// (I - L~ C2); alpha_bar carries W on the process-noise term.
// Class 0 yields theta2 = inf and takes beta from a registered Lipschitz (or A) surrogate;
// without one it throws InputValidation. `qcstar_sqrt` replaces lambda_max(A'A) by its
// square root (the Lipschitz constant of x -> Ax) in the class-II formulas.
ClassRadii class_radii_params(const FunctionClassSpec& spec, const FixedGains& g, const Matrix& L_tilde,
                              const TransformedSystem& T, const Matrix& W, double eta_w, double eta_v,
                              bool qcstar_sqrt = false);

RadiiParams make_radii_params(const Matrix& P, double rho, const ClassRadii& c, double eta_w, double eta_v);

// (I - L~ C2) Phi (A_i - Psi)
std::vector<Matrix> lpv_error_matrices(const std::vector<Matrix>& A_list, const FixedGains& g,
                                       const Matrix& L_tilde, const TransformedSystem& T);

// sum_{i=1}^k theta^{i-1}; k when theta == 1.
double geometric_sum(double theta, int k);

// Upper bound delta_x at step k, both branches and their minimum.
struct StateRadius {
  double branch1 = kInf, branch2 = kInf;
  double value() const { return std::min(branch1, branch2); }
};
StateRadius state_radius_at(const RadiiParams& r, double delta0_x, int k);

struct RadiiSequences {
  std::vector<double> delta_x;   // k = 0..K
  std::vector<double> delta_d;   // index k-1 = 0..K-1, i.e. the bound for d_{k-1}
  std::vector<double> delta_x1, delta_x2;
};

// Closed-form evaluation, or running accumulation of the geometric sums when `iterative`.
RadiiSequences radii_sequences(const RadiiParams& r, double delta0_x, int K, bool iterative = false);

// Limits of the bound sequences; absent unless min(theta1, theta2) < 1.
std::optional<std::pair<double, double>> steady_state(const RadiiParams& r);

// True iff every ||A_e,i|| < 1.
bool lpv_convergence_check(const std::vector<Matrix>& A_e_list);

}  // namespace siso
