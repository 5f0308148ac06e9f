#pragma once

#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "siso/numerics.hpp"
#include "siso/sdp.hpp"
#include "siso/sysmodel.hpp"
#include "siso/transform.hpp"

namespace siso {

struct FixedGains {
  Matrix M1;     // Sigma^{-1}
  Matrix M2;     // (C2 G2)^+
  Matrix Phi;    // I - G2 M2 C2
  Matrix Psi;    // G1 M1 C1
  Matrix R;      // n x (2l + n)
  Matrix Q;      // (l - p_H) x (2l + n)
  Matrix Omega;  // C2 R - Q
};

// Throws DesignImpossible when rk(C2 G2) != p - p_H.
FixedGains fixed_gains(const TransformedSystem& T, const Matrix& W);

struct MultiplierBlocks {
  Matrix M11, M12, M22;
};

// Throws DesignImpossible for a class-0 certificate with gamma < 0.
MultiplierBlocks class_multiplier_blocks(const FunctionClassSpec& spec, int n);

struct GridPoint {
  double alpha = 0, eps1 = 0, eps2 = 0;
  sdp::Status status = sdp::Status::NumericalFailure;
  double rho = std::numeric_limits<double>::quiet_NaN();
};

struct SynthesisOptions {
  std::vector<double> alpha_grid;  // coarse pass; empty = 0.05, 0.10, ..., 1.0
  double alpha_refine_step = 0.005;
  double alpha_refine_halfwidth = 0.05;
  bool refine = true;
  std::vector<double> eps_grid;  // empty = 13 log-spaced points in [1e-3, 1e3]
  int eps_refine_radius = 1;     // grid neighbours of the best (eps1, eps2) kept in the fine pass
  bool kappa_scaled_hinf = false;
  double delta = 1e-6;
  sdp::Options solver = sdp::Options::from_env();
  bool verbose = false;

  std::vector<double> alphas() const;
  std::vector<double> epsilons() const;
};

struct SynthesisResult {
  bool feasible = false;
  sdp::Status status = sdp::Status::NumericalFailure;
  std::string message;
  Matrix P, Y, L_tilde, L;
  Matrix Gamma_tilde, Q_breve, Z_breve, Gamma;
  double alpha = std::numeric_limits<double>::quiet_NaN();
  double rho = std::numeric_limits<double>::quiet_NaN();
  double kappa = std::numeric_limits<double>::quiet_NaN();
  double eps1 = std::numeric_limits<double>::quiet_NaN();
  double eps2 = std::numeric_limits<double>::quiet_NaN();
  double kappa1 = std::numeric_limits<double>::quiet_NaN();
  double kappa2 = std::numeric_limits<double>::quiet_NaN();
  std::string branch;
  double margin = 0.0;
  int solves = 0;
  std::vector<std::pair<std::string, double>> constraint_margins;
  std::vector<GridPoint> grid;
  // lambda_min of the unreduced dissipation matrix, relative to ||P||; negative means
  // the returned (P, L~, kappa, alpha) does not certify V(e+) <= (1 - alpha) V(e).
  double unreduced_margin = std::numeric_limits<double>::quiet_NaN();
};

// Checks diag((1 - alpha) P, 0) - [Ae Be]' P [Ae Be] - kappa M >= 0 directly, with
// Ae = -(I - L~ C2) Phi Psi, Be = (I - L~ C2) Phi and M the multiplier in (e, df) order.
// The five-LMI test reduces this by a congruence with diag(I, Psi), which loses
// information when Psi is singular and M12 != 0.
double unreduced_margin(const SynthesisResult& r, const TransformedSystem& T, const FixedGains& g,
                        const MultiplierBlocks& mb);

// Quadratic-stability LMIs at fixed alpha.
SynthesisResult stability_feasibility(const TransformedSystem& T, const FixedGains& g,
                                      const MultiplierBlocks& mb, double alpha,
                                      const SynthesisOptions& opt = {});

// Largest alpha in [0,1] (to `tol`) for which the stability LMIs are feasible.
SynthesisResult stability_search(const TransformedSystem& T, const FixedGains& g,
                                 const MultiplierBlocks& mb, const SynthesisOptions& opt = {},
                                 double tol = 1e-3);

// min rho^2 at one grid point.
SynthesisResult hinf_point(const TransformedSystem& T, const FixedGains& g, const MultiplierBlocks& mb,
                           double alpha, double eps1, double eps2, const SynthesisOptions& opt = {});

// Grid search over (alpha, eps1, eps2). Throws SynthesisInfeasible if no point is feasible.
SynthesisResult hinf_design(const TransformedSystem& T, const FixedGains& g, const MultiplierBlocks& mb,
                            const SynthesisOptions& opt = {});

// Same search with kappa1 I <= P <= kappa2 I and the two branches that force theta1 < 1.
SynthesisResult hinf_design_convergent(const TransformedSystem& T, const FixedGains& g,
                                       const MultiplierBlocks& mb, const SynthesisOptions& opt = {});

struct ProbeVerdict {
  bool no_stable_observer = false;  // some eta gave a feasible point
  std::vector<std::pair<double, sdp::Status>> points;
  std::string verdict() const { return no_stable_observer ? "no Lyapunov-stable observer exists" : "inconclusive"; }
};

ProbeVerdict instability_probe(const TransformedSystem& T, const FixedGains& g, const MultiplierBlocks& mb,
                               const std::vector<double>& eta_grid, const SynthesisOptions& opt = {});

// LTI tuple design; result carries M1/M2 implicitly through the split of H.
struct LtiDesign {
  SynthesisResult result;
  FixedGains gains;
  TransformedSystem T;
};
LtiDesign lti_design(const Matrix& A, const Matrix& G, const Matrix& C, const Matrix& H,
                     const SynthesisOptions& opt = {});

// Split used by lti_design (W = I, f linear).
TransformedSystem transform_lti(const Matrix& A, const Matrix& G, const Matrix& C, const Matrix& H);

}  // namespace siso
