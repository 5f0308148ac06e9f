#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "siso/numerics.hpp"

namespace siso {

// f_k(x): time-indexed state map.
using StateMap = std::function<Vector(int k, const Vector& x)>;
// Time-indexed matrix (B_k, D_k). An empty std::function means "zero".
using MatrixSchedule = std::function<Matrix(int k)>;
// lambda_{.,k}: convex weights of the LPV constituents at step k.
using LpvCoefficients = std::function<Vector(int k)>;

MatrixSchedule constant_schedule(Matrix M);

// A multiplier M (2n x 2n, ordered [df; dx]) together with its level gamma.
struct QcCertificate {
  Matrix M;
  double gamma = 0.0;

  Matrix M11() const;
  Matrix M12() const;
  Matrix M22() const;
};

// Class 0: general (M, gamma)-QC. Optional surrogates feed the input-radius bound.
struct ClassQC0 {
  QcCertificate qc;
  std::optional<double> lipschitz_surrogate;
  std::optional<Matrix> A_surrogate;
};

// Class I: globally Lipschitz.
struct ClassLipschitz {
  double L_f = 0.0;
};

// Class II: (A, gamma)-QC*.
struct ClassQCStar {
  Matrix A;
  double gamma = 0.0;
};

// Class III: LPV with constituents A^i and known weights.
struct ClassLPV {
  std::vector<Matrix> A;
  LpvCoefficients lambda;
};

using FunctionClassSpec = std::variant<ClassQC0, ClassLipschitz, ClassQCStar, ClassLPV>;

std::string class_name(const FunctionClassSpec& spec);
void validate_class(const FunctionClassSpec& spec, int n);
// Checks lambda in [0,1] with unit sum (1e-9).
void validate_lpv_weights(const Vector& lambda, std::size_t N);

struct NonlinearSystem {
  int n = 0, m = 0, l = 0, p = 0;
  StateMap f;
  MatrixSchedule B;  // n x m
  Matrix G;          // n x p
  Matrix C;          // l x n
  MatrixSchedule D;  // l x m
  Matrix H;          // l x p
  Matrix W;          // n x n
  double eta_w = 0.0, eta_v = 0.0;
  Vector x0_hat;
  double delta0_x = 0.0;
  FunctionClassSpec class_spec = ClassLipschitz{1.0};

  Matrix B_at(int k) const;
  Matrix D_at(int k) const;
  // Throws ModelInvalid on any violated invariant.
  void validate() const;
};

// Lipschitz L_f  ->  delta-QC multiplier [-I 0; 0 L_f^2 I] with gamma = 0.
QcCertificate qc_from_lipschitz(double L_f, int n);

// Bounded-domain Lipschitz map (||x|| <= r): A = 0, gamma = -4 r^2 L_f^2.
ClassQCStar qcstar_from_bounded_lipschitz(double L_f, double r, int n);

// f = A x + h + g(x), ||g|| <= r: (A, -(2r)^2).
ClassQCStar qcstar_from_bounded_decomposition(const Matrix& A, double r);

// A = M12 when M11 + I <= 0 and M22 + M12'M12 <= 0.
std::optional<Matrix> qcstar_from_qc(const Matrix& M);

// sqrt(lambda_max(A'A)) when gamma >= 0 and A != 0.
std::optional<double> lipschitz_from_qcstar(const Matrix& A, double gamma);

double lipschitz_from_lpv(const std::vector<Matrix>& A_list);

// (kappa nu M, kappa min(gamma, nu gamma)).
QcCertificate qc_rescale(const QcCertificate& c, double kappa, double nu);

// Structured multiplier [-I A; A' -A'A].
Matrix qcstar_multiplier(const Matrix& A);

struct QcSampleReport {
  bool holds = true;
  double worst_margin = 0.0;  // min over pairs of (form - gamma)
  std::size_t violations = 0;
};

using PlainMap = std::function<Vector(const Vector&)>;

QcSampleReport qc_holds_on_samples(const PlainMap& f, const Matrix& M, double gamma,
                                   const std::vector<std::pair<Vector, Vector>>& pairs);

struct LumpedInputs {
  Matrix G;
  Matrix H;
};

// G = [G_hat 0], H = [0 H_hat]; checks rk[G' H'] = p.
LumpedInputs lump_unknown_inputs(const Matrix& G_hat, const Matrix& H_hat);

}  // namespace siso
