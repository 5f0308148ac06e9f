#include "siso/sysmodel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "siso/errors.hpp"

namespace siso {

MatrixSchedule constant_schedule(Matrix M) {
  return [M = std::move(M)](int) { return M; };
}

Matrix QcCertificate::M11() const {
  const auto n = M.rows() / 2;
  return M.topLeftCorner(n, n);
}
Matrix QcCertificate::M12() const {
  const auto n = M.rows() / 2;
  return M.topRightCorner(n, n);
}
Matrix QcCertificate::M22() const {
  const auto n = M.rows() / 2;
  return M.bottomRightCorner(n, n);
}

std::string class_name(const FunctionClassSpec& spec) {
  switch (spec.index()) {
    case 0: return "0";
    case 1: return "I";
    case 2: return "II";
    default: return "III";
  }
}

void validate_lpv_weights(const Vector& lambda, std::size_t N) {
  if (static_cast<std::size_t>(lambda.size()) != N)
    throw InputValidation("LPV weights: expected " + std::to_string(N) + " coefficients");
  for (Eigen::Index i = 0; i < lambda.size(); ++i)
    if (!(lambda(i) >= -1e-9 && lambda(i) <= 1 + 1e-9))
      throw InputValidation("LPV weights must lie in [0,1]");
  if (std::abs(lambda.sum() - 1.0) > 1e-9) throw InputValidation("LPV weights must sum to 1");
}

void validate_class(const FunctionClassSpec& spec, int n) {
  auto square_n = [n](const Matrix& A, const char* what) {
    if (A.rows() != n || A.cols() != n)
      throw ModelInvalid(std::string(what) + " must be " + std::to_string(n) + "x" +
                         std::to_string(n));
  };
  if (const auto* c = std::get_if<ClassQC0>(&spec)) {
    const Matrix& M = c->qc.M;
    if (M.rows() != 2 * n || M.cols() != 2 * n) throw ModelInvalid("class 0 multiplier must be 2n x 2n");
    if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, M.cwiseAbs().maxCoeff()))
      throw ModelInvalid("class 0 multiplier must be symmetric");
    if (!std::isfinite(c->qc.gamma)) throw ModelInvalid("class 0 gamma must be finite");
    if (c->A_surrogate) square_n(*c->A_surrogate, "class 0 A surrogate");
  } else if (const auto* c = std::get_if<ClassLipschitz>(&spec)) {
    if (!(c->L_f > 0) || !std::isfinite(c->L_f)) throw ModelInvalid("Lipschitz constant must be positive");
  } else if (const auto* c = std::get_if<ClassQCStar>(&spec)) {
    square_n(c->A, "QC* matrix");
    if (!std::isfinite(c->gamma)) throw ModelInvalid("QC* gamma must be finite");
  } else {
    const auto& lpv = std::get<ClassLPV>(spec);
    if (lpv.A.empty()) throw ModelInvalid("LPV class needs at least one constituent");
    for (const auto& A : lpv.A) square_n(A, "LPV constituent");
  }
}

Matrix NonlinearSystem::B_at(int k) const { return B ? B(k) : Matrix::Zero(n, m); }
Matrix NonlinearSystem::D_at(int k) const { return D ? D(k) : Matrix::Zero(l, m); }

void NonlinearSystem::validate() const {
  auto shape = [](const Matrix& M, int r, int c, const char* what) {
    if (M.rows() != r || M.cols() != c) {
      std::ostringstream os;
      os << what << " has shape " << M.rows() << "x" << M.cols() << ", expected " << r << "x" << c;
      throw ModelInvalid(os.str());
    }
    if (!all_finite(M)) throw ModelInvalid(std::string(what) + " has non-finite entries");
  };
  if (n < 1 || l < 1 || l > n) throw ModelInvalid("dimensions must satisfy n >= l >= 1");
  if (p < 0 || p > l) throw ModelInvalid("dimensions must satisfy l >= p >= 0");
  if (m < 0) throw ModelInvalid("m must be nonnegative");
  if (!f) throw ModelInvalid("state map f is missing");
  shape(G, n, p, "G");
  shape(C, l, n, "C");
  shape(H, l, p, "H");
  shape(W, n, n, "W");
  shape(B_at(0), n, m, "B");
  shape(D_at(0), l, m, "D");
  if (!(eta_w >= 0) || !(eta_v >= 0) || !(delta0_x >= 0))
    throw ModelInvalid("noise bounds and initial radius must be nonnegative");
  if (x0_hat.size() != n) throw ModelInvalid("x0_hat must have length n");
  if (p > 0) {
    Matrix stacked(n + l, p);
    stacked << G, H;
    if (numerical_rank(stacked) != p) throw ModelInvalid("rk[G' H'] must equal p");
  }
  validate_class(class_spec, n);
}

QcCertificate qc_from_lipschitz(double L_f, int n) {
  if (!(L_f > 0)) throw ContractViolation("qc_from_lipschitz: L_f must be positive");
  QcCertificate c;
  c.M = Matrix::Zero(2 * n, 2 * n);
  c.M.topLeftCorner(n, n) = -Matrix::Identity(n, n);
  c.M.bottomRightCorner(n, n) = L_f * L_f * Matrix::Identity(n, n);
  c.gamma = 0.0;
  return c;
}

ClassQCStar qcstar_from_bounded_lipschitz(double L_f, double r, int n) {
  if (!(L_f > 0) || !(r >= 0)) throw ContractViolation("qcstar_from_bounded_lipschitz: bad arguments");
  return {Matrix::Zero(n, n), -4.0 * r * r * L_f * L_f};
}

ClassQCStar qcstar_from_bounded_decomposition(const Matrix& A, double r) {
  if (!(r >= 0)) throw ContractViolation("qcstar_from_bounded_decomposition: r must be nonnegative");
  return {A, -(2.0 * r) * (2.0 * r)};
}

std::optional<Matrix> qcstar_from_qc(const Matrix& M) {
  if (M.rows() != M.cols() || M.rows() % 2 != 0)
    throw ContractViolation("qcstar_from_qc: multiplier must be 2n x 2n");
  const auto n = M.rows() / 2;
  const Matrix M11 = M.topLeftCorner(n, n);
  const Matrix M12 = M.topRightCorner(n, n);
  const Matrix M22 = M.bottomRightCorner(n, n);
  if (sym_eig_extremes(M11 + Matrix::Identity(n, n)).second > 1e-9) return std::nullopt;
  if (sym_eig_extremes(sym(M22 + M12.transpose() * M12)).second > 1e-9) return std::nullopt;
  return M12;
}

std::optional<double> lipschitz_from_qcstar(const Matrix& A, double gamma) {
  if (gamma < 0 || A.size() == 0 || A.isZero(0.0)) return std::nullopt;
  return std::sqrt(sym_eig_extremes(A.transpose() * A).second);
}

double lipschitz_from_lpv(const std::vector<Matrix>& A_list) {
  if (A_list.empty()) throw ContractViolation("lipschitz_from_lpv: empty constituent list");
  double L = 0.0;
  for (const auto& A : A_list) L = std::max(L, spectral_norm(A));
  return L;
}

QcCertificate qc_rescale(const QcCertificate& c, double kappa, double nu) {
  if (!(kappa >= 0) || !(nu >= 1)) throw ContractViolation("qc_rescale: need kappa >= 0 and nu >= 1");
  // nu M keeps the level only when gamma >= 0; a negative level scales with nu.
  return {kappa * nu * c.M, kappa * std::min(c.gamma, nu * c.gamma)};
}

Matrix qcstar_multiplier(const Matrix& A) {
  const auto n = A.rows();
  Matrix M(2 * n, 2 * n);
  M << -Matrix::Identity(n, n), A, A.transpose(), -A.transpose() * A;
  return M;
}

QcSampleReport qc_holds_on_samples(const PlainMap& f, const Matrix& M, double gamma,
                                   const std::vector<std::pair<Vector, Vector>>& pairs) {
  QcSampleReport rep;
  rep.worst_margin = std::numeric_limits<double>::infinity();
  for (const auto& [x1, x2] : pairs) {
    const Vector df = f(x2) - f(x1);
    const Vector dx = x2 - x1;
    Vector z(df.size() + dx.size());
    z << df, dx;
    const double margin = z.dot(M * z) - gamma;
    rep.worst_margin = std::min(rep.worst_margin, margin);
    if (margin < -1e-9) ++rep.violations;
  }
  rep.holds = rep.violations == 0;
  return rep;
}

LumpedInputs lump_unknown_inputs(const Matrix& G_hat, const Matrix& H_hat) {
  const auto n = G_hat.rows(), l = H_hat.rows();
  const auto nG = G_hat.cols(), nH = H_hat.cols();
  LumpedInputs out;
  out.G = Matrix::Zero(n, nG + nH);
  out.H = Matrix::Zero(l, nG + nH);
  out.G.leftCols(nG) = G_hat;
  out.H.rightCols(nH) = H_hat;
  if (nG + nH > 0) {
    Matrix stacked(n + l, nG + nH);
    stacked << out.G, out.H;
    if (numerical_rank(stacked) != nG + nH) throw ModelInvalid("lumped [G' H'] is rank deficient");
  }
  return out;
}

}  // namespace siso
