#include "siso/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

#include "siso/errors.hpp"

namespace siso {

double default_rank_tol(const Matrix& M) {
  return static_cast<double>(std::max<Eigen::Index>({M.rows(), M.cols(), 1})) *
         std::numeric_limits<double>::epsilon();
}

bool all_finite(const Matrix& M) { return M.size() == 0 || M.allFinite(); }

SvdResult svd_full(const Matrix& M, std::optional<double> rank_tol) {
  if (!all_finite(M)) throw ContractViolation("svd_full: non-finite entries");
  const double tol = rank_tol.value_or(default_rank_tol(M));
  if (!(tol > 0)) throw ContractViolation("svd_full: rank_tol must be positive");
  SvdResult r;
  if (M.rows() == 0 || M.cols() == 0) {
    r.U = Matrix::Identity(M.rows(), M.rows());
    r.V = Matrix::Identity(M.cols(), M.cols());
    r.S = Vector(0);
    return r;
  }
  Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (svd.info() != Eigen::Success) throw NumericFailure("svd_full: SVD did not converge");
  r.U = svd.matrixU();
  r.V = svd.matrixV();
  r.S = svd.singularValues();
  const double cut = tol * r.S(0);
  r.numerical_rank = 0;
  for (Eigen::Index i = 0; i < r.S.size(); ++i)
    if (r.S(i) > cut) ++r.numerical_rank;
  return r;
}

Eigen::Index numerical_rank(const Matrix& M, std::optional<double> rank_tol) {
  return svd_full(M, rank_tol).numerical_rank;
}

Matrix pinv(const Matrix& M, std::optional<double> rank_tol) {
  const SvdResult s = svd_full(M, rank_tol);
  Matrix out = Matrix::Zero(M.cols(), M.rows());
  for (Eigen::Index i = 0; i < s.numerical_rank; ++i)
    out += s.V.col(i) * (1.0 / s.S(i)) * s.U.col(i).transpose();
  return out;
}

double spectral_norm(const Matrix& M) {
  if (M.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(M);
  return svd.singularValues()(0);
}

std::pair<double, double> sym_eig_extremes(const Matrix& S) {
  if (S.rows() != S.cols() || S.rows() == 0)
    throw ContractViolation("sym_eig_extremes: matrix must be square and nonempty");
  const double scale = std::max(1.0, S.cwiseAbs().maxCoeff());
  if ((S - S.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale)
    throw ContractViolation("sym_eig_extremes: matrix is not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym(S), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericFailure("sym_eig_extremes: eigensolver failed");
  const Vector& ev = es.eigenvalues();
  return {ev(0), ev(ev.size() - 1)};
}

std::vector<std::complex<double>> pencil_generalized_eigs(const Matrix& M0, const Matrix& M1) {
  if (M0.rows() != M0.cols() || M0.rows() != M1.rows() || M0.cols() != M1.cols())
    throw ContractViolation("pencil_generalized_eigs: shapes must be square and equal");
  std::vector<std::complex<double>> out;
  if (M0.rows() == 0) return out;
  Eigen::GeneralizedEigenSolver<Matrix> ges(M0, M1, false);
  if (ges.info() != Eigen::Success) throw NumericFailure("pencil_generalized_eigs: QZ failed");
  const auto alphas = ges.alphas();
  const auto betas = ges.betas();
  const double scale = std::max({1.0, M0.norm(), M1.norm()});
  for (Eigen::Index i = 0; i < alphas.size(); ++i) {
    const double b = std::abs(betas(i));
    // beta ~ 0 marks an infinite eigenvalue (or, with alpha ~ 0, a singular pencil).
    if (b <= 1e-10 * scale) continue;
    out.push_back(alphas(i) / betas(i));
  }
  std::sort(out.begin(), out.end(), [](auto a, auto b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  });
  return out;
}

Matrix null_space(const Matrix& M, std::optional<double> rank_tol) {
  const SvdResult s = svd_full(M, rank_tol);
  return s.V.rightCols(M.cols() - s.numerical_rank);
}

}  // namespace siso
