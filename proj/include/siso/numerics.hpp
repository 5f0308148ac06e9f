#pragma once

#include <complex>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace siso {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct SvdResult {
  Matrix U;  // rows x rows
  Vector S;  // min(rows, cols) values, descending
  Matrix V;  // cols x cols
  Eigen::Index numerical_rank = 0;
};

// Relative rank tolerance used when none is given: max(rows, cols) * eps.
// Singular values at or below rank_tol * sigma_max count as zero.
double default_rank_tol(const Matrix& M);

SvdResult svd_full(const Matrix& M, std::optional<double> rank_tol = std::nullopt);

Matrix pinv(const Matrix& M, std::optional<double> rank_tol = std::nullopt);

Eigen::Index numerical_rank(const Matrix& M, std::optional<double> rank_tol = std::nullopt);

double spectral_norm(const Matrix& M);

// Extreme eigenvalues of a symmetric matrix (symmetric to 1e-9, relative).
std::pair<double, double> sym_eig_extremes(const Matrix& S);

// Finite roots of det(M0 - z M1) = 0.
std::vector<std::complex<double>> pencil_generalized_eigs(const Matrix& M0, const Matrix& M1);

// Orthonormal basis of the null space of M (cols x k).
Matrix null_space(const Matrix& M, std::optional<double> rank_tol = std::nullopt);

inline Matrix sym(const Matrix& M) { return 0.5 * (M + M.transpose()); }

bool all_finite(const Matrix& M);

}  // namespace siso
