#pragma once

#include <complex>
#include <optional>
#include <vector>

#include "siso/numerics.hpp"
#include "siso/sysmodel.hpp"

namespace siso {

// H = [U1 U2] [Sigma 0; 0 0] [V1 V2]'
struct FeedthroughSplit {
  Eigen::Index p_H = 0;
  Matrix Sigma;  // p_H x p_H
  Matrix U1, U2; // l x p_H, l x (l - p_H)
  Matrix V1, V2; // p x p_H, p x (p - p_H)
};

FeedthroughSplit decompose_feedthrough(const Matrix& H, std::optional<double> rank_tol = std::nullopt);

struct TransformedSystem {
  int n = 0, m = 0, l = 0, p = 0;
  Eigen::Index p_H = 0;
  Matrix Sigma, U1, U2, V1, V2;
  Matrix T1, T2;  // U1', U2'
  Matrix G1, G2;  // G V1, G V2
  Matrix C1, C2;  // U1' C, U2' C
  MatrixSchedule D;  // untransformed feedthrough of the known input
  bool rank_condition = false;

  Matrix D1_at(int k) const;
  Matrix D2_at(int k) const;
};

TransformedSystem transform_system(const NonlinearSystem& sys, std::optional<double> rank_tol = std::nullopt);

// rk(C2 G2) == p - p_H
bool rank_condition(const Matrix& C2, const Matrix& G2, Eigen::Index p, Eigen::Index p_H,
                    std::optional<double> rank_tol = std::nullopt);

struct InvariantZeros {
  std::vector<std::complex<double>> zeros;
  bool identically_deficient = false;  // normal rank of the pencil below n + p
};

// Zeros of the Rosenbrock pencil [zI - A, -G; C, H].
InvariantZeros invariant_zeros(const Matrix& A, const Matrix& G, const Matrix& C, const Matrix& H);

// Smallest singular value of the pencil at z, relative to its largest.
double pencil_rank_gap(const Matrix& A, const Matrix& G, const Matrix& C, const Matrix& H,
                       std::complex<double> z);

bool strong_detectability(const Matrix& A, const Matrix& G, const Matrix& C, const Matrix& H);

bool lpv_strong_detectability_necessary(const std::vector<Matrix>& A_list, const Matrix& G,
                                        const Matrix& C, const Matrix& H);

}  // namespace siso
