#include "siso/transform.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/SVD>

#include "siso/errors.hpp"

namespace siso {

FeedthroughSplit decompose_feedthrough(const Matrix& H, std::optional<double> rank_tol) {
  const SvdResult s = svd_full(H, rank_tol);
  const auto l = H.rows(), p = H.cols(), r = s.numerical_rank;
  FeedthroughSplit out;
  out.p_H = r;
  out.Sigma = s.S.head(r).asDiagonal();
  out.U1 = s.U.leftCols(r);
  out.U2 = s.U.rightCols(l - r);
  out.V1 = s.V.leftCols(r);
  out.V2 = s.V.rightCols(p - r);
  return out;
}

Matrix TransformedSystem::D1_at(int k) const {
  return T1 * (D ? D(k) : Matrix::Zero(l, m));
}

Matrix TransformedSystem::D2_at(int k) const {
  return T2 * (D ? D(k) : Matrix::Zero(l, m));
}

bool rank_condition(const Matrix& C2, const Matrix& G2, Eigen::Index p, Eigen::Index p_H,
                    std::optional<double> rank_tol) {
  const Matrix CG = C2 * G2;
  if (CG.size() == 0) return p - p_H == 0;
  return numerical_rank(CG, rank_tol) == p - p_H;
}

TransformedSystem transform_system(const NonlinearSystem& sys, std::optional<double> rank_tol) {
  sys.validate();
  const FeedthroughSplit fs = decompose_feedthrough(sys.H, rank_tol);
  TransformedSystem T;
  T.n = sys.n;
  T.m = sys.m;
  T.l = sys.l;
  T.p = sys.p;
  T.p_H = fs.p_H;
  T.Sigma = fs.Sigma;
  T.U1 = fs.U1;
  T.U2 = fs.U2;
  T.V1 = fs.V1;
  T.V2 = fs.V2;
  T.T1 = fs.U1.transpose();
  T.T2 = fs.U2.transpose();
  T.G1 = sys.G * fs.V1;
  T.G2 = sys.G * fs.V2;
  T.C1 = T.T1 * sys.C;
  T.C2 = T.T2 * sys.C;
  T.D = sys.D;
  T.rank_condition = rank_condition(T.C2, T.G2, T.p, T.p_H, rank_tol);
  return T;
}

namespace {

using CMatrix = Eigen::MatrixXcd;

CMatrix rosenbrock(const Matrix& A, const Matrix& G, const Matrix& C, const Matrix& H, std::complex<double> z) {
  const auto n = A.rows(), p = G.cols(), l = C.rows();
  CMatrix R(n + l, n + p);
  R.topLeftCorner(n, n) = z * CMatrix::Identity(n, n) - A.cast<std::complex<double>>();
  R.topRightCorner(n, p) = -G.cast<std::complex<double>>();
  R.bottomLeftCorner(l, n) = C.cast<std::complex<double>>();
  R.bottomRightCorner(l, p) = H.cast<std::complex<double>>();
  return R;
}

void check_shapes(const Matrix& A, const Matrix& G, const Matrix& C, const Matrix& H) {
  const auto n = A.rows();
  if (A.cols() != n || G.rows() != n || C.cols() != n || H.rows() != C.rows() || H.cols() != G.cols())
    throw ContractViolation("invariant zeros: inconsistent (A, G, C, H) shapes");
  if (C.rows() < G.cols()) throw ContractViolation("invariant zeros: need l >= p");
}

}  // namespace

double pencil_rank_gap(const Matrix& A, const Matrix& G, const Matrix& C, const Matrix& H,
                       std::complex<double> z) {
  const CMatrix R = rosenbrock(A, G, C, H, z);
  if (R.cols() == 0) return 1.0;
  Eigen::JacobiSVD<CMatrix> svd(R);
  const auto& s = svd.singularValues();
  if (s(0) == 0.0) return 0.0;
  return s(s.size() - 1) / s(0);
}

InvariantZeros invariant_zeros(const Matrix& A, const Matrix& G, const Matrix& C, const Matrix& H) {
  check_shapes(A, G, C, H);
  const auto n = A.rows(), p = G.cols(), l = C.rows();
  InvariantZeros out;
  // Normal rank: generic points of the plane.
  std::mt19937_64 rng(12345);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  int deficient = 0;
  for (int i = 0; i < 3; ++i)
    if (pencil_rank_gap(A, G, C, H, {u(rng), u(rng)}) < 1e-9) ++deficient;
  if (deficient == 3) {
    out.identically_deficient = true;
    return out;
  }
  // Square the pencil with a fixed random row compression of the output block;
  // its zeros contain the true ones, spurious candidates fail the rank test.
  Matrix K = Matrix::Identity(p, l);
  if (l > p) {
    std::normal_distribution<double> nd;
    for (Eigen::Index i = 0; i < K.size(); ++i) K(i) = nd(rng);
  }
  Matrix M0(n + p, n + p), M1 = Matrix::Zero(n + p, n + p);
  M0.topLeftCorner(n, n) = A;
  M0.topRightCorner(n, p) = G;
  M0.bottomLeftCorner(p, n) = -K * C;
  M0.bottomRightCorner(p, p) = -K * H;
  M1.topLeftCorner(n, n).setIdentity();
  for (const auto& z : pencil_generalized_eigs(M0, M1)) {
    if (l == p || pencil_rank_gap(A, G, C, H, z) < 1e-7) out.zeros.push_back(z);
  }
  return out;
}

bool strong_detectability(const Matrix& A, const Matrix& G, const Matrix& C, const Matrix& H) {
  const InvariantZeros iz = invariant_zeros(A, G, C, H);
  if (iz.identically_deficient) return false;
  for (const auto& z : iz.zeros)
    if (std::abs(z) >= 1.0 - 1e-8) return false;
  // Unit-circle sweep guards against zeros missed by the eigenvalue route.
  for (int i = 0; i < 720; ++i) {
    const double th = 2.0 * std::numbers::pi * i / 720.0;
    if (pencil_rank_gap(A, G, C, H, std::polar(1.0, th)) < 1e-10) return false;
  }
  return true;
}

bool lpv_strong_detectability_necessary(const std::vector<Matrix>& A_list, const Matrix& G,
                                        const Matrix& C, const Matrix& H) {
  if (A_list.empty()) throw ContractViolation("lpv_strong_detectability_necessary: empty list");
  for (const auto& A : A_list)
    if (!strong_detectability(A, G, C, H)) return false;
  return true;
}

}  // namespace siso
