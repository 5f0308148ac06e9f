#include "siso/abstraction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "siso/errors.hpp"

namespace siso {

namespace {

void check_box(const IntervalBox& box) {
  if (box.lower.size() != box.upper.size() || box.lower.size() == 0)
    throw ContractViolation("interval box: bounds must be nonempty and of equal length");
  if (!all_finite(box.lower) || !all_finite(box.upper))
    throw ContractViolation("interval box: bounds must be finite");
  if (((box.upper - box.lower).array() <= 0).any()) throw ContractViolation("interval box is degenerate");
}

}  // namespace

std::vector<Vector> grid_vertices(const IntervalBox& box, int subdivisions) {
  check_box(box);
  if (subdivisions < 1) throw ContractViolation("grid_vertices: subdivisions must be >= 1");
  const auto d = box.lower.size();
  const int per_axis = subdivisions + 1;
  std::size_t total = 1;
  for (Eigen::Index i = 0; i < d; ++i) total *= static_cast<std::size_t>(per_axis);
  std::vector<Vector> out;
  out.reserve(total);
  for (std::size_t idx = 0; idx < total; ++idx) {
    Vector z(d);
    std::size_t rest = idx;
    for (Eigen::Index i = 0; i < d; ++i) {
      const auto j = static_cast<double>(rest % per_axis);
      rest /= per_axis;
      z(i) = box.lower(i) + (box.upper(i) - box.lower(i)) * j / subdivisions;
    }
    out.push_back(z);
  }
  return out;
}

double cell_radius(const IntervalBox& box, int subdivisions) {
  check_box(box);
  return 0.5 * (box.upper - box.lower).norm() / subdivisions;
}

AffineAbstraction abstract_on_box(const VectorMap& q, const IntervalBox& box, const Vector& sigma,
                                  int subdivisions, const sdp::Options& opt) {
  const auto verts = grid_vertices(box, subdivisions);
  std::vector<Vector> vals;
  vals.reserve(verts.size());
  for (const auto& z : verts) {
    vals.push_back(q(z));
    if (!all_finite(vals.back())) throw AbstractionFailure("abstraction: q is not finite at a grid vertex");
  }
  const auto nq = box.lower.size();
  const auto mq = vals.front().size();
  if (sigma.size() != mq) throw ContractViolation("abstraction: sigma must have one entry per output");
  if ((sigma.array() < 0).any()) throw ContractViolation("abstraction: sigma must be >= 0");

  sdp::Program prog;
  const auto Au = prog.add_matrix("A_upper", mq, nq);
  const auto Al = prog.add_matrix("A_lower", mq, nq);
  const auto eu = prog.add_matrix("e_upper", mq, 1);
  const auto el = prog.add_matrix("e_lower", mq, 1);
  const auto th = prog.add_scalar("theta");
  const Matrix ones = Matrix::Ones(mq, 1);
  for (std::size_t s = 0; s < verts.size(); ++s) {
    const Matrix z = verts[s];
    const Matrix qz = vals[s];
    const std::string tag = std::to_string(s);
    prog.add_nonneg(sdp::Expr(qz - sigma) - Al * z - el, "lower at vertex " + tag);
    prog.add_nonneg(Au * z + eu - sdp::Expr(qz + sigma), "upper at vertex " + tag);
    prog.add_nonneg(sdp::scaled(th, ones) - (Au * z + eu) + (Al * z + el) + sdp::Expr(2.0 * sigma),
                    "width at vertex " + tag);
  }
  prog.minimize(th);
  const auto sol = sdp::solve(prog, opt);
  if (sol.status != sdp::Status::Optimal)
    throw AbstractionFailure("abstraction LP: " + sdp::to_string(sol.status) + " (" + sol.message + ")");

  AffineAbstraction a;
  a.A_upper = Au.value(sol.y);
  a.A_lower = Al.value(sol.y);
  a.e_upper = eu.value(sol.y);
  a.e_lower = el.value(sol.y);
  a.sigma = sigma;
  // Shift the offsets so the vertex sandwich holds exactly despite solver slack,
  // then recompute the width.
  for (std::size_t s = 0; s < verts.size(); ++s) {
    const Vector up = a.A_upper * verts[s] + a.e_upper - sigma - vals[s];
    const Vector lo = vals[s] - sigma - a.A_lower * verts[s] - a.e_lower;
    for (Eigen::Index j = 0; j < mq; ++j) {
      if (up(j) < 0) a.e_upper(j) -= up(j);
      if (lo(j) < 0) a.e_lower(j) += lo(j);
    }
  }
  double theta = -std::numeric_limits<double>::infinity();
  for (const auto& z : verts) {
    const Vector w = (a.A_upper - a.A_lower) * z + a.e_upper - a.e_lower - 2.0 * sigma;
    theta = std::max(theta, w.maxCoeff());
  }
  a.theta_star = theta;
  return a;
}

AffineAbstraction abstract_on_box_lipschitz(const VectorMap& q, const IntervalBox& box, double L_mu,
                                            int subdivisions, const sdp::Options& opt) {
  if (!(L_mu >= 0)) throw ContractViolation("abstraction: L_mu must be >= 0");
  const auto mq = q(box.lower).size();
  const Vector sigma = Vector::Constant(mq, L_mu * cell_radius(box, subdivisions));
  return abstract_on_box(q, box, sigma, subdivisions, opt);
}

MidlineObservation midline_observation(const AffineAbstraction& a, int n_state, bool sound_norm) {
  if (n_state < 0 || n_state > a.A_upper.cols())
    throw ContractViolation("midline_observation: state block exceeds abstraction columns");
  const Matrix A = 0.5 * (a.A_upper + a.A_lower);
  MidlineObservation m;
  m.C = A.leftCols(n_state);
  m.D_tilde = A.rightCols(A.cols() - n_state);
  m.e = 0.5 * (a.e_upper + a.e_lower);
  const double l = static_cast<double>(a.A_upper.rows());
  const double half = 0.5 * std::max(0.0, a.theta_star);
  // Between vertices the sandwich is only guaranteed to width theta* + 2 sigma.
  const double sig = a.sigma.size() ? a.sigma.maxCoeff() : 0.0;
  m.eta_va = sound_norm ? std::sqrt(l) * (half + sig) : half;
  return m;
}

}  // namespace siso
