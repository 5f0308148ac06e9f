#include "siso/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <tuple>

#include "siso/errors.hpp"

namespace siso {

using sdp::Expr;
using sdp::Program;

namespace {

Matrix I(Eigen::Index n) { return Matrix::Identity(n, n); }
Expr E(const Matrix& M) { return Expr(M); }
Expr Z(Eigen::Index r, Eigen::Index c) { return Expr::zero(r, c); }
Expr cst(double v) { return Expr(Matrix::Constant(1, 1, v)); }

Matrix inverse_spd(const Matrix& P) { return P.ldlt().solve(I(P.rows())); }

std::string format_alpha(double a) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", a);
  return buf;
}

}  // namespace

std::vector<double> SynthesisOptions::alphas() const {
  if (!alpha_grid.empty()) return alpha_grid;
  std::vector<double> a;
  for (int i = 1; i <= 20; ++i) a.push_back(0.05 * i);
  return a;
}

std::vector<double> SynthesisOptions::epsilons() const {
  if (!eps_grid.empty()) return eps_grid;
  std::vector<double> e;
  for (int i = 0; i <= 12; ++i) e.push_back(std::pow(10.0, -3.0 + 0.5 * i));
  return e;
}

FixedGains fixed_gains(const TransformedSystem& T, const Matrix& W) {
  if (!rank_condition(T.C2, T.G2, T.p, T.p_H))
    throw DesignImpossible("rank condition rk(C2 G2) = p - p_H fails; unknown inputs cannot be decoupled");
  const auto n = T.n, l = T.l;
  const auto l2 = l - T.p_H;
  FixedGains g;
  g.M1 = T.Sigma.diagonal().cwiseInverse().asDiagonal();
  g.M2 = pinv(T.C2 * T.G2);
  g.Phi = I(n) - T.G2 * g.M2 * T.C2;
  g.Psi = T.G1 * g.M1 * T.C1;
  const double r2 = std::sqrt(2.0);
  g.R.resize(n, 2 * l + n);
  g.R << -r2 * g.Phi * T.G1 * g.M1 * T.T1, -g.Phi * W, -r2 * T.G2 * g.M2 * T.T2;
  g.Q = Matrix::Zero(l2, 2 * l + n);
  g.Q.rightCols(l) = -r2 * T.T2;
  g.Omega = T.C2 * g.R - g.Q;
  return g;
}

MultiplierBlocks class_multiplier_blocks(const FunctionClassSpec& spec, int n) {
  validate_class(spec, n);
  MultiplierBlocks mb;
  if (const auto* c = std::get_if<ClassQC0>(&spec)) {
    if (c->qc.gamma < 0)
      throw DesignImpossible("class 0 certificate has gamma < 0: no quadratically stable observer exists");
    mb.M11 = c->qc.M11();
    mb.M12 = c->qc.M12();
    mb.M22 = c->qc.M22();
  } else if (const auto* c = std::get_if<ClassLipschitz>(&spec)) {
    mb.M11 = -I(n);
    mb.M12 = Matrix::Zero(n, n);
    mb.M22 = c->L_f * c->L_f * I(n);
  } else if (const auto* c = std::get_if<ClassQCStar>(&spec)) {
    if (c->gamma < 0)
      throw DesignImpossible("QC* certificate has gamma < 0: no quadratically stable observer exists");
    mb.M11 = -I(n);
    mb.M12 = c->A;
    mb.M22 = -c->A.transpose() * c->A;
  } else {
    const double s = lipschitz_from_lpv(std::get<ClassLPV>(spec).A);
    mb.M11 = -I(n);
    mb.M12 = Matrix::Zero(n, n);
    mb.M22 = s * s * I(n);
  }
  return mb;
}

namespace {

struct StabilityVars {
  Expr P, Y, Gt, Qb, Zb, kappa;
};

// The five block LMIs of the quadratic-stability test plus sign constraints.
// The two blocks that carry Psi are rotated by the right singular vectors of Psi
// (an orthogonal congruence) so that directions in ker(Psi) become exact zeros
// that presolve can strip.
StabilityVars add_stability(Program& prog, const TransformedSystem& T, const FixedGains& g,
                            const MultiplierBlocks& mb, double alpha, double delta_P, double delta_k) {
  const auto n = T.n;
  const auto l2 = T.l - T.p_H;
  StabilityVars v;
  v.P = prog.add_symmetric("P", n);
  v.Y = prog.add_matrix("Y", n, l2);
  v.Gt = prog.add_symmetric("Gamma_tilde", n);
  v.Qb = prog.add_symmetric("Q_breve", n);
  v.Zb = prog.add_matrix("Z_breve", n, n);
  v.kappa = prog.add_scalar("kappa");

  prog.add_psd(v.P - E(delta_P * I(n)), "P > 0");
  prog.add_nonneg(v.kappa - cst(delta_k), "kappa > 0");
  prog.add_psd(v.Gt, "Gamma_tilde >= 0");
  prog.add_psd(v.Qb, "Q_breve >= 0");

  const Expr PmYC = v.P - v.Y * T.C2;
  const Expr Y1 = PmYC * g.Phi;
  const Expr M1t = -1.0 * sdp::scaled(v.kappa, mb.M11) - v.Qb;
  const Expr M2t = -1.0 * sdp::scaled(v.kappa, mb.M22) + (1.0 - alpha) * v.P - v.Gt;
  const Expr M3t = -1.0 * sdp::scaled(v.kappa, mb.M11);

  prog.add_psd(sdp::block({{v.P, Y1}, {Y1.transpose(), M1t}}), "stability LMI 1");
  const Expr Y2 = -1.0 * (PmYC * (g.Phi * g.Psi));
  prog.add_psd(sdp::block({{v.P, Y2}, {Y2.transpose(), M2t}}), "stability LMI 2");
  prog.add_psd(sdp::block({{v.P, Y1}, {Y1.transpose(), M3t}}), "stability LMI 3");

  const SvdResult sv = svd_full(g.Psi);
  const Matrix& V = sv.V;
  Matrix PsiV = g.Psi * V;
  PsiV.rightCols(n - sv.numerical_rank).setZero();
  const Expr Y2V = -1.0 * (PmYC * (g.Phi * PsiV));
  const Expr S4 = sdp::symmetrize(V.transpose() * v.Zb * V +
                                  sdp::scaled(v.kappa, V.transpose() * mb.M12.transpose() * PsiV));
  prog.add_psd(sdp::block({{v.P, Y2V}, {Y2V.transpose(), S4}}), "stability LMI 4");
  const Expr ZV = v.Zb * V;
  prog.add_psd(sdp::block({{v.Gt, ZV}, {ZV.transpose(), PsiV.transpose() * v.Qb * PsiV}}), "stability LMI 5");
  return v;
}

void fill_stability(SynthesisResult& r, const StabilityVars& v, const Vector& y, const TransformedSystem& T) {
  r.P = v.P.value(y);
  r.Y = v.Y.value(y);
  r.Gamma_tilde = v.Gt.value(y);
  r.Q_breve = v.Qb.value(y);
  r.Z_breve = v.Zb.value(y);
  r.kappa = v.kappa.value(y)(0, 0);
  r.L_tilde = inverse_spd(r.P) * r.Y;
  r.L = r.L_tilde * T.T2;
}

enum class Branch { None, A, B };

SynthesisResult solve_hinf(const TransformedSystem& T, const FixedGains& g, const MultiplierBlocks& mb,
                           double alpha, double e1, double e2, const SynthesisOptions& opt, Branch br) {
  const auto n = T.n;
  const auto l2 = T.l - T.p_H;
  const auto nw = g.R.cols();
  Program prog;
  const StabilityVars v = add_stability(prog, T, g, mb, alpha, opt.delta, opt.delta);
  const Expr Gm = prog.add_symmetric("Gamma", l2);
  const Expr rho2 = prog.add_scalar("rho2");
  prog.add_psd(Gm, "Gamma >= 0");
  prog.add_nonneg(rho2, "rho2 >= 0");

  prog.add_psd(sdp::block({{E(I(l2)) - Gm, Z(l2, n), Z(l2, l2)},
                           {Z(n, l2), v.P, v.Y},
                           {Z(l2, l2), v.Y.transpose(), E(I(l2))}}),
               "Pi");

  const Matrix& R = g.R;
  const Matrix& Om = g.Omega;
  const Matrix Rt = R.transpose();
  const Expr PR = v.P * R;
  const Expr YOm = v.Y * Om;
  const Expr CYR = T.C2.transpose() * v.Y.transpose() * R;
  const Expr RYO = Rt * YOm;
  const Expr N11 = sdp::scaled(rho2, I(nw)) + RYO + RYO.transpose() - Rt * PR - Om.transpose() * Gm * Om -
                   E((1.0 / e1 + 1.0 / e2) * Om.transpose() * Om);
  const Matrix PhiPsi = g.Phi * g.Psi;
  const Matrix CPP = T.C2 * PhiPsi;
  const Matrix CP = T.C2 * g.Phi;
  const Expr N21 = PhiPsi.transpose() * (PR - YOm - CYR);
  const Expr N31 = g.Phi.transpose() * (YOm + CYR - PR);
  Expr k11 = E(mb.M11), k12 = E(mb.M12), k22 = E(mb.M22);
  if (opt.kappa_scaled_hinf) {
    k11 = sdp::scaled(v.kappa, mb.M11);
    k12 = sdp::scaled(v.kappa, mb.M12);
    k22 = sdp::scaled(v.kappa, mb.M22);
  }
  const Expr N22 = E(-I(n)) + alpha * v.P - E(e1 * CPP.transpose() * CPP) - k22;
  const Expr N32 = -1.0 * k12;
  const Expr N33 = E(-e2 * CP.transpose() * CP) - k11;
  prog.add_psd(sdp::block({{N11, N21.transpose(), N31.transpose()},
                           {N21, N22, N32.transpose()},
                           {N31, N32, N33}}),
               "N");

  Expr k1, k2;
  if (br != Branch::None) {
    k1 = prog.add_scalar("kappa1");
    k2 = prog.add_scalar("kappa2");
    prog.add_psd(v.P - sdp::scaled(k1, I(n)), "P >= kappa1 I");
    prog.add_psd(sdp::scaled(k2, I(n)) - v.P, "P <= kappa2 I");
    const double tau = 1e-6;
    if (br == Branch::A) {
      prog.add_nonneg(k1 - cst(1.0), "kappa1 >= 1");
      prog.add_nonneg(cst(1.0 - tau) - k2 + k1, "kappa2 - kappa1 <= 1 - tau");
    } else {
      prog.add_nonneg(cst(1.0) - k2, "kappa2 <= 1");
      prog.add_nonneg(k1 - cst(0.5 + tau), "kappa1 >= 0.5 + tau");
    }
  }
  prog.minimize(rho2);

  const sdp::Solution s = sdp::solve(prog, opt.solver);
  SynthesisResult r;
  r.solves = 1;
  r.status = s.status;
  r.message = s.message;
  r.margin = s.margin;
  r.alpha = alpha;
  r.eps1 = e1;
  r.eps2 = e2;
  r.feasible = s.status == sdp::Status::Optimal;
  if (!r.feasible) return r;
  fill_stability(r, v, s.y, T);
  r.Gamma = Gm.value(s.y);
  r.rho = std::sqrt(std::max(0.0, rho2.value(s.y)(0, 0)));
  if (br != Branch::None) {
    r.kappa1 = k1.value(s.y)(0, 0);
    r.kappa2 = k2.value(s.y)(0, 0);
    r.branch = br == Branch::A ? "A" : "B";
  }
  r.constraint_margins = sdp::constraint_margins(prog, s.y);
  r.unreduced_margin = unreduced_margin(r, T, g, mb);
  return r;
}

bool better(const SynthesisResult& a, const SynthesisResult& b) {
  if (!a.feasible) return false;
  if (!b.feasible) return true;
  return std::tie(a.rho, a.alpha, a.eps1, a.eps2) < std::tie(b.rho, b.alpha, b.eps1, b.eps2);
}

SynthesisResult grid_search(const TransformedSystem& T, const FixedGains& g, const MultiplierBlocks& mb,
                            const SynthesisOptions& opt, Branch br) {
  const std::vector<double> eps = opt.epsilons();
  std::vector<double> alphas = opt.alphas();
  std::sort(alphas.begin(), alphas.end());
  SynthesisResult best;
  std::vector<GridPoint> grid;
  int solves = 0;
  std::map<double, bool> stab_cache;

  auto stable_at = [&](double a) {
    auto it = stab_cache.find(a);
    if (it != stab_cache.end()) return it->second;
    const SynthesisResult s = stability_feasibility(T, g, mb, a, opt);
    ++solves;
    // Only a certificate of infeasibility prunes; failures fall through to the full program.
    const bool ok = s.status != sdp::Status::Infeasible;
    stab_cache[a] = ok;
    return ok;
  };
  auto run = [&](double a, std::size_t i1, std::size_t i2) {
    SynthesisResult r = solve_hinf(T, g, mb, a, eps[i1], eps[i2], opt, br);
    ++solves;
    grid.push_back({a, eps[i1], eps[i2], r.status, r.rho});
    if (opt.verbose)
      std::fprintf(stderr, "alpha %.4f eps1 %.3g eps2 %.3g -> %s rho %.6f\n", a, eps[i1], eps[i2],
                   sdp::to_string(r.status).c_str(), r.rho);
    if (better(r, best)) best = std::move(r);
  };

  for (double a : alphas) {
    if (!stable_at(a)) break;  // feasibility of the stability LMIs is monotone in alpha
    for (std::size_t i = 0; i < eps.size(); ++i)
      for (std::size_t j = 0; j < eps.size(); ++j) run(a, i, j);
  }
  if (best.feasible && opt.refine && opt.alpha_refine_step > 0) {
    const double a0 = best.alpha;
    const auto i0 = static_cast<long>(std::find(eps.begin(), eps.end(), best.eps1) - eps.begin());
    const auto j0 = static_cast<long>(std::find(eps.begin(), eps.end(), best.eps2) - eps.begin());
    const long rad = opt.eps_refine_radius;
    const int steps = static_cast<int>(std::lround(opt.alpha_refine_halfwidth / opt.alpha_refine_step));
    for (int s = -steps; s <= steps; ++s) {
      const double a = a0 + s * opt.alpha_refine_step;
      if (a <= 0 || a > 1 + 1e-12) continue;
      const bool coarse = std::any_of(alphas.begin(), alphas.end(), [a](double x) { return std::abs(x - a) < 1e-9; });
      if (coarse) continue;
      if (!stable_at(a)) continue;
      for (long i = std::max(0L, i0 - rad); i <= std::min<long>(static_cast<long>(eps.size()) - 1, i0 + rad); ++i)
        for (long j = std::max(0L, j0 - rad); j <= std::min<long>(static_cast<long>(eps.size()) - 1, j0 + rad); ++j)
          run(a, static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    }
  }
  best.grid = std::move(grid);
  best.solves = solves;
  return best;
}

}  // namespace

SynthesisResult stability_feasibility(const TransformedSystem& T, const FixedGains& g,
                                      const MultiplierBlocks& mb, double alpha, const SynthesisOptions& opt) {
  if (!(alpha >= 0 && alpha <= 1)) throw ContractViolation("stability_feasibility: alpha must lie in [0,1]");
  Program prog;
  // The program is homogeneous, so P > 0, kappa > 0 is normalized to P >= I, kappa >= 1.
  const StabilityVars v = add_stability(prog, T, g, mb, alpha, 1.0, 1.0);
  const sdp::Solution s = sdp::solve(prog, opt.solver);
  SynthesisResult r;
  r.solves = 1;
  r.status = s.status;
  r.message = s.message;
  r.margin = s.margin;
  r.alpha = alpha;
  r.feasible = s.status == sdp::Status::Optimal;
  if (r.feasible) {
    fill_stability(r, v, s.y, T);
    r.constraint_margins = sdp::constraint_margins(prog, s.y);
    r.unreduced_margin = unreduced_margin(r, T, g, mb);
  }
  return r;
}

double unreduced_margin(const SynthesisResult& r, const TransformedSystem& T, const FixedGains& g,
                        const MultiplierBlocks& mb) {
  const auto n = T.n;
  const Matrix K = I(n) - r.L_tilde * T.C2;
  Matrix AB(n, 2 * n);
  AB << -K * g.Phi * g.Psi, K * g.Phi;
  Matrix Mq(2 * n, 2 * n);
  Mq << mb.M22, mb.M12.transpose(), mb.M12, mb.M11;
  Matrix S = -AB.transpose() * r.P * AB - r.kappa * Mq;
  S.topLeftCorner(n, n) += (1.0 - r.alpha) * r.P;
  return sym_eig_extremes(sym(S)).first / std::max(1.0, spectral_norm(r.P));
}

SynthesisResult stability_search(const TransformedSystem& T, const FixedGains& g, const MultiplierBlocks& mb,
                                 const SynthesisOptions& opt, double tol) {
  SynthesisResult lo = stability_feasibility(T, g, mb, 0.0, opt);
  int solves = 1;
  if (!lo.feasible) return lo;
  SynthesisResult hi = stability_feasibility(T, g, mb, 1.0, opt);
  ++solves;
  if (hi.feasible) {
    hi.solves = solves;
    return hi;
  }
  double a = 0.0, b = 1.0;
  while (b - a > tol) {
    const double mid = 0.5 * (a + b);
    SynthesisResult r = stability_feasibility(T, g, mb, mid, opt);
    ++solves;
    if (r.feasible) {
      a = mid;
      lo = std::move(r);
    } else {
      b = mid;
    }
  }
  lo.solves = solves;
  return lo;
}

SynthesisResult hinf_point(const TransformedSystem& T, const FixedGains& g, const MultiplierBlocks& mb,
                           double alpha, double eps1, double eps2, const SynthesisOptions& opt) {
  if (!(eps1 > 0 && eps2 > 0)) throw ContractViolation("hinf_point: epsilons must be positive");
  return solve_hinf(T, g, mb, alpha, eps1, eps2, opt, Branch::None);
}

SynthesisResult hinf_design(const TransformedSystem& T, const FixedGains& g, const MultiplierBlocks& mb,
                            const SynthesisOptions& opt) {
  SynthesisResult r = grid_search(T, g, mb, opt, Branch::None);
  if (!r.feasible && r.grid.empty()) {
    const auto a = opt.alphas();
    throw SynthesisInfeasible("the quadratic-stability LMIs are infeasible at the smallest grid alpha (" +
                              format_alpha(*std::min_element(a.begin(), a.end())) +
                              "), so no grid point admits an H-infinity design");
  }
  if (!r.feasible)
    throw SynthesisInfeasible("no grid point admits an H-infinity design (" + std::to_string(r.grid.size()) +
                              " points tried)");
  return r;
}

SynthesisResult hinf_design_convergent(const TransformedSystem& T, const FixedGains& g,
                                       const MultiplierBlocks& mb, const SynthesisOptions& opt) {
  SynthesisResult a = grid_search(T, g, mb, opt, Branch::A);
  SynthesisResult b = grid_search(T, g, mb, opt, Branch::B);
  const int solves = a.solves + b.solves;
  SynthesisResult& best = better(b, a) ? b : a;
  if (!best.feasible)
    throw SynthesisInfeasible("neither convergence branch admits a design; an unconstrained design may still exist");
  best.solves = solves;
  return best;
}

ProbeVerdict instability_probe(const TransformedSystem& T, const FixedGains& g, const MultiplierBlocks& mb,
                               const std::vector<double>& eta_grid, const SynthesisOptions& opt) {
  const auto n = T.n;
  const auto l2 = T.l - T.p_H;
  ProbeVerdict out;
  for (double eta : eta_grid) {
    if (!(eta > 0 && eta < 1)) throw ContractViolation("instability_probe: eta must lie in (0,1)");
    Program prog;
    const Expr Pt = prog.add_symmetric("P_tilde", n);
    const Expr Yt = prog.add_matrix("Y_tilde", n, l2);
    const Expr Gt = prog.add_symmetric("Gamma_tilde", l2);
    prog.add_psd(Pt - E(opt.delta * I(n)), "P_tilde > 0");
    prog.add_psd(sdp::block({{E(I(l2)) - Gt, Z(l2, l2), Z(l2, n)},
                             {Z(l2, l2), Gt, Yt.transpose()},
                             {Z(n, l2), Yt, Pt}}),
                 "Pi_hat");
    const Expr St = Pt - T.C2.transpose() * Yt.transpose() - Yt * T.C2;
    const Matrix CtC = (1.0 - eta) * T.C2.transpose() * T.C2;
    const Matrix PhiPsi = g.Phi * g.Psi;
    const Expr P11 = g.Phi.transpose() * (St - E(CtC)) * g.Phi - E(mb.M11);
    const Expr P12 = -1.0 * (g.Phi.transpose() * St * PhiPsi) - E(mb.M12);
    const Expr P22 = PhiPsi.transpose() * (St - E(CtC)) * PhiPsi - Pt - E(mb.M22);
    prog.add_psd(sdp::symmetrize(sdp::block({{P11, P12}, {P12.transpose(), P22}})) - E(opt.delta * I(2 * n)),
                 "Pi_tilde > 0");
    const sdp::Solution s = sdp::solve(prog, opt.solver);
    out.points.emplace_back(eta, s.status);
    if (s.status == sdp::Status::Optimal) out.no_stable_observer = true;
  }
  return out;
}

TransformedSystem transform_lti(const Matrix& A, const Matrix& G, const Matrix& C, const Matrix& H) {
  NonlinearSystem sys;
  sys.n = static_cast<int>(A.rows());
  sys.l = static_cast<int>(C.rows());
  sys.p = static_cast<int>(G.cols());
  sys.m = 0;
  sys.f = [A](int, const Vector& x) { return Vector(A * x); };
  sys.G = G;
  sys.C = C;
  sys.H = H;
  sys.W = I(sys.n);
  sys.x0_hat = Vector::Zero(sys.n);
  sys.class_spec = ClassQCStar{A, 0.0};
  return transform_system(sys);
}

LtiDesign lti_design(const Matrix& A, const Matrix& G, const Matrix& C, const Matrix& H,
                     const SynthesisOptions& opt) {
  LtiDesign d{{}, {}, transform_lti(A, G, C, H)};
  const TransformedSystem& T = d.T;
  d.gains = fixed_gains(T, I(T.n));
  const auto n = T.n;
  const auto l2 = T.l - T.p_H;
  Program prog;
  const Expr P = prog.add_symmetric("P", n);
  const Expr Y = prog.add_matrix("Y", n, l2);
  // Homogeneous: strictness is normalized to a unit margin.
  prog.add_psd(P - E(I(n)), "P > 0");
  const Matrix AmP = A - d.gains.Psi;
  const Expr Lam = (AmP.transpose() * d.gains.Phi.transpose()) * (P - T.C2.transpose() * Y.transpose());
  prog.add_psd(sdp::block({{P, Lam}, {Lam.transpose(), P}}) - E(I(2 * n)), "[P Lambda; Lambda' P] > 0");
  const sdp::Solution s = sdp::solve(prog, opt.solver);
  SynthesisResult& r = d.result;
  r.solves = 1;
  r.status = s.status;
  r.message = s.message;
  r.margin = s.margin;
  r.feasible = s.status == sdp::Status::Optimal;
  if (r.feasible) {
    r.P = P.value(s.y);
    r.Y = Y.value(s.y);
    r.L_tilde = inverse_spd(r.P) * r.Y;
    r.L = r.L_tilde * T.T2;
    r.constraint_margins = sdp::constraint_margins(prog, s.y);
  }
  return d;
}

}  // namespace siso
