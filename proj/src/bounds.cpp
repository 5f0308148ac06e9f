#include "siso/bounds.hpp"

#include <algorithm>
#include <cmath>

#include "siso/errors.hpp"

namespace siso {

double theta1_of(const Matrix& P) {
  const auto [lo, hi] = sym_eig_extremes(P);
  if (!(lo > 0)) throw ContractViolation("theta1_of: P is not positive definite");
  return std::abs(hi - 1.0) / lo;
}

namespace {

struct Common {
  Matrix VMC1;   // V1 M1 C1
  Matrix VMC2;   // V2 M2 C2
  Matrix IminusLC2;
  Matrix IminusLC2Phi;
};

Common common(const FixedGains& g, const Matrix& L_tilde, const TransformedSystem& T) {
  Common c;
  c.VMC1 = T.V1 * g.M1 * T.C1;
  c.VMC2 = T.V2 * g.M2 * T.C2;
  c.IminusLC2 = Matrix::Identity(T.n, T.n) - L_tilde * T.C2;
  c.IminusLC2Phi = c.IminusLC2 * g.Phi;
  return c;
}

// beta and theta2 shared by the Lipschitz and QC* classes, with `lip` the constant in use.
void lipschitz_like(ClassRadii& out, const Common& c, const FixedGains& g, double lip) {
  out.theta2 = (lip + spectral_norm(g.Psi)) * spectral_norm(c.IminusLC2Phi);
  out.beta = spectral_norm(c.VMC1 - c.VMC2 * g.Psi) + lip * spectral_norm(c.VMC2);
}

double qcstar_constant(const Matrix& A, bool sqrt_variant) {
  const double lmax = sym_eig_extremes(A.transpose() * A).second;
  return sqrt_variant ? std::sqrt(std::max(0.0, lmax)) : lmax;
}

}  // namespace

std::vector<Matrix> lpv_error_matrices(const std::vector<Matrix>& A_list, const FixedGains& g,
                                       const Matrix& L_tilde, const TransformedSystem& T) {
  const Matrix K = (Matrix::Identity(T.n, T.n) - L_tilde * T.C2) * g.Phi;
  std::vector<Matrix> out;
  out.reserve(A_list.size());
  for (const auto& A : A_list) out.push_back(K * (A - g.Psi));
  return out;
}

ClassRadii class_radii_params(const FunctionClassSpec& spec, const FixedGains& g, const Matrix& L_tilde,
                              const TransformedSystem& T, const Matrix& W, double eta_w, double eta_v,
                              bool qcstar_sqrt) {
  if (L_tilde.rows() != T.n || L_tilde.cols() != T.l - T.p_H)
    throw ContractViolation("class_radii_params: L_tilde must be n x (l - p_H)");
  const Common c = common(g, L_tilde, T);
  ClassRadii out;

  // Per-step forcing of the state error:
  //   (I - L~C2)[-Phi G1 M1 T1 v_{k-1} + Phi W w_{k-1} - G2 M2 T2 v_k] - L~ T2 v_k,
  // with v_{k-1} and v_k bounded separately.
  const Matrix& K = c.IminusLC2;
  out.eta_bar = (spectral_norm(K * g.Phi * T.G1 * g.M1 * T.T1) +
                 spectral_norm(K * T.G2 * g.M2 * T.T2 + L_tilde * T.T2)) * eta_v +
                spectral_norm(K * g.Phi * W) * eta_w;
  out.alpha_bar = spectral_norm(c.VMC2 * W) * eta_w +
                  (spectral_norm((c.VMC2 * T.G1 - T.V1) * g.M1 * T.T1) + spectral_norm(T.V2 * g.M2 * T.T2)) * eta_v;

  if (const auto* q = std::get_if<ClassQC0>(&spec)) {
    ClassRadii tmp;
    if (q->lipschitz_surrogate)
      lipschitz_like(tmp, c, g, *q->lipschitz_surrogate);
    else if (q->A_surrogate)
      lipschitz_like(tmp, c, g, qcstar_constant(*q->A_surrogate, qcstar_sqrt));
    else
      throw InputValidation("class 0 system has no Lipschitz or A surrogate: input radius unavailable");
    out.beta = tmp.beta;
    out.theta2 = kInf;
  } else if (const auto* li = std::get_if<ClassLipschitz>(&spec)) {
    lipschitz_like(out, c, g, li->L_f);
  } else if (const auto* qs = std::get_if<ClassQCStar>(&spec)) {
    lipschitz_like(out, c, g, qcstar_constant(qs->A, qcstar_sqrt));
  } else {
    const auto Ae = lpv_error_matrices(std::get<ClassLPV>(spec).A, g, L_tilde, T);
    out.theta2 = 0;
    out.beta = 0;
    for (const auto& A : Ae) {
      out.theta2 = std::max(out.theta2, spectral_norm(A));
      out.beta = std::max(out.beta, spectral_norm(c.VMC1 + c.VMC2 * A));
    }
  }
  return out;
}

RadiiParams make_radii_params(const Matrix& P, double rho, const ClassRadii& c, double eta_w, double eta_v) {
  RadiiParams r;
  r.theta1 = theta1_of(P);
  r.lambda_min_P = sym_eig_extremes(P).first;
  r.theta2 = c.theta2;
  r.beta = c.beta;
  r.alpha_bar = c.alpha_bar;
  r.eta_bar = c.eta_bar;
  r.rho = rho;
  r.eta_w = eta_w;
  r.eta_v = eta_v;
  return r;
}

double geometric_sum(double theta, int k) {
  if (k <= 0) return 0.0;
  if (theta == 1.0) return k;
  if (std::isinf(theta)) return k == 1 ? 1.0 : kInf;
  return (1.0 - std::pow(theta, k)) / (1.0 - theta);
}

namespace {

// c * s with 0 * inf read as 0.
double scaled(double c, double s) { return c == 0.0 || s == 0.0 ? 0.0 : c * s; }

double branch1(const RadiiParams& r, double d0, double pw, double sum) {
  const double noise = r.eta_w * r.eta_w + r.eta_v * r.eta_v;
  const double gain = std::isinf(r.rho) ? kInf : r.rho * r.rho / r.lambda_min_P;
  return std::sqrt(scaled(d0 * d0, pw) + scaled(noise, scaled(gain, sum)));
}

double branch2(const RadiiParams& r, double d0, double pw, double sum) {
  return scaled(d0, pw) + scaled(r.eta_bar, sum);
}

}  // namespace

StateRadius state_radius_at(const RadiiParams& r, double delta0_x, int k) {
  StateRadius s;
  if (k == 0) {
    s.branch1 = s.branch2 = delta0_x;
    return s;
  }
  s.branch1 = branch1(r, delta0_x, std::pow(r.theta1, k), geometric_sum(r.theta1, k));
  s.branch2 = branch2(r, delta0_x, std::pow(r.theta2, k), geometric_sum(r.theta2, k));
  return s;
}

RadiiSequences radii_sequences(const RadiiParams& r, double delta0_x, int K, bool iterative) {
  if (K < 1) throw ContractViolation("radii_sequences: horizon must be >= 1");
  RadiiSequences out;
  out.delta_x.resize(K + 1);
  out.delta_x1.resize(K + 1);
  out.delta_x2.resize(K + 1);
  out.delta_d.resize(K);
  double p1 = 1, p2 = 1, s1 = 0, s2 = 0;
  for (int k = 0; k <= K; ++k) {
    StateRadius s;
    if (!iterative) {
      s = state_radius_at(r, delta0_x, k);
    } else if (k == 0) {
      s.branch1 = s.branch2 = delta0_x;
    } else {
      // sum_{i=1}^k theta^{i-1} = theta * sum_{i=1}^{k-1} theta^{i-1} + 1
      s1 = scaled(r.theta1, s1) + 1.0;
      s2 = scaled(r.theta2, s2) + 1.0;
      p1 = scaled(p1, r.theta1);
      p2 = scaled(p2, r.theta2);
      s.branch1 = branch1(r, delta0_x, p1, s1);
      s.branch2 = branch2(r, delta0_x, p2, s2);
    }
    out.delta_x1[k] = s.branch1;
    out.delta_x2[k] = s.branch2;
    out.delta_x[k] = s.value();
  }
  for (int k = 1; k <= K; ++k) out.delta_d[k - 1] = scaled(r.beta, out.delta_x[k - 1]) + r.alpha_bar;
  return out;
}

std::optional<std::pair<double, double>> steady_state(const RadiiParams& r) {
  const bool c1 = r.theta1 < 1, c2 = r.theta2 < 1;
  if (!c1 && !c2) return std::nullopt;
  const double noise = r.eta_w * r.eta_w + r.eta_v * r.eta_v;
  const double d1 = c1 ? r.rho * std::sqrt(noise / (r.lambda_min_P * (1 - r.theta1))) : kInf;
  const double d2 = c2 ? r.eta_bar / (1 - r.theta2) : kInf;
  const double dx = std::min(d1, d2);
  return std::make_pair(dx, scaled(r.beta, dx) + r.alpha_bar);
}

bool lpv_convergence_check(const std::vector<Matrix>& A_e_list) {
  return std::all_of(A_e_list.begin(), A_e_list.end(), [](const Matrix& A) { return spectral_norm(A) < 1.0; });
}

}  // namespace siso
