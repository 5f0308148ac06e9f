#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "siso/errors.hpp"
#include "siso/sdp.hpp"

namespace siso::sdp {

Options Options::from_env() {
  Options o;
  if (const char* s = std::getenv("SISO_SOLVER_TOL")) {
    char* end = nullptr;
    const double v = std::strtod(s, &end);
    if (end != s && v > 0 && std::isfinite(v)) o.tol = v;
  }
  return o;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Presolve representation: F0 + sum_v y_v F_v >= 0, g0 + g'y >= 0, e0 + e'y = 0.

struct FBlock {
  std::string name;
  Matrix F0;
  std::map<int, Matrix> F;
};

struct Row {
  double c0 = 0.0;
  std::map<int, double> a;
};

struct Reduced {
  int m = 0;
  std::vector<FBlock> blocks;
  std::vector<Row> rows;
  std::vector<Row> eqs;
  Vector c;        // objective over reduced vars
  Matrix T;        // y_original = T z + t
  Vector t;
  bool infeasible = false;
  std::string why;
};

double max_abs(const Matrix& M) { return M.size() ? M.cwiseAbs().maxCoeff() : 0.0; }

void threshold_block(FBlock& b) {
  double scale = max_abs(b.F0);
  for (const auto& [v, M] : b.F) scale = std::max(scale, max_abs(M));
  const double cut = 1e-12 * scale;
  b.F0 = b.F0.unaryExpr([cut](double x) { return std::abs(x) <= cut ? 0.0 : x; });
  for (auto it = b.F.begin(); it != b.F.end();) {
    it->second = it->second.unaryExpr([cut](double x) { return std::abs(x) <= cut ? 0.0 : x; });
    if (it->second.isZero(0.0))
      it = b.F.erase(it);
    else
      ++it;
  }
}

void threshold_row(Row& r) {
  double scale = std::abs(r.c0);
  for (const auto& [v, x] : r.a) scale = std::max(scale, std::abs(x));
  const double cut = 1e-12 * scale;
  if (std::abs(r.c0) <= cut) r.c0 = 0.0;
  for (auto it = r.a.begin(); it != r.a.end();)
    if (std::abs(it->second) <= cut)
      it = r.a.erase(it);
    else
      ++it;
}

// Drops rows/cols whose diagonal is identically zero; the rest of such a row
// must vanish, which is recorded as equalities.
bool strip_zero_diagonals(Reduced& R) {
  bool changed = false;
  for (auto& b : R.blocks) {
    const auto k = b.F0.rows();
    std::vector<Eigen::Index> zero, keep;
    for (Eigen::Index i = 0; i < k; ++i) {
      bool z = b.F0(i, i) == 0.0;
      for (const auto& [v, M] : b.F) z = z && M(i, i) == 0.0;
      (z ? zero : keep).push_back(i);
    }
    if (zero.empty()) continue;
    changed = true;
    for (auto i : zero)
      for (Eigen::Index j = 0; j < k; ++j) {
        if (j == i) continue;
        Row e;
        e.c0 = b.F0(i, j);
        for (const auto& [v, M] : b.F)
          if (M(i, j) != 0.0) e.a[v] = M(i, j);
        if (e.a.empty() && e.c0 == 0.0) continue;
        R.eqs.push_back(std::move(e));
      }
    auto sub = [&](const Matrix& M) {
      Matrix out(keep.size(), keep.size());
      for (std::size_t r = 0; r < keep.size(); ++r)
        for (std::size_t c = 0; c < keep.size(); ++c) out(r, c) = M(keep[r], keep[c]);
      return out;
    };
    b.F0 = sub(b.F0);
    for (auto it = b.F.begin(); it != b.F.end();) {
      it->second = sub(it->second);
      if (it->second.isZero(0.0))
        it = b.F.erase(it);
      else
        ++it;
    }
  }
  return changed;
}

// Applies y_old = S z + s to every stored object; S is m_old x m_new.
void substitute(Reduced& R, const Matrix& S, const Vector& s) {
  const int m_new = static_cast<int>(S.cols());
  auto map_terms = [&](const std::map<int, Matrix>& F, Matrix& F0) {
    std::map<int, Matrix> out;
    for (const auto& [v, M] : F) {
      if (s(v) != 0.0) F0 += s(v) * M;
      for (int w = 0; w < m_new; ++w) {
        const double coef = S(v, w);
        if (coef == 0.0) continue;
        auto it = out.find(w);
        if (it == out.end())
          out.emplace(w, coef * M);
        else
          it->second += coef * M;
      }
    }
    return out;
  };
  auto map_row = [&](Row& r) {
    std::map<int, double> out;
    for (const auto& [v, x] : r.a) {
      r.c0 += s(v) * x;
      for (int w = 0; w < m_new; ++w)
        if (S(v, w) != 0.0) out[w] += S(v, w) * x;
    }
    r.a = std::move(out);
  };
  for (auto& b : R.blocks) b.F = map_terms(b.F, b.F0);
  for (auto& r : R.rows) map_row(r);
  for (auto& r : R.eqs) map_row(r);
  R.t += R.T * s;
  R.T = R.T * S;
  R.c = S.transpose() * R.c;
  R.m = m_new;
}

// Eliminates all pending equalities through a null-space parameterization of the
// variables they touch.
void eliminate_equalities(Reduced& R) {
  for (auto& e : R.eqs) threshold_row(e);
  std::vector<int> involved;
  for (const auto& e : R.eqs)
    for (const auto& [v, x] : e.a) involved.push_back(v);
  std::sort(involved.begin(), involved.end());
  involved.erase(std::unique(involved.begin(), involved.end()), involved.end());
  for (const auto& e : R.eqs)
    if (e.a.empty() && std::abs(e.c0) > 1e-10) {
      R.infeasible = true;
      R.why = "presolve: inconsistent structural equality";
      return;
    }
  if (involved.empty()) {
    R.eqs.clear();
    return;
  }
  std::map<int, int> pos;
  for (std::size_t i = 0; i < involved.size(); ++i) pos[involved[i]] = static_cast<int>(i);
  Matrix E = Matrix::Zero(static_cast<Eigen::Index>(R.eqs.size()), static_cast<Eigen::Index>(involved.size()));
  Vector rhs(static_cast<Eigen::Index>(R.eqs.size()));
  for (std::size_t r = 0; r < R.eqs.size(); ++r) {
    rhs(r) = -R.eqs[r].c0;
    for (const auto& [v, x] : R.eqs[r].a) E(r, pos[v]) = x;
  }
  const SvdResult sv = svd_full(E, 1e-10);
  Vector y0 = Vector::Zero(E.cols());
  for (Eigen::Index i = 0; i < sv.numerical_rank; ++i)
    y0 += sv.V.col(i) * (sv.U.col(i).dot(rhs) / sv.S(i));
  if ((E * y0 - rhs).norm() > 1e-8 * (1.0 + rhs.norm())) {
    R.infeasible = true;
    R.why = "presolve: structural equalities are inconsistent";
    return;
  }
  const Matrix N = sv.V.rightCols(E.cols() - sv.numerical_rank);
  // New variable order: untouched variables first, then null-space coordinates.
  std::vector<int> free_vars;
  for (int v = 0; v < R.m; ++v)
    if (!pos.count(v)) free_vars.push_back(v);
  const int m_new = static_cast<int>(free_vars.size() + N.cols());
  Matrix S = Matrix::Zero(R.m, m_new);
  Vector s = Vector::Zero(R.m);
  for (std::size_t i = 0; i < free_vars.size(); ++i) S(free_vars[i], static_cast<Eigen::Index>(i)) = 1.0;
  for (const auto& [v, i] : pos) {
    s(v) = y0(i);
    for (Eigen::Index j = 0; j < N.cols(); ++j) {
      const double x = N(i, j);
      if (std::abs(x) > 1e-15) S(v, static_cast<Eigen::Index>(free_vars.size()) + j) = x;
    }
  }
  R.eqs.clear();
  substitute(R, S, s);
}

Reduced presolve(const Program& prog, double tol) {
  Reduced R;
  R.m = prog.num_vars();
  R.T = Matrix::Identity(R.m, R.m);
  R.t = Vector::Zero(R.m);
  R.c = Vector::Zero(R.m);
  if (prog.objective())
    for (const auto& [v, M] : prog.objective()->terms()) R.c(v) += M(0, 0);
  for (const auto& c : prog.psd()) {
    if (c.expr.rows() == 0) continue;
    FBlock b{c.name, c.expr.constant(), c.expr.terms()};
    R.blocks.push_back(std::move(b));
  }
  for (const auto& c : prog.nonneg())
    for (Eigen::Index i = 0; i < c.expr.rows(); ++i)
      for (Eigen::Index j = 0; j < c.expr.cols(); ++j) {
        Row r;
        r.c0 = c.expr.constant()(i, j);
        for (const auto& [v, M] : c.expr.terms())
          if (M(i, j) != 0.0) r.a[v] = M(i, j);
        R.rows.push_back(std::move(r));
      }
  for (const auto& c : prog.equalities())
    for (Eigen::Index i = 0; i < c.expr.rows(); ++i)
      for (Eigen::Index j = 0; j < c.expr.cols(); ++j) {
        Row r;
        r.c0 = c.expr.constant()(i, j);
        for (const auto& [v, M] : c.expr.terms())
          if (M(i, j) != 0.0) r.a[v] = M(i, j);
        R.eqs.push_back(std::move(r));
      }

  for (int pass = 0; pass < 50; ++pass) {
    for (auto& b : R.blocks) threshold_block(b);
    for (auto& r : R.rows) threshold_row(r);
    const bool changed = strip_zero_diagonals(R);
    if (!R.eqs.empty()) {
      eliminate_equalities(R);
      if (R.infeasible) return R;
      continue;
    }
    if (!changed) break;
  }

  // Constant-only constraints are checked here and dropped.
  std::vector<FBlock> kept;
  for (auto& b : R.blocks) {
    if (b.F0.rows() == 0) continue;
    if (b.F.empty()) {
      Eigen::SelfAdjointEigenSolver<Matrix> es(b.F0, Eigen::EigenvaluesOnly);
      if (es.eigenvalues()(0) < -tol) {
        R.infeasible = true;
        R.why = "presolve: constant constraint '" + b.name + "' is violated";
        return R;
      }
      continue;
    }
    kept.push_back(std::move(b));
  }
  R.blocks = std::move(kept);
  std::vector<Row> rows;
  for (auto& r : R.rows) {
    if (r.a.empty()) {
      if (r.c0 < -tol) {
        R.infeasible = true;
        R.why = "presolve: constant linear constraint is violated";
        return R;
      }
      continue;
    }
    rows.push_back(std::move(r));
  }
  R.rows = std::move(rows);
  return R;
}

// ---------------------------------------------------------------------------
// Interior-point method for   max b'z  s.t.  S_j = C_j - sum_v z_v A_jv >= 0,
//                                            s = c - A z >= 0.

struct IBlock {
  Matrix C;
  std::vector<int> vars;
  std::vector<Matrix> A;
};

struct IProblem {
  int m = 0;
  std::vector<IBlock> blocks;
  Vector lc;
  Matrix lA;
  Vector b;
};

struct IResult {
  bool converged = false;
  bool stopped = false;
  int iterations = 0;
  Vector z;
  double pobj = 0.0, dobj = 0.0, pinf = 0.0, dinf = 0.0;
};

// Called with (z, pinf, dinf, pobj); returns true to stop.
using Monitor = std::function<bool(const Vector&, double, double, double)>;

double max_step(const Matrix& X, const Matrix& dX) {
  Eigen::LLT<Matrix> llt(X);
  if (llt.info() != Eigen::Success) return 0.0;
  const Matrix Li = llt.matrixL().solve(Matrix::Identity(X.rows(), X.cols()));
  const Matrix Z = sym(Li * dX * Li.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(Z, Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues()(0);
  return lmin < 0 ? -1.0 / lmin : kInf;
}

double max_step_vec(const Vector& x, const Vector& dx) {
  double a = kInf;
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (dx(i) < 0) a = std::min(a, -x(i) / dx(i));
  return a;
}

IResult run_ipm(const IProblem& P, double tol, int max_iter, bool verbose, const Monitor& monitor) {
  const int m = P.m;
  const std::size_t J = P.blocks.size();
  const Eigen::Index nl = P.lc.size();
  std::vector<Matrix> X(J), S(J), Sinv(J), Rd(J);
  Vector x(nl), s(nl), z = Vector::Zero(m);

  double nC = P.lc.squaredNorm();
  Eigen::Index N = nl;
  for (std::size_t j = 0; j < J; ++j) {
    const auto& B = P.blocks[j];
    const auto k = B.C.rows();
    N += k;
    nC += B.C.squaredNorm();
    double xi = std::max(10.0, std::sqrt(static_cast<double>(k)));
    double eta = std::max(xi, B.C.norm());
    for (std::size_t i = 0; i < B.vars.size(); ++i) {
      const double an = B.A[i].norm();
      xi = std::max(xi, static_cast<double>(k) * (1.0 + std::abs(P.b(B.vars[i]))) / (1.0 + an));
      eta = std::max(eta, an);
    }
    X[j] = xi * Matrix::Identity(k, k);
    S[j] = eta * Matrix::Identity(k, k);
  }
  for (Eigen::Index r = 0; r < nl; ++r) {
    double xi = 10.0, eta = std::max(10.0, std::abs(P.lc(r)));
    for (int i = 0; i < m; ++i) {
      const double a = std::abs(P.lA(r, i));
      if (a == 0.0) continue;
      xi = std::max(xi, (1.0 + std::abs(P.b(i))) / (1.0 + a));
      eta = std::max(eta, a);
    }
    x(r) = xi;
    s(r) = eta;
  }
  nC = std::sqrt(nC);
  const double nb = P.b.norm();

  IResult res;
  Matrix M(m, m);
  Vector rp(m), rd(nl);

  for (int it = 0; it <= max_iter; ++it) {
    res.iterations = it;
    // residuals
    Vector AX = P.lA.transpose() * x;
    double pobj = P.lc.dot(x), gap = x.dot(s), dres = 0.0;
    rd = P.lc - P.lA * z - s;
    dres += rd.squaredNorm();
    for (std::size_t j = 0; j < J; ++j) {
      const auto& B = P.blocks[j];
      Rd[j] = B.C - S[j];
      for (std::size_t i = 0; i < B.vars.size(); ++i) {
        Rd[j] -= z(B.vars[i]) * B.A[i];
        AX(B.vars[i]) += B.A[i].cwiseProduct(X[j]).sum();
      }
      pobj += B.C.cwiseProduct(X[j]).sum();
      gap += X[j].cwiseProduct(S[j]).sum();
      dres += Rd[j].squaredNorm();
    }
    rp = P.b - AX;
    const double dobj = P.b.dot(z);
    const double mu = gap / static_cast<double>(std::max<Eigen::Index>(N, 1));
    const double relgap = std::max(std::abs(pobj - dobj), std::abs(gap)) / (1.0 + std::abs(pobj) + std::abs(dobj));
    res.pinf = rp.norm() / (1.0 + nb);
    res.dinf = std::sqrt(dres) / (1.0 + nC);
    res.pobj = pobj;
    res.dobj = dobj;
    res.z = z;
    if (verbose)
      std::fprintf(stderr, "  ipm %3d  pobj %+.8e  dobj %+.8e  gap %.2e  pinf %.2e  dinf %.2e\n", it, pobj,
                   dobj, relgap, res.pinf, res.dinf);
    if (monitor && monitor(z, res.pinf, res.dinf, pobj)) {
      res.stopped = true;
      return res;
    }
    if (relgap < tol && res.pinf < tol && res.dinf < tol) {
      res.converged = true;
      return res;
    }
    if (it == max_iter) break;

    // Schur complement
    M.setZero();
    for (std::size_t j = 0; j < J; ++j) {
      Eigen::LLT<Matrix> llt(S[j]);
      if (llt.info() != Eigen::Success) return res;
      Sinv[j] = llt.solve(Matrix::Identity(S[j].rows(), S[j].cols()));
      const auto& B = P.blocks[j];
      for (std::size_t a = 0; a < B.vars.size(); ++a) {
        const Matrix T = X[j] * B.A[a] * Sinv[j];
        for (std::size_t c = a; c < B.vars.size(); ++c) {
          const double v = B.A[c].cwiseProduct(T).sum();
          M(B.vars[a], B.vars[c]) += v;
          if (c != a) M(B.vars[c], B.vars[a]) += v;
        }
      }
    }
    if (nl > 0) M += P.lA.transpose() * (x.cwiseQuotient(s)).asDiagonal() * P.lA;
    M = sym(M);
    Eigen::LLT<Matrix> chol(M);
    if (chol.info() != Eigen::Success) {
      const double reg = 1e-12 * std::max(1.0, M.diagonal().cwiseAbs().maxCoeff());
      chol.compute(M + reg * Matrix::Identity(m, m));
      if (chol.info() != Eigen::Success) return res;
    }

    std::vector<Matrix> dX(J), dS(J), dXa, dSa;
    Vector dx(nl), ds(nl), dxa, dsa, dz(m);
    auto direction = [&](double sigmu, bool corr) {
      std::vector<Matrix> G(J);
      Vector g = sigmu * s.cwiseInverse() - x - x.cwiseProduct(rd).cwiseQuotient(s);
      if (corr) g -= dxa.cwiseProduct(dsa).cwiseQuotient(s);
      Vector rhs = rp - P.lA.transpose() * g;
      for (std::size_t j = 0; j < J; ++j) {
        G[j] = sigmu * Sinv[j] - X[j] - X[j] * Rd[j] * Sinv[j];
        if (corr) G[j] -= dXa[j] * dSa[j] * Sinv[j];
        const auto& B = P.blocks[j];
        for (std::size_t i = 0; i < B.vars.size(); ++i) rhs(B.vars[i]) -= B.A[i].cwiseProduct(G[j]).sum();
      }
      dz = chol.solve(rhs);
      const Vector Adz = P.lA * dz;
      ds = rd - Adz;
      dx = g + x.cwiseProduct(Adz).cwiseQuotient(s);
      for (std::size_t j = 0; j < J; ++j) {
        const auto& B = P.blocks[j];
        Matrix sumA = Matrix::Zero(B.C.rows(), B.C.cols());
        for (std::size_t i = 0; i < B.vars.size(); ++i) sumA += dz(B.vars[i]) * B.A[i];
        dS[j] = Rd[j] - sumA;
        dX[j] = sym(G[j] + X[j] * sumA * Sinv[j]);
      }
    };
    auto steps = [&](double& ap, double& ad) {
      ap = max_step_vec(x, dx);
      ad = max_step_vec(s, ds);
      for (std::size_t j = 0; j < J; ++j) {
        ap = std::min(ap, max_step(X[j], dX[j]));
        ad = std::min(ad, max_step(S[j], dS[j]));
      }
    };

    direction(0.0, false);
    double ap, ad;
    steps(ap, ad);
    ap = std::min(1.0, ap);
    ad = std::min(1.0, ad);
    double gap_aff = (x + ap * dx).dot(s + ad * ds);
    for (std::size_t j = 0; j < J; ++j) gap_aff += (X[j] + ap * dX[j]).cwiseProduct(S[j] + ad * dS[j]).sum();
    const double mu_aff = gap_aff / static_cast<double>(std::max<Eigen::Index>(N, 1));
    double sigma = std::clamp(std::pow(mu_aff / mu, 3.0), 0.0, 1.0);
    if (std::max(res.pinf, res.dinf) > 1e-2) sigma = std::max(sigma, 0.1);
    dXa = dX;
    dSa = dS;
    dxa = dx;
    dsa = ds;
    direction(sigma * mu, true);
    steps(ap, ad);
    const double gamma = 0.9 + 0.08 * std::min({1.0, ap, ad});
    ap = std::min(1.0, gamma * ap);
    ad = std::min(1.0, gamma * ad);

    x += ap * dx;
    s += ad * ds;
    z += ad * dz;
    for (std::size_t j = 0; j < J; ++j) {
      X[j] = sym(X[j] + ap * dX[j]);
      S[j] = sym(S[j] + ad * dS[j]);
    }
  }
  return res;
}

// Builds the interior-point problem in reduced variables. When `with_t`, an extra
// last variable t is subtracted from every constraint and capped at 1.
IProblem make_ipm(const Reduced& R, bool with_t, double relax, double box) {
  IProblem P;
  const int m = R.m + (with_t ? 1 : 0);
  P.m = m;
  for (const auto& b : R.blocks) {
    IBlock B;
    const auto k = b.F0.rows();
    B.C = b.F0 + relax * Matrix::Identity(k, k);
    for (const auto& [v, M] : b.F) {
      B.vars.push_back(v);
      B.A.push_back(-M);
    }
    if (with_t) {
      B.vars.push_back(R.m);
      B.A.push_back(Matrix::Identity(k, k));
    }
    P.blocks.push_back(std::move(B));
  }
  const Eigen::Index nr = static_cast<Eigen::Index>(R.rows.size()) + 2 * R.m + (with_t ? 1 : 0);
  P.lc = Vector::Zero(nr);
  P.lA = Matrix::Zero(nr, m);
  Eigen::Index r = 0;
  for (const auto& row : R.rows) {
    P.lc(r) = row.c0 + relax;
    for (const auto& [v, a] : row.a) P.lA(r, v) = -a;
    if (with_t) P.lA(r, R.m) = 1.0;
    ++r;
  }
  for (int v = 0; v < R.m; ++v) {
    P.lc(r) = box;
    P.lA(r++, v) = 1.0;
    P.lc(r) = box;
    P.lA(r++, v) = -1.0;
  }
  if (with_t) {
    P.lc(r) = 1.0;
    P.lA(r++, R.m) = 1.0;
  }
  P.b = Vector::Zero(m);
  return P;
}

double true_margin(const Reduced& R, const Vector& z) {
  double worst = 1.0;
  for (const auto& b : R.blocks) {
    Matrix F = b.F0;
    for (const auto& [v, M] : b.F) F += z(v) * M;
    Eigen::SelfAdjointEigenSolver<Matrix> es(sym(F), Eigen::EigenvaluesOnly);
    worst = std::min(worst, es.eigenvalues()(0));
  }
  for (const auto& row : R.rows) {
    double g = row.c0;
    for (const auto& [v, a] : row.a) g += a * z(v);
    worst = std::min(worst, g);
  }
  return worst;
}

}  // namespace

Solution solve(const Program& prog, const Options& opt) {
  Solution sol;
  Reduced R = presolve(prog, opt.tol);
  auto finish = [&](const Vector& z) {
    sol.y = R.T * z + R.t;
    if (prog.objective()) sol.objective = prog.objective()->value(sol.y)(0, 0);
  };
  if (R.infeasible) {
    sol.status = Status::Infeasible;
    sol.message = R.why;
    sol.y = R.t;
    return sol;
  }
  if (R.m == 0) {
    sol.status = Status::Optimal;
    sol.margin = 1.0;
    finish(Vector::Zero(0));
    return sol;
  }

  // Phase I: maximize t subject to every constraint >= t I.
  IProblem P1 = make_ipm(R, true, 0.0, opt.box);
  P1.b(R.m) = 1.0;
  const bool has_obj = prog.objective().has_value();
  double early_margin = -kInf;
  Vector early_z;
  bool certified_infeasible = false;
  Monitor mon1 = [&](const Vector& zt, double pinf, double, double pobj) {
    const Vector z = zt.head(R.m);
    if (has_obj && zt.cwiseAbs().maxCoeff() < opt.box) {
      const double tm = true_margin(R, z);
      if (tm > 10 * opt.tol) {
        early_margin = tm;
        early_z = z;
        return true;
      }
    }
    if (pinf < 1e-8 && pobj < -10 * opt.tol) {
      certified_infeasible = true;
      return true;
    }
    return false;
  };
  if (opt.verbose) std::fprintf(stderr, "phase I: %d vars, %zu blocks\n", P1.m, P1.blocks.size());
  const IResult r1 = run_ipm(P1, opt.ipm_tol, opt.max_iter, opt.verbose, mon1);
  sol.iterations = r1.iterations;
  if (certified_infeasible) {
    sol.status = Status::Infeasible;
    sol.margin = r1.pobj;
    sol.message = "phase I certificate: max margin <= " + std::to_string(r1.pobj);
    finish(r1.z.head(R.m));
    return sol;
  }
  double margin;
  Vector z1;
  if (r1.stopped) {
    margin = early_margin;
    z1 = early_z;
  } else if (r1.converged || (r1.pinf < 1e-6 && r1.dinf < 1e-6)) {
    z1 = r1.z.head(R.m);
    margin = std::min(r1.dobj, true_margin(R, z1));
    if (r1.pobj < -opt.tol) {
      sol.status = Status::Infeasible;
      sol.margin = r1.pobj;
      sol.message = "phase I optimum is negative";
      finish(z1);
      return sol;
    }
  } else {
    sol.status = Status::NumericalFailure;
    sol.message = "phase I did not converge";
    finish(r1.z.head(R.m));
    return sol;
  }
  sol.margin = margin;
  if (margin < -opt.tol) {
    sol.status = Status::Infeasible;
    sol.message = "phase I margin below tolerance";
    finish(z1);
    return sol;
  }
  sol.marginal = margin < 10 * opt.tol;
  if (!has_obj) {
    sol.status = Status::Optimal;
    finish(z1);
    return sol;
  }

  // Phase II: minimize the objective on the (slightly relaxed if marginal) set.
  const double relax = sol.marginal ? 10 * opt.tol : 0.0;
  IProblem P2 = make_ipm(R, false, relax, opt.box);
  P2.b = -R.c;
  if (opt.verbose) std::fprintf(stderr, "phase II\n");
  const IResult r2 = run_ipm(P2, opt.ipm_tol, opt.max_iter, opt.verbose, nullptr);
  sol.iterations += r2.iterations;
  if (!r2.converged && !(r2.pinf < 1e-6 && r2.dinf < 1e-6)) {
    sol.status = Status::NumericalFailure;
    sol.message = "phase II did not converge";
    finish(z1);
    return sol;
  }
  sol.status = Status::Optimal;
  finish(r2.z);
  if (!r2.converged) sol.message = "phase II stopped at reduced accuracy";
  return sol;
}

std::vector<std::pair<std::string, double>> constraint_margins(const Program& prog, const Vector& y) {
  std::vector<std::pair<std::string, double>> out;
  for (const auto& c : prog.psd()) {
    if (c.expr.rows() == 0) continue;
    const Matrix F = sym(c.expr.value(y));
    Eigen::SelfAdjointEigenSolver<Matrix> es(F, Eigen::EigenvaluesOnly);
    out.emplace_back(c.name, es.eigenvalues()(0));
  }
  for (const auto& c : prog.nonneg()) {
    const Matrix g = c.expr.value(y);
    out.emplace_back(c.name, g.size() ? g.minCoeff() : 0.0);
  }
  for (const auto& c : prog.equalities()) {
    const Matrix e = c.expr.value(y);
    out.emplace_back(c.name, e.size() ? -e.cwiseAbs().maxCoeff() : 0.0);
  }
  return out;
}

}  // namespace siso::sdp
