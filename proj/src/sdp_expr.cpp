#include <sstream>

#include "siso/errors.hpp"
#include "siso/sdp.hpp"

namespace siso::sdp {

Expr::Expr(Matrix constant) : c_(std::move(constant)) {}

Expr Expr::zero(Eigen::Index rows, Eigen::Index cols) { return Expr(Matrix::Zero(rows, cols)); }

Expr Expr::variable(int index, Eigen::Index rows, Eigen::Index cols, const Matrix& coeff) {
  Expr e = zero(rows, cols);
  e.t_.emplace(index, coeff);
  return e;
}

Expr Expr::transpose() const {
  Expr e(Matrix(c_.transpose()));
  for (const auto& [v, M] : t_) e.t_.emplace(v, M.transpose());
  return e;
}

Matrix Expr::value(const Vector& y) const {
  Matrix out = c_;
  for (const auto& [v, M] : t_) out += y(v) * M;
  return out;
}

namespace {
void check_same_shape(const Expr& a, const Expr& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    std::ostringstream os;
    os << "sdp::Expr " << op << ": shape " << a.rows() << "x" << a.cols() << " vs " << b.rows()
       << "x" << b.cols();
    throw ContractViolation(os.str());
  }
}
}  // namespace

Expr& Expr::operator+=(const Expr& o) {
  check_same_shape(*this, o, "+");
  c_ += o.c_;
  for (const auto& [v, M] : o.t_) {
    auto it = t_.find(v);
    if (it == t_.end())
      t_.emplace(v, M);
    else
      it->second += M;
  }
  return *this;
}

Expr& Expr::operator-=(const Expr& o) {
  check_same_shape(*this, o, "-");
  c_ -= o.c_;
  for (const auto& [v, M] : o.t_) {
    auto it = t_.find(v);
    if (it == t_.end())
      t_.emplace(v, -M);
    else
      it->second -= M;
  }
  return *this;
}

Expr& Expr::operator*=(double s) {
  c_ *= s;
  for (auto& [v, M] : t_) M *= s;
  return *this;
}

Expr operator*(const Matrix& A, const Expr& e) {
  if (A.cols() != e.rows()) throw ContractViolation("sdp::Expr: left product shape mismatch");
  Expr out(Matrix(A * e.c_));
  for (const auto& [v, M] : e.t_) out.t_.emplace(v, A * M);
  return out;
}

Expr operator*(const Expr& e, const Matrix& A) {
  if (e.cols() != A.rows()) throw ContractViolation("sdp::Expr: right product shape mismatch");
  Expr out(Matrix(e.c_ * A));
  for (const auto& [v, M] : e.t_) out.t_.emplace(v, M * A);
  return out;
}

Expr block(const std::vector<std::vector<Expr>>& rows) {
  if (rows.empty()) return Expr::zero(0, 0);
  const std::size_t nc = rows.front().size();
  std::vector<Eigen::Index> h(rows.size()), w(nc);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != nc) throw ContractViolation("sdp::block: ragged block rows");
    h[i] = rows[i].front().rows();
  }
  for (std::size_t j = 0; j < nc; ++j) w[j] = rows.front()[j].cols();
  Eigen::Index H = 0, Wd = 0;
  for (auto x : h) H += x;
  for (auto x : w) Wd += x;

  Expr out = Expr::zero(H, Wd);
  Eigen::Index r0 = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    Eigen::Index c0 = 0;
    for (std::size_t j = 0; j < nc; ++j) {
      const Expr& e = rows[i][j];
      if (e.rows() != h[i] || e.cols() != w[j]) {
        std::ostringstream os;
        os << "sdp::block: block (" << i << "," << j << ") is " << e.rows() << "x" << e.cols()
           << ", expected " << h[i] << "x" << w[j];
        throw ContractViolation(os.str());
      }
      Expr placed = Expr::zero(H, Wd);
      Matrix c = Matrix::Zero(H, Wd);
      c.block(r0, c0, h[i], w[j]) = e.constant();
      placed += Expr(c);
      for (const auto& [v, M] : e.terms()) {
        Matrix t = Matrix::Zero(H, Wd);
        t.block(r0, c0, h[i], w[j]) = M;
        placed += Expr::variable(v, H, Wd, t);
      }
      out += placed;
      c0 += w[j];
    }
    r0 += h[i];
  }
  return out;
}

Expr symmetrize(const Expr& e) { return 0.5 * (e + e.transpose()); }

Expr scaled(const Expr& scalar, const Matrix& M) {
  if (scalar.rows() != 1 || scalar.cols() != 1) throw ContractViolation("sdp::scaled: expects a scalar");
  Expr out(Matrix(scalar.constant()(0, 0) * M));
  for (const auto& [v, c] : scalar.terms()) out += Expr::variable(v, M.rows(), M.cols(), c(0, 0) * M);
  return out;
}

Expr Program::add_scalar(const std::string& name) {
  const int v = num_vars();
  names_.push_back(name);
  return Expr::variable(v, 1, 1, Matrix::Ones(1, 1));
}

Expr Program::add_symmetric(const std::string& name, Eigen::Index n) {
  Expr e = Expr::zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i <= j; ++i) {
      Matrix E = Matrix::Zero(n, n);
      E(i, j) = 1.0;
      E(j, i) = 1.0;
      const int v = num_vars();
      names_.push_back(name + "(" + std::to_string(i) + "," + std::to_string(j) + ")");
      e += Expr::variable(v, n, n, E);
    }
  return e;
}

Expr Program::add_matrix(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
  Expr e = Expr::zero(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) {
      Matrix E = Matrix::Zero(rows, cols);
      E(i, j) = 1.0;
      const int v = num_vars();
      names_.push_back(name + "(" + std::to_string(i) + "," + std::to_string(j) + ")");
      e += Expr::variable(v, rows, cols, E);
    }
  return e;
}

void Program::add_psd(const Expr& F, const std::string& name) {
  if (F.rows() != F.cols()) throw ContractViolation("add_psd(" + name + "): not square");
  auto asym = [](const Matrix& M) {
    return M.size() == 0 ? 0.0 : (M - M.transpose()).cwiseAbs().maxCoeff();
  };
  double worst = asym(F.constant());
  for (const auto& [v, M] : F.terms()) worst = std::max(worst, asym(M));
  if (worst > 1e-10) throw ContractViolation("add_psd(" + name + "): not symmetric");
  psd_.push_back({name, symmetrize(F)});
}

void Program::add_nonneg(const Expr& g, const std::string& name) { nonneg_.push_back({name, g}); }

void Program::add_equality(const Expr& e, const std::string& name) { eq_.push_back({name, e}); }

void Program::minimize(const Expr& objective) {
  if (objective.rows() != 1 || objective.cols() != 1)
    throw ContractViolation("minimize: objective must be scalar");
  obj_ = objective;
}

std::string to_string(Status s) {
  switch (s) {
    case Status::Optimal: return "optimal";
    case Status::Infeasible: return "infeasible";
    default: return "numerical-failure";
  }
}

}  // namespace siso::sdp
