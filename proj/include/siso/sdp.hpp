#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "siso/numerics.hpp"

// Small dense semidefinite programming layer: affine matrix expressions in scalar
// decision variables, a program builder, and a primal-dual interior-point solver.
namespace siso::sdp {

// constant + sum_v y_v * terms[v]
class Expr {
 public:
  Expr() = default;
  explicit Expr(Matrix constant);
  static Expr zero(Eigen::Index rows, Eigen::Index cols);
  static Expr variable(int index, Eigen::Index rows, Eigen::Index cols, const Matrix& coeff);

  Eigen::Index rows() const { return c_.rows(); }
  Eigen::Index cols() const { return c_.cols(); }
  const Matrix& constant() const { return c_; }
  const std::map<int, Matrix>& terms() const { return t_; }

  Expr transpose() const;
  Matrix value(const Vector& y) const;

  Expr& operator+=(const Expr& o);
  Expr& operator-=(const Expr& o);
  Expr& operator*=(double s);

  friend Expr operator+(Expr a, const Expr& b) { return a += b; }
  friend Expr operator-(Expr a, const Expr& b) { return a -= b; }
  friend Expr operator-(Expr a) { return a *= -1.0; }
  friend Expr operator*(double s, Expr a) { return a *= s; }
  friend Expr operator*(const Matrix& A, const Expr& e);
  friend Expr operator*(const Expr& e, const Matrix& A);

 private:
  Matrix c_;
  std::map<int, Matrix> t_;
};

// Assemble a block matrix; every row of `rows` must have the same count and
// consistent dimensions.
Expr block(const std::vector<std::vector<Expr>>& rows);
Expr symmetrize(const Expr& e);
// scalar (1x1) expression times a constant matrix
Expr operator*(const Expr& scalar, double) = delete;
Expr scaled(const Expr& scalar, const Matrix& M);

class Program {
 public:
  int num_vars() const { return static_cast<int>(names_.size()); }

  Expr add_scalar(const std::string& name);
  Expr add_symmetric(const std::string& name, Eigen::Index n);
  Expr add_matrix(const std::string& name, Eigen::Index rows, Eigen::Index cols);

  // F >= 0 in the semidefinite sense; F must be symmetric.
  void add_psd(const Expr& F, const std::string& name);
  // every entry of g >= 0
  void add_nonneg(const Expr& g, const std::string& name);
  // every entry of e == 0
  void add_equality(const Expr& e, const std::string& name);
  // 1x1 expression
  void minimize(const Expr& objective);

  struct Constraint {
    std::string name;
    Expr expr;
  };
  const std::vector<Constraint>& psd() const { return psd_; }
  const std::vector<Constraint>& nonneg() const { return nonneg_; }
  const std::vector<Constraint>& equalities() const { return eq_; }
  const std::optional<Expr>& objective() const { return obj_; }
  const std::string& var_name(int i) const { return names_[i]; }

 private:
  std::vector<std::string> names_;
  std::vector<Constraint> psd_, nonneg_, eq_;
  std::optional<Expr> obj_;
};

enum class Status { Optimal, Infeasible, NumericalFailure };
std::string to_string(Status s);

struct Options {
  double tol = 1e-7;       // feasibility classification threshold
  double ipm_tol = 1e-9;   // interior-point stopping tolerance
  int max_iter = 150;
  double box = 1e4;        // |y_i| <= box keeps both phases bounded
  bool verbose = false;

  // tol taken from SISO_SOLVER_TOL when set.
  static Options from_env();
};

struct Solution {
  Status status = Status::NumericalFailure;
  Vector y;                  // decision variables (original indexing)
  double objective = 0.0;    // objective at y (0 for feasibility problems)
  double margin = 0.0;       // max t with every constraint >= t I (capped at 1)
  bool marginal = false;     // solved with a tolerance-sized relaxation
  int iterations = 0;
  std::string message;
};

Solution solve(const Program& prog, const Options& opt = Options::from_env());

// Smallest eigenvalue (or entry, for nonneg rows) of each constraint at y.
std::vector<std::pair<std::string, double>> constraint_margins(const Program& prog, const Vector& y);

}  // namespace siso::sdp
