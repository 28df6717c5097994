#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace dpgmg {

class KrylovError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// y = Op(x); y is resized by the callee.
using LinearOperator = std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)>;

LinearOperator as_operator(const Eigen::SparseMatrix<double>& A);
LinearOperator identity_operator();

struct SolveReport {
  int iterations = 0;
  std::vector<double> residual_history;  // relative l2 residuals, entry 0 is the initial one
  bool converged = false;
  double relative_residual = 0.0;  // true residual at exit
  double seconds = 0.0;
};

/// Preconditioned CG stopping on ||b - Ax|| <= tol ||b||. x holds the initial
/// guess on entry. max_iter < 0 selects min(10 n, 10000). Throws KrylovError
/// when a non-positive curvature or preconditioned residual norm shows up.
SolveReport pcg(const LinearOperator& A, const Eigen::VectorXd& b, const LinearOperator& M, double tol,
                Eigen::VectorXd& x, int max_iter = -1);

/// Dense symmetric positive definite solve.
Eigen::VectorXd direct_solve(const Eigen::MatrixXd& A, const Eigen::VectorXd& b);

}  // namespace dpgmg
