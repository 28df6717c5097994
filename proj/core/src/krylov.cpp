#include "dpgmg/krylov.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace dpgmg {

LinearOperator as_operator(const Eigen::SparseMatrix<double>& A) {
  return [&A](const Eigen::VectorXd& x, Eigen::VectorXd& y) { y.noalias() = A * x; };
}

LinearOperator identity_operator() {
  return [](const Eigen::VectorXd& x, Eigen::VectorXd& y) { y = x; };
}

SolveReport pcg(const LinearOperator& A, const Eigen::VectorXd& b, const LinearOperator& M, double tol,
                Eigen::VectorXd& x, int max_iter) {
  if (!(tol > 0)) throw std::invalid_argument("pcg: tolerance must be positive");
  const auto n = b.size();
  if (x.size() != n) throw std::invalid_argument("pcg: initial guess has wrong size");
  if (max_iter < 0) max_iter = static_cast<int>(std::min<Eigen::Index>(10 * n, 10000));
  const auto t0 = std::chrono::steady_clock::now();
  SolveReport rep;
  auto finish = [&]() {
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
  };

  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    x.setZero();
    rep.converged = true;
    rep.residual_history.push_back(0.0);
    return finish();
  }

  Eigen::VectorXd r, z, p, q;
  A(x, q);
  r = b - q;
  double rel = r.norm() / bnorm;
  rep.residual_history.push_back(rel);
  if (rel <= tol) {
    rep.converged = true;
    rep.relative_residual = rel;
    return finish();
  }
  M(r, z);
  double rz = r.dot(z);
  if (!(rz > 0)) throw KrylovError("pcg: preconditioner is not positive definite (r'Mr <= 0)");
  p = z;

  for (int it = 1; it <= max_iter; ++it) {
    A(p, q);
    const double pq = p.dot(q);
    if (!(pq > 0)) throw KrylovError("pcg: operator is not positive definite (p'Ap <= 0)");
    const double alpha = rz / pq;
    x.noalias() += alpha * p;
    r.noalias() -= alpha * q;
    rel = r.norm() / bnorm;
    const bool check = rel <= tol || it % 50 == 0;
    if (check) {
      A(x, q);
      r = b - q;
      rel = r.norm() / bnorm;
    }
    rep.iterations = it;
    rep.residual_history.push_back(rel);
    if (rel <= tol) {
      rep.converged = true;
      rep.relative_residual = rel;
      return finish();
    }
    M(r, z);
    const double rz_new = r.dot(z);
    if (!(rz_new > 0)) throw KrylovError("pcg: preconditioner is not positive definite (r'Mr <= 0)");
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  A(x, q);
  rep.relative_residual = (b - q).norm() / bnorm;
  return finish();
}

Eigen::VectorXd direct_solve(const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
  if (A.rows() != A.cols() || A.rows() != b.size()) throw std::invalid_argument("direct_solve: size mismatch");
  Eigen::LLT<Eigen::MatrixXd> llt(A);
  if (llt.info() != Eigen::Success) throw KrylovError("direct_solve: matrix is not positive definite");
  return llt.solve(b);
}

}  // namespace dpgmg
