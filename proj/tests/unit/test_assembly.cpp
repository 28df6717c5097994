#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>

#include "dpgmg/assembly.hpp"

using namespace dpgmg;

namespace {

Eigen::MatrixXd random_spd(int n, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> d(0.0, 1.0);
  Eigen::MatrixXd R(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) R(i, j) = d(rng);
  return R.transpose() * R + Eigen::MatrixXd::Identity(n, n);
}

Eigen::VectorXd sorted_eigenvalues(const Eigen::MatrixXd& A) {
  Eigen::VectorXd e = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(A).eigenvalues();
  std::sort(e.data(), e.data() + e.size());
  return e;
}

}  // namespace

TEST(LocalSystem, Dimensions1D) {
  ProblemSpec p = poisson_problem(1);
  Mesh m = Mesh::uniform(1, {1, 1}, p.domain, 0);
  LocalSystem ls = local_system(m, 0, p, 1);
  EXPECT_EQ(ls.B.rows(), 6);
  EXPECT_EQ(ls.B.cols(), 6);
  EXPECT_EQ(ls.G.rows(), 6);
}

TEST(LocalSystem, MatrixProperties) {
  for (const ProblemSpec& p : {poisson_problem(2), stokes_problem()}) {
    Mesh m = Mesh::uniform(2, {2, 3}, p.domain, 2);
    LocalSystem ls = local_system(m, 1, p, 2);
    EXPECT_LT((ls.G - ls.G.transpose()).norm(), 1e-12 * ls.G.norm());
    EXPECT_GT(sorted_eigenvalues(ls.G)(0), 0.0);
    EXPECT_LT((ls.K - ls.K.transpose()).norm(), 1e-12 * ls.K.norm());
    EXPECT_GT(sorted_eigenvalues(ls.K)(0), -1e-10 * ls.K.norm());
    Eigen::LLT<Eigen::MatrixXd> G(ls.G);
    EXPECT_LT((ls.K - ls.B.transpose() * G.solve(ls.B)).norm(), 1e-10 * ls.K.norm());
    EXPECT_LT((ls.F - ls.B.transpose() * G.solve(ls.l)).norm(), 1e-10 * (1 + ls.F.norm()));
    // x^T K y = (G^{-1} B x, B y)_G
    Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(ls.K.cols(), -1, 1);
    Eigen::VectorXd y = Eigen::VectorXd::LinSpaced(ls.K.cols(), 2, 0).array().sin();
    EXPECT_NEAR(x.dot(ls.K * y), (G.solve(ls.B * x)).dot(ls.B * y), 1e-10 * ls.K.norm());
  }
}

TEST(LocalSystem, ZeroLoad) {
  ProblemSpec p = stokes_problem();
  Mesh m = Mesh::uniform(2, {2, 2}, p.domain, 1);
  LocalSystem ls = local_system(m, 0, p, 2);
  EXPECT_EQ(ls.F.norm(), 0.0);
  EXPECT_EQ(local_energy_error(ls, Eigen::VectorXd::Zero(ls.B.cols())), 0.0);
}

TEST(LocalSystem, FieldColumnsMatchQuadrature1D) {
  // column of field u_j against test tau_i is int phi_j tau_i'; sigma_j
  // against v_i is int phi_j v_i', against tau_i int phi_j tau_i
  ProblemSpec p = poisson_problem(1);
  const int k = 2, dk = 1;
  Mesh m = Mesh::uniform(1, {3, 1}, Box{{0.2, 0}, {0.9, 1}}, k);
  const CellId c = 1;
  LocalSystem ls = local_system(m, c, p, dk);
  const double h = m.cell(c).box.width(0);
  LagrangeLine trial(k), test(k + 1 + dk);
  const int nf = trial.size(), nt = test.size();
  auto q = gauss_legendre(12);
  Eigen::MatrixXd Bu = Eigen::MatrixXd::Zero(2 * nt, 2 * nf);
  std::vector<double> phi(nf), psi(nt), dpsi(nt);
  for (std::size_t g = 0; g < q.points.size(); ++g) {
    trial.eval(q.points[g], phi.data());
    test.eval(q.points[g], psi.data(), dpsi.data());
    const double w = q.weights[g] * h / 2;
    for (int i = 0; i < nt; ++i)
      for (int j = 0; j < nf; ++j) {
        const double dtest = dpsi[i] * 2 / h;
        Bu(nt + i, j) += w * phi[j] * dtest;              // (u, tau')
        Bu(i, nf + j) += w * phi[j] * dtest;              // (sigma, v')
        Bu(nt + i, nf + j) += w * phi[j] * psi[i];        // (sigma, tau)
      }
  }
  EXPECT_LT((ls.B.leftCols(2 * nf) - Bu).norm(), 1e-12 * Bu.norm());
}

TEST(Condense, TwoByTwo) {
  Eigen::MatrixXd K(2, 2);
  K << 2, 1, 1, 2;
  Eigen::VectorXd F(2);
  F << 0, 1;
  Condensed c = condense(K, F, {0}, {1});
  EXPECT_NEAR(c.S(0, 0), 1.5, 1e-15);
  EXPECT_NEAR(c.g(0), 1.0, 1e-15);
}

TEST(Condense, DecoupledBlocks) {
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(3, 3);
  K(0, 0) = 4;
  K(1, 1) = 3;
  K(2, 2) = 5;
  K(1, 2) = K(2, 1) = 1;
  Eigen::VectorXd F(3);
  F << 8, 1, 2;
  Condensed c = condense(K, F, {0}, {1, 2});
  EXPECT_TRUE(c.S.isApprox(K.bottomRightCorner(2, 2)));
  EXPECT_TRUE(c.g.isApprox(F.tail(2)));
  Eigen::VectorXd f(2);
  f << 7, -3;
  EXPECT_NEAR(recover_fields(c, f)(0), 2.0, 1e-15);
}

TEST(Condense, SchurIsMinimumEnergy) {
  Eigen::MatrixXd K = random_spd(8, 4);
  Eigen::VectorXd F = Eigen::VectorXd::Zero(8);
  std::vector<int> field{0, 3, 5}, trace{1, 2, 4, 6, 7};
  Condensed c = condense(K, F, field, trace);
  EXPECT_GT(sorted_eigenvalues(c.S)(0), 0.0);
  std::mt19937 rng(2);
  std::normal_distribution<double> d;
  Eigen::VectorXd xt(5);
  for (int i = 0; i < 5; ++i) xt(i) = d(rng);
  // brute force minimum over field completions: solve K11 xf = -K12 xt
  Eigen::MatrixXd K11(3, 3), K12(3, 5);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) K11(i, j) = K(field[i], field[j]);
    for (int j = 0; j < 5; ++j) K12(i, j) = K(field[i], trace[j]);
  }
  Eigen::VectorXd xf = -K11.ldlt().solve(K12 * xt);
  Eigen::VectorXd x(8);
  for (int i = 0; i < 3; ++i) x(field[i]) = xf(i);
  for (int i = 0; i < 5; ++i) x(trace[i]) = xt(i);
  EXPECT_NEAR(xt.dot(c.S * xt), x.dot(K * x), 1e-10 * x.dot(K * x));
  // perturbing the completion only raises the energy
  Eigen::VectorXd y = x;
  y(field[0]) += 0.1;
  EXPECT_GT(y.dot(K * y), x.dot(K * x));
  EXPECT_TRUE(recover_fields(c, xt).isApprox(xf, 1e-10));
  EXPECT_EQ(recover_fields(c, Eigen::VectorXd::Zero(5)).norm(), 0.0);
}

TEST(Condense, RecoversExactSolve) {
  Eigen::MatrixXd K = random_spd(7, 9);
  Eigen::VectorXd F = Eigen::VectorXd::LinSpaced(7, 1, 3);
  std::vector<int> field{0, 1, 2}, trace{3, 4, 5, 6};
  Eigen::VectorXd x = K.ldlt().solve(F);
  Condensed c = condense(K, F, field, trace);
  Eigen::VectorXd xt = c.S.ldlt().solve(c.g);
  EXPECT_LT((xt - x.tail(4)).norm(), 1e-10);
  EXPECT_LT((recover_fields(c, xt) - x.head(3)).norm(), 1e-10);
}

TEST(Discretization, SingleElementEqualsLocalSchur) {
  ProblemSpec p = poisson_problem(2);
  p.bcs.clear();
  Mesh m = Mesh::uniform(2, {1, 1}, p.domain, 1);
  Discretization d(m, p, 2);
  LocalSystem ls = local_system(m, 0, p, 2);
  const LocalLayout& L = d.dofmap().layout();
  std::vector<int> field, trace;
  for (int i = 0; i < L.num_field_dofs(); ++i) field.push_back(i);
  for (int i = L.num_field_dofs(); i < L.size(); ++i) trace.push_back(i);
  Condensed c = condense(ls.K, ls.F, field, trace);
  // local traces map to slots by a signed permutation plus vertex sharing;
  // compare through the cell map instead
  Eigen::MatrixXd Cmap = Eigen::MatrixXd::Zero(L.num_trace, d.size());
  for (int r = 0; r < L.num_trace; ++r)
    for (const auto& e : d.dofmap().row(0, r)) Cmap(r, d.dofmap().free_index(e.slot)) += e.weight;
  Eigen::MatrixXd S = Cmap.transpose() * c.S * Cmap;
  EXPECT_LT((Eigen::MatrixXd(d.matrix()) - S).norm(), 1e-10 * S.norm());
}

TEST(Discretization, TwoElements1D) {
  ProblemSpec p = poisson_problem(1);
  Mesh m = Mesh::uniform(1, {2, 1}, p.domain, 1);
  Discretization d(m, p, 1);
  EXPECT_EQ(d.size(), 2 * 3 - 2);
}

TEST(Discretization, MatrixSPD) {
  ProblemSpec p = poisson_problem(2);
  Mesh m = Mesh::uniform(2, {2, 2}, p.domain, 1);
  Discretization d(m, p, 2);
  Eigen::MatrixXd A(d.matrix());
  EXPECT_LT((A - A.transpose()).norm(), 1e-12 * A.norm());
  EXPECT_GT(sorted_eigenvalues(A)(0), 0.0);
}

TEST(Discretization, ExactQuadratic1D) {
  ProblemSpec p = poisson_problem(1);
  Mesh m = Mesh::uniform(1, {4, 1}, p.domain, 2);
  Discretization d(m, p, 1);
  Eigen::VectorXd x = Eigen::MatrixXd(d.matrix()).ldlt().solve(d.rhs());
  Solution s = d.solution(x);
  for (double e : field_l2_errors(s, p)) EXPECT_LT(e, 1e-11);
  EXPECT_LT(d.energy(s).error, 1e-10);
  EXPECT_NEAR(s.eval(0, Point{0.3, 0.0}), 0.5 * 0.3 * 0.7, 1e-12);
  EXPECT_NEAR(s.evaluator()(1, EvalPoint{{0.3, 0.0}, -1, {}}), 0.5 - 0.3, 1e-12);
}

TEST(Discretization, ErrorDecreasesUnderRefinement) {
  ProblemSpec p = stokes_problem();
  std::vector<double> err;
  for (int n : {2, 4}) {
    Mesh m = Mesh::uniform(2, {n, n}, p.domain, 1);
    Discretization d(m, p, 2);
    Eigen::SimplicialLDLT<SparseMatrix> solver(d.matrix());
    Solution s = d.solution(solver.solve(d.rhs()));
    err.push_back(field_l2_errors(s, p, 6)[0]);
  }
  EXPECT_LT(err[1], 0.5 * err[0]);
}

TEST(Discretization, KernelCache) {
  ProblemSpec p = poisson_problem(2);
  Mesh m = Mesh::uniform(2, {4, 4}, p.domain, 2);
  EXPECT_EQ(Discretization(m, p, 2).kernels_computed(), 1);
  EXPECT_EQ(Discretization(m.refine({0}), p, 2).kernels_computed(), 2);
  Mesh rect = Mesh::uniform(2, {4, 2}, p.domain, 2);
  EXPECT_EQ(Discretization(rect, p, 2).kernels_computed(), 1);
}

TEST(Discretization, MatrixMarket) {
  ProblemSpec p = poisson_problem(1);
  Discretization d(Mesh::uniform(1, {3, 1}, p.domain, 1), p, 1);
  const auto path = std::filesystem::temp_directory_path() / "dpgmg_unit_matrix.mtx";
  write_matrix_market(d.matrix(), path.string());
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header.rfind("%%MatrixMarket matrix coordinate real", 0), 0u);
  int rows = 0, cols = 0, nnz = 0;
  in >> rows >> cols >> nnz;
  EXPECT_EQ(rows, d.size());
  EXPECT_EQ(cols, d.size());
  EXPECT_GT(nnz, 0);
  std::filesystem::remove(path);
}
