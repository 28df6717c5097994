#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dpgmg/basis.hpp"

using namespace dpgmg;

TEST(Basis, LobattoNodes) {
  EXPECT_EQ(lobatto_nodes(1), (std::vector<double>{-1.0, 1.0}));
  auto n2 = lobatto_nodes(2);
  ASSERT_EQ(n2.size(), 3u);
  EXPECT_NEAR(n2[1], 0.0, 1e-15);
  auto n3 = lobatto_nodes(3);
  EXPECT_NEAR(n3[1], -1.0 / std::sqrt(5.0), 1e-14);
  EXPECT_NEAR(n3[2], 1.0 / std::sqrt(5.0), 1e-14);
  auto n4 = lobatto_nodes(4);
  EXPECT_NEAR(n4[1], -std::sqrt(3.0 / 7.0), 1e-14);
  EXPECT_EQ(lobatto_nodes(0).size(), 1u);
}

TEST(Basis, GaussLegendreExactness) {
  for (int n = 1; n <= 12; ++n) {
    auto q = gauss_legendre(n);
    for (int m = 0; m <= 2 * n - 1; ++m) {
      double s = 0.0;
      for (std::size_t i = 0; i < q.points.size(); ++i) s += q.weights[i] * std::pow(q.points[i], m);
      const double exact = m % 2 ? 0.0 : 2.0 / (m + 1);
      EXPECT_NEAR(s, exact, 1e-13) << "n=" << n << " m=" << m;
    }
  }
}

TEST(Basis, LagrangeNodalAndDerivatives) {
  for (int k = 1; k <= 8; ++k) {
    LagrangeLine line(k);
    auto V = line.values_at(line.nodes());
    EXPECT_TRUE(V.isApprox(Eigen::MatrixXd::Identity(k + 1, k + 1), 1e-12)) << k;
    std::vector<double> pts{-0.77, -0.1, 0.33, 0.9};
    auto D = line.derivs_at(pts);
    auto P = line.values_at(pts);
    const double h = 1e-6;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      std::vector<double> lo{pts[i] - h}, hi{pts[i] + h};
      Eigen::RowVectorXd fd = (line.values_at(hi) - line.values_at(lo)) / (2 * h);
      EXPECT_LT((fd - D.row(i)).norm(), 1e-7);
      EXPECT_NEAR(P.row(i).sum(), 1.0, 1e-12);
      EXPECT_NEAR(D.row(i).sum(), 0.0, 1e-10);
    }
  }
}

TEST(Basis, Cardinality) {
  EXPECT_EQ(Basis(3, CellShape::Quad, SpaceKind::ScalarL2).size(), 16);
  EXPECT_EQ(Basis(2, CellShape::Quad, SpaceKind::VectorL2).size(), 18);
  EXPECT_EQ(Basis(3, CellShape::Interval, SpaceKind::H1Trace).size(), 4);
  EXPECT_EQ(Basis(3, CellShape::Point, SpaceKind::H1Trace).size(), 1);
  Basis c(0, CellShape::Quad, SpaceKind::ScalarL2);
  ASSERT_EQ(c.size(), 1);
  EXPECT_NEAR(c.values({0.3, -0.4})(0), 1.0, 1e-15);
}

TEST(Basis, HatFunctions) {
  Basis b(1, CellShape::Interval, SpaceKind::ScalarH1);
  EXPECT_NEAR(b.values({-1.0, 0.0})(0), 1.0, 1e-15);
  EXPECT_NEAR(b.values({-1.0, 0.0})(1), 0.0, 1e-15);
  EXPECT_NEAR(b.values({1.0, 0.0})(1), 1.0, 1e-15);
}

TEST(Basis, QuadNodalProperty) {
  Basis b(3, CellShape::Quad, SpaceKind::ScalarH1);
  auto nodes = b.nodes();
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    auto v = b.values(nodes[i]);
    for (int j = 0; j < b.scalar_size(); ++j) EXPECT_NEAR(v(j), i == std::size_t(j) ? 1.0 : 0.0, 1e-12);
  }
  // gradients reproduce d/dx (x^2 y)
  RefPoint p{0.2, -0.6};
  auto g = b.gradients(p);
  double gx = 0.0, gy = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const double f = nodes[i][0] * nodes[i][0] * nodes[i][1];
    gx += f * g(i, 0);
    gy += f * g(i, 1);
  }
  EXPECT_NEAR(gx, 2 * p[0] * p[1], 1e-12);
  EXPECT_NEAR(gy, p[0] * p[0], 1e-12);
}

TEST(Basis, ReconcileIdentity) {
  Basis b(3, CellShape::Quad, SpaceKind::ScalarL2);
  auto M = reconcile(b, b, RefinementBranch{2, {}});
  EXPECT_TRUE(M.isApprox(Eigen::MatrixXd::Identity(16, 16), 1e-12));
}

TEST(Basis, ReconcileLinearLeftChild) {
  Basis b(1, CellShape::Interval, SpaceKind::ScalarH1);
  auto M = reconcile(b, b, RefinementBranch{1, {0}});
  EXPECT_NEAR(M(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(M(0, 1), 0.5, 1e-15);
  EXPECT_NEAR(M(1, 0), 0.0, 1e-15);
  EXPECT_NEAR(M(1, 1), 0.5, 1e-15);
}

TEST(Basis, ReconcileReproducesCoarsePolynomials) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  struct Case {
    CellShape shape;
    int kc, kf;
    RefinementBranch br;
  };
  std::vector<Case> cases{{CellShape::Interval, 2, 4, {1, {}}},
                          {CellShape::Interval, 2, 2, {1, {1, 0}}},
                          {CellShape::Quad, 2, 3, {2, {}}},
                          {CellShape::Quad, 2, 2, {2, {1}}},
                          {CellShape::Quad, 1, 4, {2, {3, 2}}}};
  for (const auto& cs : cases) {
    Basis coarse(cs.kc, cs.shape, SpaceKind::ScalarL2);
    Basis fine(cs.kf, cs.shape, SpaceKind::ScalarL2);
    auto M = reconcile(coarse, fine, cs.br);
    for (int t = 0; t < 10; ++t) {
      RefPoint x{u(rng), cs.shape == CellShape::Quad ? u(rng) : 0.0};
      Eigen::VectorXd fv = fine.values(x);
      Eigen::VectorXd cv = coarse.values(cs.br.to_ancestor(x));
      EXPECT_LT((M * fv - cv).norm(), 1e-12);
    }
  }
}

TEST(Basis, BranchMapping) {
  RefinementBranch br{2, {3}};
  auto p = br.to_ancestor({-1.0, -1.0});
  EXPECT_NEAR(p[0], 0.0, 1e-15);
  EXPECT_NEAR(p[1], 0.0, 1e-15);
  RefinementBranch br2{1, {0, 1}};
  EXPECT_NEAR(br2.to_ancestor({1.0, 0.0})[0], 0.0, 1e-15);
  EXPECT_NEAR(br2.to_ancestor({-1.0, 0.0})[0], -0.5, 1e-15);
}

TEST(Basis, TraceOfConstant) {
  Basis field(2, CellShape::Quad, SpaceKind::ScalarL2);
  Basis trace(3, CellShape::Interval, SpaceKind::H1Trace);
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(field.size());
  for (int f = 0; f < 4; ++f) {
    auto G = trace_gamma(field, f, trace, {0.0, 1.0});
    EXPECT_LT((G * ones - Eigen::VectorXd::Ones(trace.size())).norm(), 1e-12);
  }
}

TEST(Basis, NormalTraceOrthogonalVector) {
  Basis field(2, CellShape::Quad, SpaceKind::VectorL2);
  Basis trace(2, CellShape::Interval, SpaceKind::NormalTrace);
  Eigen::VectorXd sigma = Eigen::VectorXd::Zero(field.size());
  sigma.head(field.scalar_size()).setOnes();  // sigma = (1, 0)
  auto G = trace_gamma(field, 0, trace, {0.0, -1.0});
  EXPECT_LT((G * sigma).norm(), 1e-14);
  auto G1 = trace_gamma(field, 1, trace, {1.0, 0.0});
  EXPECT_LT((G1 * sigma - Eigen::VectorXd::Ones(trace.size())).norm(), 1e-12);
}

TEST(Basis, TraceOfQuadraticOnBottomFace) {
  Basis field(2, CellShape::Quad, SpaceKind::ScalarL2);
  Basis trace(2, CellShape::Interval, SpaceKind::H1Trace);
  Eigen::VectorXd coef(field.size());
  auto nodes = field.nodes();
  for (std::size_t i = 0; i < nodes.size(); ++i) coef(i) = nodes[i][0] * nodes[i][0];
  auto G = trace_gamma(field, 0, trace, {0.0, -1.0});
  Eigen::VectorXd t = G * coef;
  auto tn = trace.nodes();
  for (std::size_t i = 0; i < tn.size(); ++i) {
    const RefPoint p = face_point(2, 0, tn[i][0]);
    EXPECT_NEAR(p[1], -1.0, 1e-15);
    EXPECT_NEAR(t(i), p[0] * p[0], 1e-12);
  }
}

TEST(Basis, InvalidArguments) {
  EXPECT_THROW(LagrangeLine(-1), BasisError);
  EXPECT_THROW(gauss_legendre(0), BasisError);
}
