#include "dpgmg/basis.hpp"

#include <cmath>
#include <numbers>

#include "dpgmg/mesh.hpp"

namespace dpgmg {

namespace {

// Legendre P_n and its derivative at x.
void legendre(int n, double x, double& p, double& dp) {
  double p0 = 1.0, p1 = x;
  if (n == 0) {
    p = 1.0;
    dp = 0.0;
    return;
  }
  for (int k = 2; k <= n; ++k) {
    const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
    p0 = p1;
    p1 = pk;
  }
  p = p1;
  dp = n * (x * p1 - p0) / (x * x - 1.0);
}

}  // namespace

std::vector<double> lobatto_nodes(int order) {
  if (order < 0) throw BasisError("order must be non-negative");
  if (order == 0) return {0.0};
  const int n = order;
  std::vector<double> x(n + 1);
  x[0] = -1.0;
  x[n] = 1.0;
  for (int i = 1; i < n; ++i) {
    double xi = -std::cos(std::numbers::pi * i / n);
    // Newton on P_n'(x) using the Legendre ODE for P_n''
    for (int it = 0; it < 100; ++it) {
      double p, dp;
      legendre(n, xi, p, dp);
      const double ddp = (2.0 * xi * dp - n * (n + 1.0) * p) / (1.0 - xi * xi);
      const double dx = dp / ddp;
      xi -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    x[i] = xi;
  }
  // symmetrize
  for (int i = 0; i <= n / 2; ++i) {
    const double a = 0.5 * (x[n - i] - x[i]);
    x[i] = -a;
    x[n - i] = a;
  }
  if (n % 2 == 0) x[n / 2] = 0.0;
  return x;
}

QuadratureRule gauss_legendre(int npoints) {
  if (npoints < 1) throw BasisError("quadrature needs at least one point");
  const int n = npoints;
  QuadratureRule q;
  q.points.resize(n);
  q.weights.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double p = 0.0, dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      legendre(n, x, p, dp);
      const double dx = p / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    legendre(n, x, p, dp);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    q.points[i] = -x;
    q.points[n - 1 - i] = x;
    q.weights[i] = w;
    q.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) q.points[n / 2] = 0.0;
  return q;
}

LagrangeLine::LagrangeLine(int order) : order_(order), nodes_(lobatto_nodes(order)) {
  denom_.assign(nodes_.size(), 1.0);
  for (std::size_t j = 0; j < nodes_.size(); ++j)
    for (std::size_t m = 0; m < nodes_.size(); ++m)
      if (m != j) denom_[j] *= nodes_[j] - nodes_[m];
}

void LagrangeLine::eval(double x, double* values, double* derivs) const {
  const int n = size();
  for (int j = 0; j < n; ++j) {
    double v = 1.0;
    for (int m = 0; m < n; ++m)
      if (m != j) v *= x - nodes_[m];
    values[j] = v / denom_[j];
    if (derivs) {
      double d = 0.0;
      for (int m = 0; m < n; ++m) {
        if (m == j) continue;
        double prod = 1.0;
        for (int l = 0; l < n; ++l)
          if (l != j && l != m) prod *= x - nodes_[l];
        d += prod;
      }
      derivs[j] = d / denom_[j];
    }
  }
}

Eigen::MatrixXd LagrangeLine::values_at(std::span<const double> pts) const {
  Eigen::MatrixXd t(pts.size(), size());
  std::vector<double> v(size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    eval(pts[i], v.data());
    for (int j = 0; j < size(); ++j) t(i, j) = v[j];
  }
  return t;
}

Eigen::MatrixXd LagrangeLine::derivs_at(std::span<const double> pts) const {
  Eigen::MatrixXd t(pts.size(), size());
  std::vector<double> v(size()), d(size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    eval(pts[i], v.data(), d.data());
    for (int j = 0; j < size(); ++j) t(i, j) = d[j];
  }
  return t;
}

Basis::Basis(int order, CellShape shape, SpaceKind kind)
    : shape_(shape), kind_(kind), line_(order >= 0 ? order : throw BasisError("negative order")) {
  const bool trace = kind == SpaceKind::NormalTrace || kind == SpaceKind::H1Trace;
  if (trace && shape == CellShape::Quad)
    throw BasisError("trace spaces live on faces (point or interval)");
  if (!trace && shape == CellShape::Point)
    throw BasisError("volume spaces need an interval or quad cell");
  if (kind == SpaceKind::VectorL2) components_ = dim();
}

int Basis::dim() const {
  switch (shape_) {
    case CellShape::Point: return 0;
    case CellShape::Interval: return 1;
    case CellShape::Quad: return 2;
  }
  return 0;
}

int Basis::scalar_size() const {
  int n = 1;
  for (int d = 0; d < dim(); ++d) n *= line_.size();
  return n;
}

std::vector<RefPoint> Basis::nodes() const {
  std::vector<RefPoint> out;
  const auto& x = line_.nodes();
  if (dim() == 0) return {{0.0, 0.0}};
  if (dim() == 1) {
    for (double xi : x) out.push_back({xi, 0.0});
    return out;
  }
  for (double yj : x)
    for (double xi : x) out.push_back({xi, yj});
  return out;
}

Eigen::VectorXd Basis::values(const RefPoint& p) const {
  const int n = line_.size();
  if (dim() == 0) return Eigen::VectorXd::Ones(1);
  std::vector<double> vx(n), vy(n);
  line_.eval(p[0], vx.data());
  if (dim() == 1) return Eigen::Map<Eigen::VectorXd>(vx.data(), n);
  line_.eval(p[1], vy.data());
  Eigen::VectorXd out(n * n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) out(i + n * j) = vx[i] * vy[j];
  return out;
}

Eigen::MatrixXd Basis::gradients(const RefPoint& p) const {
  const int n = line_.size();
  if (dim() == 0) return Eigen::MatrixXd::Zero(1, 0);
  std::vector<double> vx(n), dx(n), vy(n), dy(n);
  line_.eval(p[0], vx.data(), dx.data());
  if (dim() == 1) return Eigen::Map<Eigen::MatrixXd>(dx.data(), n, 1);
  line_.eval(p[1], vy.data(), dy.data());
  Eigen::MatrixXd out(n * n, 2);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      out(i + n * j, 0) = dx[i] * vy[j];
      out(i + n * j, 1) = vx[i] * dy[j];
    }
  return out;
}

RefPoint RefinementBranch::to_ancestor(const RefPoint& x) const {
  RefPoint p = x;
  for (auto it = children.rbegin(); it != children.rend(); ++it) {
    const int bx = *it & 1;
    const int by = (*it >> 1) & 1;
    p[0] = 0.5 * (p[0] + (2 * bx - 1));
    if (dim == 2) p[1] = 0.5 * (p[1] + (2 * by - 1));
  }
  return p;
}

Eigen::MatrixXd reconcile(const Basis& coarse, const Basis& fine, const RefinementBranch& branch) {
  if (coarse.shape() != fine.shape()) throw BasisError("reconcile: shapes differ");
  if (fine.order() < coarse.order())
    throw BasisError("reconcile: fine space does not contain the coarse space");
  if (coarse.order() == 0 && fine.order() > 0 && coarse.kind() == SpaceKind::H1Trace)
    throw BasisError("reconcile: order-0 H1 trace is not nested");
  const auto nodes = fine.nodes();
  Eigen::MatrixXd m(coarse.scalar_size(), fine.scalar_size());
  for (std::size_t j = 0; j < nodes.size(); ++j) m.col(j) = coarse.values(branch.to_ancestor(nodes[j]));
  return m;
}

RefPoint face_point(int cell_dim, int face, double t) {
  const int axis = face_axis(cell_dim, face);
  const double s = face_side(cell_dim, face);
  if (cell_dim == 1) return {s, 0.0};
  return axis == 0 ? RefPoint{s, t} : RefPoint{t, s};
}

Eigen::MatrixXd face_restriction(const Basis& field, int face, const Basis& trace) {
  if (trace.dim() != field.dim() - 1) throw BasisError("trace basis does not match field cell");
  const auto tn = trace.nodes();
  Eigen::MatrixXd m(tn.size(), field.scalar_size());
  for (std::size_t i = 0; i < tn.size(); ++i)
    m.row(i) = field.values(face_point(field.dim(), face, tn[i][0])).transpose();
  return m;
}

Eigen::MatrixXd trace_gamma(const Basis& field, int face, const Basis& trace,
                            const std::array<double, 2>& normal) {
  if (trace.order() < field.order())
    throw BasisError("trace_gamma: trace order below field order");
  const Eigen::MatrixXd e = face_restriction(field, face, trace);
  if (trace.kind() == SpaceKind::H1Trace) {
    if (field.components() != 1) throw BasisError("H1 trace of a vector field");
    return e;
  }
  if (trace.kind() != SpaceKind::NormalTrace) throw BasisError("trace_gamma needs a trace basis");
  if (field.kind() != SpaceKind::VectorL2) throw BasisError("normal trace needs a vector field");
  const int ns = field.scalar_size();
  Eigen::MatrixXd m(e.rows(), ns * field.components());
  for (int c = 0; c < field.components(); ++c) m.middleCols(c * ns, ns) = normal[c] * e;
  return m;
}

}  // namespace dpgmg
