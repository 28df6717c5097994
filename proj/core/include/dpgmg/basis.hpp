#pragma once

#include <array>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace dpgmg {

class BasisError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct QuadratureRule {
  std::vector<double> points;
  std::vector<double> weights;
};

/// Gauss-Lobatto-Legendre nodes on [-1,1]; order 0 gives the midpoint.
std::vector<double> lobatto_nodes(int order);
/// n-point Gauss-Legendre rule on [-1,1].
QuadratureRule gauss_legendre(int npoints);

/// Lagrange polynomials through the Lobatto nodes of a given order.
class LagrangeLine {
 public:
  explicit LagrangeLine(int order);

  int order() const { return order_; }
  int size() const { return order_ + 1; }
  const std::vector<double>& nodes() const { return nodes_; }

  void eval(double x, double* values, double* derivs = nullptr) const;
  /// Tables with one row per point.
  Eigen::MatrixXd values_at(std::span<const double> pts) const;
  Eigen::MatrixXd derivs_at(std::span<const double> pts) const;

 private:
  int order_;
  std::vector<double> nodes_;
  std::vector<double> denom_;  // prod_{m != j} (x_j - x_m)
};

enum class CellShape { Point, Interval, Quad };
enum class SpaceKind { ScalarL2, ScalarH1, VectorL2, NormalTrace, H1Trace };

using RefPoint = std::array<double, 2>;

/// Nodal tensor-product basis on the reference cell [-1,1]^dim. Vector
/// spaces are stored component-wise: function index = comp*scalar_size + i.
class Basis {
 public:
  Basis(int order, CellShape shape, SpaceKind kind);

  int order() const { return line_.order(); }
  CellShape shape() const { return shape_; }
  SpaceKind kind() const { return kind_; }
  int dim() const;
  int components() const { return components_; }
  int scalar_size() const;
  int size() const { return scalar_size() * components_; }
  const LagrangeLine& line() const { return line_; }

  /// Scalar nodes, tensor index i + (order+1)*j.
  std::vector<RefPoint> nodes() const;
  /// Scalar function values at a reference point.
  Eigen::VectorXd values(const RefPoint& x) const;
  /// Scalar gradients, one row per function.
  Eigen::MatrixXd gradients(const RefPoint& x) const;

 private:
  CellShape shape_;
  SpaceKind kind_;
  int components_ = 1;
  LagrangeLine line_;
};

/// Chain of child indices from an ancestor cell (or face) down to a
/// descendant. Child c of a quad has bits (c & 1, c >> 1) along (x, y).
struct RefinementBranch {
  int dim = 1;
  std::vector<int> children;

  /// Maps a point of the descendant's reference cell into the ancestor's.
  RefPoint to_ancestor(const RefPoint& x) const;
};

/// Row i: coarse scalar function i at the fine nodes (mapped through the
/// branch), i.e. its coefficients in the fine nodal basis.
Eigen::MatrixXd reconcile(const Basis& coarse, const Basis& fine, const RefinementBranch& branch);

/// Reference point of face coordinate t (ignored in 1D) on `face`.
RefPoint face_point(int cell_dim, int face, double t);

/// Values of the scalar field functions at the nodes of `trace` placed on
/// `face` of the field's cell.
Eigen::MatrixXd face_restriction(const Basis& field, int face, const Basis& trace);

/// Field coefficients to trace coefficients on `face`. H1 traces take point
/// values of a scalar field; normal traces take (vector field).normal.
Eigen::MatrixXd trace_gamma(const Basis& field, int face, const Basis& trace,
                            const std::array<double, 2>& normal);

}  // namespace dpgmg
