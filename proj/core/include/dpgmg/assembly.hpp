#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "dpgmg/dofmap.hpp"
#include "dpgmg/formulation.hpp"
#include "dpgmg/mesh.hpp"

namespace dpgmg {

using SparseMatrix = Eigen::SparseMatrix<double>;

class AssemblyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Element matrices of the practical DPG method on one cell. Trial columns
/// follow LocalLayout (fields, then traces).
struct LocalSystem {
  Eigen::MatrixXd G;  // test Gram matrix
  Eigen::MatrixXd B;  // test x trial
  Eigen::VectorXd l;  // test load
  Eigen::MatrixXd K;  // B^T G^{-1} B
  Eigen::VectorXd F;  // B^T G^{-1} l
  double lnorm2 = 0.0;  // l^T G^{-1} l
};

/// Test order is k + 1 + delta_k on every component.
LocalSystem local_system(const Mesh& mesh, CellId cell, const ProblemSpec& problem, int delta_k);

/// ||l - Bx||_{G^{-1}} for a local trial vector x.
double local_energy_error(const LocalSystem& ls, const Eigen::VectorXd& x);

/// Result of eliminating the field unknowns of one cell.
struct Condensed {
  Eigen::MatrixXd S;  // trace Schur complement
  Eigen::VectorXd g;
  Eigen::MatrixXd E;  // K11^{-1} K12 (fields from traces: u = e - E f)
  Eigen::VectorXd e;  // K11^{-1} F1
};

/// Static condensation with the field block given by `field_idx`. The
/// returned E and e have one row per field index.
Condensed condense(const Eigen::MatrixXd& K, const Eigen::VectorXd& F, const std::vector<int>& field_idx,
                   const std::vector<int>& trace_idx);
Eigen::VectorXd recover_fields(const Condensed& c, const Eigen::VectorXd& traces);

/// Field coefficients of every active cell plus trace slot values.
struct Solution {
  std::shared_ptr<const Mesh> mesh;
  std::shared_ptr<const DofMap> dofmap;
  std::vector<Eigen::VectorXd> fields;  // per position in mesh->active_cells()
  Eigen::VectorXd slots;

  const Eigen::VectorXd& cell_fields(CellId c) const;
  double eval(int field, CellId cell, const RefPoint& ref) const;
  double eval(int field, const Point& x) const;
  /// Background-flow adapter for linearization.
  FieldEvaluator evaluator() const;
};

struct EnergyReport {
  std::vector<double> per_cell;  // eta_e, ordered as mesh.active_cells()
  double error = 0.0;  // sqrt(sum eta_e^2)
  double solution_norm = 0.0;  // sqrt(sum ||Bx||^2_{G^{-1}})
  double relative() const { return solution_norm > 0 ? error / solution_norm : error; }
};

/// Condensed global system of one mesh. Owns the mesh copy and dof map.
class Discretization {
 public:
  Discretization(const Mesh& mesh, const ProblemSpec& problem, int delta_k);

  const Mesh& mesh() const { return *mesh_; }
  std::shared_ptr<const Mesh> mesh_ptr() const { return mesh_; }
  const DofMap& dofmap() const { return *dofmap_; }
  std::shared_ptr<const DofMap> dofmap_ptr() const { return dofmap_; }
  const ProblemSpec& problem() const { return problem_; }
  int delta_k() const { return delta_k_; }
  int order() const { return dofmap_->layout().order; }

  const SparseMatrix& matrix() const { return A_; }
  const Eigen::VectorXd& rhs() const { return b_; }
  int size() const { return dofmap_->num_free(); }

  /// Field coefficients u = e - E f of a cell from its local traces
  /// (pinned values included).
  Eigen::VectorXd recover(CellId c, const Eigen::VectorXd& local_traces) const;
  /// E = K11^{-1} K12 without pins: fields of homogeneous data are -E f.
  const Eigen::MatrixXd& recovery_matrix(CellId c) const;

  /// Full solution from free trace values.
  Solution solution(const Eigen::VectorXd& free) const;
  EnergyReport energy(const Solution& s) const;
  /// Number of distinct element kernels computed (cache diagnostics).
  int kernels_computed() const { return kernels_computed_; }

 private:
  struct Kernel;
  std::shared_ptr<const Kernel> kernel(CellId c, bool& cached);

  std::shared_ptr<const Mesh> mesh_;
  std::shared_ptr<const DofMap> dofmap_;
  ProblemSpec problem_;
  int delta_k_;
  SparseMatrix A_;
  Eigen::VectorXd b_;
  struct CellData {
    std::shared_ptr<const Kernel> kernel;  // kept only when shared through the cache
    std::shared_ptr<const Eigen::MatrixXd> E;  // unpinned recovery matrix
    std::shared_ptr<const Eigen::MatrixXd> E_pinned;  // set for cells holding a pin
    Eigen::VectorXd e;
  };
  std::vector<CellData> cells_;
  std::map<std::array<double, 2>, std::shared_ptr<const Kernel>> cache_;
  int kernels_computed_ = 0;
};

/// Global system without condensation (fields of every cell followed by the
/// free trace unknowns); test oracle for small meshes.
struct UncondensedSystem {
  SparseMatrix A;
  Eigen::VectorXd b;
  int num_field = 0;
  std::vector<int> field_offset;  // per active cell position
  std::vector<std::vector<int>> field_local;  // local field index of each unknown
};
UncondensedSystem assemble_uncondensed(const Mesh& mesh, const ProblemSpec& problem, int delta_k);

/// L2 error of each field component against the problem's exact solution.
/// With `remove_mean` the mean of the difference is removed for the given
/// field (pressure determined up to a constant).
std::vector<double> field_l2_errors(const Solution& s, const ProblemSpec& problem, int remove_mean_field = -1);

/// Matrix Market coordinate dump.
void write_matrix_market(const SparseMatrix& A, const std::string& path);

}  // namespace dpgmg
