#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/SparseCholesky>

#include "dpgmg/assembly.hpp"
#include "dpgmg/krylov.hpp"

namespace dpgmg {

class MultigridError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Provenance { DirectTrace, GammaTrace };

struct Prolongation {
  SparseMatrix P;  // fine free dofs x coarse free dofs
  std::vector<Provenance> provenance;  // per fine free dof
};

/// Recovery matrices E = K11^{-1} K12 of coarse cells; only needed when the
/// fine mesh has faces inside coarse cells.
using RecoveryLookup = std::function<const Eigen::MatrixXd&(CellId)>;

/// Interpolates the coarse condensed space into the fine one. Fine trace
/// unknowns on coarse faces take the coarse trace; those strictly inside a
/// coarse cell take the trace of the coarse fields recovered from the coarse
/// traces. The coarse mesh must be a coarsening of the fine one.
Prolongation build_prolongation(const DofMap& coarse, const DofMap& fine, const FormDescriptor& form,
                                const RecoveryLookup& recovery);

/// Interpolates a full solution (fields and traces, loads included) onto a
/// nested finer or equal mesh. Dirichlet slots of the target take its data.
Solution transfer_solution(const Solution& from, const Discretization& to);

/// Free dofs seen by each active cell (overlap 0) or by the cell and its face
/// neighbors (overlap 1). Empty blocks are dropped.
std::vector<std::vector<int>> schwarz_blocks(const DofMap& dofmap, int overlap);

enum class SigmaMode { Aggressive, Conservative };

/// Aggressive: 1/(N+1) with N the largest number of distinct cells that are
/// face neighbors of (or belong to) one block domain. Conservative:
/// 1/(N_max+2) with N_max the largest number of blocks sharing a dof.
double sigma_weight(const DofMap& dofmap, int overlap, SigmaMode mode);

/// Additive Schwarz operator B r = sum_b R_b^T A_bb^{-1} R_b r, scaled by sigma.
class SchwarzSmoother {
 public:
  SchwarzSmoother(const SparseMatrix& A, std::vector<std::vector<int>> blocks, double sigma);

  int size() const { return n_; }
  double sigma() const { return sigma_; }
  const std::vector<std::vector<int>>& blocks() const { return blocks_; }
  /// z = sigma * B r. `order` permutes the block application order (tests).
  void apply(const Eigen::VectorXd& r, Eigen::VectorXd& z, const std::vector<int>* order = nullptr) const;

 private:
  int n_;
  double sigma_;
  std::vector<std::vector<int>> blocks_;
  std::vector<std::vector<double>> factors_;  // packed lower Cholesky factors, column-major
};

/// Largest eigenvalue of sigma*B*A by power iteration in the A inner product.
double smoothed_max_eigenvalue(const SparseMatrix& A, const SchwarzSmoother& s, int steps = 200);

struct LevelOptions {
  int overlap_h = 1;
  int overlap_p = 0;
  SigmaMode sigma_mode = SigmaMode::Aggressive;
};

/// Multiplicative V-cycle over a chain of levels with Galerkin coarse
/// operators. Level 0 is the coarsest and uses a sparse Cholesky solve.
class VCycle {
 public:
  struct Level {
    SparseMatrix A;
    std::unique_ptr<SchwarzSmoother> smoother;  // unused on level 0
    SparseMatrix P;  // from level l-1 into level l (empty on level 0)
    int overlap = 0;
    LevelTransition transition = LevelTransition::None;
  };

  /// `fine` is the finest discretization; `coarse_meshes` lists the coarser
  /// meshes coarsest first.
  VCycle(const Discretization& fine, const std::vector<Mesh>& coarse_meshes, const LevelOptions& opt);
  VCycle(const Discretization& fine, const MeshHierarchy& hierarchy, const LevelOptions& opt);

  std::size_t num_levels() const { return levels_.size(); }
  const Level& level(std::size_t l) const { return *levels_[l]; }
  void apply(const Eigen::VectorXd& r, Eigen::VectorXd& z) const;
  LinearOperator as_operator() const;

  std::string debug_json() const;

 private:
  void build(const Discretization& fine, const std::vector<Mesh>& coarse_meshes, const LevelOptions& opt);
  void apply_level(std::size_t l, const Eigen::VectorXd& r, Eigen::VectorXd& z) const;

  std::vector<std::unique_ptr<Level>> levels_;
  std::vector<std::vector<Provenance>> provenance_;
  std::unique_ptr<Eigen::SimplicialLLT<SparseMatrix>> coarse_;
};

}  // namespace dpgmg
