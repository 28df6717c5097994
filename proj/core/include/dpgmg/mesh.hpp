#pragma once

#include <array>
#include <cstdint>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace dpgmg {

/// Physical point. One-dimensional meshes only use `x`.
struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Axis-aligned box; `lo[1]`/`hi[1]` are unused in 1D.
struct Box {
  std::array<double, 2> lo{0.0, 0.0};
  std::array<double, 2> hi{1.0, 1.0};

  double width(int axis) const { return hi[axis] - lo[axis]; }
  double measure(int dim) const;
  Point center() const { return {0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])}; }
  bool contains(const Point& p, int dim, double tol = 1e-12) const;
};

using CellId = int;

struct Cell {
  CellId id = -1;
  CellId parent = -1;
  std::vector<CellId> children;  // lexicographic: child = cx + 2*cy
  int level = 0;
  int order = 0;
  std::array<std::int64_t, 2> index{0, 0};  // lattice position at `level`
  Box box;
};

class MeshError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Faces are numbered 0:-x,1:+x in 1D and 0:-y,1:+x,2:+y,3:-x in 2D.
int face_count(int dim);
int face_axis(int dim, int face);
int face_side(int dim, int face);  // -1 or +1 (outward direction along the axis)

/// Hierarchical tensor-product mesh. Every mesh derived from the same root
/// (by refinement or hierarchy construction) shares one cell-id space, so ids
/// can be compared across meshes.
class Mesh {
 public:
  /// Uniform root grid of `counts` cells over `domain`, all with `order`.
  static Mesh uniform(int dim, std::array<int, 2> counts, const Box& domain, int order);

  int dim() const { return dim_; }
  const Box& domain() const { return domain_; }
  std::array<int, 2> root_counts() const { return root_counts_; }

  const Cell& cell(CellId id) const;
  std::size_t tree_size() const { return cells_.size(); }
  bool is_active(CellId id) const { return contains_id(id) && active_[id]; }
  /// True for strict ancestors of active cells.
  bool is_refined(CellId id) const { return contains_id(id) && refined_[id]; }
  bool contains_id(CellId id) const { return id >= 0 && id < static_cast<CellId>(cells_.size()); }

  /// Active cell ids in increasing order.
  const std::vector<CellId>& active_cells() const { return active_list_; }
  std::size_t num_active() const { return active_list_.size(); }
  const std::vector<CellId>& root_cells() const { return roots_; }

  int max_active_level() const;
  int min_active_order() const;
  int max_active_order() const;
  bool uniform_order() const { return min_active_order() == max_active_order(); }

  /// Refines the listed active cells isotropically, then refines further
  /// cells until the mesh is 1-irregular across faces. Children that already
  /// exist in the tree are reused so ids stay stable.
  Mesh refine(const std::set<CellId>& ids) const;
  /// Refine every active cell `times` times.
  Mesh refine_uniform(int times = 1) const;
  /// Same tree with only the given cells refined (no irregularity closure).
  Mesh refine_exact(const std::set<CellId>& ids) const;

  Mesh with_order(int order) const;
  /// Copy with the order of each listed cell replaced.
  Mesh with_orders(std::span<const CellId> ids, std::span<const int> orders) const;
  /// Active set reset to the root cells.
  Mesh roots_only(int order) const;

  /// Active cells across `face` of active cell `id`: empty on the boundary,
  /// one cell for a same-level or coarser neighbor, several finer cells
  /// otherwise.
  std::vector<CellId> neighbors_across(CellId id, int face) const;
  bool on_boundary(CellId id, int face) const;
  /// Active ancestor-or-self of `id` in this mesh (id may come from a finer
  /// mesh of the same tree). Returns -1 if `id` lies above the active set.
  CellId active_ancestor(CellId id) const;
  /// Active cell whose closed box contains `p`; lowest id wins on ties.
  CellId locate(const Point& p) const;

  /// Checks structural invariants; throws MeshError on violation.
  void validate() const;
  bool is_one_irregular() const;

  std::string to_json() const;
  static Mesh from_json(const std::string& text);

 private:
  Mesh() = default;
  static std::uint64_t key(int level, std::int64_t i, std::int64_t j);
  void rebuild_active_list();
  void split(CellId id);
  CellId find(int level, std::int64_t i, std::int64_t j) const;
  void collect_face_descendants(CellId id, int face_toward, std::vector<CellId>& out) const;

  int dim_ = 2;
  Box domain_;
  std::array<int, 2> root_counts_{1, 1};
  std::vector<Cell> cells_;
  std::vector<bool> active_;
  std::vector<bool> refined_;
  std::vector<CellId> roots_;
  std::vector<CellId> active_list_;
  std::unordered_map<std::uint64_t, CellId> lattice_;
};

/// All active cells sharing a face with `id` (including coarse neighbors
/// across hanging faces and every fine cell subdividing one of its faces).
std::vector<CellId> face_neighbors(const Mesh& mesh, CellId id);

/// Ids whose error is strictly greater than fraction * max; the argmax is
/// always included.
std::set<CellId> greedy_select(std::span<const double> errors, std::span<const CellId> ids,
                               double fraction);
std::set<int> greedy_select(std::span<const double> errors, double fraction);

enum class LevelTransition { None, H, P };

struct MeshHierarchy {
  std::vector<Mesh> levels;  // coarsest first
  bool skip_intermediate_p = true;
  int k_coarse = 1;

  std::size_t size() const { return levels.size(); }
  /// Relation between level i-1 and level i (i >= 1).
  LevelTransition transition(std::size_t i) const;
  int h_levels() const;
  int p_levels() const;
};

MeshHierarchy build_hierarchy(const Mesh& fine, int k_coarse, bool skip_intermediate_p);

}  // namespace dpgmg
