#pragma once

#include <vector>

#include "dpgmg/basis.hpp"
#include "dpgmg/formulation.hpp"
#include "dpgmg/mesh.hpp"

namespace dpgmg {

/// Ordering of one cell's trial unknowns: field components first (each with
/// (k+1)^d nodal coefficients), then for every trace variable and face the
/// face nodes. Face nodes run along the face by increasing coordinate.
struct LocalLayout {
  int dim = 2;
  int order = 0;
  int field_scalar = 0;  // (k+1)^dim
  int num_fields = 0;
  std::vector<int> trace_order;
  std::vector<int> trace_nodes;  // nodes per face
  std::vector<int> trace_offset;  // relative to the first trace unknown
  int num_trace = 0;

  int num_field_dofs() const { return num_fields * field_scalar; }
  int size() const { return num_field_dofs() + num_trace; }
  int trace_local(int var, int face, int node) const {
    return trace_offset[var] + face * trace_nodes[var] + node;
  }
};

LocalLayout make_layout(const FormDescriptor& form, int order);

/// Sign relating the cell's outward normal on `face` to the canonical face
/// normal (+x on faces normal to x, +y otherwise).
int face_sign(int dim, int face);

struct SparseEntry {
  int slot;
  double weight;
};

/// A mesh face that carries its own trace unknowns: a boundary face, a face
/// shared by two same-level cells, or the coarse side of a hanging face.
struct MasterFace {
  CellId owner;
  int owner_face;
  int axis;  // normal axis
  Point lo, hi;  // endpoints (equal in 1D)
  bool boundary = false;
  bool hanging_midpoint = false;  // finer cells on the other side
};

enum class SlotEntity { Vertex, Edge };

struct SlotInfo {
  int var;
  SlotEntity entity;
  int face = -1;  // master face for edge slots
  double t = 0.0;  // face parameter of edge slots
  Point at;
  bool boundary = false;
  CellId rep_cell = -1;  // first active cell that reached this slot
};

struct PinnedField {
  CellId cell;
  int local;  // index into the cell's field unknowns
  double value;
};

/// Global trace unknowns ("slots") of a mesh with uniform order, together
/// with the per-cell maps from local trace unknowns to slots. Fine-side
/// unknowns of hanging faces are expressed through the coarse face.
class DofMap {
 public:
  DofMap(const Mesh& mesh, const ProblemSpec& problem);

  const Mesh& mesh() const { return *mesh_; }
  const LocalLayout& layout() const { return layout_; }
  int num_slots() const { return static_cast<int>(slots_.size()); }
  int num_free() const { return num_free_; }
  const SlotInfo& slot(int s) const { return slots_[s]; }
  const std::vector<MasterFace>& master_faces() const { return faces_; }

  /// Free index of a slot, or -1 for Dirichlet slots.
  int free_index(int s) const { return free_index_[s]; }
  double dirichlet_value(int s) const { return dirichlet_[s]; }
  const std::vector<int>& free_to_slot() const { return free_to_slot_; }

  /// Row r of the cell map expresses local trace unknown r.
  std::span<const SparseEntry> row(CellId cell, int r) const;
  /// Dense (local traces x slots) view is never formed; this lists the
  /// sorted free unknowns touched by the cell.
  const std::vector<int>& cell_free_dofs(CellId cell) const;

  const std::vector<PinnedField>& pins() const { return pins_; }
  /// Local field indices pinned in `cell` (usually empty).
  std::vector<PinnedField> pins_in(CellId cell) const;

  /// Slot values (Dirichlet data on fixed slots) from free values.
  Eigen::VectorXd expand(const Eigen::VectorXd& free) const;
  Eigen::VectorXd restrict_free(const Eigen::VectorXd& slots) const;
  /// Local trace coefficients of a cell from slot values.
  Eigen::VectorXd local_traces(CellId cell, const Eigen::VectorXd& slots) const;

 private:
  void build_1d(const ProblemSpec& problem);
  void build_2d(const ProblemSpec& problem);
  void finish(const ProblemSpec& problem);
  int slot_local(CellId cell) const;

  const Mesh* mesh_;
  LocalLayout layout_;
  std::vector<SlotInfo> slots_;
  std::vector<MasterFace> faces_;
  std::vector<int> free_index_;
  std::vector<int> free_to_slot_;
  std::vector<double> dirichlet_;
  int num_free_ = 0;
  // per active cell (position in mesh.active_cells()) CSR rows
  std::vector<std::vector<int>> row_ptr_;
  std::vector<std::vector<SparseEntry>> entries_;
  std::vector<std::vector<int>> cell_free_;
  std::vector<int> cell_pos_;  // cell id -> position, -1 if inactive
  std::vector<PinnedField> pins_;
};

/// Nodal index of the field basis node nearest to `x` inside `cell`.
int nearest_field_node(const Mesh& mesh, CellId cell, int order, const Point& x);

/// Physical point of a reference point of a cell.
Point to_physical(const Box& box, int dim, const RefPoint& r);
RefPoint to_reference(const Box& box, int dim, const Point& x);

}  // namespace dpgmg
