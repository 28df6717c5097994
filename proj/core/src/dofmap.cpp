#include "dpgmg/dofmap.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

namespace dpgmg {

LocalLayout make_layout(const FormDescriptor& form, int order) {
  if (order < 0) throw FormError("polynomial order must be non-negative");
  LocalLayout l;
  l.dim = form.dim;
  l.order = order;
  l.field_scalar = form.dim == 1 ? order + 1 : (order + 1) * (order + 1);
  l.num_fields = static_cast<int>(form.fields.size());
  int off = 0;
  for (const auto& t : form.traces) {
    const int o = t.kind == TraceKind::H1 ? order + 1 : order;
    l.trace_order.push_back(o);
    l.trace_nodes.push_back(form.dim == 1 ? 1 : o + 1);
    l.trace_offset.push_back(off);
    off += face_count(form.dim) * l.trace_nodes.back();
  }
  l.num_trace = off;
  return l;
}

int face_sign(int dim, int face) { return face_side(dim, face); }

Point to_physical(const Box& box, int dim, const RefPoint& r) {
  Point p;
  p.x = box.lo[0] + 0.5 * (r[0] + 1.0) * box.width(0);
  p.y = dim == 2 ? box.lo[1] + 0.5 * (r[1] + 1.0) * box.width(1) : 0.0;
  return p;
}

RefPoint to_reference(const Box& box, int dim, const Point& x) {
  RefPoint r{2.0 * (x.x - box.lo[0]) / box.width(0) - 1.0, 0.0};
  if (dim == 2) r[1] = 2.0 * (x.y - box.lo[1]) / box.width(1) - 1.0;
  return r;
}

int nearest_field_node(const Mesh& mesh, CellId cell, int order, const Point& x) {
  const int dim = mesh.dim();
  const RefPoint r = to_reference(mesh.cell(cell).box, dim, x);
  const Basis b(order, dim == 1 ? CellShape::Interval : CellShape::Quad, SpaceKind::ScalarL2);
  const auto nodes = b.nodes();
  int best = 0;
  double bd = 1e300;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const double d = std::hypot(nodes[i][0] - r[0], dim == 2 ? nodes[i][1] - r[1] : 0.0);
    if (d < bd - 1e-12) {
      bd = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

namespace {

using Row = std::vector<SparseEntry>;

void add_scaled(Row& out, const Row& in, double w) {
  for (const auto& e : in) out.push_back({e.slot, e.weight * w});
}

Row compress(Row r) {
  std::sort(r.begin(), r.end(), [](const SparseEntry& a, const SparseEntry& b) { return a.slot < b.slot; });
  Row out;
  for (const auto& e : r) {
    if (!out.empty() && out.back().slot == e.slot)
      out.back().weight += e.weight;
    else
      out.push_back(e);
  }
  std::erase_if(out, [](const SparseEntry& e) { return std::abs(e.weight) < 1e-13; });
  return out;
}

}  // namespace

DofMap::DofMap(const Mesh& mesh, const ProblemSpec& problem) : mesh_(&mesh) {
  if (problem.form.dim != mesh.dim()) throw FormError("problem and mesh dimensions differ");
  if (!mesh.uniform_order()) throw FormError("DofMap requires a uniform polynomial order");
  layout_ = make_layout(problem.form, mesh.min_active_order());
  cell_pos_.assign(mesh.tree_size(), -1);
  const auto& act = mesh.active_cells();
  for (std::size_t i = 0; i < act.size(); ++i) cell_pos_[act[i]] = static_cast<int>(i);
  row_ptr_.resize(act.size());
  entries_.resize(act.size());
  if (mesh.dim() == 1)
    build_1d(problem);
  else
    build_2d(problem);
  finish(problem);
}

void DofMap::build_1d(const ProblemSpec& problem) {
  const Mesh& m = *mesh_;
  const int lmax = m.max_active_level();
  const std::int64_t xmax = static_cast<std::int64_t>(m.root_counts()[0]) << lmax;
  const int nvar = static_cast<int>(problem.form.traces.size());
  std::map<std::pair<std::int64_t, int>, int> vertex_slot;
  for (CellId c : m.active_cells()) {
    const Cell& cell = m.cell(c);
    const std::int64_t scale = std::int64_t{1} << (lmax - cell.level);
    auto& ptr = row_ptr_[cell_pos_[c]];
    auto& ent = entries_[cell_pos_[c]];
    ptr.assign(layout_.num_trace + 1, 0);
    for (int var = 0; var < nvar; ++var) {
      for (int f = 0; f < 2; ++f) {
        const std::int64_t x = (cell.index[0] + f) * scale;
        auto [it, inserted] = vertex_slot.try_emplace({x, var}, num_slots());
        if (inserted) {
          SlotInfo s;
          s.var = var;
          s.entity = SlotEntity::Vertex;
          s.at = {f == 0 ? cell.box.lo[0] : cell.box.hi[0], 0.0};
          s.boundary = x == 0 || x == xmax;
          s.rep_cell = c;
          slots_.push_back(s);
        }
        const double w = problem.form.traces[var].kind == TraceKind::Normal ? face_sign(1, f) : 1.0;
        ent.push_back({it->second, w});
      }
    }
    // rows are in (var, face) order, which equals the local trace order
    for (int r = 0; r < layout_.num_trace; ++r) ptr[r + 1] = r + 1;
  }
}

void DofMap::build_2d(const ProblemSpec& problem) {
  const Mesh& m = *mesh_;
  const FormDescriptor& form = problem.form;
  const int lmax = m.max_active_level();
  const std::int64_t xmax = static_cast<std::int64_t>(m.root_counts()[0]) << lmax;
  const std::int64_t ymax = static_cast<std::int64_t>(m.root_counts()[1]) << lmax;
  const Box& dom = m.domain();
  auto lattice_point = [&](std::int64_t x, std::int64_t y) {
    return Point{dom.lo[0] + dom.width(0) * (static_cast<double>(x) / static_cast<double>(xmax)),
                 dom.lo[1] + dom.width(1) * (static_cast<double>(y) / static_cast<double>(ymax))};
  };
  using Key = std::array<std::int64_t, 4>;  // axis, x, y, length
  struct FaceGeom {
    Key key;
    std::int64_t x0, y0, x1, y1;
  };
  auto face_geom = [&](const Cell& cell, int f) {
    const std::int64_t s = std::int64_t{1} << (lmax - cell.level);
    const std::int64_t x0 = cell.index[0] * s, y0 = cell.index[1] * s;
    const int axis = face_axis(2, f);
    const bool plus = face_side(2, f) > 0;
    FaceGeom g;
    if (axis == 0) {
      const std::int64_t x = plus ? x0 + s : x0;
      g = {{0, x, y0, s}, x, y0, x, y0 + s};
    } else {
      const std::int64_t y = plus ? y0 + s : y0;
      g = {{1, x0, y, s}, x0, y, x0 + s, y};
    }
    return g;
  };

  std::map<Key, int> face_id;
  std::vector<FaceGeom> geoms;
  auto master = [&](CellId owner, int f) {
    const Cell& cell = m.cell(owner);
    const FaceGeom g = face_geom(cell, f);
    auto [it, inserted] = face_id.try_emplace(g.key, static_cast<int>(faces_.size()));
    if (inserted) {
      MasterFace mf;
      mf.owner = owner;
      mf.owner_face = f;
      mf.axis = face_axis(2, f);
      mf.lo = lattice_point(g.x0, g.y0);
      mf.hi = lattice_point(g.x1, g.y1);
      mf.boundary = m.on_boundary(owner, f);
      faces_.push_back(mf);
      geoms.push_back(g);
    }
    return it->second;
  };
  auto opposite = [](int f) { return (f + 2) % 4; };

  // classify faces: master id per (cell, face) or slave (coarse master + half)
  struct FaceRef {
    int master;
    int half;  // -1 for master faces, else 0/1
  };
  std::vector<std::array<FaceRef, 4>> refs(m.num_active());
  std::map<std::pair<std::int64_t, std::int64_t>, int> hanging;  // midpoint -> master face
  for (CellId c : m.active_cells()) {
    const Cell& cell = m.cell(c);
    for (int f = 0; f < 4; ++f) {
      const auto nb = m.neighbors_across(c, f);
      FaceRef r{-1, -1};
      if (nb.size() == 1 && m.cell(nb[0]).level < cell.level) {
        r.master = master(nb[0], opposite(f));
        const int ta = 1 - face_axis(2, f);
        r.half = static_cast<int>(cell.index[ta] & 1);
      } else {
        r.master = master(c, f);
        if (nb.size() > 1) {
          faces_[r.master].hanging_midpoint = true;
          const FaceGeom& g = geoms[r.master];
          hanging[{(g.x0 + g.x1) / 2, (g.y0 + g.y1) / 2}] = r.master;
        }
      }
      refs[cell_pos_[c]][f] = r;
    }
  }

  const int nvar = static_cast<int>(form.traces.size());
  std::vector<LagrangeLine> lines;
  for (int v = 0; v < nvar; ++v) lines.emplace_back(layout_.trace_order[v]);
  std::map<std::array<std::int64_t, 3>, int> vertex_slot;
  std::unordered_map<std::int64_t, Row> memo;
  CellId current = -1;

  auto new_slot = [&](int var, SlotEntity e, int face, double t, Point at, bool boundary) {
    SlotInfo s;
    s.var = var;
    s.entity = e;
    s.face = face;
    s.t = t;
    s.at = at;
    s.boundary = boundary;
    s.rep_cell = current;
    slots_.push_back(s);
    return num_slots() - 1;
  };

  auto face_point = [&](int face, double t) {
    const MasterFace& mf = faces_[face];
    const double a = 0.5 * (t + 1.0);
    return Point{mf.lo.x + a * (mf.hi.x - mf.lo.x), mf.lo.y + a * (mf.hi.y - mf.lo.y)};
  };

  std::function<Row(int, int, int)> expr = [&](int face, int var, int node) -> Row {
    const std::int64_t key = (static_cast<std::int64_t>(face) * 16 + var) * 256 + node;
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    const int n = layout_.trace_nodes[var];
    const double t = lines[var].nodes()[node];
    Row r;
    const bool endpoint = form.traces[var].kind == TraceKind::H1 && (node == 0 || node == n - 1);
    if (endpoint) {
      const FaceGeom& g = geoms[face];
      const std::int64_t x = node == 0 ? g.x0 : g.x1;
      const std::int64_t y = node == 0 ? g.y0 : g.y1;
      if (auto h = hanging.find({x, y}); h != hanging.end()) {
        std::vector<double> phi(n);
        lines[var].eval(0.0, phi.data());
        for (int j = 0; j < n; ++j) add_scaled(r, expr(h->second, var, j), phi[j]);
        r = compress(r);
      } else {
        auto [it, inserted] = vertex_slot.try_emplace({x, y, var}, -1);
        if (inserted) {
          const bool bnd = x == 0 || y == 0 || x == xmax || y == ymax;
          it->second = new_slot(var, SlotEntity::Vertex, -1, 0.0, lattice_point(x, y), bnd);
        }
        r.push_back({it->second, 1.0});
      }
    } else {
      r.push_back({new_slot(var, SlotEntity::Edge, face, t, face_point(face, t), faces_[face].boundary), 1.0});
    }
    memo[key] = r;
    return r;
  };

  for (CellId c : m.active_cells()) {
    current = c;
    const int pos = cell_pos_[c];
    auto& ptr = row_ptr_[pos];
    auto& ent = entries_[pos];
    ptr.assign(layout_.num_trace + 1, 0);
    for (int var = 0; var < nvar; ++var) {
      const int n = layout_.trace_nodes[var];
      const bool normal = form.traces[var].kind == TraceKind::Normal;
      for (int f = 0; f < 4; ++f) {
        const FaceRef fr = refs[pos][f];
        const double sign = normal ? face_sign(2, f) : 1.0;
        for (int node = 0; node < n; ++node) {
          Row r;
          if (fr.half < 0) {
            add_scaled(r, expr(fr.master, var, node), sign);
          } else {
            const double t = 0.5 * (lines[var].nodes()[node] + (2 * fr.half - 1));
            std::vector<double> phi(n);
            lines[var].eval(t, phi.data());
            for (int j = 0; j < n; ++j) add_scaled(r, expr(fr.master, var, j), sign * phi[j]);
            r = compress(r);
          }
          // rows are emitted in local order (var, face, node)
          ptr[layout_.trace_local(var, f, node) + 1] = static_cast<int>(r.size());
          for (const auto& e : r) ent.push_back(e);
        }
      }
    }
    for (int r = 0; r < layout_.num_trace; ++r) ptr[r + 1] += ptr[r];
  }
}

void DofMap::finish(const ProblemSpec& problem) {
  const int ns = num_slots();
  free_index_.assign(ns, -1);
  dirichlet_.assign(ns, 0.0);
  std::vector<bool> fixed(ns, false);
  for (int s = 0; s < ns; ++s) {
    const SlotInfo& si = slots_[s];
    if (!si.boundary) continue;
    for (const auto& bc : problem.bcs) {
      if (bc.trace != si.var) continue;
      if (bc.on && !bc.on(si.at)) continue;
      fixed[s] = true;
      dirichlet_[s] = bc.value(si.at);
    }
  }
  for (int s = 0; s < ns; ++s) {
    if (fixed[s]) continue;
    free_index_[s] = num_free_++;
    free_to_slot_.push_back(s);
  }
  cell_free_.resize(mesh_->num_active());
  for (std::size_t p = 0; p < cell_free_.size(); ++p) {
    auto& v = cell_free_[p];
    for (const auto& e : entries_[p])
      if (free_index_[e.slot] >= 0) v.push_back(free_index_[e.slot]);
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
  for (const auto& pin : problem.pins) {
    const CellId c = mesh_->locate(pin.at);
    if (c < 0) throw FormError("pin point outside the domain");
    const int node = nearest_field_node(*mesh_, c, layout_.order, pin.at);
    pins_.push_back({c, pin.field * layout_.field_scalar + node, pin.value});
  }
}

int DofMap::slot_local(CellId cell) const {
  if (cell < 0 || cell >= static_cast<CellId>(cell_pos_.size()) || cell_pos_[cell] < 0)
    throw MeshError("cell " + std::to_string(cell) + " is not active in this DofMap");
  return cell_pos_[cell];
}

std::span<const SparseEntry> DofMap::row(CellId cell, int r) const {
  const int p = slot_local(cell);
  const auto& ptr = row_ptr_[p];
  return {entries_[p].data() + ptr[r], static_cast<std::size_t>(ptr[r + 1] - ptr[r])};
}

const std::vector<int>& DofMap::cell_free_dofs(CellId cell) const { return cell_free_[slot_local(cell)]; }

std::vector<PinnedField> DofMap::pins_in(CellId cell) const {
  std::vector<PinnedField> out;
  for (const auto& p : pins_)
    if (p.cell == cell) out.push_back(p);
  return out;
}

Eigen::VectorXd DofMap::expand(const Eigen::VectorXd& free) const {
  if (free.size() != num_free_) throw std::invalid_argument("expand: size mismatch");
  Eigen::VectorXd s(num_slots());
  for (int i = 0; i < num_slots(); ++i) s[i] = free_index_[i] >= 0 ? free[free_index_[i]] : dirichlet_[i];
  return s;
}

Eigen::VectorXd DofMap::restrict_free(const Eigen::VectorXd& slots) const {
  if (slots.size() != num_slots()) throw std::invalid_argument("restrict_free: size mismatch");
  Eigen::VectorXd f(num_free_);
  for (int i = 0; i < num_free_; ++i) f[i] = slots[free_to_slot_[i]];
  return f;
}

Eigen::VectorXd DofMap::local_traces(CellId cell, const Eigen::VectorXd& slots) const {
  Eigen::VectorXd out(layout_.num_trace);
  for (int r = 0; r < layout_.num_trace; ++r) {
    double v = 0.0;
    for (const auto& e : row(cell, r)) v += e.weight * slots[e.slot];
    out[r] = v;
  }
  return out;
}

}  // namespace dpgmg
