#include "dpgmg/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

namespace dpgmg {

namespace {

enum CellState : char { kUnused = 0, kActive = 1, kRefined = 2 };

}  // namespace

double Box::measure(int dim) const {
  return dim == 1 ? width(0) : width(0) * width(1);
}

bool Box::contains(const Point& p, int dim, double tol) const {
  if (p.x < lo[0] - tol || p.x > hi[0] + tol) return false;
  if (dim == 2 && (p.y < lo[1] - tol || p.y > hi[1] + tol)) return false;
  return true;
}

int face_count(int dim) { return 2 * dim; }

int face_axis(int dim, int face) {
  if (dim == 1) return 0;
  return (face == 0 || face == 2) ? 1 : 0;
}

int face_side(int dim, int face) {
  if (dim == 1) return face == 0 ? -1 : 1;
  return (face == 1 || face == 2) ? 1 : -1;
}

std::uint64_t Mesh::key(int level, std::int64_t i, std::int64_t j) {
  return (static_cast<std::uint64_t>(level) << 52) | (static_cast<std::uint64_t>(i) << 26) |
         static_cast<std::uint64_t>(j);
}

Mesh Mesh::uniform(int dim, std::array<int, 2> counts, const Box& domain, int order) {
  if (dim != 1 && dim != 2) throw MeshError("mesh dimension must be 1 or 2");
  if (order < 0) throw MeshError("polynomial order must be non-negative");
  if (dim == 1) counts[1] = 1;
  if (counts[0] < 1 || counts[1] < 1) throw MeshError("cell counts must be positive");
  Mesh m;
  m.dim_ = dim;
  m.domain_ = domain;
  if (dim == 1) {
    m.domain_.lo[1] = 0.0;
    m.domain_.hi[1] = 1.0;
  }
  m.root_counts_ = counts;
  for (int j = 0; j < counts[1]; ++j) {
    for (int i = 0; i < counts[0]; ++i) {
      Cell c;
      c.id = static_cast<CellId>(m.cells_.size());
      c.level = 0;
      c.order = order;
      c.index = {i, j};
      const double hx = m.domain_.width(0) / counts[0];
      const double hy = m.domain_.width(1) / counts[1];
      c.box.lo = {m.domain_.lo[0] + i * hx, m.domain_.lo[1] + j * hy};
      c.box.hi = {m.domain_.lo[0] + (i + 1) * hx, m.domain_.lo[1] + (j + 1) * hy};
      if (i == counts[0] - 1) c.box.hi[0] = m.domain_.hi[0];
      if (j == counts[1] - 1) c.box.hi[1] = m.domain_.hi[1];
      m.lattice_[key(0, i, j)] = c.id;
      m.roots_.push_back(c.id);
      m.cells_.push_back(std::move(c));
      m.active_.push_back(true);
    }
  }
  m.rebuild_active_list();
  return m;
}

const Cell& Mesh::cell(CellId id) const {
  if (!contains_id(id)) throw MeshError("unknown cell id " + std::to_string(id));
  return cells_[id];
}

void Mesh::rebuild_active_list() {
  active_list_.clear();
  refined_.assign(cells_.size(), false);
  for (CellId id = 0; id < static_cast<CellId>(cells_.size()); ++id) {
    if (!active_[id]) continue;
    active_list_.push_back(id);
    for (CellId a = cells_[id].parent; a >= 0 && !refined_[a]; a = cells_[a].parent)
      refined_[a] = true;
  }
}

int Mesh::max_active_level() const {
  int l = 0;
  for (CellId id : active_list_) l = std::max(l, cells_[id].level);
  return l;
}

int Mesh::min_active_order() const {
  int k = INT32_MAX;
  for (CellId id : active_list_) k = std::min(k, cells_[id].order);
  return k;
}

int Mesh::max_active_order() const {
  int k = 0;
  for (CellId id : active_list_) k = std::max(k, cells_[id].order);
  return k;
}

void Mesh::split(CellId id) {
  Cell& parent = cells_[id];
  const int nchildren = dim_ == 1 ? 2 : 4;
  if (parent.children.empty()) {
    std::vector<CellId> kids;
    for (int c = 0; c < nchildren; ++c) {
      const int cx = c & 1;
      const int cy = (c >> 1) & 1;
      Cell child;
      child.id = static_cast<CellId>(cells_.size());
      child.parent = id;
      child.level = cells_[id].level + 1;
      child.order = cells_[id].order;
      child.index = {2 * cells_[id].index[0] + cx, dim_ == 2 ? 2 * cells_[id].index[1] + cy : 0};
      const Box& pb = cells_[id].box;
      const double mx = 0.5 * (pb.lo[0] + pb.hi[0]);
      child.box = pb;
      child.box.lo[0] = cx ? mx : pb.lo[0];
      child.box.hi[0] = cx ? pb.hi[0] : mx;
      if (dim_ == 2) {
        const double my = 0.5 * (pb.lo[1] + pb.hi[1]);
        child.box.lo[1] = cy ? my : pb.lo[1];
        child.box.hi[1] = cy ? pb.hi[1] : my;
      }
      lattice_[key(child.level, child.index[0], child.index[1])] = child.id;
      kids.push_back(child.id);
      cells_.push_back(std::move(child));
      active_.push_back(false);
    }
    cells_[id].children = kids;
  }
  active_[id] = false;
  for (CellId c : cells_[id].children) {
    active_[c] = true;
    cells_[c].order = cells_[id].order;
  }
}

CellId Mesh::find(int level, std::int64_t i, std::int64_t j) const {
  auto it = lattice_.find(key(level, i, j));
  return it == lattice_.end() ? -1 : it->second;
}

void Mesh::collect_face_descendants(CellId id, int face_toward, std::vector<CellId>& out) const {
  if (active_[id]) {
    out.push_back(id);
    return;
  }
  const int axis = face_axis(dim_, face_toward);
  const int want = face_side(dim_, face_toward) > 0 ? 1 : 0;
  for (std::size_t c = 0; c < cells_[id].children.size(); ++c) {
    const int bit = axis == 0 ? (static_cast<int>(c) & 1) : ((static_cast<int>(c) >> 1) & 1);
    if (bit != want) continue;
    const CellId child = cells_[id].children[c];
    if (active_[child] || refined_[child]) collect_face_descendants(child, face_toward, out);
  }
}

bool Mesh::on_boundary(CellId id, int face) const {
  const Cell& c = cell(id);
  const int axis = face_axis(dim_, face);
  const std::int64_t n = c.index[axis] + face_side(dim_, face);
  const std::int64_t extent = static_cast<std::int64_t>(root_counts_[axis]) << c.level;
  return n < 0 || n >= extent;
}

std::vector<CellId> Mesh::neighbors_across(CellId id, int face) const {
  if (!is_active(id)) throw MeshError("cell " + std::to_string(id) + " is not active");
  std::vector<CellId> out;
  if (on_boundary(id, face)) return out;
  const Cell& c = cells_[id];
  const int axis = face_axis(dim_, face);
  std::array<std::int64_t, 2> pos = c.index;
  pos[axis] += face_side(dim_, face);
  // face of the neighbor that points back at `id`
  int back = 0;
  for (int f = 0; f < face_count(dim_); ++f)
    if (face_axis(dim_, f) == axis && face_side(dim_, f) == -face_side(dim_, face)) back = f;
  for (int level = c.level; level >= 0; --level) {
    const CellId n = find(level, pos[0], pos[1]);
    if (n >= 0) {
      if (active_[n]) {
        out.push_back(n);
        return out;
      }
      if (level == c.level && refined_[n]) {
        collect_face_descendants(n, back, out);
        return out;
      }
    }
    pos[0] >>= 1;
    pos[1] >>= 1;
  }
  throw MeshError("neighbor lookup failed; mesh tree is inconsistent");
}

std::vector<CellId> face_neighbors(const Mesh& mesh, CellId id) {
  std::vector<CellId> out;
  for (int f = 0; f < face_count(mesh.dim()); ++f) {
    for (CellId n : mesh.neighbors_across(id, f)) out.push_back(n);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

CellId Mesh::active_ancestor(CellId id) const {
  while (id >= 0 && contains_id(id)) {
    if (active_[id]) return id;
    id = cells_[id].parent;
  }
  return -1;
}

CellId Mesh::locate(const Point& p) const {
  for (CellId id : active_list_)
    if (cells_[id].box.contains(p, dim_)) return id;
  return -1;
}

Mesh Mesh::refine_exact(const std::set<CellId>& ids) const {
  Mesh m = *this;
  for (CellId id : ids) {
    if (!contains_id(id)) throw MeshError("unknown cell id " + std::to_string(id));
    if (!active_[id]) throw MeshError("cell " + std::to_string(id) + " is not active");
    m.split(id);
  }
  m.rebuild_active_list();
  return m;
}

Mesh Mesh::refine(const std::set<CellId>& ids) const {
  Mesh m = refine_exact(ids);
  // closure: no active cell may touch an active cell two or more levels finer
  while (true) {
    std::set<CellId> marks;
    for (CellId id : m.active_list_) {
      const int level = m.cells_[id].level;
      for (int f = 0; f < face_count(m.dim_) && !marks.count(id); ++f) {
        for (CellId n : m.neighbors_across(id, f)) {
          if (m.cells_[n].level > level + 1) {
            marks.insert(id);
            break;
          }
        }
      }
    }
    if (marks.empty()) break;
    for (CellId id : marks) m.split(id);
    m.rebuild_active_list();
  }
  return m;
}

Mesh Mesh::refine_uniform(int times) const {
  Mesh m = *this;
  for (int t = 0; t < times; ++t) {
    std::set<CellId> all(m.active_list_.begin(), m.active_list_.end());
    m = m.refine_exact(all);
  }
  return m;
}

Mesh Mesh::with_order(int order) const {
  if (order < 0) throw MeshError("polynomial order must be non-negative");
  Mesh m = *this;
  for (auto& c : m.cells_) c.order = order;
  return m;
}

Mesh Mesh::with_orders(std::span<const CellId> ids, std::span<const int> orders) const {
  if (ids.size() != orders.size()) throw MeshError("ids and orders differ in length");
  Mesh m = *this;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!contains_id(ids[i])) throw MeshError("unknown cell id " + std::to_string(ids[i]));
    if (orders[i] < 0) throw MeshError("polynomial order must be non-negative");
    m.cells_[ids[i]].order = orders[i];
  }
  return m;
}

Mesh Mesh::roots_only(int order) const {
  Mesh m = *this;
  std::fill(m.active_.begin(), m.active_.end(), false);
  for (CellId r : m.roots_) m.active_[r] = true;
  for (auto& c : m.cells_) c.order = order;
  m.rebuild_active_list();
  return m;
}

bool Mesh::is_one_irregular() const {
  for (CellId id : active_list_) {
    for (int f = 0; f < face_count(dim_); ++f) {
      for (CellId n : neighbors_across(id, f)) {
        if (std::abs(cells_[n].level - cells_[id].level) > 1) return false;
      }
    }
  }
  return true;
}

void Mesh::validate() const {
  double total = 0.0;
  for (CellId id : active_list_) total += cells_[id].box.measure(dim_);
  const double expect = domain_.measure(dim_);
  if (std::abs(total - expect) > 1e-12 * expect)
    throw MeshError("active cells do not cover the domain");
  for (const Cell& c : cells_) {
    if (c.parent < 0) {
      if (c.level != 0) throw MeshError("non-root cell without parent");
      continue;
    }
    const Cell& p = cells_[c.parent];
    if (c.level != p.level + 1) throw MeshError("child level mismatch");
    if (std::find(p.children.begin(), p.children.end(), c.id) == p.children.end())
      throw MeshError("parent does not list child");
  }
  for (const Cell& c : cells_) {
    if (c.children.empty()) continue;
    const std::size_t expect_children = dim_ == 1 ? 2 : 4;
    if (c.children.size() != expect_children) throw MeshError("refinement must be isotropic");
    double m = 0.0;
    for (CellId ch : c.children) m += cells_[ch].box.measure(dim_);
    if (std::abs(m - c.box.measure(dim_)) > 1e-12 * c.box.measure(dim_))
      throw MeshError("children do not partition the parent");
  }
  // active cells must not overlap: no active cell may have an active ancestor
  for (CellId id : active_list_) {
    CellId a = cells_[id].parent;
    while (a >= 0) {
      if (active_[a]) throw MeshError("active cells overlap");
      a = cells_[a].parent;
    }
  }
}

std::string Mesh::to_json() const {
  nlohmann::ordered_json j;
  j["dim"] = dim_;
  j["domain"] = {{"lo", domain_.lo}, {"hi", domain_.hi}};
  j["root_counts"] = root_counts_;
  j["roots"] = roots_;
  j["active"] = active_list_;
  auto cells = nlohmann::ordered_json::array();
  for (const Cell& c : cells_) {
    nlohmann::ordered_json jc;
    jc["id"] = c.id;
    jc["parent"] = c.parent;
    jc["children"] = c.children;
    jc["level"] = c.level;
    jc["order"] = c.order;
    jc["index"] = c.index;
    jc["lo"] = c.box.lo;
    jc["hi"] = c.box.hi;
    cells.push_back(std::move(jc));
  }
  j["cells"] = std::move(cells);
  return j.dump(1);
}

Mesh Mesh::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  Mesh m;
  m.dim_ = j.at("dim").get<int>();
  m.domain_.lo = j.at("domain").at("lo").get<std::array<double, 2>>();
  m.domain_.hi = j.at("domain").at("hi").get<std::array<double, 2>>();
  m.root_counts_ = j.at("root_counts").get<std::array<int, 2>>();
  m.roots_ = j.at("roots").get<std::vector<CellId>>();
  for (const auto& jc : j.at("cells")) {
    Cell c;
    c.id = jc.at("id").get<CellId>();
    c.parent = jc.at("parent").get<CellId>();
    c.children = jc.at("children").get<std::vector<CellId>>();
    c.level = jc.at("level").get<int>();
    c.order = jc.at("order").get<int>();
    c.index = jc.at("index").get<std::array<std::int64_t, 2>>();
    c.box.lo = jc.at("lo").get<std::array<double, 2>>();
    c.box.hi = jc.at("hi").get<std::array<double, 2>>();
    if (c.id != static_cast<CellId>(m.cells_.size())) throw MeshError("cell ids must be dense");
    m.lattice_[key(c.level, c.index[0], c.index[1])] = c.id;
    m.cells_.push_back(std::move(c));
  }
  m.active_.assign(m.cells_.size(), false);
  for (CellId id : j.at("active").get<std::vector<CellId>>()) m.active_.at(id) = true;
  m.rebuild_active_list();
  m.validate();
  return m;
}

std::set<int> greedy_select(std::span<const double> errors, double fraction) {
  if (errors.empty()) throw std::invalid_argument("greedy_select: empty error vector");
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw std::invalid_argument("greedy_select: fraction must lie in (0,1]");
  const auto it = std::max_element(errors.begin(), errors.end());
  const double threshold = fraction * *it;
  std::set<int> out;
  out.insert(static_cast<int>(it - errors.begin()));
  for (std::size_t i = 0; i < errors.size(); ++i)
    if (errors[i] > threshold) out.insert(static_cast<int>(i));
  return out;
}

std::set<CellId> greedy_select(std::span<const double> errors, std::span<const CellId> ids,
                               double fraction) {
  if (errors.size() != ids.size())
    throw std::invalid_argument("greedy_select: errors and ids differ in length");
  std::set<CellId> out;
  for (int i : greedy_select(errors, fraction)) out.insert(ids[i]);
  return out;
}

LevelTransition MeshHierarchy::transition(std::size_t i) const {
  if (i == 0 || i >= levels.size()) return LevelTransition::None;
  return levels[i - 1].active_cells() == levels[i].active_cells() ? LevelTransition::P
                                                                   : LevelTransition::H;
}

int MeshHierarchy::h_levels() const {
  int n = 0;
  for (std::size_t i = 1; i < levels.size(); ++i) n += transition(i) == LevelTransition::H;
  return n;
}

int MeshHierarchy::p_levels() const {
  int n = 0;
  for (std::size_t i = 1; i < levels.size(); ++i) n += transition(i) == LevelTransition::P;
  return n;
}

MeshHierarchy build_hierarchy(const Mesh& fine, int k_coarse, bool skip_intermediate_p) {
  if (k_coarse < 0) throw MeshError("k_coarse must be non-negative");
  if (k_coarse > fine.min_active_order())
    throw MeshError("k_coarse exceeds the order of some fine cell");
  MeshHierarchy h;
  h.skip_intermediate_p = skip_intermediate_p;
  h.k_coarse = k_coarse;
  Mesh cur = fine.roots_only(k_coarse);
  h.levels.push_back(cur);
  while (true) {
    std::set<CellId> coarser;
    for (CellId id : cur.active_cells())
      if (!fine.is_active(id)) coarser.insert(id);
    if (coarser.empty()) break;
    cur = cur.refine_exact(coarser);
    h.levels.push_back(cur);
  }
  auto differs = [&](const Mesh& m) {
    for (CellId id : fine.active_cells())
      if (m.cell(id).order != fine.cell(id).order) return true;
    return false;
  };
  if (skip_intermediate_p) {
    if (differs(cur)) h.levels.push_back(fine);
    return h;
  }
  while (differs(cur)) {
    // each p-step doubles the order; order 0 steps to 1 so the loop terminates
    std::vector<int> orders;
    for (CellId id : fine.active_cells()) {
      const int k = cur.cell(id).order;
      const int kf = fine.cell(id).order;
      orders.push_back(k < kf ? std::min(std::max(2 * k, k + 1), kf) : k);
    }
    cur = cur.with_orders(fine.active_cells(), orders);
    h.levels.push_back(cur);
  }
  return h;
}

}  // namespace dpgmg
