#include "dpgmg/multigrid.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "json.hpp"

namespace dpgmg {

namespace {

CellId coarse_ancestor(const Mesh& coarse, const Mesh& fine, CellId id);

// Where the value of one fine slot comes from in the coarse space.
struct SlotSource {
  bool gamma = false;
  CellId cell = -1;
  std::vector<SparseEntry> slots;  // coarse slot weights (trace path)
  std::vector<std::pair<int, double>> fields;  // coarse local field weights (gamma path)
};

class SourceLocator {
 public:
  SourceLocator(const DofMap& coarse, const DofMap& fine, const FormDescriptor& form)
      : coarse_(coarse), fine_(fine), form_(form) {
    const LocalLayout& cl = coarse.layout();
    for (int o : cl.trace_order) lines_.try_emplace(o, o);
    const int dim = coarse.mesh().dim();
    field_ = std::make_unique<Basis>(cl.order, dim == 1 ? CellShape::Interval : CellShape::Quad,
                                     SpaceKind::ScalarL2);
  }

  SlotSource locate(int s) const {
    const Mesh& cm = coarse_.mesh();
    const int dim = cm.dim();
    const SlotInfo& si = fine_.slot(s);
    SlotSource src;
    src.cell = coarse_ancestor(cm, fine_.mesh(), si.rep_cell);
    if (src.cell < 0) throw MultigridError("coarse mesh is not a coarsening of the fine mesh");
    const Box& box = cm.cell(src.cell).box;
    std::array<double, 2> probe{si.at.x, si.at.y};
    int axis = 0;
    if (dim == 2 && si.entity == SlotEntity::Edge) {
      const MasterFace& mf = fine_.master_faces()[si.face];
      probe = {0.5 * (mf.lo.x + mf.hi.x), 0.5 * (mf.lo.y + mf.hi.y)};
      axis = mf.axis;
    }
    const double tol = 1e-10 * std::max(box.width(0), dim == 2 ? box.width(1) : 0.0);
    bool inside = true;
    for (int d = 0; d < dim; ++d)
      if (!(probe[d] > box.lo[d] + tol && probe[d] < box.hi[d] - tol)) inside = false;

    const LocalLayout& cl = coarse_.layout();
    const int var = si.var;
    const bool normal = form_.traces[var].kind == TraceKind::Normal;
    if (inside) {
      src.gamma = true;
      const Eigen::VectorXd phi = field_->values(to_reference(box, dim, si.at));
      for (const auto& tt : form_.traces[var].traced) {
        double f = tt.coef;
        if (tt.normal == NormalFactor::Nx) f *= axis == 0 ? 1.0 : 0.0;
        if (tt.normal == NormalFactor::Ny) f *= axis == 1 ? 1.0 : 0.0;
        if (f == 0.0) continue;
        for (int i = 0; i < phi.size(); ++i) src.fields.push_back({tt.field * cl.field_scalar + i, f * phi[i]});
      }
      return src;
    }

    // on the coarse cell boundary: pick the coarse face holding the entity
    int face = -1;
    for (int f = 0; f < face_count(dim) && face < 0; ++f) {
      const int a = face_axis(dim, f);
      if (dim == 2 && si.entity == SlotEntity::Edge && a != axis) continue;
      const double c = face_side(dim, f) < 0 ? box.lo[a] : box.hi[a];
      if (std::abs(probe[a] - c) <= tol) face = f;
    }
    if (face < 0) throw MultigridError("fine trace entity not found on the coarse cell");
    const int n = cl.trace_nodes[var];
    std::vector<double> phi(n, 1.0);
    if (dim == 2) {
      const int ta = 1 - face_axis(2, face);
      const double at[2] = {si.at.x, si.at.y};
      const double t = 2.0 * (at[ta] - box.lo[ta]) / box.width(ta) - 1.0;
      lines_.at(cl.trace_order[var]).eval(t, phi.data());
    }
    const double sign = normal ? face_sign(dim, face) : 1.0;
    for (int j = 0; j < n; ++j)
      for (const auto& e : coarse_.row(src.cell, cl.trace_local(var, face, j)))
        src.slots.push_back({e.slot, sign * phi[j] * e.weight});
    return src;
  }

 private:
  const DofMap& coarse_;
  const DofMap& fine_;
  const FormDescriptor& form_;
  std::map<int, LagrangeLine> lines_;
  std::unique_ptr<Basis> field_;
};

// Ancestor-or-self of a fine cell that is active in the coarse mesh; the
// fine mesh's tree is used since it may hold cells the coarse one lacks.
CellId coarse_ancestor(const Mesh& coarse, const Mesh& fine, CellId id) {
  while (id >= 0) {
    if (coarse.is_active(id)) return id;
    id = fine.cell(id).parent;
  }
  return -1;
}

// Lower Cholesky factor packed column by column.
void packed_solve(const std::vector<double>& L, int m, double* x) {
  std::size_t col = 0;
  for (int j = 0; j < m; ++j) {
    x[j] /= L[col];
    const double xj = x[j];
    for (int i = j + 1; i < m; ++i) x[i] -= L[col + (i - j)] * xj;
    col += m - j;
  }
  for (int j = m - 1; j >= 0; --j) {
    col -= m - j;
    double s = x[j];
    for (int i = j + 1; i < m; ++i) s -= L[col + (i - j)] * x[i];
    x[j] = s / L[col];
  }
}

}  // namespace

Prolongation build_prolongation(const DofMap& coarse, const DofMap& fine, const FormDescriptor& form,
                                const RecoveryLookup& recovery) {
  if (coarse.mesh().dim() != fine.mesh().dim()) throw MultigridError("levels have different dimensions");
  const SourceLocator loc(coarse, fine, form);
  const int nt = coarse.layout().num_trace;
  Prolongation out;
  std::vector<Eigen::Triplet<double>> trip;
  std::map<int, double> row;
  for (int fi = 0; fi < fine.num_free(); ++fi) {
    const SlotSource src = loc.locate(fine.free_to_slot()[fi]);
    row.clear();
    if (src.gamma) {
      if (!recovery) throw MultigridError("missing coarse recovery matrices");
      const Eigen::MatrixXd& E = recovery(src.cell);
      Eigen::VectorXd w = Eigen::VectorXd::Zero(nt);
      for (const auto& [idx, f] : src.fields) w -= f * E.row(idx).transpose();
      for (int r = 0; r < nt; ++r) {
        if (w[r] == 0.0) continue;
        for (const auto& e : coarse.row(src.cell, r)) row[e.slot] += w[r] * e.weight;
      }
      out.provenance.push_back(Provenance::GammaTrace);
    } else {
      for (const auto& e : src.slots) row[e.slot] += e.weight;
      out.provenance.push_back(Provenance::DirectTrace);
    }
    for (const auto& [slot, w] : row) {
      const int ci = coarse.free_index(slot);
      if (ci >= 0 && std::abs(w) > 1e-14) trip.emplace_back(fi, ci, w);
    }
  }
  out.P.resize(fine.num_free(), coarse.num_free());
  out.P.setFromTriplets(trip.begin(), trip.end());
  return out;
}

Solution transfer_solution(const Solution& from, const Discretization& to) {
  const DofMap& cdm = *from.dofmap;
  const DofMap& fdm = to.dofmap();
  const FormDescriptor& form = to.problem().form;
  const SourceLocator loc(cdm, fdm, form);
  const Mesh& cm = *from.mesh;
  const Mesh& fm = to.mesh();
  const int dim = fm.dim();
  Solution s;
  s.mesh = to.mesh_ptr();
  s.dofmap = to.dofmap_ptr();
  s.slots = Eigen::VectorXd::Zero(fdm.num_slots());
  for (int k = 0; k < fdm.num_slots(); ++k) {
    if (fdm.free_index(k) < 0) {
      s.slots[k] = fdm.dirichlet_value(k);
      continue;
    }
    const SlotSource src = loc.locate(k);
    double v = 0.0;
    if (src.gamma) {
      const Eigen::VectorXd& u = from.cell_fields(src.cell);
      for (const auto& [idx, f] : src.fields) v += f * u[idx];
    } else {
      for (const auto& e : src.slots) v += e.weight * from.slots[e.slot];
    }
    s.slots[k] = v;
  }
  const CellShape shape = dim == 1 ? CellShape::Interval : CellShape::Quad;
  const LocalLayout& fl = fdm.layout();
  const LocalLayout& cl = cdm.layout();
  const Basis fine_basis(fl.order, shape, SpaceKind::ScalarL2);
  const Basis coarse_basis(cl.order, shape, SpaceKind::ScalarL2);
  const auto nodes = fine_basis.nodes();
  for (CellId c : fm.active_cells()) {
    const CellId a = coarse_ancestor(cm, fm, c);
    if (a < 0) throw MultigridError("target mesh is not nested in the source mesh");
    const Eigen::VectorXd& u = from.cell_fields(a);
    Eigen::MatrixXd interp(nodes.size(), cl.field_scalar);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const Point x = to_physical(fm.cell(c).box, dim, nodes[i]);
      interp.row(i) = coarse_basis.values(to_reference(cm.cell(a).box, dim, x)).transpose();
    }
    Eigen::VectorXd f(fl.num_field_dofs());
    for (int k = 0; k < fl.num_fields; ++k)
      f.segment(k * fl.field_scalar, fl.field_scalar) = interp * u.segment(k * cl.field_scalar, cl.field_scalar);
    s.fields.push_back(std::move(f));
  }
  return s;
}

std::vector<std::vector<int>> schwarz_blocks(const DofMap& dofmap, int overlap) {
  if (overlap != 0 && overlap != 1) throw std::invalid_argument("overlap must be 0 or 1");
  const Mesh& m = dofmap.mesh();
  std::vector<std::vector<int>> out;
  for (CellId c : m.active_cells()) {
    std::vector<int> b = dofmap.cell_free_dofs(c);
    if (overlap == 1) {
      for (CellId n : face_neighbors(m, c)) {
        const auto& d = dofmap.cell_free_dofs(n);
        b.insert(b.end(), d.begin(), d.end());
      }
      std::sort(b.begin(), b.end());
      b.erase(std::unique(b.begin(), b.end()), b.end());
    }
    if (!b.empty()) out.push_back(std::move(b));
  }
  return out;
}

double sigma_weight(const DofMap& dofmap, int overlap, SigmaMode mode) {
  const Mesh& m = dofmap.mesh();
  if (mode == SigmaMode::Aggressive) {
    std::size_t N = 0;
    for (CellId c : m.active_cells()) {
      std::vector<CellId> domain{c};
      if (overlap == 1)
        for (CellId n : face_neighbors(m, c)) domain.push_back(n);
      std::vector<CellId> seen;
      for (CellId d : domain) {
        seen.push_back(d);
        for (CellId n : face_neighbors(m, d)) seen.push_back(n);
      }
      std::sort(seen.begin(), seen.end());
      seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
      N = std::max(N, seen.size());
    }
    return 1.0 / static_cast<double>(N + 1);
  }
  std::vector<int> count(dofmap.num_free(), 0);
  for (const auto& b : schwarz_blocks(dofmap, overlap))
    for (int i : b) ++count[i];
  const int nmax = count.empty() ? 0 : *std::max_element(count.begin(), count.end());
  return 1.0 / (nmax + 2);
}

SchwarzSmoother::SchwarzSmoother(const SparseMatrix& A, std::vector<std::vector<int>> blocks, double sigma)
    : n_(static_cast<int>(A.rows())), sigma_(sigma), blocks_(std::move(blocks)) {
  std::vector<int> local(n_, -1);
  factors_.reserve(blocks_.size());
  for (const auto& b : blocks_) {
    const int m = static_cast<int>(b.size());
    for (int i = 0; i < m; ++i) local[b[i]] = i;
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(m, m);
    for (int j = 0; j < m; ++j)
      for (SparseMatrix::InnerIterator it(A, b[j]); it; ++it)
        if (const int i = local[it.row()]; i >= 0) M(i, j) = it.value();
    for (int i : b) local[i] = -1;
    Eigen::LLT<Eigen::MatrixXd> llt(M);
    if (llt.info() != Eigen::Success) throw MultigridError("Schwarz block is not positive definite");
    const Eigen::MatrixXd& L = llt.matrixLLT();
    std::vector<double> packed;
    packed.reserve(static_cast<std::size_t>(m) * (m + 1) / 2);
    for (int j = 0; j < m; ++j)
      for (int i = j; i < m; ++i) packed.push_back(L(i, j));
    factors_.push_back(std::move(packed));
  }
}

void SchwarzSmoother::apply(const Eigen::VectorXd& r, Eigen::VectorXd& z, const std::vector<int>* order) const {
  z = Eigen::VectorXd::Zero(n_);
  std::vector<double> buf;
  const std::size_t nb = blocks_.size();
  for (std::size_t k = 0; k < nb; ++k) {
    const std::size_t bi = order ? static_cast<std::size_t>((*order)[k]) : k;
    const auto& b = blocks_[bi];
    const int m = static_cast<int>(b.size());
    buf.resize(m);
    for (int i = 0; i < m; ++i) buf[i] = r[b[i]];
    packed_solve(factors_[bi], m, buf.data());
    for (int i = 0; i < m; ++i) z[b[i]] += buf[i];
  }
  z *= sigma_;
}

double smoothed_max_eigenvalue(const SparseMatrix& A, const SchwarzSmoother& s, int steps) {
  std::mt19937_64 rng(12345);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Eigen::VectorXd x(A.rows()), z;
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = dist(rng);
  double lambda = 0.0;
  for (int it = 0; it < steps; ++it) {
    const Eigen::VectorXd Ax = A * x;
    s.apply(Ax, z);
    const double xAx = x.dot(Ax);
    lambda = (A * z).dot(x) / xAx;
    x = z / std::sqrt(z.dot(A * z));
  }
  return lambda;
}

VCycle::VCycle(const Discretization& fine, const std::vector<Mesh>& coarse_meshes, const LevelOptions& opt) {
  build(fine, coarse_meshes, opt);
}

VCycle::VCycle(const Discretization& fine, const MeshHierarchy& hierarchy, const LevelOptions& opt) {
  if (hierarchy.levels.empty()) throw MultigridError("empty hierarchy");
  std::vector<Mesh> coarse(hierarchy.levels.begin(), hierarchy.levels.end() - 1);
  build(fine, coarse, opt);
}

void VCycle::build(const Discretization& fine, const std::vector<Mesh>& coarse_meshes, const LevelOptions& opt) {
  const ProblemSpec& problem = fine.problem();
  const std::size_t L = coarse_meshes.size() + 1;
  levels_.resize(L);
  provenance_.resize(L);
  for (auto& l : levels_) l = std::make_unique<Level>();
  levels_[L - 1]->A = fine.matrix();

  std::shared_ptr<const DofMap> upper = fine.dofmap_ptr();
  for (std::size_t l = L - 1; l >= 1; --l) {
    const Mesh& cm = coarse_meshes[l - 1];
    const Mesh& fm = upper->mesh();
    const bool same = cm.active_cells() == fm.active_cells();
    Level& lev = *levels_[l];
    lev.transition = same ? LevelTransition::P : LevelTransition::H;
    lev.overlap = same ? opt.overlap_p : opt.overlap_h;
    lev.smoother = std::make_unique<SchwarzSmoother>(lev.A, schwarz_blocks(*upper, lev.overlap),
                                                     sigma_weight(*upper, lev.overlap, opt.sigma_mode));

    std::shared_ptr<const DofMap> lower;
    Prolongation pr;
    if (same) {
      auto mesh = std::make_shared<const Mesh>(cm);
      auto dm = std::make_shared<const DofMap>(*mesh, problem);
      pr = build_prolongation(*dm, *upper, problem.form, nullptr);
      // keep the mesh alive with the dof map
      lower = std::shared_ptr<const DofMap>(dm.get(), [dm, mesh](const DofMap*) {});
    } else {
      auto disc = std::make_shared<const Discretization>(cm, problem, fine.delta_k());
      pr = build_prolongation(disc->dofmap(), *upper, problem.form,
                              [&disc](CellId c) -> const Eigen::MatrixXd& { return disc->recovery_matrix(c); });
      lower = std::shared_ptr<const DofMap>(disc, &disc->dofmap());
    }
    lev.P = std::move(pr.P);
    provenance_[l] = std::move(pr.provenance);
    const SparseMatrix AP = lev.A * lev.P;
    SparseMatrix Ac = SparseMatrix(lev.P.transpose()) * AP;
    Ac.prune(0.0);
    levels_[l - 1]->A = std::move(Ac);
    upper = lower;
  }
  coarse_ = std::make_unique<Eigen::SimplicialLLT<SparseMatrix>>(levels_[0]->A);
  if (coarse_->info() != Eigen::Success) throw MultigridError("coarsest operator is not positive definite");
}

void VCycle::apply_level(std::size_t l, const Eigen::VectorXd& r, Eigen::VectorXd& z) const {
  if (l == 0) {
    z = coarse_->solve(r);
    return;
  }
  const Level& lev = *levels_[l];
  Eigen::VectorXd t, rc, zc;
  lev.smoother->apply(r, z);
  Eigen::VectorXd res = r - lev.A * z;
  rc = lev.P.transpose() * res;
  apply_level(l - 1, rc, zc);
  z += lev.P * zc;
  res = r - lev.A * z;
  lev.smoother->apply(res, t);
  z += t;
}

void VCycle::apply(const Eigen::VectorXd& r, Eigen::VectorXd& z) const { apply_level(levels_.size() - 1, r, z); }

LinearOperator VCycle::as_operator() const {
  return [this](const Eigen::VectorXd& r, Eigen::VectorXd& z) { apply(r, z); };
}

std::string VCycle::debug_json() const {
  nlohmann::ordered_json j;
  j["levels"] = nlohmann::ordered_json::array();
  for (std::size_t l = 0; l < levels_.size(); ++l) {
    const Level& lev = *levels_[l];
    nlohmann::ordered_json e;
    e["size"] = lev.A.rows();
    e["nnz"] = lev.A.nonZeros();
    if (l > 0) {
      e["transition"] = lev.transition == LevelTransition::H ? "h" : "p";
      e["overlap"] = lev.overlap;
      e["sigma"] = lev.smoother->sigma();
      e["blocks"] = lev.smoother->blocks();
      nlohmann::ordered_json p = nlohmann::ordered_json::array();
      for (int k = 0; k < lev.P.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(lev.P, k); it; ++it) p.push_back({it.row(), it.col(), it.value()});
      e["P"] = std::move(p);
      std::vector<std::string> prov;
      for (auto pv : provenance_[l]) prov.push_back(pv == Provenance::GammaTrace ? "gamma" : "direct");
      e["provenance"] = prov;
    }
    j["levels"].push_back(std::move(e));
  }
  return j.dump(1);
}

}  // namespace dpgmg
