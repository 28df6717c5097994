#include "dpgmg/assembly.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>

namespace dpgmg {

namespace {

struct FaceTables {
  std::vector<RefPoint> qp;
  std::vector<double> qw;
  Eigen::MatrixXd V;  // test values
  std::map<int, Eigen::MatrixXd> psi;  // trace basis values by order
};

struct RefTables {
  int nq = 0, nt = 0, nf = 0;
  std::vector<RefPoint> qp;
  std::vector<double> qw;
  Eigen::MatrixXd V, D0, D1;  // test values and reference derivatives
  Eigen::MatrixXd Phi;  // field values
  std::vector<FaceTables> faces;
};

CellShape volume_shape(int dim) { return dim == 1 ? CellShape::Interval : CellShape::Quad; }

std::shared_ptr<const RefTables> ref_tables(int dim, int k, int kt) {
  static std::mutex mu;
  static std::map<std::array<int, 3>, std::shared_ptr<const RefTables>> cache;
  std::lock_guard<std::mutex> lock(mu);
  const std::array<int, 3> key{dim, k, kt};
  if (auto it = cache.find(key); it != cache.end()) return it->second;

  auto t = std::make_shared<RefTables>();
  const Basis test(kt, volume_shape(dim), SpaceKind::ScalarH1);
  const Basis field(k, volume_shape(dim), SpaceKind::ScalarL2);
  const QuadratureRule q = gauss_legendre(kt + 2);
  const int n1 = static_cast<int>(q.points.size());
  if (dim == 1) {
    for (int i = 0; i < n1; ++i) {
      t->qp.push_back({q.points[i], 0.0});
      t->qw.push_back(q.weights[i]);
    }
  } else {
    for (int j = 0; j < n1; ++j)
      for (int i = 0; i < n1; ++i) {
        t->qp.push_back({q.points[i], q.points[j]});
        t->qw.push_back(q.weights[i] * q.weights[j]);
      }
  }
  t->nq = static_cast<int>(t->qp.size());
  t->nt = test.scalar_size();
  t->nf = field.scalar_size();
  t->V.resize(t->nq, t->nt);
  t->D0.resize(t->nq, t->nt);
  t->D1 = Eigen::MatrixXd::Zero(t->nq, t->nt);
  t->Phi.resize(t->nq, t->nf);
  for (int p = 0; p < t->nq; ++p) {
    t->V.row(p) = test.values(t->qp[p]).transpose();
    const Eigen::MatrixXd g = test.gradients(t->qp[p]);
    t->D0.row(p) = g.col(0).transpose();
    if (dim == 2) t->D1.row(p) = g.col(1).transpose();
    t->Phi.row(p) = field.values(t->qp[p]).transpose();
  }
  for (int f = 0; f < face_count(dim); ++f) {
    FaceTables ft;
    if (dim == 1) {
      ft.qp.push_back(face_point(1, f, 0.0));
      ft.qw.push_back(1.0);
    } else {
      for (int i = 0; i < n1; ++i) {
        ft.qp.push_back(face_point(2, f, q.points[i]));
        ft.qw.push_back(q.weights[i]);
      }
    }
    ft.V.resize(ft.qp.size(), t->nt);
    for (std::size_t p = 0; p < ft.qp.size(); ++p) ft.V.row(p) = test.values(ft.qp[p]).transpose();
    for (int o : {k, k + 1}) {
      if (dim == 1) {
        ft.psi[o] = Eigen::MatrixXd::Ones(1, 1);
      } else {
        const LagrangeLine line(o);
        std::vector<double> ts(q.points.begin(), q.points.end());
        ft.psi[o] = line.values_at(ts);
      }
    }
    t->faces.push_back(std::move(ft));
  }
  cache[key] = t;
  return t;
}

double normal_factor(int dim, int face, NormalFactor nf) {
  if (nf == NormalFactor::One) return 1.0;
  const int axis = nf == NormalFactor::Nx ? 0 : 1;
  return face_axis(dim, face) == axis ? face_side(dim, face) : 0.0;
}

struct ElementMatrices {
  Eigen::MatrixXd G, B;
  Eigen::VectorXd l;
};

EvalPoint eval_point(const Cell& cell, int dim, const RefPoint& r) {
  return {to_physical(cell.box, dim, r), cell.id, r};
}

Eigen::VectorXd load_vector(const Mesh& mesh, CellId c, const ProblemSpec& problem, const RefTables& t) {
  const int dim = mesh.dim();
  const Cell& cell = mesh.cell(c);
  const int ntest = static_cast<int>(problem.form.tests.size());
  Eigen::VectorXd l = Eigen::VectorXd::Zero(ntest * t.nt);
  if (problem.loads.empty()) return l;
  const double jac = dim == 1 ? 0.5 * cell.box.width(0) : 0.25 * cell.box.width(0) * cell.box.width(1);
  for (const auto& load : problem.loads) {
    Eigen::VectorXd w(t.nq);
    for (int p = 0; p < t.nq; ++p) w[p] = t.qw[p] * jac * load.fn(eval_point(cell, dim, t.qp[p]));
    l.segment(load.test * t.nt, t.nt) += t.V.transpose() * w;
  }
  return l;
}

ElementMatrices element_matrices(const Mesh& mesh, CellId c, const ProblemSpec& problem, int delta_k,
                                 bool with_load) {
  const FormDescriptor& form = problem.form;
  const int dim = mesh.dim();
  const Cell& cell = mesh.cell(c);
  const int k = cell.order;
  const auto tp = ref_tables(dim, k, k + 1 + delta_k);
  const RefTables& t = *tp;
  const LocalLayout lay = make_layout(form, k);
  const int ntest = static_cast<int>(form.tests.size());
  const int nfield = static_cast<int>(form.fields.size());
  const double hx = cell.box.width(0);
  const double hy = dim == 2 ? cell.box.width(1) : 1.0;
  const double jac = dim == 1 ? 0.5 * hx : 0.25 * hx * hy;

  Eigen::VectorXd wj(t.nq);
  for (int p = 0; p < t.nq; ++p) wj[p] = t.qw[p] * jac;
  const Eigen::MatrixXd Dx = t.D0 * (2.0 / hx);
  const Eigen::MatrixXd Dy = t.D1 * (2.0 / hy);
  auto table = [&](Op op) -> const Eigen::MatrixXd& {
    return op == Op::Value ? t.V : (op == Op::Dx ? Dx : Dy);
  };

  std::vector<EvalPoint> pts;
  pts.reserve(t.nq);
  for (int p = 0; p < t.nq; ++p) pts.push_back(eval_point(cell, dim, t.qp[p]));

  ElementMatrices m;
  const int nt = t.nt;
  m.G = Eigen::MatrixXd::Zero(ntest * nt, ntest * nt);
  m.B = Eigen::MatrixXd::Zero(ntest * nt, lay.size());

  // per trial field: operator table of each test component it reaches
  std::vector<std::map<int, Eigen::MatrixXd>> rows(nfield);
  for (const auto& term : form.volume) {
    auto [it, inserted] = rows[term.field].try_emplace(term.test, Eigen::MatrixXd::Zero(t.nq, nt));
    const Eigen::MatrixXd& op = table(term.op);
    if (term.fn) {
      Eigen::VectorXd c(t.nq);
      for (int p = 0; p < t.nq; ++p) c[p] = term.coef * term.fn(pts[p]);
      it->second += c.asDiagonal() * op;
    } else {
      it->second += term.coef * op;
    }
  }
  const Eigen::MatrixXd wPhi = wj.asDiagonal() * t.Phi;
  for (int f = 0; f < nfield; ++f) {
    for (const auto& [ta, Ta] : rows[f]) {
      m.B.block(ta * nt, f * t.nf, nt, t.nf) += Ta.transpose() * wPhi;
      const Eigen::MatrixXd wTa = wj.asDiagonal() * Ta;
      for (const auto& [tb, Tb] : rows[f]) m.G.block(ta * nt, tb * nt, nt, nt).noalias() += wTa.transpose() * Tb;
    }
  }
  const Eigen::MatrixXd mass = t.V.transpose() * (wj.asDiagonal() * t.V);
  for (int ti = 0; ti < ntest; ++ti) m.G.block(ti * nt, ti * nt, nt, nt) += form.beta * mass;

  const int toff = lay.num_field_dofs();
  for (int f = 0; f < face_count(dim); ++f) {
    const FaceTables& ft = t.faces[f];
    const double fj = dim == 1 ? 1.0 : 0.5 * (face_axis(2, f) == 0 ? hy : hx);
    Eigen::VectorXd fw(ft.qw.size());
    for (std::size_t p = 0; p < ft.qw.size(); ++p) fw[p] = ft.qw[p] * fj;
    for (const auto& term : form.faces) {
      const double nf = normal_factor(dim, f, term.normal);
      if (nf == 0.0) continue;
      const int var = term.trace;
      const Eigen::MatrixXd& psi = ft.psi.at(lay.trace_order[var]);
      m.B.block(term.test * nt, toff + lay.trace_local(var, f, 0), nt, lay.trace_nodes[var]) +=
          (term.coef * nf) * ft.V.transpose() * (fw.asDiagonal() * psi);
    }
  }
  if (with_load) {
    m.l = load_vector(mesh, c, problem, t);
  } else {
    m.l = Eigen::VectorXd::Zero(ntest * nt);
  }
  return m;
}

}  // namespace

LocalSystem local_system(const Mesh& mesh, CellId cell, const ProblemSpec& problem, int delta_k) {
  if (delta_k < 1) throw AssemblyError("test enrichment delta_k must be at least 1");
  if (!mesh.is_active(cell)) throw MeshError("local_system: cell is not active");
  ElementMatrices em = element_matrices(mesh, cell, problem, delta_k, true);
  LocalSystem ls;
  Eigen::LLT<Eigen::MatrixXd> llt(em.G);
  if (llt.info() != Eigen::Success) throw AssemblyError("Gram matrix is not positive definite");
  const Eigen::MatrixXd W = llt.matrixL().solve(em.B);
  const Eigen::VectorXd y = llt.matrixL().solve(em.l);
  ls.K = W.transpose() * W;
  ls.F = W.transpose() * y;
  ls.lnorm2 = y.squaredNorm();
  ls.G = std::move(em.G);
  ls.B = std::move(em.B);
  ls.l = std::move(em.l);
  return ls;
}

double local_energy_error(const LocalSystem& ls, const Eigen::VectorXd& x) {
  Eigen::LLT<Eigen::MatrixXd> llt(ls.G);
  const Eigen::VectorXd r = ls.l - ls.B * x;
  return std::sqrt(std::max(0.0, r.dot(llt.solve(r))));
}

Condensed condense(const Eigen::MatrixXd& K, const Eigen::VectorXd& F, const std::vector<int>& field_idx,
                   const std::vector<int>& trace_idx) {
  const int nf = static_cast<int>(field_idx.size());
  const int nt = static_cast<int>(trace_idx.size());
  Eigen::MatrixXd K11(nf, nf), K12(nf, nt), K22(nt, nt);
  Eigen::VectorXd F1(nf), F2(nt);
  for (int i = 0; i < nf; ++i) {
    F1[i] = F[field_idx[i]];
    for (int j = 0; j < nf; ++j) K11(i, j) = K(field_idx[i], field_idx[j]);
    for (int j = 0; j < nt; ++j) K12(i, j) = K(field_idx[i], trace_idx[j]);
  }
  for (int i = 0; i < nt; ++i) {
    F2[i] = F[trace_idx[i]];
    for (int j = 0; j < nt; ++j) K22(i, j) = K(trace_idx[i], trace_idx[j]);
  }
  Eigen::LLT<Eigen::MatrixXd> llt(K11);
  if (llt.info() != Eigen::Success) throw AssemblyError("field block is singular");
  Condensed c;
  c.E = llt.solve(K12);
  c.e = llt.solve(F1);
  c.S = K22 - K12.transpose() * c.E;
  c.S = 0.5 * (c.S + c.S.transpose()).eval();
  c.g = F2 - K12.transpose() * c.e;
  return c;
}

Eigen::VectorXd recover_fields(const Condensed& c, const Eigen::VectorXd& traces) {
  if (traces.size() != c.E.cols()) throw std::invalid_argument("recover_fields: size mismatch");
  return c.e - c.E * traces;
}

// ---------------------------------------------------------------------------

const Eigen::VectorXd& Solution::cell_fields(CellId c) const {
  const auto& act = mesh->active_cells();
  auto it = std::lower_bound(act.begin(), act.end(), c);
  if (it == act.end() || *it != c) throw MeshError("cell is not active in this solution");
  return fields[it - act.begin()];
}

double Solution::eval(int field, CellId cell, const RefPoint& ref) const {
  const LocalLayout& lay = dofmap->layout();
  thread_local std::map<std::pair<int, int>, std::shared_ptr<const Basis>> bases;
  auto& b = bases[{lay.dim, lay.order}];
  if (!b) b = std::make_shared<Basis>(lay.order, volume_shape(lay.dim), SpaceKind::ScalarL2);
  const Eigen::VectorXd& f = cell_fields(cell);
  return f.segment(field * lay.field_scalar, lay.field_scalar).dot(b->values(ref));
}

double Solution::eval(int field, const Point& x) const {
  const CellId c = mesh->locate(x);
  if (c < 0) throw MeshError("point outside the mesh");
  return eval(field, c, to_reference(mesh->cell(c).box, mesh->dim(), x));
}

FieldEvaluator Solution::evaluator() const {
  auto self = std::make_shared<const Solution>(*this);
  return [self](int field, const EvalPoint& p) {
    const Mesh& m = *self->mesh;
    const int dim = m.dim();
    CellId c = p.cell;
    if (m.is_active(c)) return self->eval(field, c, p.ref);
    // same tree: move to the active cell holding the point
    if (m.contains_id(c) && m.cell(c).box.contains(p.x, dim)) {
      while (c >= 0 && !m.is_active(c) && !m.is_refined(c)) c = m.cell(c).parent;
      while (c >= 0 && m.is_refined(c)) {
        CellId next = -1;
        for (CellId ch : m.cell(c).children)
          if (m.cell(ch).box.contains(p.x, dim)) {
            next = ch;
            break;
          }
        c = next;
      }
      if (c >= 0 && m.is_active(c)) return self->eval(field, c, to_reference(m.cell(c).box, dim, p.x));
    }
    return self->eval(field, p.x);
  };
}

// ---------------------------------------------------------------------------

struct Discretization::Kernel {
  Eigen::LLT<Eigen::MatrixXd> gram;
  Eigen::MatrixXd W;
  Eigen::MatrixXd K;
  Eigen::LLT<Eigen::MatrixXd> k11;
  std::shared_ptr<const Eigen::MatrixXd> E;
  Eigen::MatrixXd S;
};

std::shared_ptr<const Discretization::Kernel> Discretization::kernel(CellId c, bool& cached) {
  const Cell& cell = mesh_->cell(c);
  const bool cacheable = !problem_.form.variable_coefficients();
  const std::array<double, 2> key{cell.box.width(0), mesh_->dim() == 2 ? cell.box.width(1) : 0.0};
  cached = cacheable;
  if (cacheable) {
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  }
  ElementMatrices em = element_matrices(*mesh_, c, problem_, delta_k_, false);
  auto k = std::make_shared<Kernel>();
  k->gram.compute(em.G);
  if (k->gram.info() != Eigen::Success) throw AssemblyError("Gram matrix is not positive definite");
  k->W = k->gram.matrixL().solve(em.B);
  k->K = Eigen::MatrixXd::Zero(k->W.cols(), k->W.cols());
  k->K.selfadjointView<Eigen::Lower>().rankUpdate(k->W.transpose());
  k->K = k->K.selfadjointView<Eigen::Lower>();
  const int nf = dofmap_->layout().num_field_dofs();
  const int nt = dofmap_->layout().num_trace;
  k->k11.compute(k->K.topLeftCorner(nf, nf));
  if (k->k11.info() != Eigen::Success) throw AssemblyError("field block is singular");
  const Eigen::MatrixXd K12 = k->K.topRightCorner(nf, nt);
  auto E = std::make_shared<Eigen::MatrixXd>(k->k11.solve(K12));
  k->S = k->K.bottomRightCorner(nt, nt) - K12.transpose() * *E;
  k->S = 0.5 * (k->S + k->S.transpose()).eval();
  k->E = E;
  ++kernels_computed_;
  if (cacheable) cache_[key] = k;
  return k;
}

Discretization::Discretization(const Mesh& mesh, const ProblemSpec& problem, int delta_k)
    : mesh_(std::make_shared<const Mesh>(mesh)), problem_(problem), delta_k_(delta_k) {
  if (delta_k < 1) throw AssemblyError("test enrichment delta_k must be at least 1");
  problem_.form.validate();
  dofmap_ = std::make_shared<const DofMap>(*mesh_, problem_);
  const DofMap& dm = *dofmap_;
  const LocalLayout& lay = dm.layout();
  const int nf = lay.num_field_dofs();
  const int nt = lay.num_trace;
  const int n = dm.num_free();
  const auto& act = mesh_->active_cells();
  cells_.resize(act.size());
  b_ = Eigen::VectorXd::Zero(n);
  A_.resize(n, n);

  std::vector<Eigen::Triplet<double>> trip;
  auto flush = [&]() {
    SparseMatrix part(n, n);
    part.setFromTriplets(trip.begin(), trip.end());
    A_ += part;
    trip.clear();
  };

  const int kt = lay.order + 1 + delta_k_;
  const auto tables = ref_tables(mesh_->dim(), lay.order, kt);
  for (std::size_t pos = 0; pos < act.size(); ++pos) {
    const CellId c = act[pos];
    bool cached = false;
    auto ker = kernel(c, cached);
    CellData& cd = cells_[pos];
    if (cached) cd.kernel = ker;
    cd.E = ker->E;

    const Eigen::VectorXd l = load_vector(*mesh_, c, problem_, *tables);
    Eigen::VectorXd F;
    if (l.isZero(0.0)) {
      F = Eigen::VectorXd::Zero(nf + nt);
    } else {
      F = ker->W.transpose() * ker->gram.matrixL().solve(l);
    }

    Eigen::MatrixXd S;
    Eigen::VectorXd g;
    const auto pins = dm.pins_in(c);
    if (pins.empty()) {
      cd.e = ker->k11.solve(F.head(nf));
      g = F.tail(nt) - ker->E->transpose() * F.head(nf);
    } else {
      std::vector<int> fidx, tidx;
      std::vector<bool> pinned(nf, false);
      Eigen::VectorXd Fp = F;
      for (const auto& p : pins) {
        pinned[p.local] = true;
        Fp -= ker->K.col(p.local) * p.value;
      }
      for (int i = 0; i < nf; ++i)
        if (!pinned[i]) fidx.push_back(i);
      for (int i = 0; i < nt; ++i) tidx.push_back(nf + i);
      Condensed cp = condense(ker->K, Fp, fidx, tidx);
      auto Ep = std::make_shared<Eigen::MatrixXd>(Eigen::MatrixXd::Zero(nf, nt));
      cd.e = Eigen::VectorXd::Zero(nf);
      for (std::size_t i = 0; i < fidx.size(); ++i) {
        Ep->row(fidx[i]) = cp.E.row(i);
        cd.e[fidx[i]] = cp.e[i];
      }
      for (const auto& p : pins) cd.e[p.local] = p.value;
      cd.E_pinned = Ep;
      S = std::move(cp.S);
      g = std::move(cp.g);
    }
    const Eigen::MatrixXd& Sc = pins.empty() ? ker->S : S;

    // local traces -> slots touched by this cell
    std::vector<int> slots;
    for (int r = 0; r < nt; ++r)
      for (const auto& e : dm.row(c, r)) slots.push_back(e.slot);
    std::sort(slots.begin(), slots.end());
    slots.erase(std::unique(slots.begin(), slots.end()), slots.end());
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(nt, slots.size());
    for (int r = 0; r < nt; ++r)
      for (const auto& e : dm.row(c, r)) {
        const auto j = std::lower_bound(slots.begin(), slots.end(), e.slot) - slots.begin();
        T(r, j) += e.weight;
      }
    const Eigen::MatrixXd ST = Sc * T;
    const Eigen::MatrixXd As = T.transpose() * ST;
    const Eigen::VectorXd gs = T.transpose() * g;
    for (std::size_t i = 0; i < slots.size(); ++i) {
      const int fi = dm.free_index(slots[i]);
      if (fi < 0) continue;
      double bi = gs[i];
      for (std::size_t j = 0; j < slots.size(); ++j) {
        const int fj = dm.free_index(slots[j]);
        if (fj < 0) {
          bi -= As(i, j) * dm.dirichlet_value(slots[j]);
        } else {
          trip.emplace_back(fi, fj, As(i, j));
        }
      }
      b_[fi] += bi;
    }
    if (trip.size() > 4'000'000) flush();
  }
  flush();
  A_.makeCompressed();
}

Eigen::VectorXd Discretization::recover(CellId c, const Eigen::VectorXd& local_traces) const {
  const auto& act = mesh_->active_cells();
  auto it = std::lower_bound(act.begin(), act.end(), c);
  if (it == act.end() || *it != c) throw MeshError("cell is not active in this discretization");
  const CellData& cd = cells_[it - act.begin()];
  const Eigen::MatrixXd& E = cd.E_pinned ? *cd.E_pinned : *cd.E;
  return cd.e - E * local_traces;
}

const Eigen::MatrixXd& Discretization::recovery_matrix(CellId c) const {
  const auto& act = mesh_->active_cells();
  auto it = std::lower_bound(act.begin(), act.end(), c);
  if (it == act.end() || *it != c) throw MeshError("cell is not active in this discretization");
  return *cells_[it - act.begin()].E;
}

Solution Discretization::solution(const Eigen::VectorXd& free) const {
  Solution s;
  s.mesh = mesh_;
  s.dofmap = dofmap_;
  s.slots = dofmap_->expand(free);
  const auto& act = mesh_->active_cells();
  s.fields.resize(act.size());
  for (std::size_t p = 0; p < act.size(); ++p)
    s.fields[p] = recover(act[p], dofmap_->local_traces(act[p], s.slots));
  return s;
}

EnergyReport Discretization::energy(const Solution& s) const {
  EnergyReport rep;
  const auto& act = mesh_->active_cells();
  const LocalLayout& lay = dofmap_->layout();
  const auto tables = ref_tables(mesh_->dim(), lay.order, lay.order + 1 + delta_k_);
  double err2 = 0.0, norm2 = 0.0;
  auto* self = const_cast<Discretization*>(this);
  for (std::size_t p = 0; p < act.size(); ++p) {
    const CellId c = act[p];
    std::shared_ptr<const Kernel> ker = cells_[p].kernel;
    if (!ker) {
      bool cached = false;
      ker = self->kernel(c, cached);
    }
    Eigen::VectorXd x(lay.size());
    x.head(lay.num_field_dofs()) = s.fields[p];
    x.tail(lay.num_trace) = dofmap_->local_traces(c, s.slots);
    const Eigen::VectorXd l = load_vector(*mesh_, c, problem_, *tables);
    const Eigen::VectorXd y = ker->gram.matrixL().solve(l);
    const Eigen::VectorXd wx = ker->W * x;
    const double e2 = (y - wx).squaredNorm();
    rep.per_cell.push_back(std::sqrt(e2));
    err2 += e2;
    norm2 += wx.squaredNorm();
  }
  rep.error = std::sqrt(err2);
  rep.solution_norm = std::sqrt(norm2);
  return rep;
}

UncondensedSystem assemble_uncondensed(const Mesh& mesh, const ProblemSpec& problem, int delta_k) {
  const DofMap dm(mesh, problem);
  const LocalLayout& lay = dm.layout();
  const int nf = lay.num_field_dofs();
  const int nt = lay.num_trace;
  const auto& act = mesh.active_cells();
  UncondensedSystem u;
  for (CellId c : act) {
    u.field_offset.push_back(u.num_field);
    std::vector<int> loc;
    std::vector<bool> pinned(nf, false);
    for (const auto& p : dm.pins_in(c)) pinned[p.local] = true;
    for (int i = 0; i < nf; ++i)
      if (!pinned[i]) loc.push_back(i);
    u.num_field += static_cast<int>(loc.size());
    u.field_local.push_back(loc);
  }
  const int n = u.num_field + dm.num_free();
  u.b = Eigen::VectorXd::Zero(n);
  std::vector<Eigen::Triplet<double>> trip;
  for (std::size_t p = 0; p < act.size(); ++p) {
    const CellId c = act[p];
    const LocalSystem ls = local_system(mesh, c, problem, delta_k);
    // global index and weight of each local unknown, fixed values separately
    std::vector<std::vector<std::pair<int, double>>> map(nf + nt);
    Eigen::VectorXd fixed = Eigen::VectorXd::Zero(nf + nt);
    for (std::size_t i = 0; i < u.field_local[p].size(); ++i)
      map[u.field_local[p][i]].push_back({u.field_offset[p] + static_cast<int>(i), 1.0});
    for (const auto& pin : dm.pins_in(c)) fixed[pin.local] = pin.value;
    for (int r = 0; r < nt; ++r)
      for (const auto& e : dm.row(c, r)) {
        const int fi = dm.free_index(e.slot);
        if (fi >= 0)
          map[nf + r].push_back({u.num_field + fi, e.weight});
        else
          fixed[nf + r] += e.weight * dm.dirichlet_value(e.slot);
      }
    const Eigen::VectorXd rhs = ls.F - ls.K * fixed;
    for (int i = 0; i < nf + nt; ++i) {
      for (const auto& [gi, wi] : map[i]) {
        u.b[gi] += wi * rhs[i];
        for (int j = 0; j < nf + nt; ++j)
          for (const auto& [gj, wj] : map[j]) trip.emplace_back(gi, gj, wi * ls.K(i, j) * wj);
      }
    }
  }
  u.A.resize(n, n);
  u.A.setFromTriplets(trip.begin(), trip.end());
  return u;
}

std::vector<double> field_l2_errors(const Solution& s, const ProblemSpec& problem, int remove_mean_field) {
  if (!problem.exact) throw AssemblyError("problem has no exact solution");
  const Mesh& mesh = *s.mesh;
  const int dim = mesh.dim();
  const LocalLayout& lay = s.dofmap->layout();
  const Basis b(lay.order, volume_shape(dim), SpaceKind::ScalarL2);
  const QuadratureRule q = gauss_legendre(lay.order + 4);
  std::vector<RefPoint> qp;
  std::vector<double> qw;
  for (std::size_t j = 0; j < (dim == 2 ? q.points.size() : 1); ++j)
    for (std::size_t i = 0; i < q.points.size(); ++i) {
      qp.push_back({q.points[i], dim == 2 ? q.points[j] : 0.0});
      qw.push_back(q.weights[i] * (dim == 2 ? q.weights[j] : 1.0));
    }
  Eigen::MatrixXd vals(qp.size(), b.scalar_size());
  for (std::size_t p = 0; p < qp.size(); ++p) vals.row(p) = b.values(qp[p]).transpose();
  const int nfield = lay.num_fields;
  std::vector<double> err(nfield, 0.0);
  double mean = 0.0, vol = 0.0;
  const auto& act = mesh.active_cells();
  auto pass = [&](bool measure_mean) {
    for (std::size_t c = 0; c < act.size(); ++c) {
      const Cell& cell = mesh.cell(act[c]);
      const double jac = dim == 1 ? 0.5 * cell.box.width(0) : 0.25 * cell.box.width(0) * cell.box.width(1);
      for (int f = 0; f < nfield; ++f) {
        if (measure_mean && f != remove_mean_field) continue;
        const Eigen::VectorXd uh = vals * s.fields[c].segment(f * lay.field_scalar, lay.field_scalar);
        for (std::size_t p = 0; p < qp.size(); ++p) {
          const double d = uh[p] - problem.exact(f, to_physical(cell.box, dim, qp[p]));
          const double w = qw[p] * jac;
          if (measure_mean) {
            mean += w * d;
            vol += w;
          } else {
            const double dd = f == remove_mean_field ? d - mean : d;
            err[f] += w * dd * dd;
          }
        }
      }
    }
  };
  if (remove_mean_field >= 0) {
    pass(true);
    mean /= vol;
  }
  pass(false);
  for (double& e : err) e = std::sqrt(e);
  return err;
}

void write_matrix_market(const SparseMatrix& A, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << A.rows() << ' ' << A.cols() << ' ' << A.nonZeros() << '\n';
  out << std::setprecision(17);
  for (int k = 0; k < A.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(A, k); it; ++it)
      out << it.row() + 1 << ' ' << it.col() + 1 << ' ' << it.value() << '\n';
}

}  // namespace dpgmg
