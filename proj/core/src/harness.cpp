#include "dpgmg/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <Eigen/SparseCholesky>

#include "json.hpp"

namespace dpgmg {

using json = nlohmann::ordered_json;

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

int to_int(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  int out = 0;
  try {
    out = std::stoi(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != v.size()) throw ConfigError("option '" + key + "' expects an integer, got '" + v + "'");
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double out = 0;
  try {
    out = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != v.size()) throw ConfigError("option '" + key + "' expects a number, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("option '" + key + "' expects true or false, got '" + v + "'");
}

std::string num(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

bool is_power_of_two(int w) { return w >= 1 && (w & (w - 1)) == 0; }

int log2i(int w) {
  int l = 0;
  while ((1 << l) < w) ++l;
  return l;
}

ProblemSpec problem_of(const ExperimentConfig& c) { return make_problem(c.problem, c.dim, c.effective_re()); }

Mesh uniform_mesh(const ExperimentConfig& c, const ProblemSpec& p, int width, int order) {
  return Mesh::uniform(c.dim, {width, c.dim == 2 ? width : 1}, p.domain, order);
}

// Coarse meshes (coarsest first) of the configured solver for `fine`.
std::vector<Mesh> coarse_levels(const ExperimentConfig& c, const Mesh& fine) {
  switch (c.two_grid) {
    case TwoGrid::P:
      return {fine.with_order(fine.max_active_order() / 2)};
    case TwoGrid::H:
      return {fine.roots_only(fine.max_active_order())};
    case TwoGrid::None:
      break;
  }
  const MeshHierarchy h = build_hierarchy(fine, c.k_coarse, c.skip_intermediate_p);
  return std::vector<Mesh>(h.levels.begin(), h.levels.end() - 1);
}

void count_levels(const std::vector<Mesh>& coarse, const Mesh& fine, int& h, int& p) {
  h = p = 0;
  for (std::size_t i = 0; i < coarse.size(); ++i) {
    const Mesh& upper = i + 1 < coarse.size() ? coarse[i + 1] : fine;
    if (coarse[i].active_cells() == upper.active_cells())
      ++p;
    else
      ++h;
  }
}

LevelOptions level_options(const ExperimentConfig& c) { return {c.overlap_h, c.overlap_p, c.sigma_mode}; }

void fill_geometry(ReportRow& row, const Mesh& m) {
  double hmax = 0.0, hmin = 1e300;
  for (CellId id : m.active_cells()) {
    const double h = m.cell(id).box.width(0);
    hmax = std::max(hmax, h);
    hmin = std::min(hmin, h);
  }
  row.h_max = hmax;
  row.h_min = hmin;
  row.elements = static_cast<int>(m.num_active());
}

struct LinearRun {
  Eigen::VectorXd x;
  SolveReport report;
  int h_levels = 0, p_levels = 0;
};

// Multigrid-preconditioned CG on a discretization's condensed system.
LinearRun solve_mg(const ExperimentConfig& c, const Discretization& d, const std::vector<Mesh>& coarse,
                   const Eigen::VectorXd& rhs, const Eigen::VectorXd* x0) {
  LinearRun run;
  count_levels(coarse, d.mesh(), run.h_levels, run.p_levels);
  const VCycle vc(d, coarse, level_options(c));
  run.x = x0 ? *x0 : Eigen::VectorXd::Zero(d.size());
  run.report = pcg(as_operator(d.matrix()), rhs, vc.as_operator(), c.tol, run.x);
  return run;
}

Solution zero_solution(const Mesh& mesh, const ProblemSpec& p) {
  Solution s;
  s.mesh = std::make_shared<const Mesh>(mesh);
  auto dm = std::make_shared<const DofMap>(*s.mesh, p);
  s.dofmap = dm;
  s.slots = dm->expand(Eigen::VectorXd::Zero(dm->num_free()));
  s.fields.assign(mesh.num_active(), Eigen::VectorXd::Zero(dm->layout().num_field_dofs()));
  return s;
}

double newton_threshold(const ExperimentConfig& c, std::optional<double> previous_rel) {
  if (!previous_rel) return c.newton_eps0;
  return std::max(c.newton_floor, std::min(c.newton_eps0, 0.1 * *previous_rel));
}

}  // namespace

double ExperimentConfig::effective_re() const {
  if (re > 0) return re;
  if (problem == "navier-stokes" || problem == "kovasznay") return 40.0;
  if (problem == "cavity-ns") return 100.0;
  return 0.0;
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (key == "problem") {
    problem = v;
  } else if (key == "dim") {
    dim = to_int(key, v);
  } else if (key == "k") {
    k = to_int(key, v);
  } else if (key == "delta-k") {
    delta_k = to_int(key, v);
  } else if (key == "width") {
    width = to_int(key, v);
  } else if (key == "coarse-width") {
    coarse_width = to_int(key, v);
  } else if (key == "two-grid") {
    if (v == "none")
      two_grid = TwoGrid::None;
    else if (v == "h")
      two_grid = TwoGrid::H;
    else if (v == "p")
      two_grid = TwoGrid::P;
    else
      throw ConfigError("two-grid must be none, h or p");
  } else if (key == "k-coarse") {
    k_coarse = to_int(key, v);
  } else if (key == "skip-intermediate-p") {
    skip_intermediate_p = to_bool(key, v);
  } else if (key == "overlap-h") {
    overlap_h = to_int(key, v);
  } else if (key == "overlap-p") {
    overlap_p = to_int(key, v);
  } else if (key == "sigma-mode") {
    if (v == "aggressive")
      sigma_mode = SigmaMode::Aggressive;
    else if (v == "conservative")
      sigma_mode = SigmaMode::Conservative;
    else
      throw ConfigError("sigma-mode must be aggressive or conservative");
  } else if (key == "tol") {
    tol = to_double(key, v);
  } else if (key == "adaptive") {
    adaptive = to_bool(key, v);
  } else if (key == "refs") {
    refs = to_int(key, v);
  } else if (key == "fraction") {
    fraction = to_double(key, v);
  } else if (key == "re") {
    re = to_double(key, v);
  } else if (key == "newton-eps0") {
    newton_eps0 = to_double(key, v);
  } else if (key == "newton-floor") {
    newton_floor = to_double(key, v);
  } else if (key == "newton-max-steps") {
    newton_max_steps = to_int(key, v);
  } else if (key == "background-steps") {
    background_steps = to_int(key, v);
  } else if (key == "guess") {
    if (v == "zero")
      guess = GuessPolicy::Zero;
    else if (v == "previous")
      guess = GuessPolicy::Previous;
    else if (v == "both")
      guess = GuessPolicy::Both;
    else
      throw ConfigError("guess must be zero, previous or both");
  } else if (key == "out") {
    out = v;
  } else if (key == "format") {
    if (v == "json")
      format = ReportFormat::Json;
    else if (v == "csv")
      format = ReportFormat::Csv;
    else
      throw ConfigError("format must be json or csv");
  } else {
    throw ConfigError("unknown option '" + key + "'");
  }
}

void ExperimentConfig::validate() const {
  static const std::vector<std::string> known{"poisson", "stokes", "navier-stokes", "kovasznay", "cavity",
                                              "cavity-ns"};
  if (std::find(known.begin(), known.end(), problem) == known.end())
    throw ConfigError("unknown problem '" + problem + "'");
  if (dim != 1 && dim != 2) throw ConfigError("dim must be 1 or 2");
  if (dim == 1 && problem != "poisson") throw ConfigError("only poisson runs in 1D");
  if (k < 1) throw ConfigError("k must be at least 1");
  if (delta_k == 0 || delta_k < -1) throw ConfigError("delta-k must be positive");
  if (width < 2 || !is_power_of_two(width)) throw ConfigError("width must be a power of 2, at least 2");
  if (coarse_width < 1 || !is_power_of_two(coarse_width) || coarse_width > width)
    throw ConfigError("coarse-width must be a power of 2 not above width");
  if (k_coarse < 0 || k_coarse > k) throw ConfigError("k-coarse must lie in [0, k]");
  if ((overlap_h != 0 && overlap_h != 1) || (overlap_p != 0 && overlap_p != 1))
    throw ConfigError("overlaps must be 0 or 1");
  if (!(tol > 0)) throw ConfigError("tol must be positive");
  if (refs < 0) throw ConfigError("refs must be non-negative");
  if (!(fraction > 0 && fraction <= 1)) throw ConfigError("fraction must lie in (0, 1]");
  if (!(newton_eps0 > 0) || !(newton_floor > 0)) throw ConfigError("Newton thresholds must be positive");
  if (newton_max_steps < 1 || background_steps < 1) throw ConfigError("Newton step counts must be positive");
  if (re < 0) throw ConfigError("re must be non-negative");
  if (adaptive && problem != "cavity" && problem != "cavity-ns")
    throw ConfigError("adaptive runs are defined for the cavity problems");
}

std::string ExperimentConfig::to_text() const {
  std::ostringstream os;
  auto tg = two_grid == TwoGrid::None ? "none" : (two_grid == TwoGrid::H ? "h" : "p");
  auto gp = guess == GuessPolicy::Zero ? "zero" : (guess == GuessPolicy::Previous ? "previous" : "both");
  os << "problem = " << problem << "\n"
     << "dim = " << dim << "\n"
     << "k = " << k << "\n"
     << "delta-k = " << effective_delta_k() << "\n"
     << "width = " << width << "\n"
     << "coarse-width = " << coarse_width << "\n"
     << "two-grid = " << tg << "\n"
     << "k-coarse = " << k_coarse << "\n"
     << "skip-intermediate-p = " << (skip_intermediate_p ? "true" : "false") << "\n"
     << "overlap-h = " << overlap_h << "\n"
     << "overlap-p = " << overlap_p << "\n"
     << "sigma-mode = " << (sigma_mode == SigmaMode::Aggressive ? "aggressive" : "conservative") << "\n"
     << "tol = " << num(tol) << "\n"
     << "adaptive = " << (adaptive ? "true" : "false") << "\n"
     << "refs = " << refs << "\n"
     << "fraction = " << num(fraction) << "\n"
     << "re = " << num(effective_re()) << "\n"
     << "newton-eps0 = " << num(newton_eps0) << "\n"
     << "newton-floor = " << num(newton_floor) << "\n"
     << "newton-max-steps = " << newton_max_steps << "\n"
     << "background-steps = " << background_steps << "\n"
     << "guess = " << gp << "\n";
  return os.str();
}

ExperimentConfig parse_config(const std::string& text, ExperimentConfig base) {
  std::istringstream in(text);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(n) + ": expected key = value");
    base.set(trim(t.substr(0, eq)), t.substr(eq + 1));
  }
  return base;
}

std::uint64_t config_hash(const ExperimentConfig& c) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : c.to_text()) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

bool TableReport::all_converged() const {
  return std::all_of(rows.begin(), rows.end(), [](const ReportRow& r) { return r.converged; });
}

double field_l2_norm(const Solution& s) {
  const Mesh& m = *s.mesh;
  const int dim = m.dim();
  const LocalLayout& lay = s.dofmap->layout();
  const CellShape shape = dim == 1 ? CellShape::Interval : CellShape::Quad;
  const Basis b(lay.order, shape, SpaceKind::ScalarL2);
  const QuadratureRule q = gauss_legendre(lay.order + 2);
  // reference mass matrix of one scalar field
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(lay.field_scalar, lay.field_scalar);
  const std::size_t nq = q.points.size();
  for (std::size_t j = 0; j < (dim == 2 ? nq : 1); ++j)
    for (std::size_t i = 0; i < nq; ++i) {
      const Eigen::VectorXd v = b.values({q.points[i], dim == 2 ? q.points[j] : 0.0});
      M += (q.weights[i] * (dim == 2 ? q.weights[j] : 1.0)) * v * v.transpose();
    }
  double total = 0.0;
  const auto& act = m.active_cells();
  for (std::size_t c = 0; c < act.size(); ++c) {
    const Box& box = m.cell(act[c]).box;
    const double jac = dim == 1 ? 0.5 * box.width(0) : 0.25 * box.width(0) * box.width(1);
    for (int f = 0; f < lay.num_fields; ++f) {
      const auto u = s.fields[c].segment(f * lay.field_scalar, lay.field_scalar);
      total += jac * u.dot(M * u);
    }
  }
  return std::sqrt(total);
}

NewtonResult newton_solve(const ExperimentConfig& c, const Mesh& mesh, const ProblemSpec& base,
                          const Solution* initial, const NewtonOptions& opt) {
  if (!base.nonlinear()) throw ConfigError("newton_solve needs a nonlinear problem");
  NewtonResult res;
  Solution bg = initial ? *initial : zero_solution(mesh, base);
  const std::vector<Mesh> coarse = opt.direct ? std::vector<Mesh>{} : coarse_levels(c, mesh);
  count_levels(coarse, mesh, res.h_levels, res.p_levels);
  const int steps = opt.fixed_steps > 0 ? opt.fixed_steps : opt.max_steps;
  for (int step = 1; step <= steps; ++step) {
    const ProblemSpec lin = linearize(base, bg.evaluator());
    const Discretization d(mesh, lin, c.effective_delta_k());
    res.dofs = d.size();
    const Eigen::VectorXd xbg = d.dofmap().restrict_free(bg.slots);
    const Eigen::VectorXd rhs = d.rhs() - d.matrix() * xbg;
    Eigen::VectorXd dx;
    if (opt.direct) {
      Eigen::SimplicialLDLT<SparseMatrix> chol(d.matrix());
      if (chol.info() != Eigen::Success) throw AssemblyError("linearized system is singular");
      dx = chol.solve(rhs);
      res.step_iterations.push_back(0);
    } else {
      const LinearRun run = solve_mg(c, d, coarse, rhs, nullptr);
      dx = run.x;
      res.step_iterations.push_back(run.report.iterations);
      res.solves_converged = res.solves_converged && run.report.converged;
    }
    Solution next = d.solution(xbg + dx);
    Solution diff = next;
    for (std::size_t i = 0; i < diff.fields.size(); ++i) diff.fields[i] -= bg.fields[i];
    res.increment = field_l2_norm(diff);
    res.relative_error = d.energy(next).relative();
    res.steps = step;
    res.increments.push_back(res.increment);
    bg = std::move(next);
    if (opt.fixed_steps == 0 && res.increment < opt.threshold) {
      res.converged = true;
      break;
    }
  }
  if (opt.fixed_steps > 0) res.converged = true;
  res.solution = std::move(bg);
  return res;
}

TableReport run_two_grid(const ExperimentConfig& c) {
  c.validate();
  if (c.two_grid == TwoGrid::None) throw ConfigError("two-grid run needs two-grid = h or p");
  const ProblemSpec prob = problem_of(c);
  TableReport rep;
  rep.experiment = c.two_grid == TwoGrid::H ? "two-grid-h" : "two-grid-p";
  rep.config = c;
  Mesh fine = c.two_grid == TwoGrid::H ? uniform_mesh(c, prob, c.width / 2, c.k).refine_uniform()
                                       : uniform_mesh(c, prob, c.width, c.k);
  ReportRow row;
  row.k = c.k;
  row.width = c.width;
  fill_geometry(row, fine);
  const std::vector<Mesh> coarse = coarse_levels(c, fine);

  ProblemSpec solve_problem = prob;
  Eigen::VectorXd x0;
  if (prob.nonlinear()) {
    // background from a few Newton steps on the linear mesh of the same geometry
    NewtonOptions bo;
    bo.fixed_steps = c.background_steps;
    bo.direct = true;
    const NewtonResult bg = newton_solve(c, fine.with_order(1), prob, nullptr, bo);
    solve_problem = linearize(prob, bg.solution.evaluator());
  }
  const Discretization d(fine, solve_problem, c.effective_delta_k());
  const LinearRun run = solve_mg(c, d, coarse, d.rhs(), nullptr);
  row.dofs = d.size();
  row.h_levels = run.h_levels;
  row.p_levels = run.p_levels;
  row.iterations = run.report.iterations;
  row.converged = run.report.converged;
  rep.rows.push_back(row);
  return rep;
}

TableReport run_multilevel(const ExperimentConfig& c) {
  c.validate();
  const ProblemSpec prob = problem_of(c);
  TableReport rep;
  rep.experiment = "multilevel";
  rep.config = c;
  ExperimentConfig cc = c;
  cc.two_grid = TwoGrid::None;
  const Mesh fine = uniform_mesh(c, prob, c.coarse_width, c.k).refine_uniform(log2i(c.width / c.coarse_width));
  ReportRow row;
  row.k = c.k;
  row.width = c.width;
  fill_geometry(row, fine);
  const std::vector<Mesh> coarse = coarse_levels(cc, fine);
  ProblemSpec solve_problem = prob;
  if (prob.nonlinear()) {
    NewtonOptions bo;
    bo.fixed_steps = c.background_steps;
    bo.direct = true;
    const NewtonResult bg = newton_solve(cc, fine.with_order(1), prob, nullptr, bo);
    solve_problem = linearize(prob, bg.solution.evaluator());
  }
  const Discretization d(fine, solve_problem, c.effective_delta_k());
  const LinearRun run = solve_mg(cc, d, coarse, d.rhs(), nullptr);
  row.dofs = d.size();
  row.h_levels = run.h_levels;
  row.p_levels = run.p_levels;
  row.iterations = run.report.iterations;
  row.converged = run.report.converged;
  rep.rows.push_back(row);
  return rep;
}

TableReport run_adaptive_stokes(const ExperimentConfig& c) {
  c.validate();
  if (c.problem != "cavity") throw ConfigError("adaptive Stokes runs use the cavity problem");
  const ProblemSpec prob = problem_of(c);
  ExperimentConfig cc = c;
  cc.two_grid = TwoGrid::None;
  TableReport rep;
  rep.experiment = "adaptive-stokes";
  rep.config = c;
  Mesh mesh = uniform_mesh(c, prob, 2, c.k);
  std::optional<Solution> previous;
  for (int ref = 0; ref <= c.refs; ++ref) {
    const Discretization d(mesh, prob, c.effective_delta_k());
    const std::vector<Mesh> coarse = coarse_levels(cc, mesh);
    ReportRow row;
    row.k = c.k;
    row.ref = ref;
    row.width = 0;
    fill_geometry(row, mesh);
    row.dofs = d.size();
    Eigen::VectorXd x;
    bool ok = true;
    if (c.guess != GuessPolicy::Previous) {
      const LinearRun run = solve_mg(cc, d, coarse, d.rhs(), nullptr);
      row.iterations = run.report.iterations;
      row.h_levels = run.h_levels;
      row.p_levels = run.p_levels;
      ok = ok && run.report.converged;
      x = run.x;
    }
    if (c.guess != GuessPolicy::Zero) {
      Eigen::VectorXd x0 = Eigen::VectorXd::Zero(d.size());
      if (previous) x0 = d.dofmap().restrict_free(transfer_solution(*previous, d).slots);
      const LinearRun run = solve_mg(cc, d, coarse, d.rhs(), &x0);
      row.iterations_previous = run.report.iterations;
      if (c.guess == GuessPolicy::Previous) row.iterations = run.report.iterations;
      row.h_levels = run.h_levels;
      row.p_levels = run.p_levels;
      ok = ok && run.report.converged;
      if (c.guess == GuessPolicy::Previous) x = run.x;
    }
    row.converged = ok;
    Solution sol = d.solution(x);
    const EnergyReport en = d.energy(sol);
    // l = 0 here, so the relative residual would be identically one
    row.energy_error = en.error;
    rep.rows.push_back(row);
    if (ref < c.refs) {
      const std::set<CellId> marked = greedy_select(en.per_cell, mesh.active_cells(), c.fraction);
      mesh = mesh.refine(marked);
    }
    previous = std::move(sol);
  }
  return rep;
}

TableReport run_adaptive_navier_stokes(const ExperimentConfig& c) {
  c.validate();
  if (c.problem != "cavity-ns") throw ConfigError("adaptive Navier-Stokes runs use the cavity-ns problem");
  const ProblemSpec prob = problem_of(c);
  ExperimentConfig cc = c;
  cc.two_grid = TwoGrid::None;
  TableReport rep;
  rep.experiment = "adaptive-navier-stokes";
  rep.config = c;
  Mesh mesh = uniform_mesh(c, prob, 2, c.k);
  std::optional<Solution> previous;
  std::optional<double> previous_rel;
  for (int ref = 0; ref <= c.refs; ++ref) {
    NewtonOptions opt;
    opt.threshold = newton_threshold(c, previous_rel);
    opt.max_steps = c.newton_max_steps;
    std::optional<Solution> initial;
    if (previous) {
      // target layout from the base problem; the linearized forms share it
      const Discretization target(mesh, cavity_problem(0.0), c.effective_delta_k());
      initial = transfer_solution(*previous, target);
    }
    const NewtonResult nr = newton_solve(cc, mesh, prob, initial ? &*initial : nullptr, opt);
    ReportRow row;
    row.k = c.k;
    row.ref = ref;
    fill_geometry(row, mesh);
    row.dofs = nr.dofs;
    row.h_levels = nr.h_levels;
    row.p_levels = nr.p_levels;
    row.nonlinear_steps = nr.steps;
    row.step_iterations = nr.step_iterations;
    row.iterations = 0;
    for (int it : nr.step_iterations) row.iterations += it;
    row.energy_error = nr.relative_error;
    row.converged = nr.converged && nr.solves_converged;
    rep.rows.push_back(row);
    previous_rel = nr.relative_error;
    if (ref < c.refs) {
      // indicator from the linearization about the converged state
      const ProblemSpec lin = linearize(prob, nr.solution.evaluator());
      const Discretization d(mesh, lin, c.effective_delta_k());
      const EnergyReport en = d.energy(nr.solution);
      const std::set<CellId> marked = greedy_select(en.per_cell, mesh.active_cells(), c.fraction);
      mesh = mesh.refine(marked);
    }
    previous = nr.solution;
  }
  return rep;
}

TableReport run_experiment(const ExperimentConfig& c) {
  c.validate();
  if (c.adaptive) return c.problem == "cavity" ? run_adaptive_stokes(c) : run_adaptive_navier_stokes(c);
  if (c.two_grid != TwoGrid::None) return run_two_grid(c);
  return run_multilevel(c);
}

// ---------------------------------------------------------------------------

namespace {

constexpr int kSchemaVersion = 1;

const std::vector<std::string> kColumns{"k",         "width",      "ref",        "h_max",
                                        "h_min",     "elements",   "dofs",       "h_levels",
                                        "p_levels",  "energy_error", "iterations", "iterations_previous",
                                        "nonlinear_steps", "step_iterations", "converged"};

std::string hex(std::uint64_t h) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

std::string sci(double x) {
  std::ostringstream os;
  os << std::setprecision(6) << std::scientific << x;
  return os.str();
}

json row_json(const ReportRow& r) {
  json j;
  j["k"] = r.k;
  j["width"] = r.width;
  j["ref"] = r.ref;
  j["h_max"] = r.h_max;
  j["h_min"] = r.h_min;
  j["elements"] = r.elements;
  j["dofs"] = r.dofs;
  j["h_levels"] = r.h_levels;
  j["p_levels"] = r.p_levels;
  j["energy_error"] = r.energy_error ? json(*r.energy_error) : json(nullptr);
  j["iterations"] = r.iterations;
  j["iterations_previous"] = r.iterations_previous ? json(*r.iterations_previous) : json(nullptr);
  j["nonlinear_steps"] = r.nonlinear_steps;
  j["step_iterations"] = r.step_iterations;
  j["converged"] = r.converged;
  return j;
}

}  // namespace

std::string format_report(const TableReport& r, ReportFormat f) {
  if (f == ReportFormat::Json) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["experiment"] = r.experiment;
    j["config_hash"] = hex(config_hash(r.config));
    j["config"] = r.config.to_text();
    j["rows"] = json::array();
    for (const auto& row : r.rows) j["rows"].push_back(row_json(row));
    return j.dump(2) + "\n";
  }
  std::ostringstream os;
  os << "# schema_version=" << kSchemaVersion << " experiment=" << r.experiment
     << " config_hash=" << hex(config_hash(r.config)) << "\n";
  for (std::size_t i = 0; i < kColumns.size(); ++i) os << (i ? "," : "") << kColumns[i];
  os << "\n";
  for (const auto& row : r.rows) {
    std::string steps;
    for (std::size_t i = 0; i < row.step_iterations.size(); ++i)
      steps += (i ? ";" : "") + std::to_string(row.step_iterations[i]);
    os << row.k << ',' << row.width << ',' << row.ref << ',' << sci(row.h_max) << ',' << sci(row.h_min) << ','
       << row.elements << ',' << row.dofs << ',' << row.h_levels << ',' << row.p_levels << ','
       << (row.energy_error ? sci(*row.energy_error) : "") << ',' << row.iterations << ','
       << (row.iterations_previous ? std::to_string(*row.iterations_previous) : "") << ','
       << row.nonlinear_steps << ',' << steps << ',' << (row.converged ? "true" : "false") << "\n";
  }
  return os.str();
}

void write_report(const TableReport& r, const std::string& path, ReportFormat f) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write report to '" + path + "'");
  out << format_report(r, f);
  if (!out) throw std::runtime_error("failed writing report to '" + path + "'");
}

TableReport parse_report_json(const std::string& text) {
  const json j = json::parse(text);
  if (j.at("schema_version").get<int>() != kSchemaVersion) throw std::runtime_error("unsupported report schema");
  TableReport r;
  r.experiment = j.at("experiment").get<std::string>();
  r.config = parse_config(j.at("config").get<std::string>());
  for (const auto& e : j.at("rows")) {
    ReportRow row;
    row.k = e.at("k");
    row.width = e.at("width");
    row.ref = e.at("ref");
    row.h_max = e.at("h_max");
    row.h_min = e.at("h_min");
    row.elements = e.at("elements");
    row.dofs = e.at("dofs");
    row.h_levels = e.at("h_levels");
    row.p_levels = e.at("p_levels");
    if (!e.at("energy_error").is_null()) row.energy_error = e.at("energy_error").get<double>();
    row.iterations = e.at("iterations");
    if (!e.at("iterations_previous").is_null()) row.iterations_previous = e.at("iterations_previous").get<int>();
    row.nonlinear_steps = e.at("nonlinear_steps");
    row.step_iterations = e.at("step_iterations").get<std::vector<int>>();
    row.converged = e.at("converged");
    r.rows.push_back(std::move(row));
  }
  return r;
}

}  // namespace dpgmg
