#include "dpgmg/formulation.hpp"

#include <cmath>
#include <numbers>

namespace dpgmg {

namespace {

int index_of(const std::vector<std::string>& names, const std::string& n) {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == n) return static_cast<int>(i);
  throw FormError("unknown variable '" + n + "'");
}

double jet_op(const TestJet& j, Op op) {
  switch (op) {
    case Op::Value: return j.value;
    case Op::Dx: return j.dx;
    case Op::Dy: return j.dy;
  }
  return 0.0;
}

Op deriv(int axis) { return axis == 0 ? Op::Dx : Op::Dy; }
NormalFactor normal(int axis) { return axis == 0 ? NormalFactor::Nx : NormalFactor::Ny; }

// sigma_ij stored at i*d + j after the velocity components
int sigma_index(int dim, int i, int j) { return dim + i * dim + j; }

}  // namespace

int FormDescriptor::field_index(const std::string& n) const { return index_of(fields, n); }
int FormDescriptor::test_index(const std::string& n) const { return index_of(tests, n); }

int FormDescriptor::trace_index(const std::string& n) const {
  for (std::size_t i = 0; i < traces.size(); ++i)
    if (traces[i].name == n) return static_cast<int>(i);
  throw FormError("unknown trace '" + n + "'");
}

bool FormDescriptor::variable_coefficients() const {
  for (const auto& t : volume)
    if (t.fn) return true;
  return false;
}

std::vector<AdjointRow> FormDescriptor::adjoint_rows() const {
  std::vector<AdjointRow> rows(fields.size());
  for (const auto& t : volume) rows[t.field].push_back({t.test, t.op, t.coef, t.fn});
  return rows;
}

void FormDescriptor::validate() const {
  if (!(beta > 0.0)) throw FormError("graph norm scaling beta must be positive");
  if (dim != 1 && dim != 2) throw FormError("form dimension must be 1 or 2");
  const int nf = static_cast<int>(fields.size());
  const int nt = static_cast<int>(tests.size());
  const int ntr = static_cast<int>(traces.size());
  for (const auto& t : volume) {
    if (t.field < 0 || t.field >= nf || t.test < 0 || t.test >= nt)
      throw FormError("volume term references an unknown variable");
    if (dim == 1 && t.op == Op::Dy) throw FormError("y-derivative in a 1D form");
  }
  for (const auto& t : faces) {
    if (t.trace < 0 || t.trace >= ntr || t.test < 0 || t.test >= nt)
      throw FormError("face term references an unknown variable");
    if (dim == 1 && t.normal == NormalFactor::Ny) throw FormError("y-normal in a 1D form");
  }
  for (const auto& tr : traces)
    for (const auto& tt : tr.traced)
      if (tt.field < 0 || tt.field >= nf) throw FormError("trace refers to an unknown field");
  std::vector<bool> seen(nt, false);
  for (const auto& t : volume) seen[t.test] = true;
  for (int i = 0; i < nt; ++i)
    if (!seen[i]) throw FormError("test '" + tests[i] + "' is not reached by the adjoint");
}

double graph_gram_integrand(const FormDescriptor& form, const EvalPoint& at,
                            std::span<const TestJet> v, std::span<const TestJet> w) {
  if (!(form.beta > 0.0)) throw FormError("graph norm scaling beta must be positive");
  if (v.size() != form.tests.size() || w.size() != form.tests.size())
    throw FormError("test jets do not match the form");
  double total = 0.0;
  for (const auto& row : form.adjoint_rows()) {
    double a = 0.0, b = 0.0;
    for (const auto& part : row) {
      const double c = part.coef * (part.fn ? part.fn(at) : 1.0);
      a += c * jet_op(v[part.test], part.op);
      b += c * jet_op(w[part.test], part.op);
    }
    total += a * b;
  }
  for (std::size_t i = 0; i < v.size(); ++i) total += form.beta * v[i].value * w[i].value;
  return total;
}

FormDescriptor poisson_form(int dim) {
  if (dim != 1 && dim != 2) throw FormError("poisson_form: dim must be 1 or 2");
  FormDescriptor f;
  f.name = "poisson";
  f.dim = dim;
  f.fields = {"u"};
  f.tests = {"v"};
  for (int j = 0; j < dim; ++j) {
    f.fields.push_back(dim == 1 ? "sigma" : "sigma" + std::to_string(j));
    f.tests.push_back(dim == 1 ? "tau" : "tau" + std::to_string(j));
  }
  f.traces.push_back({"u_hat", TraceKind::H1, {{0, NormalFactor::One, 1.0}}});
  TraceVar flux{"sigma_n_hat", TraceKind::Normal, {}};
  for (int j = 0; j < dim; ++j) flux.traced.push_back({1 + j, normal(j), 1.0});
  f.traces.push_back(flux);
  // (sigma, grad v) - <sigma_n_hat, v> + (sigma, tau) + (u, div tau) - <u_hat, tau.n>
  for (int j = 0; j < dim; ++j) f.volume.push_back({1 + j, 0, deriv(j), 1.0, {}});
  f.faces.push_back({1, 0, NormalFactor::One, -1.0});
  for (int j = 0; j < dim; ++j) f.volume.push_back({1 + j, 1 + j, Op::Value, 1.0, {}});
  for (int j = 0; j < dim; ++j) f.volume.push_back({0, 1 + j, deriv(j), 1.0, {}});
  for (int j = 0; j < dim; ++j) f.faces.push_back({0, 1 + j, normal(j), -1.0});
  f.validate();
  return f;
}

FormDescriptor stokes_vgp_form(double mu) {
  if (!(mu > 0.0)) throw FormError("stokes_vgp_form: viscosity must be positive");
  const int d = 2;
  FormDescriptor f;
  f.name = "stokes";
  f.dim = d;
  f.fields = {"u1", "u2", "sigma11", "sigma12", "sigma21", "sigma22", "p"};
  f.tests = {"v1", "v2", "tau11", "tau12", "tau21", "tau22", "q"};
  const int p = 6, q = 6;
  const int uhat0 = 0, that0 = 2;
  for (int i = 0; i < d; ++i)
    f.traces.push_back({"u_hat" + std::to_string(i + 1), TraceKind::H1, {{i, NormalFactor::One, 1.0}}});
  for (int i = 0; i < d; ++i) {
    TraceVar t{"t_hat" + std::to_string(i + 1), TraceKind::Normal, {}};
    for (int j = 0; j < d; ++j) t.traced.push_back({sigma_index(d, i, j), normal(j), 1.0});
    t.traced.push_back({p, normal(i), -1.0});
    f.traces.push_back(t);
  }
  // (sigma - p I, grad v) - <t_hat, v>
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) f.volume.push_back({sigma_index(d, i, j), i, deriv(j), 1.0, {}});
    f.volume.push_back({p, i, deriv(i), -1.0, {}});
    f.faces.push_back({that0 + i, i, NormalFactor::One, -1.0});
  }
  // (u, grad q) - <u_hat.n, q>
  for (int j = 0; j < d; ++j) {
    f.volume.push_back({j, q, deriv(j), 1.0, {}});
    f.faces.push_back({uhat0 + j, q, normal(j), -1.0});
  }
  // (sigma, tau) + (mu u, div tau) - <mu u_hat, tau n>
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      const int tau = sigma_index(d, i, j);
      f.volume.push_back({sigma_index(d, i, j), tau, Op::Value, 1.0, {}});
      f.volume.push_back({i, tau, deriv(j), mu, {}});
      f.faces.push_back({uhat0 + i, tau, normal(j), -mu});
    }
  f.validate();
  return f;
}

FormDescriptor navier_stokes_linearized_form(double re, const FieldEvaluator& background) {
  if (!(re > 0.0)) throw FormError("Reynolds number must be positive");
  if (!background) throw FormError("linearized Navier-Stokes form needs a background flow");
  FormDescriptor f = stokes_vgp_form(1.0 / re);
  f.name = "navier-stokes";
  const int d = 2;
  // Re (du . sigma + u . dsigma, v): component i is sum_j du_j sigma_ij + u_j dsigma_ij
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      const int sij = sigma_index(d, i, j);
      f.volume.push_back({j, i, Op::Value, re,
                          [background, sij](const EvalPoint& x) { return background(sij, x); }});
      f.volume.push_back({sij, i, Op::Value, re,
                          [background, j](const EvalPoint& x) { return background(j, x); }});
    }
  f.validate();
  return f;
}

double kovasznay_lambda(double re) {
  const double h = 0.5 * re;
  return h - std::sqrt(h * h + 4.0 * std::numbers::pi * std::numbers::pi);
}

double lid_ramp(double x, double eps) {
  if (x < eps) return x / eps;
  if (x > 1.0 - eps) return (1.0 - x) / eps;
  return 1.0;
}

ProblemSpec poisson_problem(int dim) {
  ProblemSpec s;
  s.kind = ProblemKind::Poisson;
  s.tag = "poisson";
  s.form = poisson_form(dim);
  s.domain = Box{{0.0, 0.0}, {1.0, 1.0}};
  s.loads.push_back({0, [](const EvalPoint&) { return 1.0; }});
  s.bcs.push_back({0, [](const Point&) { return 0.0; }, {}});
  if (dim == 1) {
    s.exact = [](int field, const Point& x) {
      return field == 0 ? 0.5 * x.x * (1.0 - x.x) : 0.5 - x.x;
    };
  }
  return s;
}

namespace {

// fields ordered u1 u2 s11 s12 s21 s22 p; grad[i][j] = d u_i / d x_j
double flow_field(int field, double mu, const std::array<double, 2>& u,
                  const std::array<std::array<double, 2>, 2>& grad, double p) {
  if (field < 2) return u[field];
  if (field < 6) return mu * grad[(field - 2) / 2][(field - 2) % 2];
  return p;
}

}  // namespace

ProblemSpec stokes_problem(double mu) {
  ProblemSpec s;
  s.kind = ProblemKind::Stokes;
  s.tag = "stokes";
  s.form = stokes_vgp_form(mu);
  s.domain = Box{{-1.0, -1.0}, {1.0, 1.0}};
  s.exact = [mu](int field, const Point& x) {
    const double ex = std::exp(x.x), c = std::cos(x.y), sn = std::sin(x.y), y = x.y;
    const std::array<double, 2> u{-ex * (y * c + sn), ex * y * sn};
    const std::array<std::array<double, 2>, 2> g{
        {{u[0], -ex * (2.0 * c - y * sn)}, {u[1], ex * (sn + y * c)}}};
    return flow_field(field, mu, u, g, 2.0 * mu * ex * sn);
  };
  for (int i = 0; i < 2; ++i) {
    auto ex = s.exact;
    s.bcs.push_back({i, [ex, i](const Point& x) { return ex(i, x); }, {}});
  }
  s.pins.push_back({6, {0.0, 0.0}, 0.0});
  return s;
}

ProblemSpec kovasznay_problem(double re) {
  if (!(re > 0.0)) throw FormError("Reynolds number must be positive");
  ProblemSpec s;
  s.kind = ProblemKind::Kovasznay;
  s.tag = "kovasznay";
  s.reynolds = re;
  const double mu = 1.0 / re;
  s.form = stokes_vgp_form(mu);
  s.form.name = "navier-stokes";
  s.domain = Box{{-0.5, 0.0}, {1.5, 2.0}};
  const double lam = kovasznay_lambda(re);
  const double twopi = 2.0 * std::numbers::pi;
  const double c0 = 0.5 * std::exp(2.0 * lam * 0.5);  // p(0.5, 1) = 0
  s.exact = [=](int field, const Point& x) {
    const double e = std::exp(lam * x.x), c = std::cos(twopi * x.y), sn = std::sin(twopi * x.y);
    const std::array<double, 2> u{1.0 - e * c, lam / twopi * e * sn};
    const std::array<std::array<double, 2>, 2> g{
        {{-lam * e * c, twopi * e * sn}, {lam * lam / twopi * e * sn, lam * e * c}}};
    return flow_field(field, mu, u, g, -0.5 * std::exp(2.0 * lam * x.x) + c0);
  };
  for (int i = 0; i < 2; ++i) {
    auto ex = s.exact;
    s.bcs.push_back({i, [ex, i](const Point& x) { return ex(i, x); }, {}});
  }
  s.pins.push_back({6, {0.5, 1.0}, 0.0});
  return s;
}

ProblemSpec cavity_problem(double re, double ramp) {
  ProblemSpec s;
  const bool ns = re > 0.0;
  s.kind = ns ? ProblemKind::CavityNS : ProblemKind::Cavity;
  s.tag = ns ? "cavity-ns" : "cavity";
  s.reynolds = ns ? re : 0.0;
  s.form = stokes_vgp_form(ns ? 1.0 / re : 1.0);
  if (ns) s.form.name = "navier-stokes";
  s.domain = Box{{0.0, 0.0}, {1.0, 1.0}};
  s.bcs.push_back({0, [ramp](const Point& x) {
                     return std::abs(x.y - 1.0) < 1e-12 ? lid_ramp(x.x, ramp) : 0.0;
                   },
                   {}});
  s.bcs.push_back({1, [](const Point&) { return 0.0; }, {}});
  s.pins.push_back({6, {0.0, 0.0}, 0.0});
  return s;
}

ProblemSpec make_problem(const std::string& tag, int dim, double re) {
  if (tag == "poisson") return poisson_problem(dim);
  if (dim != 2) throw FormError("problem '" + tag + "' is two-dimensional");
  if (tag == "stokes") return stokes_problem(1.0);
  if (tag == "navier-stokes" || tag == "kovasznay") return kovasznay_problem(re > 0 ? re : 40.0);
  if (tag == "cavity") return cavity_problem(0.0);
  if (tag == "cavity-ns") return cavity_problem(re > 0 ? re : 100.0);
  throw FormError("unsupported problem '" + tag + "'");
}

ProblemSpec linearize(const ProblemSpec& base, const FieldEvaluator& background) {
  if (!base.nonlinear()) throw FormError("linearize: problem is linear");
  ProblemSpec s = base;
  const double re = base.reynolds;
  s.form = navier_stokes_linearized_form(re, background);
  // Re (u . sigma, v) evaluated on the background
  for (int i = 0; i < 2; ++i) {
    s.loads.push_back({i, [background, re, i](const EvalPoint& x) {
                         double r = 0.0;
                         for (int j = 0; j < 2; ++j) r += background(j, x) * background(2 + 2 * i + j, x);
                         return re * r;
                       }});
  }
  return s;
}

}  // namespace dpgmg
