#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpgmg/basis.hpp"
#include "dpgmg/mesh.hpp"

namespace dpgmg {

class FormError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Operator applied to a test function in a volume term.
enum class Op { Value, Dx, Dy };
/// Factor multiplying a face term: 1 or a component of the outward normal.
enum class NormalFactor { One, Nx, Ny };
enum class TraceKind { H1, Normal };

/// Where a coefficient or load is evaluated: physical point plus the cell
/// and reference coordinates (so background flows can be looked up directly).
struct EvalPoint {
  Point x;
  CellId cell = -1;
  RefPoint ref{0.0, 0.0};
};
using ScalarFn = std::function<double(const EvalPoint&)>;

/// One scalar component of a trace expressed through field components;
/// used by the field-to-trace map during prolongation.
struct TracedTerm {
  int field;
  NormalFactor normal;
  double coef;
};

struct TraceVar {
  std::string name;
  TraceKind kind;
  std::vector<TracedTerm> traced;
};

/// coef * fn(x) * (field, op(test))
struct VolumeTerm {
  int field;
  int test;
  Op op;
  double coef = 1.0;
  ScalarFn fn;  // empty means 1
};

/// coef * < trace * normal_factor, test >
struct FaceTerm {
  int trace;
  int test;
  NormalFactor normal;
  double coef = 1.0;
};

/// (fn, test)
struct LoadTerm {
  int test;
  ScalarFn fn;
};

struct AdjointPart {
  int test;
  Op op;
  double coef;
  ScalarFn fn;
};
/// L* restricted to one trial field: sum of coef*fn*op(test) over parts.
using AdjointRow = std::vector<AdjointPart>;

/// Value and first derivatives of one scalar test component at a point.
struct TestJet {
  double value = 0.0;
  double dx = 0.0;
  double dy = 0.0;
};

/// Ultraweak first-order system. Vector and tensor variables are split into
/// scalar components.
struct FormDescriptor {
  std::string name;
  int dim = 2;
  std::vector<std::string> fields;
  std::vector<TraceVar> traces;
  std::vector<std::string> tests;
  std::vector<VolumeTerm> volume;
  std::vector<FaceTerm> faces;
  double beta = 1.0;

  int field_index(const std::string& n) const;
  int trace_index(const std::string& n) const;
  int test_index(const std::string& n) const;
  bool variable_coefficients() const;

  /// Transposition of the volume terms grouped by trial field.
  std::vector<AdjointRow> adjoint_rows() const;
  /// Throws FormError when a structural invariant fails.
  void validate() const;
};

/// (L*v, L*w) + beta (v, w) at one point; v and w hold one jet per test.
double graph_gram_integrand(const FormDescriptor& form, const EvalPoint& at,
                            std::span<const TestJet> v, std::span<const TestJet> w);

FormDescriptor poisson_form(int dim);
FormDescriptor stokes_vgp_form(double mu);

/// Background flow for the linearized Navier-Stokes form: value of a field
/// component (indexed as in stokes_vgp_form) at a point.
using FieldEvaluator = std::function<double(int field, const EvalPoint&)>;

/// Stokes form with mu = 1/Re plus the convective coupling to `background`.
FormDescriptor navier_stokes_linearized_form(double re, const FieldEvaluator& background);

struct DirichletBC {
  int trace;
  std::function<double(const Point&)> value;
  std::function<bool(const Point&)> on;  // empty means the whole boundary
};

/// Constrains one field component to `value` at the nodal point nearest `at`.
struct PointPin {
  int field;
  Point at;
  double value = 0.0;
};

enum class ProblemKind { Poisson, Stokes, Kovasznay, Cavity, CavityNS };

struct ProblemSpec {
  ProblemKind kind = ProblemKind::Poisson;
  std::string tag;
  FormDescriptor form;
  Box domain;
  std::vector<LoadTerm> loads;
  std::vector<DirichletBC> bcs;
  std::vector<PointPin> pins;
  /// Exact field values when known (field index, point).
  std::function<double(int, const Point&)> exact;
  /// Reynolds number for nonlinear problems (0 for linear ones).
  double reynolds = 0.0;
  bool nonlinear() const { return reynolds > 0.0; }
};

/// Problem definitions used by the experiments.
ProblemSpec poisson_problem(int dim);
ProblemSpec stokes_problem(double mu = 1.0);
ProblemSpec kovasznay_problem(double re = 40.0);
/// Lid-driven cavity; re <= 0 gives Stokes with mu = 1.
ProblemSpec cavity_problem(double re = 0.0, double ramp = 1.0 / 64.0);
ProblemSpec make_problem(const std::string& tag, int dim, double re);

/// Navier-Stokes problem linearized about `background`: the returned spec
/// has the convective terms and the extra load Re (u.sigma, v), so its
/// solution is the next Newton iterate.
ProblemSpec linearize(const ProblemSpec& base, const FieldEvaluator& background);

double kovasznay_lambda(double re);
/// Lid velocity profile with linear ramps of width `eps` at both ends.
double lid_ramp(double x, double eps);

}  // namespace dpgmg
