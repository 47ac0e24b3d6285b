#pragma once

// Composite-bundle data over Sigma = R x Z with Z an open patch of R^d:
// operator fields H(t, s) and A_m(t, s), parameter paths t -> h(t), and the
// pull-back generator K(t) = A_m(t, h(t)) dh^m/dt + H(t, h(t)).

#include <cstddef>
#include <span>
#include <vector>

#include "holomech/expression.hpp"
#include "holomech/operator_core.hpp"

namespace holomech {

struct ParameterPoint {
  double t = 0.0;
  std::vector<double> sigma;
};

struct PathSegment {
  double t_begin = 0.0;
  double t_end = 1.0;
  std::vector<Expression> coords;  // h^m(t), functions of t only
};

// Piecewise-smooth section of Sigma -> R. Segments are contiguous; the path
// may jump at a segment boundary, and integrators never step across one.
class ParameterPath {
 public:
  ParameterPath(std::vector<PathSegment> segments, bool closed, double derivative_step = 1e-5);

  static ParameterPath single(double t_begin, double t_end, std::vector<Expression> coords, bool closed = false,
                              double derivative_step = 1e-5);

  double t_begin() const { return segments_.front().t_begin; }
  double t_end() const { return segments_.back().t_end; }
  std::size_t dim() const { return segments_.front().coords.size(); }
  bool closed() const { return closed_; }
  double derivative_step() const { return derivative_step_; }
  const std::vector<PathSegment>& segments() const { return segments_; }

  // Segment owning t; an interior boundary belongs to the later segment.
  std::size_t segment_index(double t) const;
  std::vector<double> position(double t) const;
  std::vector<double> position(double t, std::size_t segment) const;
  // Segment boundaries strictly inside (a, b).
  std::vector<double> breakpoints_within(double a, double b) const;

  // Same image traversed backwards over the same domain.
  ParameterPath reversed() const;
  // Single-segment paths only: s in [s_begin, s_end] -> h(tau(s)), where tau is
  // a monotone map onto [t_begin, t_end].
  ParameterPath reparameterized(const Expression& tau, double s_begin, double s_end) const;

 private:
  std::vector<PathSegment> segments_;
  bool closed_;
  double derivative_step_;
};

// Fourth-order finite difference of each h^m: five-point central stencil in
// the interior of a segment, five-point one-sided stencil near its ends.
std::vector<double> path_derivative(const ParameterPath& h, double t);
std::vector<double> path_derivative(const ParameterPath& h, double t, std::size_t segment);

struct FieldTerm {
  Expression coeff;
  CMatrix basis;
};

// Finite sum of real coefficient expressions times constant Hermitian
// matrices.
class OperatorField {
 public:
  explicit OperatorField(int dim, std::vector<FieldTerm> terms = {});

  int dim() const { return dim_; }
  const std::vector<FieldTerm>& terms() const { return terms_; }
  int max_param_index() const;
  bool depends_on_time() const;
  bool is_zero() const { return terms_.empty(); }

 private:
  int dim_;
  std::vector<FieldTerm> terms_;
};

CMatrix eval_field(const OperatorField& field, const ParameterPoint& p);
CMatrix eval_field(const OperatorField& field, double t, std::span<const double> sigma);

enum class SignConvention { Paper, Physics };

// +1 for the i-sign of d psi/dt = +i K psi, -1 for the usual -i.
inline double sign_of(SignConvention c) { return c == SignConvention::Paper ? 1.0 : -1.0; }

class PullbackSystem {
 public:
  PullbackSystem(int n, int d, OperatorField hamiltonian, std::vector<OperatorField> connection,
                 SignConvention convention = SignConvention::Paper);

  int n() const { return n_; }
  int d() const { return d_; }
  const OperatorField& hamiltonian() const { return hamiltonian_; }
  const std::vector<OperatorField>& connection() const { return connection_; }
  SignConvention convention() const { return convention_; }
  double sign() const { return sign_of(convention_); }

  PullbackSystem with_convention(SignConvention c) const;

 private:
  int n_;
  int d_;
  OperatorField hamiltonian_;
  std::vector<OperatorField> connection_;
  SignConvention convention_;
};

// H(t, h(t)) and sum_m A_m(t, h(t)) dh^m/dt evaluated on one path segment.
struct GeneratorParts {
  CMatrix hamiltonian;
  CMatrix connection;
};

GeneratorParts generator_parts(const PullbackSystem& sys, const ParameterPath& h, double t, std::size_t segment);

CMatrix pullback_generator(const PullbackSystem& sys, const ParameterPath& h, double t);
CMatrix pullback_generator(const PullbackSystem& sys, const ParameterPath& h, double t, std::size_t segment);

// Samples psi(t0 + i*step), i = 0..size-1.
struct SampledSection {
  double t0 = 0.0;
  double step = 0.0;
  std::vector<CVector> values;

  double time(std::size_t i) const { return t0 + step * static_cast<double>(i); }
};

// Fourth-order finite-difference time derivative of a sampled section.
SampledSection finite_difference(const SampledSection& section);

// nabla_h psi = d psi/dt - i*sign*K(t) psi, sample by sample.
SampledSection covariant_derivative(const PullbackSystem& sys, const SampledSection& section,
                                    const ParameterPath& h);

double sup_norm(const SampledSection& section);

}  // namespace holomech
