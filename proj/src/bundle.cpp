#include "holomech/bundle.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace holomech {

namespace {

double eval_coord(const Expression& e, double t) {
  const double v = e.eval(t, {});
  if (!std::isfinite(v))
    throw Error(ErrorCode::ExpressionDomainError, "path coordinate is not finite at t = " + format_double(t));
  return v;
}

}  // namespace

ParameterPath::ParameterPath(std::vector<PathSegment> segments, bool closed, double derivative_step)
    : segments_(std::move(segments)), closed_(closed), derivative_step_(derivative_step) {
  if (segments_.empty()) throw Error(ErrorCode::FormatError, "parameter path needs at least one segment");
  if (!(derivative_step_ > 0.0)) throw Error(ErrorCode::FormatError, "derivative_step must be > 0");
  const std::size_t d = segments_.front().coords.size();
  for (std::size_t k = 0; k < segments_.size(); ++k) {
    auto& seg = segments_[k];
    if (!(seg.t_begin < seg.t_end))
      throw Error(ErrorCode::FormatError, "segment " + std::to_string(k) + " has an empty domain");
    if (seg.coords.size() != d)
      throw Error(ErrorCode::DimensionMismatch, "segment " + std::to_string(k) + " has " +
                                                    std::to_string(seg.coords.size()) + " coordinates, expected " +
                                                    std::to_string(d));
    if (k > 0) {
      const double prev = segments_[k - 1].t_end;
      if (std::abs(seg.t_begin - prev) > 1e-12 * std::max(1.0, std::abs(prev)))
        throw Error(ErrorCode::FormatError, "segment " + std::to_string(k) + " does not start where the previous ends");
      seg.t_begin = prev;
    }
    for (const auto& c : seg.coords) {
      if (c.max_param_index() != 0)
        throw Error(ErrorCode::FormatError, "path coordinates may depend on t only");
      eval_coord(c, seg.t_begin);
      eval_coord(c, seg.t_end);
    }
  }
  if (closed_) {
    const auto start = position(t_begin(), 0);
    const auto end = position(t_end(), segments_.size() - 1);
    for (std::size_t m = 0; m < d; ++m) {
      if (std::abs(end[m] - start[m]) > 1e-9)
        throw Error(ErrorCode::OpenPath, "closed path does not return to its start in coordinate s" +
                                             std::to_string(m + 1) + " (gap " +
                                             format_double(std::abs(end[m] - start[m])) + ")");
    }
  }
}

ParameterPath ParameterPath::single(double t_begin, double t_end, std::vector<Expression> coords, bool closed,
                                    double derivative_step) {
  return ParameterPath({PathSegment{t_begin, t_end, std::move(coords)}}, closed, derivative_step);
}

std::size_t ParameterPath::segment_index(double t) const {
  for (std::size_t k = 0; k + 1 < segments_.size(); ++k)
    if (t < segments_[k].t_end) return k;
  return segments_.size() - 1;
}

std::vector<double> ParameterPath::position(double t) const { return position(t, segment_index(t)); }

std::vector<double> ParameterPath::position(double t, std::size_t segment) const {
  const auto& seg = segments_.at(segment);
  std::vector<double> out(seg.coords.size());
  for (std::size_t m = 0; m < out.size(); ++m) out[m] = eval_coord(seg.coords[m], t);
  return out;
}

std::vector<double> ParameterPath::breakpoints_within(double a, double b) const {
  std::vector<double> out;
  for (std::size_t k = 0; k + 1 < segments_.size(); ++k) {
    const double x = segments_[k].t_end;
    if (x > a && x < b) out.push_back(x);
  }
  return out;
}

ParameterPath ParameterPath::reversed() const {
  const double total = t_begin() + t_end();
  const Expression mirror = Expression::constant(total) - Expression::time();
  std::vector<PathSegment> segs;
  for (auto it = segments_.rbegin(); it != segments_.rend(); ++it) {
    PathSegment seg{total - it->t_end, total - it->t_begin, {}};
    for (const auto& c : it->coords) seg.coords.push_back(c.substitute(kTimeSlot, mirror));
    segs.push_back(std::move(seg));
  }
  return ParameterPath(std::move(segs), closed_, derivative_step_);
}

ParameterPath ParameterPath::reparameterized(const Expression& tau, double s_begin, double s_end) const {
  if (segments_.size() != 1)
    throw Error(ErrorCode::InvalidArgument, "reparameterization needs a single-segment path");
  const double a = tau.eval(s_begin, {});
  const double b = tau.eval(s_end, {});
  const double scale = std::max(1.0, std::abs(t_end()));
  if (std::abs(a - t_begin()) > 1e-12 * scale || std::abs(b - t_end()) > 1e-12 * scale)
    throw Error(ErrorCode::InvalidArgument, "reparameterization must map the new domain onto the old one");
  PathSegment seg{s_begin, s_end, {}};
  for (const auto& c : segments_.front().coords) seg.coords.push_back(c.substitute(kTimeSlot, tau));
  return ParameterPath({std::move(seg)}, closed_, derivative_step_);
}

std::vector<double> path_derivative(const ParameterPath& h, double t) {
  return path_derivative(h, t, h.segment_index(t));
}

std::vector<double> path_derivative(const ParameterPath& h, double t, std::size_t segment) {
  const auto& seg = h.segments().at(segment);
  const double eps = std::min(h.derivative_step(), (seg.t_end - seg.t_begin) / 8.0);
  std::vector<double> out(seg.coords.size());
  for (std::size_t m = 0; m < out.size(); ++m) {
    const Expression& c = seg.coords[m];
    if (c.is_constant()) {
      out[m] = 0.0;
      continue;
    }
    auto f = [&](double x) { return eval_coord(c, x); };
    if (t - 2 * eps >= seg.t_begin && t + 2 * eps <= seg.t_end) {
      out[m] = (f(t - 2 * eps) - 8 * f(t - eps) + 8 * f(t + eps) - f(t + 2 * eps)) / (12 * eps);
    } else if (t - 2 * eps < seg.t_begin) {
      out[m] = (-25 * f(t) + 48 * f(t + eps) - 36 * f(t + 2 * eps) + 16 * f(t + 3 * eps) - 3 * f(t + 4 * eps)) /
               (12 * eps);
    } else {
      out[m] = (25 * f(t) - 48 * f(t - eps) + 36 * f(t - 2 * eps) - 16 * f(t - 3 * eps) + 3 * f(t - 4 * eps)) /
               (12 * eps);
    }
  }
  return out;
}

OperatorField::OperatorField(int dim, std::vector<FieldTerm> terms) : dim_(dim), terms_(std::move(terms)) {
  if (dim_ < 1) throw Error(ErrorCode::DimensionMismatch, "operator field dimension must be positive");
  for (std::size_t k = 0; k < terms_.size(); ++k) {
    const CMatrix& b = terms_[k].basis;
    if (b.rows() != dim_ || b.cols() != dim_)
      throw Error(ErrorCode::DimensionMismatch, "term " + std::to_string(k) + ": basis is " +
                                                    std::to_string(b.rows()) + "x" + std::to_string(b.cols()) +
                                                    " in a dimension-" + std::to_string(dim_) + " field");
    if (!all_finite(b)) throw Error(ErrorCode::NonHermitianBasis, "term " + std::to_string(k) + ": non-finite basis");
    if (!check_hermitian(b, 1e-10))
      throw Error(ErrorCode::NonHermitianBasis, "term " + std::to_string(k) + ": basis matrix is not Hermitian");
  }
}

int OperatorField::max_param_index() const {
  int m = 0;
  for (const auto& term : terms_) m = std::max(m, term.coeff.max_param_index());
  return m;
}

bool OperatorField::depends_on_time() const {
  return std::any_of(terms_.begin(), terms_.end(),
                     [](const FieldTerm& term) { return term.coeff.depends_on(kTimeSlot); });
}

CMatrix eval_field(const OperatorField& field, const ParameterPoint& p) { return eval_field(field, p.t, p.sigma); }

CMatrix eval_field(const OperatorField& field, double t, std::span<const double> sigma) {
  CMatrix out = CMatrix::Zero(field.dim(), field.dim());
  const auto& terms = field.terms();
  for (std::size_t k = 0; k < terms.size(); ++k) {
    const double c = terms[k].coeff.eval(t, sigma);
    if (!std::isfinite(c))
      throw Error(ErrorCode::ExpressionDomainError,
                  "term " + std::to_string(k) + ": coefficient '" + terms[k].coeff.to_string() +
                      "' is not finite at t = " + format_double(t));
    if (c != 0.0) out += c * terms[k].basis;
  }
  return out;
}

PullbackSystem::PullbackSystem(int n, int d, OperatorField hamiltonian, std::vector<OperatorField> connection,
                               SignConvention convention)
    : n_(n), d_(d), hamiltonian_(std::move(hamiltonian)), connection_(std::move(connection)), convention_(convention) {
  if (d_ < 0 || d_ > kMaxParams) throw Error(ErrorCode::DimensionMismatch, "parameter dimension out of range");
  if (static_cast<int>(connection_.size()) != d_)
    throw Error(ErrorCode::DimensionMismatch, "expected " + std::to_string(d_) + " connection fields, got " +
                                                  std::to_string(connection_.size()));
  auto check = [&](const OperatorField& f, const std::string& what) {
    if (f.dim() != n_)
      throw Error(ErrorCode::DimensionMismatch,
                  what + " has dimension " + std::to_string(f.dim()) + ", system has " + std::to_string(n_));
    if (f.max_param_index() > d_)
      throw Error(ErrorCode::DimensionMismatch,
                  what + " references s" + std::to_string(f.max_param_index()) + " but parameter_dim is " +
                      std::to_string(d_));
  };
  check(hamiltonian_, "hamiltonian");
  for (int m = 0; m < d_; ++m) check(connection_[m], "connection[" + std::to_string(m) + "]");
}

PullbackSystem PullbackSystem::with_convention(SignConvention c) const {
  PullbackSystem copy = *this;
  copy.convention_ = c;
  return copy;
}

GeneratorParts generator_parts(const PullbackSystem& sys, const ParameterPath& h, double t, std::size_t segment) {
  if (static_cast<int>(h.dim()) != sys.d())
    throw Error(ErrorCode::DimensionMismatch, "path has " + std::to_string(h.dim()) +
                                                  " coordinates, system parameter_dim is " + std::to_string(sys.d()));
  const auto sigma = h.position(t, segment);
  GeneratorParts parts{eval_field(sys.hamiltonian(), t, sigma), CMatrix::Zero(sys.n(), sys.n())};
  bool any_connection = false;
  for (const auto& a : sys.connection()) any_connection = any_connection || !a.is_zero();
  if (any_connection) {
    const auto velocity = path_derivative(h, t, segment);
    for (int m = 0; m < sys.d(); ++m) {
      if (velocity[m] == 0.0 || sys.connection()[m].is_zero()) continue;
      parts.connection += velocity[m] * eval_field(sys.connection()[m], t, sigma);
    }
  }
  return parts;
}

CMatrix pullback_generator(const PullbackSystem& sys, const ParameterPath& h, double t) {
  return pullback_generator(sys, h, t, h.segment_index(t));
}

CMatrix pullback_generator(const PullbackSystem& sys, const ParameterPath& h, double t, std::size_t segment) {
  auto parts = generator_parts(sys, h, t, segment);
  return parts.connection + parts.hamiltonian;
}

SampledSection finite_difference(const SampledSection& section) {
  const std::size_t count = section.values.size();
  if (count < 5)
    throw Error(ErrorCode::GridTooCoarse, "need at least 5 samples, got " + std::to_string(count));
  const double h = section.step;
  const auto& y = section.values;
  SampledSection out{section.t0, section.step, std::vector<CVector>(count)};
  for (std::size_t i = 0; i < count; ++i) {
    if (i >= 2 && i + 2 < count) {
      out.values[i] = (y[i - 2] - 8.0 * y[i - 1] + 8.0 * y[i + 1] - y[i + 2]) / (12.0 * h);
    } else if (i < 2) {
      out.values[i] = (-25.0 * y[i] + 48.0 * y[i + 1] - 36.0 * y[i + 2] + 16.0 * y[i + 3] - 3.0 * y[i + 4]) / (12.0 * h);
    } else {
      out.values[i] = (25.0 * y[i] - 48.0 * y[i - 1] + 36.0 * y[i - 2] - 16.0 * y[i - 3] + 3.0 * y[i - 4]) / (12.0 * h);
    }
  }
  return out;
}

SampledSection covariant_derivative(const PullbackSystem& sys, const SampledSection& section,
                                    const ParameterPath& h) {
  SampledSection out = finite_difference(section);
  for (std::size_t i = 0; i < section.values.size(); ++i) {
    if (section.values[i].size() != sys.n())
      throw Error(ErrorCode::DimensionMismatch, "section sample has wrong dimension");
    const CMatrix k = pullback_generator(sys, h, section.time(i));
    out.values[i] -= kI * sys.sign() * (k * section.values[i]);
  }
  return out;
}

double sup_norm(const SampledSection& section) {
  double best = 0.0;
  for (const auto& v : section.values) best = std::max(best, v.norm());
  return best;
}

}  // namespace holomech
