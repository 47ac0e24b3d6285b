#include "holomech/propagator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace holomech {

namespace {

// Two-exponential commutator-free scheme of order four at the Gauss points.
constexpr double kGaussOffset = 0.28867513459481288225;  // sqrt(3)/6
constexpr double kCfLate = (3.0 + 2.0 * 1.7320508075688772935) / 12.0;
constexpr double kCfEarly = (3.0 - 2.0 * 1.7320508075688772935) / 12.0;

CMatrix one_step(const GeneratorFn& gen, double sign, Method method, double t, double dt, std::size_t tag) {
  switch (method) {
    case Method::ExpMidpoint2:
      return exp_i_hermitian(gen(t + 0.5 * dt, tag), sign * dt);
    case Method::MagnusCF4: {
      const CMatrix k1 = gen(t + (0.5 - kGaussOffset) * dt, tag);
      const CMatrix k2 = gen(t + (0.5 + kGaussOffset) * dt, tag);
      const CMatrix first = exp_i_hermitian(kCfLate * k1 + kCfEarly * k2, sign * dt);
      const CMatrix second = exp_i_hermitian(kCfEarly * k1 + kCfLate * k2, sign * dt);
      return second * first;
    }
  }
  return {};
}

void finalize(Propagator& p) {
  p.defect = unitarity_defect(p.U);
  if (p.defect > 1e-12) {
    p.U = polar_unitarize(p.U);
    p.defect = unitarity_defect(p.U);
  }
}

}  // namespace

std::string_view to_string(Method m) {
  return m == Method::ExpMidpoint2 ? "exp-midpoint-2" : "magnus-cf-4";
}

Method parse_method(std::string_view name) {
  if (name == "exp-midpoint-2") return Method::ExpMidpoint2;
  if (name == "magnus-cf-4") return Method::MagnusCF4;
  throw Error(ErrorCode::InvalidArgument,
              "unknown method '" + std::string(name) + "' (expected exp-midpoint-2 or magnus-cf-4)");
}

int method_order(Method m) { return m == Method::ExpMidpoint2 ? 2 : 4; }

void IntegratorConfig::validate() const {
  if (!(tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "integrator tol must be > 0");
  if (max_steps < 1) throw Error(ErrorCode::InvalidArgument, "integrator max_steps must be >= 1");
  if (!std::isfinite(initial_step)) throw Error(ErrorCode::InvalidArgument, "integrator initial_step must be finite");
}

Propagator Propagator::identity(int n, double t_start, double t_end) {
  return Propagator{CMatrix::Identity(n, n), t_start, t_end, 0, 0.0, 0.0};
}

std::vector<Piece> path_pieces(const ParameterPath& h, double t0, double t1) {
  const double slack = 1e-12 * std::max(1.0, std::max(std::abs(h.t_begin()), std::abs(h.t_end())));
  if (!(t0 < t1)) throw Error(ErrorCode::InvalidArgument, "integration interval must satisfy t0 < t1");
  if (t0 < h.t_begin() - slack || t1 > h.t_end() + slack)
    throw Error(ErrorCode::InvalidArgument, "interval [" + format_double(t0) + ", " + format_double(t1) +
                                                "] leaves the path domain [" + format_double(h.t_begin()) + ", " +
                                                format_double(h.t_end()) + "]");
  std::vector<Piece> pieces;
  double a = t0;
  for (double b : h.breakpoints_within(t0, t1)) {
    pieces.push_back({a, b, h.segment_index(0.5 * (a + b))});
    a = b;
  }
  pieces.push_back({a, t1, h.segment_index(0.5 * (a + t1))});
  return pieces;
}

Propagator integrate_generator(const GeneratorFn& gen, int n, double sign, std::span<const Piece> pieces,
                               const IntegratorConfig& cfg) {
  cfg.validate();
  if (pieces.empty()) throw Error(ErrorCode::InvalidArgument, "nothing to integrate");
  const double t0 = pieces.front().t_begin;
  const double t1 = pieces.back().t_end;
  const double length = t1 - t0;
  const int order = method_order(cfg.method);

  Propagator out = Propagator::identity(n, t0, t1);
  out.tol = cfg.tol;
  double dt = cfg.initial_step > 0.0 ? cfg.initial_step : length / 64.0;

  for (const Piece& piece : pieces) {
    double t = piece.t_begin;
    const double span = piece.t_end - piece.t_begin;
    while (piece.t_end - t > 1e-14 * std::max(1.0, span)) {
      const bool last = dt >= piece.t_end - t;
      const double step = last ? piece.t_end - t : dt;
      if (++out.steps_taken > cfg.max_steps)
        throw Error(ErrorCode::StepLimitExceeded, "max_steps = " + std::to_string(cfg.max_steps) +
                                                      " reached at t = " + format_double(t) +
                                                      " before tolerance was met");
      const CMatrix full = one_step(gen, sign, cfg.method, t, step, piece.tag);
      const CMatrix first_half = one_step(gen, sign, cfg.method, t, 0.5 * step, piece.tag);
      const CMatrix second_half = one_step(gen, sign, cfg.method, t + 0.5 * step, 0.5 * step, piece.tag);
      const CMatrix refined = second_half * first_half;
      const double err = frobenius(refined - full);
      const double allowed = cfg.tol * step / length;

      double factor = err > 0.0 ? 0.9 * std::pow(allowed / err, 1.0 / order) : 5.0;
      factor = std::clamp(factor, 0.2, 5.0);
      if (err <= allowed) {
        out.U = refined * out.U;
        t = last ? piece.t_end : t + step;
        // The truncated last step says nothing about the natural step size.
        if (!last) dt = step * factor;
        else dt = std::max(dt, step * factor);
      } else {
        dt = step * factor;
      }
    }
  }
  finalize(out);
  return out;
}

CMatrix integrate_fixed(const GeneratorFn& gen, int n, double sign, std::span<const Piece> pieces, Method method,
                        long steps_per_piece) {
  if (steps_per_piece < 1) throw Error(ErrorCode::InvalidArgument, "steps_per_piece must be >= 1");
  CMatrix u = CMatrix::Identity(n, n);
  for (const Piece& piece : pieces) {
    const double dt = (piece.t_end - piece.t_begin) / static_cast<double>(steps_per_piece);
    for (long k = 0; k < steps_per_piece; ++k) {
      const double t = piece.t_begin + static_cast<double>(k) * dt;
      u = one_step(gen, sign, method, t, dt, piece.tag) * u;
    }
  }
  return u;
}

namespace {

GeneratorFn full_generator(const PullbackSystem& sys, const ParameterPath& h) {
  return [&sys, &h](double t, std::size_t seg) { return pullback_generator(sys, h, t, seg); };
}

}  // namespace

Propagator time_ordered_exp(const PullbackSystem& sys, const ParameterPath& h, double t0, double t1,
                            const IntegratorConfig& cfg) {
  if (static_cast<int>(h.dim()) != sys.d())
    throw Error(ErrorCode::DimensionMismatch, "path dimension does not match parameter_dim");
  const auto pieces = path_pieces(h, t0, t1);
  return integrate_generator(full_generator(sys, h), sys.n(), sys.sign(), pieces, cfg);
}

CVector propagate_state(const PullbackSystem& sys, const ParameterPath& h, double t0, double t1,
                        const CVector& psi0, const IntegratorConfig& cfg) {
  if (psi0.size() != sys.n()) throw Error(ErrorCode::DimensionMismatch, "initial state has wrong dimension");
  if (std::abs(psi0.norm() - 1.0) > 1e-10) throw Error(ErrorCode::InvalidArgument, "initial state is not normalized");
  return time_ordered_exp(sys, h, t0, t1, cfg).U * psi0;
}

SampledSection propagate_trajectory(const PullbackSystem& sys, const ParameterPath& h, double t0, double t1,
                                    const CVector& psi0, const IntegratorConfig& cfg, std::size_t samples) {
  if (samples < 2) throw Error(ErrorCode::GridTooCoarse, "trajectory needs at least 2 samples");
  const double step = (t1 - t0) / static_cast<double>(samples - 1);
  IntegratorConfig local = cfg;
  local.tol = cfg.tol / static_cast<double>(samples - 1);
  SampledSection out{t0, step, {}};
  out.values.reserve(samples);
  CVector psi = psi0;
  if (std::abs(psi.norm() - 1.0) > 1e-10) throw Error(ErrorCode::InvalidArgument, "initial state is not normalized");
  out.values.push_back(psi);
  for (std::size_t i = 1; i < samples; ++i) {
    const double a = out.time(i - 1);
    const double b = i + 1 == samples ? t1 : out.time(i);
    psi = time_ordered_exp(sys, h, a, b, local).U * psi;
    out.values.push_back(psi);
  }
  return out;
}

Propagator compose(const Propagator& first, const Propagator& second) {
  if (std::abs(first.t_end - second.t_start) > 1e-12)
    throw Error(ErrorCode::IntervalMismatch, "cannot compose [" + format_double(first.t_start) + ", " +
                                                 format_double(first.t_end) + "] with [" +
                                                 format_double(second.t_start) + ", " + format_double(second.t_end) +
                                                 "]");
  if (first.U.rows() != second.U.rows())
    throw Error(ErrorCode::DimensionMismatch, "propagators act on different dimensions");
  Propagator out{second.U * first.U,
                 first.t_start,
                 second.t_end,
                 first.steps_taken + second.steps_taken,
                 0.0,
                 std::max(first.tol, second.tol)};
  finalize(out);
  return out;
}

ConvergenceStudy convergence_study(const PullbackSystem& sys, const ParameterPath& h, double t0, double t1,
                                   Method method, long base_steps) {
  const auto pieces = path_pieces(h, t0, t1);
  const auto gen = full_generator(sys, h);
  constexpr int kLevels = 4;
  const long finest = base_steps << (kLevels - 1);
  const CMatrix reference = integrate_fixed(gen, sys.n(), sys.sign(), pieces, Method::MagnusCF4, 64 * finest);

  ConvergenceStudy study;
  for (int level = 0; level < kLevels; ++level) {
    const long steps = base_steps << level;
    const CMatrix u = integrate_fixed(gen, sys.n(), sys.sign(), pieces, method, steps);
    study.steps.push_back(steps);
    study.errors.push_back(frobenius(u - reference));
  }
  // Rounding in the reference product grows linearly with its step count.
  const double floor = std::max(1e-13, 16.0 * std::numeric_limits<double>::epsilon() *
                                           static_cast<double>(64 * finest * static_cast<long>(pieces.size())));
  for (double e : study.errors) {
    if (!(e > floor))
      throw Error(ErrorCode::DegenerateErrorSequence,
                  "error " + format_double(e) + " is at the rounding floor; the method is exact here");
  }

  // Least-squares slope of log(error) against log(step length).
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int level = 0; level < kLevels; ++level) {
    const double x = std::log((t1 - t0) / static_cast<double>(study.steps[level]));
    const double y = std::log(study.errors[level]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  study.order = (kLevels * sxy - sx * sy) / (kLevels * sxx - sx * sx);
  return study;
}

double convergence_order(const PullbackSystem& sys, const ParameterPath& h, double t0, double t1, Method method) {
  return convergence_study(sys, h, t0, t1, method).order;
}

}  // namespace holomech
