#pragma once

// Time-ordered exponentials G = T exp[i*sign*integral K dt] on U(n) and state
// propagation under the pull-back Schroedinger equation. Later times multiply
// on the left: U(t + dt) = exp(i*sign*K*dt) U(t).

#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "holomech/bundle.hpp"

namespace holomech {

enum class Method { ExpMidpoint2, MagnusCF4 };

std::string_view to_string(Method m);
Method parse_method(std::string_view name);
int method_order(Method m);

struct IntegratorConfig {
  Method method = Method::ExpMidpoint2;
  double tol = 1e-8;
  long max_steps = 1'000'000;
  double initial_step = 0.0;  // <= 0 selects (t1 - t0) / 64

  void validate() const;
};

struct Propagator {
  CMatrix U;
  double t_start = 0.0;
  double t_end = 0.0;
  long steps_taken = 0;
  double defect = 0.0;
  double tol = 0.0;

  static Propagator identity(int n, double t_start, double t_end);
};

// Hermitian generator K(t) on a given smooth piece.
using GeneratorFn = std::function<CMatrix(double t, std::size_t piece)>;

// A smooth sub-interval of integration together with the tag handed back to
// the generator (the owning path segment).
struct Piece {
  double t_begin;
  double t_end;
  std::size_t tag;
};

// Splits [t0, t1] at the path's segment boundaries.
std::vector<Piece> path_pieces(const ParameterPath& h, double t0, double t1);

// Adaptive step-doubling integration over consecutive pieces. A step of size
// dt is accepted when |U_two_halves - U_full| <= tol * dt / (total length).
Propagator integrate_generator(const GeneratorFn& gen, int n, double sign, std::span<const Piece> pieces,
                               const IntegratorConfig& cfg);

// Fixed uniform steps per piece, no error control (used for order studies).
CMatrix integrate_fixed(const GeneratorFn& gen, int n, double sign, std::span<const Piece> pieces, Method method,
                        long steps_per_piece);

Propagator time_ordered_exp(const PullbackSystem& sys, const ParameterPath& h, double t0, double t1,
                            const IntegratorConfig& cfg);

CVector propagate_state(const PullbackSystem& sys, const ParameterPath& h, double t0, double t1,
                        const CVector& psi0, const IntegratorConfig& cfg);

// psi on a uniform grid of `samples` points over [t0, t1].
SampledSection propagate_trajectory(const PullbackSystem& sys, const ParameterPath& h, double t0, double t1,
                                    const CVector& psi0, const IntegratorConfig& cfg, std::size_t samples);

// P2 after P1.
Propagator compose(const Propagator& first, const Propagator& second);

struct ConvergenceStudy {
  double order = 0.0;
  std::vector<long> steps;
  std::vector<double> errors;
};

// Fixed-step runs at base_steps * {1, 2, 4, 8} against a fine CF4 reference;
// order is the least-squares slope of log(error) against log(step).
ConvergenceStudy convergence_study(const PullbackSystem& sys, const ParameterPath& h, double t0, double t1,
                                   Method method, long base_steps = 10);
double convergence_order(const PullbackSystem& sys, const ParameterPath& h, double t0, double t1, Method method);

}  // namespace holomech
