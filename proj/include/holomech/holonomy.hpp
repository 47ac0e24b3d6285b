#pragma once

// Parallel transport on Z for the Berry connection A_m(s) ds^m, abelian phase
// extraction, the geometric x dynamical factorization of the full propagator,
// and the decomposition into Hamiltonian eigenspaces preserved by A.

#include <optional>
#include <vector>

#include "holomech/propagator.hpp"

namespace holomech {

// Closed path in the slice {t = t_slice} x Z. Its parameter is a curve
// parameter, not physical time.
class ZLoop {
 public:
  explicit ZLoop(ParameterPath path, double t_slice = 0.0);

  const ParameterPath& path() const { return path_; }
  double t_slice() const { return t_slice_; }

 private:
  ParameterPath path_;
  double t_slice_;
};

struct HolonomyResult {
  CMatrix W;
  double loop_length = 0.0;
  double defect = 0.0;
  long steps = 0;
  std::optional<double> abelian;  // present iff W is scalar within 1e-8
};

// T exp[i*sign*integral A_m(t_slice, h(s)) dh^m/ds ds] along h over [s0, s1].
// The Hamiltonian does not enter.
Propagator transport_along(const PullbackSystem& sys, const ParameterPath& curve, double s0, double s1,
                           double t_slice, const IntegratorConfig& cfg);

HolonomyResult parallel_transport(const PullbackSystem& sys, const ZLoop& loop, const IntegratorConfig& cfg);

// Euclidean length of the image of h in Z.
double curve_length(const ParameterPath& h, double s0, double s1);

// Maps to (-pi, pi].
double wrap_phase(double phase);

// arg(w) for W = w*I within 1e-8 (Frobenius). Winding is not recoverable.
std::optional<double> try_abelian_phase(const CMatrix& w);
double abelian_phase(const CMatrix& w);

// Flat connection alpha*(-s2 ds1 + s1 ds2)/(s1^2 + s2^2) times I_n on the
// punctured plane.
PullbackSystem aharonov_bohm_system(double alpha, int n = 1);

// Circle of radius r about (cx, cy) run `winding` times over [t0, t1];
// winding may be negative.
ParameterPath circle_path(double cx, double cy, double radius, int winding, double t0 = 0.0, double t1 = 1.0);

struct AharonovBohmOutcome {
  double computed = 0.0;
  double expected = 0.0;
};

// Transports around the unit circle `winding` times. For winding 0 the loop is
// a contractible circle of radius 0.5 about (2, 0) that leaves the puncture
// outside, so the expected phase is 0.
AharonovBohmOutcome aharonov_bohm_check(double alpha, int winding, const IntegratorConfig& cfg);

// max over `samples` evenly spaced times of |[H, A_m dh^m/dt]|_F.
double commutation_defect(const PullbackSystem& sys, const ParameterPath& h, int samples);

struct Factorization {
  CMatrix W_geo;
  CMatrix U_dyn;
  CMatrix G;
  double mismatch = 0.0;
  // A sampled at t_begin and at t differs, so the geometric factor is not
  // well defined.
  bool connection_time_dependent = false;
};

// Over [h.t_begin(), t]: W_geo is transport along the image of h, U_dyn the
// time-ordered exponential of H alone, mismatch = |W_geo U_dyn - G|_F.
Factorization factorized_propagator(const PullbackSystem& sys, const ParameterPath& h, double t,
                                    const IntegratorConfig& cfg);

struct EigenBlock {
  SpectralBlock spectral;  // at the reference point h(t_begin)
  PullbackSystem reduced;  // V^dagger H V and V^dagger A_m V on E_k
};

struct BlockSystem {
  std::vector<EigenBlock> blocks;
  double residual = 0.0;  // max |(I - P_k) A_m P_k|_F over samples
};

inline constexpr double kDefaultGapTol = 1e-8;
inline constexpr double kDefaultLeakTol = 1e-8;
inline constexpr int kBlockSamples = 33;

BlockSystem block_decompose(const PullbackSystem& sys, const ParameterPath& h, double gap_tol = kDefaultGapTol,
                            double leak_tol = kDefaultLeakTol);

struct BlockPhase {
  double eigenvalue = 0.0;
  int block_dim = 0;
  CMatrix geometric;
  double dynamical_phase = 0.0;  // sign * integral lambda_k dt
  bool eigenvalue_constant = true;
  std::optional<double> geometric_phase;  // abelian phase if block_dim == 1
};

struct PhaseSplit {
  BlockSystem system;
  std::vector<BlockPhase> phases;
  // sum_k V_k (exp(i*dyn_k) geo_k) V_k^dagger
  CMatrix reconstruction;
};

PhaseSplit phase_split(const PullbackSystem& sys, const ParameterPath& h, double t, double gap_tol,
                       double leak_tol, const IntegratorConfig& cfg);

}  // namespace holomech
