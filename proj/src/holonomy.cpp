#include "holomech/holonomy.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <string>

namespace holomech {

namespace {

constexpr std::array<double, 5> kGlNodes{-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                                         0.9061798459386640};
constexpr std::array<double, 5> kGlWeights{0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                           0.4786286704993665, 0.2369268850561891};

double gauss_panels(const std::function<double(double)>& f, double a, double b, int panels) {
  const double width = (b - a) / panels;
  double sum = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double mid = a + (p + 0.5) * width;
    for (std::size_t q = 0; q < kGlNodes.size(); ++q) sum += kGlWeights[q] * f(mid + 0.5 * width * kGlNodes[q]);
  }
  return 0.5 * width * sum;
}

double integrate_scalar(const std::function<double(double)>& f, double a, double b) {
  int panels = 8;
  double prev = gauss_panels(f, a, b, panels);
  while (panels < 8192) {
    panels *= 2;
    const double next = gauss_panels(f, a, b, panels);
    if (std::abs(next - prev) <= 1e-13 * std::max(1.0, std::abs(next))) return next;
    prev = next;
  }
  return prev;
}

std::vector<double> sample_times(double a, double b, int count) {
  std::vector<double> out(count);
  for (int i = 0; i < count; ++i) out[i] = a + (b - a) * static_cast<double>(i) / (count - 1);
  return out;
}

}  // namespace

ZLoop::ZLoop(ParameterPath path, double t_slice) : path_(std::move(path)), t_slice_(t_slice) {
  if (!path_.closed()) throw Error(ErrorCode::OpenPath, "a holonomy loop must be declared closed");
}

Propagator transport_along(const PullbackSystem& sys, const ParameterPath& curve, double s0, double s1,
                           double t_slice, const IntegratorConfig& cfg) {
  if (static_cast<int>(curve.dim()) != sys.d())
    throw Error(ErrorCode::DimensionMismatch, "curve dimension does not match parameter_dim");
  const GeneratorFn gen = [&](double s, std::size_t seg) {
    const auto sigma = curve.position(s, seg);
    const auto velocity = path_derivative(curve, s, seg);
    CMatrix k = CMatrix::Zero(sys.n(), sys.n());
    for (int m = 0; m < sys.d(); ++m) {
      if (velocity[m] == 0.0 || sys.connection()[m].is_zero()) continue;
      k += velocity[m] * eval_field(sys.connection()[m], t_slice, sigma);
    }
    return k;
  };
  const auto pieces = path_pieces(curve, s0, s1);
  return integrate_generator(gen, sys.n(), sys.sign(), pieces, cfg);
}

double curve_length(const ParameterPath& h, double s0, double s1) {
  double total = 0.0;
  for (const Piece& piece : path_pieces(h, s0, s1)) {
    total += gauss_panels(
        [&](double s) {
          const auto v = path_derivative(h, s, piece.tag);
          double sq = 0.0;
          for (double x : v) sq += x * x;
          return std::sqrt(sq);
        },
        piece.t_begin, piece.t_end, 256);
  }
  return total;
}

HolonomyResult parallel_transport(const PullbackSystem& sys, const ZLoop& loop, const IntegratorConfig& cfg) {
  const ParameterPath& h = loop.path();
  const Propagator p = transport_along(sys, h, h.t_begin(), h.t_end(), loop.t_slice(), cfg);
  HolonomyResult out;
  out.W = p.U;
  out.defect = p.defect;
  out.steps = p.steps_taken;
  out.loop_length = curve_length(h, h.t_begin(), h.t_end());
  out.abelian = try_abelian_phase(out.W);
  return out;
}

double wrap_phase(double phase) {
  double r = std::remainder(phase, 2.0 * std::numbers::pi);
  if (r <= -std::numbers::pi) r += 2.0 * std::numbers::pi;
  return r;
}

std::optional<double> try_abelian_phase(const CMatrix& w) {
  if (w.rows() == 0 || w.rows() != w.cols()) return std::nullopt;
  const Complex scalar = w.trace() / static_cast<double>(w.rows());
  const CMatrix ident = CMatrix::Identity(w.rows(), w.cols());
  if (frobenius(w - scalar * ident) > 1e-8) return std::nullopt;
  double phase = std::arg(scalar);
  if (phase <= -std::numbers::pi) phase = std::numbers::pi;
  return phase;
}

double abelian_phase(const CMatrix& w) {
  if (w.rows() == 0 || w.rows() != w.cols() || unitarity_defect(w) > 1e-8)
    throw Error(ErrorCode::NotUnitary, "abelian_phase needs a unitary matrix");
  const auto phase = try_abelian_phase(w);
  if (!phase) throw Error(ErrorCode::NonScalarHolonomy, "holonomy is not a scalar multiple of the identity");
  return *phase;
}

PullbackSystem aharonov_bohm_system(double alpha, int n) {
  const ConstantTable constants{{"alpha", alpha}};
  const CMatrix ident = CMatrix::Identity(n, n);
  OperatorField a1(n, {{parse_expression("-alpha*s2/(s1^2 + s2^2)", constants), ident}});
  OperatorField a2(n, {{parse_expression("alpha*s1/(s1^2 + s2^2)", constants), ident}});
  return PullbackSystem(n, 2, OperatorField(n), {a1, a2});
}

ParameterPath circle_path(double cx, double cy, double radius, int winding, double t0, double t1) {
  const ConstantTable constants{{"cx", cx},
                                {"cy", cy},
                                {"r", radius},
                                {"w", static_cast<double>(winding)},
                                {"ta", t0},
                                {"tb", t1}};
  return ParameterPath::single(t0, t1,
                               {parse_expression("cx + r*cos(2*pi*w*(t - ta)/(tb - ta))", constants),
                                parse_expression("cy + r*sin(2*pi*w*(t - ta)/(tb - ta))", constants)},
                               true);
}

AharonovBohmOutcome aharonov_bohm_check(double alpha, int winding, const IntegratorConfig& cfg) {
  const PullbackSystem sys = aharonov_bohm_system(alpha);
  const ParameterPath path = winding == 0 ? circle_path(2.0, 0.0, 0.5, 1) : circle_path(0.0, 0.0, 1.0, winding);
  const HolonomyResult res = parallel_transport(sys, ZLoop(path), cfg);
  return {abelian_phase(res.W), wrap_phase(2.0 * std::numbers::pi * alpha * winding)};
}

double commutation_defect(const PullbackSystem& sys, const ParameterPath& h, int samples) {
  if (samples < 2) throw Error(ErrorCode::InvalidArgument, "commutation_defect needs at least 2 samples");
  double worst = 0.0;
  for (double t : sample_times(h.t_begin(), h.t_end(), samples)) {
    const auto parts = generator_parts(sys, h, t, h.segment_index(t));
    worst = std::max(worst, frobenius(commutator(parts.hamiltonian, parts.connection)));
  }
  return worst;
}

Factorization factorized_propagator(const PullbackSystem& sys, const ParameterPath& h, double t,
                                    const IntegratorConfig& cfg) {
  const double t0 = h.t_begin();
  Factorization out;

  for (double s : sample_times(t0, t, 5)) {
    const auto sigma = h.position(s);
    for (const auto& field : sys.connection()) {
      const CMatrix early = eval_field(field, t0, sigma);
      const CMatrix late = eval_field(field, t, sigma);
      if (frobenius(early - late) > 1e-12 * std::max(1.0, frobenius(early))) out.connection_time_dependent = true;
    }
  }

  out.W_geo = transport_along(sys, h, t0, t, t0, cfg).U;
  const GeneratorFn hamiltonian_only = [&](double tt, std::size_t seg) {
    return eval_field(sys.hamiltonian(), tt, h.position(tt, seg));
  };
  const auto pieces = path_pieces(h, t0, t);
  out.U_dyn = integrate_generator(hamiltonian_only, sys.n(), sys.sign(), pieces, cfg).U;
  out.G = time_ordered_exp(sys, h, t0, t, cfg).U;
  out.mismatch = frobenius(out.W_geo * out.U_dyn - out.G);
  return out;
}

namespace {

OperatorField reduce_field(const OperatorField& field, const CMatrix& basis) {
  std::vector<FieldTerm> terms;
  for (const auto& term : field.terms()) {
    const CMatrix reduced = basis.adjoint() * term.basis * basis;
    terms.push_back({term.coeff, 0.5 * (reduced + reduced.adjoint())});
  }
  return OperatorField(static_cast<int>(basis.cols()), std::move(terms));
}

}  // namespace

BlockSystem block_decompose(const PullbackSystem& sys, const ParameterPath& h, double gap_tol, double leak_tol) {
  const double t_ref = h.t_begin();
  const CMatrix h_ref = eval_field(sys.hamiltonian(), t_ref, h.position(t_ref));
  const auto reference = spectral_projectors(h_ref, gap_tol);
  const CMatrix ident = CMatrix::Identity(sys.n(), sys.n());

  BlockSystem out;
  for (double t : sample_times(h.t_begin(), h.t_end(), kBlockSamples)) {
    const auto sigma = h.position(t);
    const auto local = spectral_projectors(eval_field(sys.hamiltonian(), t, sigma), gap_tol);
    for (std::size_t k = 0; k < reference.size(); ++k) {
      const SpectralBlock& ref = reference[k];
      const SpectralBlock* match = nullptr;
      double best_overlap = -1.0;
      for (const auto& candidate : local) {
        const double overlap = (ref.projector * candidate.projector).trace().real();
        if (overlap > best_overlap) {
          best_overlap = overlap;
          match = &candidate;
        }
      }
      const double drift = match ? frobenius(match->projector - ref.projector) : 1.0;
      if (!match || match->block_dim != ref.block_dim || drift > leak_tol)
        throw Error(ErrorCode::DriftingProjectors, "eigenprojector " + std::to_string(k) + " moves by " +
                                                       format_double(drift) + " at t = " + format_double(t) +
                                                       " (leak_tol " + format_double(leak_tol) + ")");
    }
    for (const auto& field : sys.connection()) {
      const CMatrix a = eval_field(field, t, sigma);
      for (const auto& ref : reference)
        out.residual = std::max(out.residual, frobenius((ident - ref.projector) * a * ref.projector));
    }
  }
  if (out.residual > leak_tol)
    throw Error(ErrorCode::EigenspaceNotPreserved, "connection leaks out of the Hamiltonian eigenspaces: residual " +
                                                       format_double(out.residual) + " > leak_tol " +
                                                       format_double(leak_tol));

  for (const auto& ref : reference) {
    std::vector<OperatorField> connection;
    for (const auto& field : sys.connection()) connection.push_back(reduce_field(field, ref.basis));
    out.blocks.push_back({ref, PullbackSystem(ref.block_dim, sys.d(), reduce_field(sys.hamiltonian(), ref.basis),
                                              std::move(connection), sys.convention())});
  }
  return out;
}

PhaseSplit phase_split(const PullbackSystem& sys, const ParameterPath& h, double t, double gap_tol,
                       double leak_tol, const IntegratorConfig& cfg) {
  const double t0 = h.t_begin();
  PhaseSplit out{block_decompose(sys, h, gap_tol, leak_tol), {}, CMatrix::Zero(sys.n(), sys.n())};

  for (const EigenBlock& block : out.system.blocks) {
    const PullbackSystem& reduced = block.reduced;
    const double dim = static_cast<double>(reduced.n());
    auto eigenvalue_at = [&](double tt, std::size_t seg) {
      return eval_field(reduced.hamiltonian(), tt, h.position(tt, seg)).trace().real() / dim;
    };

    BlockPhase phase;
    phase.eigenvalue = block.spectral.eigenvalue;
    phase.block_dim = block.spectral.block_dim;
    phase.geometric = transport_along(reduced, h, t0, t, t0, cfg).U;
    if (phase.block_dim == 1) phase.geometric_phase = std::arg(phase.geometric(0, 0));
    if (phase.geometric_phase && *phase.geometric_phase <= -std::numbers::pi) phase.geometric_phase = std::numbers::pi;

    for (double s : sample_times(t0, t, kBlockSamples)) {
      if (std::abs(eigenvalue_at(s, h.segment_index(s)) - phase.eigenvalue) > 1e-8) phase.eigenvalue_constant = false;
    }
    double integral = 0.0;
    if (phase.eigenvalue_constant) {
      integral = phase.eigenvalue * (t - t0);
    } else {
      for (const Piece& piece : path_pieces(h, t0, t))
        integral += integrate_scalar([&](double s) { return eigenvalue_at(s, piece.tag); }, piece.t_begin,
                                     piece.t_end);
    }
    phase.dynamical_phase = reduced.sign() * integral;

    const CMatrix& v = block.spectral.basis;
    out.reconstruction += v * (std::exp(kI * phase.dynamical_phase) * phase.geometric) * v.adjoint();
    out.phases.push_back(std::move(phase));
  }
  return out;
}

}  // namespace holomech
