// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "holomech/cli.hpp"
#include "holomech/holonomy.hpp"
#include "holomech/scenario.hpp"
#include "test_support.hpp"

using namespace holomech;
using std::numbers::pi;

namespace {

Expression ex(const std::string& s) { return parse_expression(s); }

Scenario template_scenario(const std::string& name, const Overrides& o = {}) {
  return load_scenario(resolve_scenario(name), o);
}

struct Verdict {
  bool passed = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      passed = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

Verdict aharonov_bohm() {
  Verdict v;
  double worst = 0.0;
  for (double alpha : {0.0, 0.1, 0.25, 0.5, 0.9}) {
    const auto s = template_scenario("aharonov_bohm", {{"alpha", format_double(alpha)}});
    const auto res = parallel_transport(s.system, ZLoop(s.path("unit_circle").path), s.integrator);
    const double err = std::abs(wrap_phase(abelian_phase(res.W) - wrap_phase(2 * pi * alpha)));
    worst = std::max(worst, err);
    v.require(err <= 1e-6, "alpha " + format_double(alpha) + " off by " + num(err));
    const auto flat = parallel_transport(s.system, ZLoop(s.path("contractible").path), s.integrator);
    v.require(std::abs(abelian_phase(flat.W)) <= 1e-6, "contractible loop phase nonzero");
  }
  v.detail = v.passed ? "max phase error " + num(worst) : v.detail;
  return v;
}

// Discrete Berry phase of the upper eigenvector of n(theta, phi).sigma,
// -arg prod <u_k|u_{k+1}>, over N points of the cone.
double pancharatnam_phase(double theta, int N) {
  Complex prod = 1.0;
  auto upper = [&](double phi) {
    CMatrix h = std::cos(theta) * pauli_z() + std::sin(theta) * std::cos(phi) * pauli_x() +
                std::sin(theta) * std::sin(phi) * pauli_y();
    Eigen::SelfAdjointEigenSolver<CMatrix> es(h);
    return CVector(es.eigenvectors().col(1));
  };
  const CVector first = upper(0.0);
  CVector prev = first;
  for (int k = 1; k <= N; ++k) {
    const CVector next = k == N ? first : upper(2 * pi * k / N);
    prod *= prev.dot(next);
    prev = next;
  }
  return -std::arg(prod);
}

Verdict spin_cone() {
  Verdict v;
  double worst = 0.0;
  for (double theta : {pi / 6, pi / 4, pi / 3, pi / 2}) {
    const auto s = template_scenario("spin_half_cone", {{"theta", format_double(theta)}});
    const auto& loop = s.path("cone").path;
    const auto split = phase_split(s.system, loop, loop.t_end(), kDefaultGapTol, kDefaultLeakTol, s.integrator);
    const auto& top = split.phases.back();
    if (!top.geometric_phase) {
      v.require(false, "upper block is not one-dimensional");
      continue;
    }
    const double phase = *top.geometric_phase;
    const double analytic = pi * (1 - std::cos(theta));
    const double oracle = pancharatnam_phase(theta, 100000);
    const double e1 = std::abs(std::abs(phase) - analytic);
    const double e2 = std::abs(wrap_phase(phase - oracle));
    worst = std::max({worst, e1, e2});
    v.require(e1 <= 1e-5, "theta " + format_double(theta) + ": |phase| off analytic by " + num(e1));
    v.require(e2 <= 1e-5, "theta " + format_double(theta) + ": phase off product oracle by " + num(e2));
  }
  if (v.passed) v.detail = "max error " + num(worst);
  return v;
}

Verdict factorization() {
  Verdict v;
  const auto com = template_scenario("commuting_factorization");
  IntegratorConfig cfg = com.integrator;
  cfg.tol = 1e-8;
  const auto& h = com.path("loop").path;
  const double m1 = factorized_propagator(com.system, h, h.t_end(), cfg).mismatch;
  v.require(m1 <= 10 * cfg.tol, "commuting mismatch " + num(m1));
  const auto non = template_scenario("noncommuting_factorization");
  const auto& h2 = non.path("loop").path;
  const double m2 = factorized_propagator(non.system, h2, h2.t_end(), non.integrator).mismatch;
  const double defect = commutation_defect(non.system, h2, 65);
  v.require(m2 > 0.01, "non-commuting mismatch only " + num(m2));
  v.require(defect > 0.1, "commutation defect only " + num(defect));
  if (v.passed) v.detail = "commuting " + num(m1) + ", non-commuting " + num(m2) + " (defect " + num(defect) + ")";
  return v;
}

Verdict unitarity_composition() {
  Verdict v;
  std::mt19937_64 rng(100);
  std::uniform_int_distribution<int> dn(2, 6), dd(1, 3);
  std::uniform_real_distribution<double> cut(0.2, 0.8);
  double worst_defect = 0.0, worst_split = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = dn(rng), d = dd(rng);
    std::vector<FieldTerm> h_terms;
    for (int k = 0; k < 2; ++k) h_terms.push_back({ex(testing::random_coefficient(rng, d)), testing::random_hermitian(rng, n)});
    std::vector<OperatorField> conn;
    for (int m = 0; m < d; ++m)
      conn.emplace_back(n, std::vector<FieldTerm>{{ex(testing::random_coefficient(rng, d)), testing::random_hermitian(rng, n, 0.5)}});
    std::vector<Expression> coords;
    for (int m = 0; m < d; ++m) coords.push_back(ex(testing::random_coefficient(rng, 0)));
    const PullbackSystem sys(n, d, OperatorField(n, h_terms), conn);
    const auto path = ParameterPath::single(0.0, 1.0, coords);
    IntegratorConfig cfg;
    cfg.method = trial % 4 == 0 ? Method::ExpMidpoint2 : Method::MagnusCF4;
    const double mid = cut(rng);
    const auto whole = time_ordered_exp(sys, path, 0.0, 1.0, cfg);
    const auto split = compose(time_ordered_exp(sys, path, 0.0, mid, cfg), time_ordered_exp(sys, path, mid, 1.0, cfg));
    const double e = frobenius(split.U - whole.U);
    worst_defect = std::max({worst_defect, whole.defect, split.defect});
    worst_split = std::max(worst_split, e);
  }
  v.require(worst_defect <= 1e-10, "unitarity defect " + num(worst_defect));
  v.require(worst_split <= 5 * 1e-8, "composition error " + num(worst_split));
  if (v.passed) v.detail = "max defect " + num(worst_defect) + ", max composition error " + num(worst_split);
  return v;
}

Verdict leibniz() {
  Verdict v;
  std::mt19937_64 rng(5);
  const int n = 4;
  PullbackSystem sys(n, 2,
                     OperatorField(n, {{ex("cos(t + s1)"), testing::random_hermitian(rng, n)},
                                       {ex("s2^2"), testing::random_hermitian(rng, n)}}),
                     {OperatorField(n, {{ex("1 + 0.5*s1"), testing::random_hermitian(rng, n)}}),
                      OperatorField(n, {{ex("sin(s2)"), testing::random_hermitian(rng, n)}})});
  const auto h = ParameterPath::single(0.0, 1.0, {ex("sin(2*t)"), ex("t^2 - 0.5*t")});
  const CMatrix mix = testing::random_hermitian(rng, n);
  const CVector base = testing::random_state(rng, n);
  std::vector<double> residuals;
  for (int samples : {21, 41, 81, 161}) {
    const double step = 1.0 / (samples - 1);
    SampledSection psi{0.0, step, {}}, f_psi{0.0, step, {}};
    std::vector<double> f(samples), df(samples);
    for (int i = 0; i < samples; ++i) {
      const double t = i * step;
      psi.values.push_back(exp_i_hermitian(mix, 1.3 * t) * base);
      f[i] = std::exp(std::sin(3 * t));
      df[i] = 3 * std::cos(3 * t) * f[i];
      f_psi.values.push_back(f[i] * psi.values.back());
    }
    const auto lhs = covariant_derivative(sys, f_psi, h);
    const auto nabla = covariant_derivative(sys, psi, h);
    double worst = 0.0;
    for (int i = 0; i < samples; ++i)
      worst = std::max(worst, (lhs.values[i] - df[i] * psi.values[i] - f[i] * nabla.values[i]).norm());
    residuals.push_back(worst);
  }
  double min_order = 1e9;
  for (std::size_t k = 1; k < residuals.size(); ++k) min_order = std::min(min_order, std::log2(residuals[k - 1] / residuals[k]));
  v.require(min_order >= 3.5, "measured order " + num(min_order));
  if (v.passed) v.detail = "minimum measured order " + std::to_string(min_order);
  return v;
}

Verdict integrator_orders() {
  Verdict v;
  PullbackSystem sys(2, 0, OperatorField(2, {{ex("sin(t)"), pauli_z()}, {ex("cos(t)"), pauli_x()}}), {});
  const auto still = ParameterPath::single(0.0, 2.0, {});
  const double mid = convergence_order(sys, still, 0.0, 2.0, Method::ExpMidpoint2);
  const double cf4 = convergence_order(sys, still, 0.0, 2.0, Method::MagnusCF4);
  v.require(mid >= 1.9, "exp-midpoint-2 order " + std::to_string(mid));
  v.require(cf4 >= 3.8, "magnus-cf-4 order " + std::to_string(cf4));
  if (v.passed) v.detail = "exp-midpoint-2 " + std::to_string(mid) + ", magnus-cf-4 " + std::to_string(cf4);
  return v;
}

ParameterPath random_loop(std::mt19937_64& rng, int d) {
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  std::vector<Expression> coords;
  for (int m = 0; m < d; ++m) {
    std::string src = "1.5";
    for (int k = 1; k <= 3; ++k)
      src += " + " + format_double(u(rng)) + "*cos(2*pi*" + std::to_string(k) + "*t) + " + format_double(u(rng)) +
             "*sin(2*pi*" + std::to_string(k) + "*t)";
    coords.push_back(ex(src));
  }
  return ParameterPath::single(0.0, 1.0, coords, true);
}

Verdict reparameterization() {
  Verdict v;
  std::mt19937_64 rng(77);
  IntegratorConfig cfg;
  cfg.method = Method::MagnusCF4;
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + trial % 3, d = 2 + trial % 2;
    std::vector<OperatorField> conn;
    for (int m = 0; m < d; ++m)
      conn.emplace_back(n, std::vector<FieldTerm>{{ex(testing::random_coefficient(rng, d, false)), testing::random_hermitian(rng, n)},
                                                  {ex(testing::random_coefficient(rng, d, false)), testing::random_hermitian(rng, n)}});
    const PullbackSystem sys(n, d, OperatorField(n), conn);
    const auto loop = random_loop(rng, d);
    const auto w = parallel_transport(sys, ZLoop(loop), cfg).W;
    const auto w3 = parallel_transport(sys, ZLoop(loop.reparameterized(ex("t^3"), 0.0, 1.0)), cfg).W;
    worst = std::max(worst, frobenius(w - w3));
  }
  v.require(worst <= 5 * cfg.tol, "max holonomy difference " + num(worst));
  if (v.passed) v.detail = "max holonomy difference " + num(worst);
  return v;
}

Verdict block_reconstruction() {
  Verdict v;
  const auto s = template_scenario("block_adiabatic");
  const auto& h = s.path("loop").path;
  const auto split = phase_split(s.system, h, h.t_end(), kDefaultGapTol, kDefaultLeakTol, s.integrator);
  const auto full = time_ordered_exp(s.system, h, h.t_begin(), h.t_end(), s.integrator);
  const double err = frobenius(split.reconstruction - full.U);
  v.require(err <= 10 * s.integrator.tol, "reconstruction error " + num(err));
  const auto leaky = template_scenario("block_adiabatic", {{"leak", "0.05"}});
  bool raised = false;
  try {
    block_decompose(leaky.system, leaky.path("loop").path);
  } catch (const Error& e) {
    raised = e.code() == ErrorCode::EigenspaceNotPreserved;
  }
  v.require(raised, "perturbed connection did not raise EigenspaceNotPreserved");
  if (v.passed) v.detail = "reconstruction error " + num(err) + "; leak detected";
  return v;
}

Verdict cli_contract() {
  Verdict v;
  std::ostringstream out, err;
  const int code = cli::run({"check"}, out, err);
  v.require(code == 0, "check exited with " + std::to_string(code) + ": " + out.str());
  if (v.passed) v.detail = "check exit 0 on every template";
  return v;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"1 aharonov-bohm phase", aharonov_bohm},
      {"2 spin-1/2 cone berry phase", spin_cone},
      {"3 factorization", factorization},
      {"4 unitarity and composition", unitarity_composition},
      {"5 leibniz rule order", leibniz},
      {"6 integrator orders", integrator_orders},
      {"7 reparameterization invariance", reparameterization},
      {"8 block reconstruction", block_reconstruction},
      {"9 cli contract", cli_contract},
  };
  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v.passed = false;
      v.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s  criterion %s  (%.2fs)  %s\n", v.passed ? "PASS" : "FAIL", name.c_str(), secs, v.detail.c_str());
    if (!v.passed) ++failures;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
