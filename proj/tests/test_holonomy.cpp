#include <doctest.h>

#include <numbers>
#include <random>

#include "holomech/holonomy.hpp"
#include "test_support.hpp"

using namespace holomech;
using std::numbers::pi;

namespace {

Expression ex(const std::string& src, const ConstantTable& c = {}) { return parse_expression(src, c); }

CMatrix embed3(const CMatrix& top, Complex corner) {
  CMatrix m = CMatrix::Zero(3, 3);
  m.topLeftCorner(2, 2) = top;
  m(2, 2) = corner;
  return m;
}

CMatrix diag3(double a, double b, double c) {
  CMatrix m = CMatrix::Zero(3, 3);
  m.diagonal() << a, b, c;
  return m;
}

// Random closed Fourier loop in R^d over [0, 1], kept inside [0.5, 2.5]^d.
ParameterPath random_loop(std::mt19937_64& rng, int d) {
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  std::vector<Expression> coords;
  for (int m = 0; m < d; ++m) {
    std::string src = "1.5";
    for (int k = 1; k <= 2; ++k)
      src += " + " + std::to_string(u(rng)) + "*cos(2*pi*" + std::to_string(k) + "*t) + " + std::to_string(u(rng)) +
             "*sin(2*pi*" + std::to_string(k) + "*t)";
    coords.push_back(ex(src));
  }
  return ParameterPath::single(0.0, 1.0, coords, true);
}

PullbackSystem random_connection(std::mt19937_64& rng, int n, int d) {
  std::vector<OperatorField> conn;
  for (int m = 0; m < d; ++m) {
    std::vector<FieldTerm> terms;
    for (int k = 0; k < 2; ++k)
      terms.push_back({ex(testing::random_coefficient(rng, d, false)), testing::random_hermitian(rng, n)});
    conn.emplace_back(n, std::move(terms));
  }
  return PullbackSystem(n, d, OperatorField(n), conn);
}

}  // namespace

TEST_CASE("parallel_transport examples") {
  IntegratorConfig cfg;
  SUBCASE("flat trivial connection") {
    PullbackSystem sys(2, 2, OperatorField(2, {{ex("5"), pauli_z()}}), {OperatorField(2), OperatorField(2)});
    const auto res = parallel_transport(sys, ZLoop(circle_path(0, 0, 1, 1)), cfg);
    CHECK(frobenius(res.W - CMatrix::Identity(2, 2)) == 0.0);
    REQUIRE(res.abelian.has_value());
    CHECK(*res.abelian == 0.0);
    CHECK(res.loop_length == doctest::Approx(2 * pi).epsilon(1e-10));
  }
  SUBCASE("constant connection along a segment") {
    const double c = 0.6, L = 1.7;
    PullbackSystem sys(2, 1, OperatorField(2), {OperatorField(2, {{ex("0.6"), pauli_x()}})});
    const auto seg = ParameterPath::single(0.0, 1.0, {ex("1.7*t")});
    const auto p = transport_along(sys, seg, 0.0, 1.0, 0.0, cfg);
    CHECK(frobenius(p.U - matrix_exp(kI * c * L * pauli_x())) <= cfg.tol);
  }
  SUBCASE("U(1) connection alpha dtheta") {
    for (double alpha : {0.1, 0.25, 0.4}) {
      const auto res = parallel_transport(aharonov_bohm_system(alpha, 2), ZLoop(circle_path(0, 0, 1, 1)), cfg);
      CHECK(frobenius(res.W - std::exp(kI * 2.0 * pi * alpha) * CMatrix::Identity(2, 2)) <= 1e-7);
      CHECK(res.defect <= 1e-10);
    }
  }
  SUBCASE("open loops are rejected") {
    CHECK_THROWS_AS(ZLoop(ParameterPath::single(0.0, 1.0, {ex("t")})), Error);
  }
}

TEST_CASE("abelian_phase") {
  CHECK(abelian_phase(CMatrix::Identity(3, 3)) == 0.0);
  CHECK(abelian_phase(std::exp(kI * (pi / 3)) * CMatrix::Identity(2, 2)) == doctest::Approx(pi / 3));
  CHECK(abelian_phase(-CMatrix::Identity(2, 2)) == pi);
  try {
    abelian_phase(kI * pauli_x());
    FAIL("expected NonScalarHolonomy");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonScalarHolonomy);
  }
  CHECK(wrap_phase(-pi) == pi);
  CHECK(wrap_phase(3 * pi) == doctest::Approx(pi));
  CHECK(wrap_phase(2 * pi * 0.9) == doctest::Approx(-0.2 * pi));
}

TEST_CASE("aharonov_bohm_check") {
  IntegratorConfig cfg;
  auto zero = aharonov_bohm_check(0.0, 1, cfg);
  CHECK(zero.computed == 0.0);
  CHECK(zero.expected == 0.0);
  auto quarter = aharonov_bohm_check(0.25, 1, cfg);
  CHECK(std::abs(quarter.computed - pi / 2) <= 1e-6);
  CHECK(quarter.expected == doctest::Approx(pi / 2));
  auto contractible = aharonov_bohm_check(0.25, 0, cfg);
  CHECK(std::abs(contractible.computed) <= 1e-6);
  auto twice = aharonov_bohm_check(0.3, -2, cfg);
  CHECK(std::abs(wrap_phase(twice.computed - twice.expected)) <= 1e-6);
}

TEST_CASE("flat connection is trivial on contractible loops") {
  IntegratorConfig cfg;
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> centre(1.0, 3.0), radius(0.1, 0.5);
  for (int trial = 0; trial < 10; ++trial) {
    const auto path = circle_path(centre(rng), centre(rng) - 2.0, radius(rng), 1 + trial % 2);
    const auto res = parallel_transport(aharonov_bohm_system(0.37), ZLoop(path), cfg);
    CHECK(std::abs(abelian_phase(res.W)) <= 1e-6);
  }
}

TEST_CASE("commutation_defect") {
  const auto h = ParameterPath::single(0.0, 1.0, {ex("t")});
  PullbackSystem scalar(2, 1, OperatorField(2, {{ex("1"), pauli_z()}}),
                        {OperatorField(2, {{ex("1 + s1"), CMatrix::Identity(2, 2)}})});
  CHECK(commutation_defect(scalar, h, 10) <= 1e-12);
  PullbackSystem same(2, 1, OperatorField(2, {{ex("1"), pauli_z()}}), {OperatorField(2, {{ex("1"), pauli_z()}})});
  CHECK(commutation_defect(same, h, 10) <= 1e-12);
  PullbackSystem crossed(2, 1, OperatorField(2, {{ex("1"), pauli_z()}}), {OperatorField(2, {{ex("1"), pauli_x()}})});
  CHECK(std::abs(commutation_defect(crossed, h, 10) - 2 * std::sqrt(2.0)) <= 1e-10);
  CHECK_THROWS_AS(commutation_defect(crossed, h, 1), Error);
}

TEST_CASE("factorized_propagator examples") {
  IntegratorConfig cfg;
  const double omega = 0.7, T = 3.0, alpha = 0.2;
  const auto loop = circle_path(0, 0, 1, 1, 0.0, T);
  SUBCASE("commuting case") {
    const auto ab = aharonov_bohm_system(alpha, 2);
    PullbackSystem sys(2, 2, OperatorField(2, {{ex("0.7"), pauli_z()}}), ab.connection());
    const auto f = factorized_propagator(sys, loop, T, cfg);
    CHECK(frobenius(f.W_geo - std::exp(kI * 2.0 * pi * alpha) * CMatrix::Identity(2, 2)) <= 1e-7);
    CHECK(frobenius(f.U_dyn - matrix_exp(kI * omega * T * pauli_z())) <= 1e-7);
    CHECK(f.mismatch <= 10 * cfg.tol);
    CHECK_FALSE(f.connection_time_dependent);
  }
  SUBCASE("vanishing connection") {
    PullbackSystem sys(2, 2, OperatorField(2, {{ex("sin(t) + s1"), pauli_x()}}), {OperatorField(2), OperatorField(2)});
    const auto f = factorized_propagator(sys, loop, T, cfg);
    CHECK(frobenius(f.W_geo - CMatrix::Identity(2, 2)) == 0.0);
    CHECK(f.mismatch <= 10 * cfg.tol);
  }
  SUBCASE("non-commuting case") {
    PullbackSystem sys(2, 2, OperatorField(2, {{ex("1"), pauli_z()}}),
                       {OperatorField(2, {{ex("1"), pauli_x()}}), OperatorField(2, {{ex("0.5"), pauli_y()}})});
    const auto generic = circle_path(0.3, 0.2, 1.0, 1, 0.0, T);
    CHECK(commutation_defect(sys, generic, 50) > 0.1);
    CHECK(factorized_propagator(sys, generic, T, cfg).mismatch > 0.01);
  }
  SUBCASE("time-dependent connection is flagged") {
    PullbackSystem sys(2, 2, OperatorField(2), {OperatorField(2, {{ex("t"), pauli_x()}}), OperatorField(2)});
    CHECK(factorized_propagator(sys, loop, T, cfg).connection_time_dependent);
  }
}

TEST_CASE("factorization holds for scalar connections and fails without commutativity") {
  std::mt19937_64 rng(2024);
  IntegratorConfig cfg;
  cfg.method = Method::MagnusCF4;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + trial % 3, d = 1 + trial % 3;
    std::vector<OperatorField> conn;
    for (int m = 0; m < d; ++m)
      conn.emplace_back(n, std::vector<FieldTerm>{{ex(testing::random_coefficient(rng, d, false)),
                                                   CMatrix::Identity(n, n)}});
    PullbackSystem sys(n, d,
                       OperatorField(n, {{ex(testing::random_coefficient(rng, d)), testing::random_hermitian(rng, n)},
                                         {ex(testing::random_coefficient(rng, d)), testing::random_hermitian(rng, n)}}),
                       conn);
    const auto loop = random_loop(rng, d);
    CHECK(factorized_propagator(sys, loop, 1.0, cfg).mismatch <= 10 * cfg.tol);
  }

  int tested = 0, detected = 0;
  while (tested < 50) {
    const int n = 2 + tested % 3, d = 1 + tested % 3;
    auto geo = random_connection(rng, n, d);
    PullbackSystem sys(n, d, OperatorField(n, {{ex(testing::random_coefficient(rng, d)), testing::random_hermitian(rng, n)}}),
                       geo.connection());
    const auto loop = random_loop(rng, d);
    if (commutation_defect(sys, loop, 50) <= 0.1) continue;
    ++tested;
    if (factorized_propagator(sys, loop, 1.0, cfg).mismatch > 100 * cfg.tol) ++detected;
  }
  CHECK(detected >= 45);
}

TEST_CASE("holonomy depends on the image, not the parameterization") {
  std::mt19937_64 rng(71);
  IntegratorConfig cfg;
  cfg.method = Method::MagnusCF4;
  for (int trial = 0; trial < 6; ++trial) {
    const int n = 2 + trial % 3, d = 2 + trial % 2;
    const auto sys = random_connection(rng, n, d);
    const auto loop = random_loop(rng, d);
    const auto w = parallel_transport(sys, ZLoop(loop), cfg).W;
    const auto cubic = parallel_transport(sys, ZLoop(loop.reparameterized(ex("t^3"), 0.0, 1.0)), cfg).W;
    CHECK(frobenius(w - cubic) <= 5 * cfg.tol);

    // Orientation reversal inverts the holonomy.
    const auto back = parallel_transport(sys, ZLoop(loop.reversed()), cfg).W;
    CHECK(frobenius(back * w - CMatrix::Identity(n, n)) <= 5 * cfg.tol);

    // Running loop1 then loop2 (translated onto loop1's base point) gives W2 * W1.
    const auto loop2 = random_loop(rng, d);
    const auto start1 = loop.position(0.0), start2 = loop2.position(0.0);
    std::vector<Expression> moved, moved_late;
    for (int m = 0; m < d; ++m) {
      moved.push_back(loop2.segments()[0].coords[m] + Expression::constant(start1[m] - start2[m]));
      moved_late.push_back(moved.back().substitute(kTimeSlot, ex("t - 1")));
    }
    const auto w2 = parallel_transport(sys, ZLoop(ParameterPath::single(0.0, 1.0, moved, true)), cfg).W;
    const ParameterPath concat({loop.segments()[0], PathSegment{1.0, 2.0, moved_late}}, true);
    const auto w12 = parallel_transport(sys, ZLoop(concat), cfg).W;
    CHECK(frobenius(w12 - w2 * w) <= 5 * cfg.tol);
  }
}

TEST_CASE("scalar connection phase matches a direct line integral") {
  std::mt19937_64 rng(17);
  IntegratorConfig cfg;
  for (int trial = 0; trial < 8; ++trial) {
    const int d = 1 + trial % 3;
    std::vector<OperatorField> conn;
    std::vector<Expression> coeffs;
    for (int m = 0; m < d; ++m) {
      coeffs.push_back(ex(testing::random_coefficient(rng, d, false)));
      conn.emplace_back(1, std::vector<FieldTerm>{{coeffs.back(), CMatrix::Identity(1, 1)}});
    }
    PullbackSystem sys(1, d, OperatorField(1), conn);
    const auto loop = random_loop(rng, d);

    // Composite Simpson with symbolic path velocity.
    const int panels = 20000;
    double integral = 0.0;
    for (int i = 0; i <= panels; ++i) {
      const double s = static_cast<double>(i) / panels;
      const double w = (i == 0 || i == panels) ? 1.0 : (i % 2 ? 4.0 : 2.0);
      const auto sigma = loop.position(s);
      double integrand = 0.0;
      for (int m = 0; m < d; ++m)
        integrand += coeffs[m].eval(0.0, sigma) * loop.segments()[0].coords[m].derivative(kTimeSlot).eval(s, {});
      integral += w * integrand;
    }
    integral /= 3.0 * panels;
    const double phase = abelian_phase(parallel_transport(sys, ZLoop(loop), cfg).W);
    CHECK(std::abs(wrap_phase(phase - integral)) <= 1e-6);
  }
}

TEST_CASE("block_decompose examples") {
  const auto h = circle_path(0, 0, 1, 1);
  SUBCASE("block-diagonal connection") {
    CMatrix a = embed3(pauli_x() + 0.3 * pauli_z(), 0.8);
    PullbackSystem sys(3, 2, OperatorField(3, {{ex("1"), diag3(1, 1, 2)}}),
                       {OperatorField(3, {{ex("s2"), a}}), OperatorField(3)});
    const auto bs = block_decompose(sys, h);
    REQUIRE(bs.blocks.size() == 2);
    CHECK(bs.blocks[0].spectral.block_dim == 2);
    CHECK(bs.blocks[1].spectral.block_dim == 1);
    CHECK(bs.residual <= 1e-12);
  }
  SUBCASE("off-block element") {
    CMatrix a = CMatrix::Zero(3, 3);
    a(0, 2) = a(2, 0) = 0.3;
    PullbackSystem sys(3, 2, OperatorField(3, {{ex("1"), diag3(1, 1, 2)}}),
                       {OperatorField(3, {{ex("1"), a}}), OperatorField(3)});
    try {
      block_decompose(sys, h);
      FAIL("expected EigenspaceNotPreserved");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::EigenspaceNotPreserved);
    }
  }
  SUBCASE("simultaneous diagonalization") {
    const double a = 0.45;
    const auto line = ParameterPath::single(0.0, 1.0, {ex("t")});
    PullbackSystem sys(2, 1, OperatorField(2, {{ex("1"), pauli_z()}}), {OperatorField(2, {{ex("0.45"), pauli_z()}})});
    const auto bs = block_decompose(sys, line);
    REQUIRE(bs.blocks.size() == 2);
    const std::vector<double> sigma{0.5};
    CHECK(eval_field(bs.blocks[0].reduced.connection()[0], 0.0, sigma)(0, 0).real() == doctest::Approx(-a));
    CHECK(eval_field(bs.blocks[1].reduced.connection()[0], 0.0, sigma)(0, 0).real() == doctest::Approx(a));
  }
  SUBCASE("rotating eigenbasis") {
    const auto line = ParameterPath::single(0.0, 1.0, {ex("t")});
    PullbackSystem sys(2, 1, OperatorField(2, {{ex("cos(s1)"), pauli_z()}, {ex("sin(s1)"), pauli_x()}}),
                       {OperatorField(2)});
    try {
      block_decompose(sys, line);
      FAIL("expected DriftingProjectors");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::DriftingProjectors);
    }
  }
}

TEST_CASE("phase_split") {
  IntegratorConfig cfg;
  cfg.method = Method::MagnusCF4;
  SUBCASE("no connection") {
    const auto h = ParameterPath::single(0.0, 2.0, {ex("t")});
    PullbackSystem sys(3, 1, OperatorField(3, {{ex("1"), diag3(-1, 0.5, 0.5)}}), {OperatorField(3)});
    const auto split = phase_split(sys, h, 2.0, 1e-8, 1e-8, cfg);
    REQUIRE(split.phases.size() == 2);
    CHECK(split.phases[0].dynamical_phase == doctest::Approx(-2.0));
    CHECK(split.phases[1].dynamical_phase == doctest::Approx(1.0));
    for (const auto& p : split.phases) CHECK(frobenius(p.geometric - CMatrix::Identity(p.block_dim, p.block_dim)) == 0.0);
  }
  SUBCASE("one-dimensional block gives the line integral") {
    const auto loop = circle_path(1.5, 0, 1, 1, 0.0, 2.0);
    // A_2 = s1 on the upper level only: integral of s1 ds2 over the loop = pi r^2.
    CMatrix upper = CMatrix::Zero(2, 2);
    upper(0, 0) = 1.0;
    PullbackSystem sys(2, 2, OperatorField(2, {{ex("1"), pauli_z()}}),
                       {OperatorField(2), OperatorField(2, {{ex("s1"), upper}})});
    const auto split = phase_split(sys, loop, 2.0, 1e-8, 1e-8, cfg);
    REQUIRE(split.phases[1].geometric_phase.has_value());
    CHECK(std::abs(wrap_phase(*split.phases[1].geometric_phase - pi)) <= 1e-6);
    CHECK(std::abs(*split.phases[0].geometric_phase) <= 1e-12);
  }
  SUBCASE("reconstruction matches the full propagator with varying eigenvalues") {
    const double T = 2.0;
    const auto loop = circle_path(0.2, -0.1, 0.8, 1, 0.0, T);
    CMatrix a1 = embed3(0.4 * pauli_x() + 0.1 * pauli_z(), 0.3);
    CMatrix a2 = embed3(0.5 * pauli_y(), -0.2);
    PullbackSystem sys(3, 2, OperatorField(3, {{ex("1 + 0.2*s1"), diag3(1, 1, 0)}, {ex("2 + 0.1*s2"), diag3(0, 0, 1)}}),
                       {OperatorField(3, {{ex("s2"), a1}}), OperatorField(3, {{ex("cos(s1)"), a2}})});
    const auto split = phase_split(sys, loop, T, 1e-8, 1e-8, cfg);
    REQUIRE(split.phases.size() == 2);
    CHECK_FALSE(split.phases[0].eigenvalue_constant);
    for (const auto& p : split.phases) CHECK(unitarity_defect(p.geometric) <= 1e-10);
    const auto full = time_ordered_exp(sys, loop, 0.0, T, cfg);
    CHECK(frobenius(split.reconstruction - full.U) <= 10 * cfg.tol);
  }
}
