#pragma once

#include <cmath>
#include <complex>
#include <random>
#include <string>
#include <vector>

#include "holomech/bundle.hpp"
#include "holomech/operator_core.hpp"

namespace holomech::testing {

inline CMatrix random_hermitian(std::mt19937_64& rng, int n, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  CMatrix m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = Complex(g(rng), g(rng));
  return 0.5 * (m + m.adjoint());
}

inline CMatrix random_unitary(std::mt19937_64& rng, int n) {
  return exp_i_hermitian(random_hermitian(rng, n, 2.0), 1.0);
}

inline CMatrix random_general(std::mt19937_64& rng, int n, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  CMatrix m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = Complex(g(rng), g(rng));
  return m;
}

inline CVector random_state(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> g(0.0, 1.0);
  CVector v(n);
  for (int i = 0; i < n; ++i) v(i) = Complex(g(rng), g(rng));
  return v / v.norm();
}

// Smooth random coefficient: a + b*sin(w*t + c*s1 + ...) style expression text.
inline std::string random_coefficient(std::mt19937_64& rng, int d, bool time_dependent = true) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::string out = std::to_string(u(rng));
  std::string arg = std::to_string(u(rng));
  if (time_dependent) arg += " + " + std::to_string(1.5 * u(rng)) + "*t";
  for (int m = 1; m <= d; ++m) arg += " + " + std::to_string(u(rng)) + "*s" + std::to_string(m);
  out += " + " + std::to_string(0.8 * u(rng)) + "*sin(" + arg + ")";
  return out;
}

inline CMatrix diag2(Complex a, Complex b) {
  CMatrix m = CMatrix::Zero(2, 2);
  m(0, 0) = a;
  m(1, 1) = b;
  return m;
}

}  // namespace holomech::testing
