#pragma once

// Scenario files: a YAML document with top-level keys `name`, `constants`,
// `system`, `basis`, `paths`, `integrator` and `initial_state`.
//
//   constants:    name: number or expression over earlier constants
//   system:       dimension, parameter_dim, sign_convention (paper|physics),
//                 hamiltonian: [term...], connection: [[term...] x parameter_dim]
//   term:         {coeff: expression, basis: name | dense matrix}
//   basis:        name: dense matrix, rows of [re, im] pairs
//   paths:        name: {closed, t_slice, derivative_step,
//                        segments: [{domain: [a, b], coords: [...]}]}
//                 or domain/coords directly for a single segment
//   integrator:   method, tol, max_steps, initial_step
//   initial_state: list of [re, im]
//
// Built-in basis names: I(n), pauli_x, pauli_y, pauli_z, E(j,j,n),
// sym(j,k,n) = E(j,k) + E(k,j), asym(j,k,n) = i(E(j,k) - E(k,j)); indices are
// 1-based.

#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "holomech/bundle.hpp"
#include "holomech/propagator.hpp"

namespace holomech {

struct NamedPath {
  std::string name;
  ParameterPath path;
  double t_slice = 0.0;
};

struct Scenario {
  std::string name;
  std::vector<std::pair<std::string, double>> constants;  // declaration order, evaluated
  PullbackSystem system;
  std::vector<NamedPath> paths;
  IntegratorConfig integrator;
  std::optional<CVector> initial_state;

  const NamedPath& path(const std::string& name) const;
  // The named path, or the first declared one when name is empty.
  const NamedPath& select_path(const std::string& name) const;
  bool has_constant(const std::string& name) const;
};

// Constant overrides, applied in place of the declared value.
using Overrides = std::vector<std::pair<std::string, std::string>>;

Scenario parse_scenario(const std::string& text, const Overrides& overrides = {});
Scenario load_scenario(const std::filesystem::path& file, const Overrides& overrides = {});

// A readable file, or a template name looked up in $HOLOMECH_TEMPLATE_DIR
// (falling back to the built-in template directory).
std::filesystem::path resolve_scenario(const std::string& file_or_template);
std::filesystem::path template_dir();

std::string serialize(const Scenario& s);

// Largest discrepancy between two scenarios over `points` random samples of
// every field and path; +inf when their structure differs.
double scenario_difference(const Scenario& a, const Scenario& b, std::mt19937_64& rng, int points = 20);

// Built-in basis by name, e.g. "sym(1,3,3)"; nullopt if the name is not one.
std::optional<CMatrix> named_basis(const std::string& name);

}  // namespace holomech
