#include "holomech/scenario.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <regex>
#include <set>
#include <sstream>

namespace holomech {

namespace {

using Key = std::string;

[[noreturn]] void fail(ErrorCode code, const Key& key, const std::string& msg) {
  throw Error(code, key + ": " + msg);
}

// Re-raise an inner error with the key path in front, keeping its code.
template <typename F>
auto at_key(const Key& key, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    std::string msg = e.what();
    const std::string prefix = std::string(to_string(e.code())) + ": ";
    if (msg.rfind(prefix, 0) == 0) msg = msg.substr(prefix.size());
    fail(e.code(), key, msg);
  }
}

Key child(const Key& parent, const std::string& name) { return parent.empty() ? name : parent + "." + name; }
Key index(const Key& parent, std::size_t i) { return parent + "[" + std::to_string(i) + "]"; }

void require_map(const YAML::Node& n, const Key& key) {
  if (!n.IsMap()) fail(ErrorCode::FormatError, key, "expected a table");
}

void require_seq(const YAML::Node& n, const Key& key) {
  if (!n.IsSequence()) fail(ErrorCode::FormatError, key, "expected a list");
}

void check_keys(const YAML::Node& n, const Key& key, const std::set<std::string>& allowed) {
  for (const auto& kv : n) {
    const auto name = kv.first.as<std::string>();
    if (!allowed.count(name)) fail(ErrorCode::FormatError, child(key, name), "unknown key");
  }
}

std::string scalar_text(const YAML::Node& n, const Key& key) {
  if (!n.IsScalar()) fail(ErrorCode::FormatError, key, "expected a scalar");
  return n.Scalar();
}

Expression parse_at(const std::string& src, const Key& key, const ConstantTable& constants) {
  return at_key(key, [&] { return parse_expression(src, constants); });
}

double number_from_text(const std::string& src, const Key& key, const ConstantTable& constants) {
  const Expression e = parse_at(src, key, constants);
  if (!e.is_constant()) fail(ErrorCode::FormatError, key, "'" + src + "' must not depend on t or s");
  const double v = e.eval(0.0, {});
  if (!std::isfinite(v)) fail(ErrorCode::ExpressionDomainError, key, "'" + src + "' is not finite");
  return v;
}

double number(const YAML::Node& n, const Key& key, const ConstantTable& constants) {
  return number_from_text(scalar_text(n, key), key, constants);
}

long integer(const YAML::Node& n, const Key& key, const ConstantTable& constants) {
  const double v = number(n, key, constants);
  if (v != std::floor(v) || std::abs(v) > 9e15) fail(ErrorCode::FormatError, key, "expected an integer");
  return static_cast<long>(v);
}

bool boolean(const YAML::Node& n, const Key& key) {
  const auto s = scalar_text(n, key);
  if (s == "true") return true;
  if (s == "false") return false;
  fail(ErrorCode::FormatError, key, "expected true or false");
}

Complex complex_entry(const YAML::Node& n, const Key& key, const ConstantTable& constants) {
  if (n.IsScalar()) return {number(n, key, constants), 0.0};
  if (n.IsSequence() && n.size() == 2)
    return {number(n[0], index(key, 0), constants), number(n[1], index(key, 1), constants)};
  fail(ErrorCode::FormatError, key, "expected a number or an [re, im] pair");
}

CMatrix dense_matrix(const YAML::Node& n, const Key& key, const ConstantTable& constants) {
  require_seq(n, key);
  const auto rows = static_cast<int>(n.size());
  if (rows == 0) fail(ErrorCode::FormatError, key, "empty matrix");
  CMatrix m(rows, rows);
  for (int i = 0; i < rows; ++i) {
    const Key rk = index(key, i);
    require_seq(n[i], rk);
    if (static_cast<int>(n[i].size()) != rows)
      fail(ErrorCode::DimensionMismatch, rk, "row has " + std::to_string(n[i].size()) + " entries, expected " +
                                                 std::to_string(rows));
    for (int j = 0; j < rows; ++j) m(i, j) = complex_entry(n[i][j], index(rk, j), constants);
  }
  return m;
}

struct Context {
  ConstantTable constants;
  std::map<std::string, CMatrix> basis;
  int n = 0;
  int d = 0;
};

CMatrix basis_matrix(const YAML::Node& n, const Key& key, const Context& ctx) {
  CMatrix m;
  if (n.IsScalar()) {
    const auto name = n.Scalar();
    if (auto it = ctx.basis.find(name); it != ctx.basis.end()) {
      m = it->second;
    } else {
      auto builtin = at_key(key, [&] { return named_basis(name); });
      if (!builtin) fail(ErrorCode::FormatError, key, "unknown basis '" + name + "'");
      m = *builtin;
    }
  } else {
    m = dense_matrix(n, key, ctx.constants);
  }
  if (m.rows() != ctx.n)
    fail(ErrorCode::DimensionMismatch, key,
         "basis is " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + " in a dimension-" +
             std::to_string(ctx.n) + " system");
  const double asym = max_entry_norm(m - m.adjoint());
  if (asym > 1e-10) fail(ErrorCode::NonHermitianBasis, key, "basis is not Hermitian (deviation " + format_double(asym) + ")");
  return m;
}

OperatorField field(const YAML::Node& n, const Key& key, const Context& ctx) {
  if (!n || n.IsNull()) return OperatorField(ctx.n);
  require_seq(n, key);
  std::vector<FieldTerm> terms;
  for (std::size_t k = 0; k < n.size(); ++k) {
    const Key tk = index(key, k);
    require_map(n[k], tk);
    check_keys(n[k], tk, {"coeff", "basis"});
    if (!n[k]["coeff"]) fail(ErrorCode::FormatError, child(tk, "coeff"), "missing");
    if (!n[k]["basis"]) fail(ErrorCode::FormatError, child(tk, "basis"), "missing");
    const Key ck = child(tk, "coeff");
    Expression coeff = parse_at(scalar_text(n[k]["coeff"], ck), ck, ctx.constants);
    if (coeff.max_param_index() > ctx.d)
      fail(ErrorCode::DimensionMismatch, ck,
           "uses s" + std::to_string(coeff.max_param_index()) + " but parameter_dim is " + std::to_string(ctx.d));
    terms.push_back({std::move(coeff), basis_matrix(n[k]["basis"], child(tk, "basis"), ctx)});
  }
  return OperatorField(ctx.n, std::move(terms));
}

std::vector<Expression> coords(const YAML::Node& n, const Key& key, const Context& ctx) {
  require_seq(n, key);
  if (static_cast<int>(n.size()) != ctx.d)
    fail(ErrorCode::DimensionMismatch, key,
         std::to_string(n.size()) + " coordinates for parameter_dim " + std::to_string(ctx.d));
  std::vector<Expression> out;
  for (std::size_t m = 0; m < n.size(); ++m) {
    const Key mk = index(key, m);
    out.push_back(parse_at(scalar_text(n[m], mk), mk, ctx.constants));
  }
  return out;
}

PathSegment segment(const YAML::Node& n, const Key& key, const Context& ctx) {
  if (!n["domain"]) fail(ErrorCode::FormatError, child(key, "domain"), "missing");
  if (!n["coords"]) fail(ErrorCode::FormatError, child(key, "coords"), "missing");
  const Key dk = child(key, "domain");
  const YAML::Node dom = n["domain"];
  if (!dom.IsSequence() || dom.size() != 2) fail(ErrorCode::FormatError, dk, "expected [t_begin, t_end]");
  PathSegment seg;
  seg.t_begin = number(dom[0], index(dk, 0), ctx.constants);
  seg.t_end = number(dom[1], index(dk, 1), ctx.constants);
  seg.coords = coords(n["coords"], child(key, "coords"), ctx);
  return seg;
}

NamedPath path_entry(const std::string& name, const YAML::Node& n, const Key& key, const Context& ctx) {
  require_map(n, key);
  check_keys(n, key, {"closed", "t_slice", "derivative_step", "segments", "domain", "coords"});
  const bool closed = n["closed"] ? boolean(n["closed"], child(key, "closed")) : false;
  const double t_slice = n["t_slice"] ? number(n["t_slice"], child(key, "t_slice"), ctx.constants) : 0.0;
  const double step =
      n["derivative_step"] ? number(n["derivative_step"], child(key, "derivative_step"), ctx.constants) : 1e-5;
  if (!(step > 0.0)) fail(ErrorCode::FormatError, child(key, "derivative_step"), "must be positive");
  std::vector<PathSegment> segments;
  if (n["segments"]) {
    if (n["domain"] || n["coords"]) fail(ErrorCode::FormatError, key, "give either segments or domain/coords");
    const Key sk = child(key, "segments");
    require_seq(n["segments"], sk);
    for (std::size_t i = 0; i < n["segments"].size(); ++i) {
      const Key ik = index(sk, i);
      require_map(n["segments"][i], ik);
      check_keys(n["segments"][i], ik, {"domain", "coords"});
      segments.push_back(segment(n["segments"][i], ik, ctx));
    }
    if (segments.empty()) fail(ErrorCode::FormatError, sk, "no segments");
  } else {
    segments.push_back(segment(n, key, ctx));
  }
  return at_key(key, [&] { return NamedPath{name, ParameterPath(std::move(segments), closed, step), t_slice}; });
}

IntegratorConfig integrator(const YAML::Node& n, const Key& key, const Context& ctx) {
  IntegratorConfig cfg;
  if (!n) return cfg;
  require_map(n, key);
  check_keys(n, key, {"method", "tol", "max_steps", "initial_step"});
  if (n["method"])
    cfg.method = at_key(child(key, "method"), [&] { return parse_method(scalar_text(n["method"], child(key, "method"))); });
  if (n["tol"]) cfg.tol = number(n["tol"], child(key, "tol"), ctx.constants);
  if (n["max_steps"]) cfg.max_steps = integer(n["max_steps"], child(key, "max_steps"), ctx.constants);
  if (n["initial_step"]) cfg.initial_step = number(n["initial_step"], child(key, "initial_step"), ctx.constants);
  at_key(key, [&] { cfg.validate(); });
  return cfg;
}

bool valid_identifier(const std::string& s) {
  static const std::regex re("[A-Za-z_][A-Za-z0-9_]*");
  return std::regex_match(s, re);
}

Scenario build(const YAML::Node& root, const Overrides& overrides) {
  if (!root.IsMap()) fail(ErrorCode::FormatError, "<root>", "expected a table");
  check_keys(root, "", {"name", "constants", "system", "basis", "paths", "integrator", "initial_state"});

  Context ctx;
  std::vector<std::pair<std::string, double>> constants;
  std::set<std::string> used;
  if (const auto cn = root["constants"]; cn && !cn.IsNull()) {
    require_map(cn, "constants");
    for (const auto& kv : cn) {
      const auto name = kv.first.as<std::string>();
      const Key k = child("constants", name);
      if (!valid_identifier(name)) fail(ErrorCode::FormatError, k, "not a valid identifier");
      if (is_reserved_name(name)) fail(ErrorCode::FormatError, k, "'" + name + "' is a reserved name");
      if (ctx.constants.count(name)) fail(ErrorCode::FormatError, k, "declared twice");
      std::string src;
      bool overridden = false;
      for (const auto& [oname, ovalue] : overrides)
        if (oname == name) {
          src = ovalue;
          overridden = true;
        }
      const double v = overridden ? number_from_text(src, "--set " + name, ctx.constants) : number(kv.second, k, ctx.constants);
      ctx.constants.emplace(name, v);
      constants.emplace_back(name, v);
    }
  }
  for (const auto& [oname, ovalue] : overrides)
    if (!ctx.constants.count(oname))
      throw Error(ErrorCode::InvalidArgument, "--set " + oname + ": not a declared constant");

  const auto sys = root["system"];
  if (!sys) fail(ErrorCode::FormatError, "system", "missing");
  require_map(sys, "system");
  check_keys(sys, "system", {"dimension", "parameter_dim", "sign_convention", "hamiltonian", "connection"});
  if (!sys["dimension"]) fail(ErrorCode::FormatError, "system.dimension", "missing");
  const long n = integer(sys["dimension"], "system.dimension", ctx.constants);
  if (n < 1 || n > 64) fail(ErrorCode::FormatError, "system.dimension", "must be between 1 and 64");
  const long d = sys["parameter_dim"] ? integer(sys["parameter_dim"], "system.parameter_dim", ctx.constants) : 0;
  if (d < 0 || d > kMaxParams)
    fail(ErrorCode::FormatError, "system.parameter_dim", "must be between 0 and " + std::to_string(kMaxParams));
  ctx.n = static_cast<int>(n);
  ctx.d = static_cast<int>(d);

  SignConvention convention = SignConvention::Paper;
  if (sys["sign_convention"]) {
    const auto s = scalar_text(sys["sign_convention"], "system.sign_convention");
    if (s == "physics") convention = SignConvention::Physics;
    else if (s != "paper") fail(ErrorCode::FormatError, "system.sign_convention", "expected paper or physics");
  }

  if (const auto bn = root["basis"]; bn && !bn.IsNull()) {
    require_map(bn, "basis");
    for (const auto& kv : bn) {
      const auto name = kv.first.as<std::string>();
      const Key k = child("basis", name);
      if (named_basis(name)) fail(ErrorCode::FormatError, k, "shadows a built-in basis name");
      CMatrix m = dense_matrix(kv.second, k, ctx.constants);
      ctx.basis.emplace(name, std::move(m));
    }
  }
  // Validate the declared bases against the system even if unused.
  for (const auto& [name, m] : ctx.basis) {
    const Key k = child("basis", name);
    if (m.rows() != ctx.n)
      fail(ErrorCode::DimensionMismatch, k,
           "basis is " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + " in a dimension-" +
               std::to_string(ctx.n) + " system");
    const double asym = max_entry_norm(m - m.adjoint());
    if (asym > 1e-10) fail(ErrorCode::NonHermitianBasis, k, "basis is not Hermitian (deviation " + format_double(asym) + ")");
  }

  OperatorField hamiltonian = field(sys["hamiltonian"], "system.hamiltonian", ctx);
  std::vector<OperatorField> connection;
  if (const auto cn = sys["connection"]; cn && !cn.IsNull()) {
    require_seq(cn, "system.connection");
    if (static_cast<long>(cn.size()) != d)
      fail(ErrorCode::DimensionMismatch, "system.connection",
           std::to_string(cn.size()) + " connection components for parameter_dim " + std::to_string(d));
    for (std::size_t m = 0; m < cn.size(); ++m)
      connection.push_back(field(cn[m], index("system.connection", m), ctx));
  } else {
    connection.assign(static_cast<std::size_t>(d), OperatorField(ctx.n));
  }

  Scenario out{root["name"] ? scalar_text(root["name"], "name") : std::string("unnamed"),
               std::move(constants),
               at_key("system", [&] {
                 return PullbackSystem(ctx.n, ctx.d, std::move(hamiltonian), std::move(connection), convention);
               }),
               {},
               integrator(root["integrator"], "integrator", ctx),
               std::nullopt};

  if (const auto pn = root["paths"]; pn && !pn.IsNull()) {
    require_map(pn, "paths");
    for (const auto& kv : pn) {
      const auto name = kv.first.as<std::string>();
      out.paths.push_back(path_entry(name, kv.second, child("paths", name), ctx));
    }
  }

  if (const auto sn = root["initial_state"]; sn && !sn.IsNull()) {
    require_seq(sn, "initial_state");
    if (static_cast<long>(sn.size()) != n)
      fail(ErrorCode::DimensionMismatch, "initial_state",
           std::to_string(sn.size()) + " components in a dimension-" + std::to_string(n) + " system");
    CVector psi(n);
    for (long i = 0; i < n; ++i) psi(i) = complex_entry(sn[i], index("initial_state", i), ctx.constants);
    const double norm = psi.norm();
    if (!(norm > 0.0)) fail(ErrorCode::FormatError, "initial_state", "zero vector");
    if (std::abs(norm - 1.0) > 1e-10) fail(ErrorCode::FormatError, "initial_state", "not normalized (norm " + format_double(norm) + ")");
    out.initial_state = psi;
  }
  return out;
}

std::optional<std::vector<int>> call_args(const std::string& name, const std::string& fn) {
  if (name.rfind(fn + "(", 0) != 0 || name.back() != ')') return std::nullopt;
  std::vector<int> args;
  std::stringstream ss(name.substr(fn.size() + 1, name.size() - fn.size() - 2));
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto first = item.find_first_not_of(' ');
    const auto last = item.find_last_not_of(' ');
    if (first == std::string::npos) return std::vector<int>{};
    item = item.substr(first, last - first + 1);
    if (item.empty() || item.find_first_not_of("0123456789") != std::string::npos || item.size() > 3)
      return std::vector<int>{};
    args.push_back(std::stoi(item));
  }
  return args;
}

void emit_matrix(YAML::Emitter& em, const CMatrix& m) {
  em << YAML::BeginSeq;
  for (int i = 0; i < m.rows(); ++i) {
    em << YAML::Flow << YAML::BeginSeq;
    for (int j = 0; j < m.cols(); ++j)
      em << YAML::Flow << YAML::BeginSeq << m(i, j).real() << m(i, j).imag() << YAML::EndSeq;
    em << YAML::EndSeq;
  }
  em << YAML::EndSeq;
}

void emit_field(YAML::Emitter& em, const OperatorField& f) {
  em << YAML::BeginSeq;
  for (const auto& term : f.terms()) {
    em << YAML::BeginMap << YAML::Key << "coeff" << YAML::Value << YAML::DoubleQuoted << term.coeff.to_string();
    em << YAML::Key << "basis" << YAML::Value;
    emit_matrix(em, term.basis);
    em << YAML::EndMap;
  }
  em << YAML::EndSeq;
}

}  // namespace

const NamedPath& Scenario::path(const std::string& wanted) const {
  for (const auto& p : paths)
    if (p.name == wanted) return p;
  throw Error(ErrorCode::InvalidArgument, "scenario '" + name + "' has no path '" + wanted + "'");
}

const NamedPath& Scenario::select_path(const std::string& wanted) const {
  if (!wanted.empty()) return path(wanted);
  if (paths.empty()) throw Error(ErrorCode::InvalidArgument, "scenario '" + name + "' declares no paths");
  return paths.front();
}

bool Scenario::has_constant(const std::string& wanted) const {
  for (const auto& [k, v] : constants)
    if (k == wanted) return true;
  return false;
}

std::optional<CMatrix> named_basis(const std::string& name) {
  if (name == "pauli_x") return pauli_x();
  if (name == "pauli_y") return pauli_y();
  if (name == "pauli_z") return pauli_z();
  auto bad = [&](const std::string& why) -> Error { return Error(ErrorCode::FormatError, "basis '" + name + "': " + why); };
  if (auto a = call_args(name, "I")) {
    if (a->size() != 1 || (*a)[0] < 1) throw bad("expected I(n) with n >= 1");
    return CMatrix::Identity((*a)[0], (*a)[0]);
  }
  for (const char* fn : {"E", "sym", "asym"}) {
    auto a = call_args(name, fn);
    if (!a) continue;
    if (a->size() != 3) throw bad(std::string("expected ") + fn + "(j,k,n)");
    const int j = (*a)[0], k = (*a)[1], n = (*a)[2];
    if (n < 1 || j < 1 || k < 1 || j > n || k > n) throw bad("indices must lie in 1..n");
    CMatrix m = CMatrix::Zero(n, n);
    const std::string f = fn;
    if (f == "E") {
      m(j - 1, k - 1) = 1.0;
    } else {
      if (j == k) throw bad("needs j != k");
      if (f == "sym") {
        m(j - 1, k - 1) = 1.0;
        m(k - 1, j - 1) = 1.0;
      } else {
        m(j - 1, k - 1) = kI;
        m(k - 1, j - 1) = -kI;
      }
    }
    return m;
  }
  return std::nullopt;
}

Scenario parse_scenario(const std::string& text, const Overrides& overrides) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::FormatError, "line " + std::to_string(e.mark.line + 1) + ", column " +
                                            std::to_string(e.mark.column + 1) + ": " + e.msg);
  }
  try {
    return build(root, overrides);
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::FormatError, "line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
}

Scenario load_scenario(const std::filesystem::path& file, const Overrides& overrides) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::FormatError, "cannot read " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), overrides);
}

std::filesystem::path template_dir() {
  if (const char* env = std::getenv("HOLOMECH_TEMPLATE_DIR"); env && *env) return env;
  return HOLOMECH_DEFAULT_TEMPLATE_DIR;
}

std::filesystem::path resolve_scenario(const std::string& file_or_template) {
  namespace fs = std::filesystem;
  if (fs::is_regular_file(file_or_template)) return file_or_template;
  const fs::path dir = template_dir();
  for (const fs::path& candidate : {dir / (file_or_template + ".yaml"), dir / file_or_template})
    if (fs::is_regular_file(candidate)) return candidate;
  throw Error(ErrorCode::InvalidArgument,
              "no scenario file or template named '" + file_or_template + "' (templates in " + dir.string() + ")");
}

std::string serialize(const Scenario& s) {
  YAML::Emitter em;
  em.SetDoublePrecision(17);
  em << YAML::BeginMap;
  em << YAML::Key << "name" << YAML::Value << s.name;
  if (!s.constants.empty()) {
    em << YAML::Key << "constants" << YAML::Value << YAML::BeginMap;
    for (const auto& [k, v] : s.constants) em << YAML::Key << k << YAML::Value << v;
    em << YAML::EndMap;
  }
  const auto& sys = s.system;
  em << YAML::Key << "system" << YAML::Value << YAML::BeginMap;
  em << YAML::Key << "dimension" << YAML::Value << sys.n();
  em << YAML::Key << "parameter_dim" << YAML::Value << sys.d();
  em << YAML::Key << "sign_convention" << YAML::Value
     << (sys.convention() == SignConvention::Paper ? "paper" : "physics");
  em << YAML::Key << "hamiltonian" << YAML::Value;
  emit_field(em, sys.hamiltonian());
  em << YAML::Key << "connection" << YAML::Value << YAML::BeginSeq;
  for (const auto& a : sys.connection()) emit_field(em, a);
  em << YAML::EndSeq << YAML::EndMap;

  if (!s.paths.empty()) {
    em << YAML::Key << "paths" << YAML::Value << YAML::BeginMap;
    for (const auto& p : s.paths) {
      em << YAML::Key << p.name << YAML::Value << YAML::BeginMap;
      em << YAML::Key << "closed" << YAML::Value << p.path.closed();
      em << YAML::Key << "t_slice" << YAML::Value << p.t_slice;
      em << YAML::Key << "derivative_step" << YAML::Value << p.path.derivative_step();
      em << YAML::Key << "segments" << YAML::Value << YAML::BeginSeq;
      for (const auto& seg : p.path.segments()) {
        em << YAML::BeginMap;
        em << YAML::Key << "domain" << YAML::Value << YAML::Flow << YAML::BeginSeq << seg.t_begin << seg.t_end
           << YAML::EndSeq;
        em << YAML::Key << "coords" << YAML::Value << YAML::BeginSeq;
        for (const auto& c : seg.coords) em << YAML::DoubleQuoted << c.to_string();
        em << YAML::EndSeq << YAML::EndMap;
      }
      em << YAML::EndSeq << YAML::EndMap;
    }
    em << YAML::EndMap;
  }

  em << YAML::Key << "integrator" << YAML::Value << YAML::BeginMap;
  em << YAML::Key << "method" << YAML::Value << std::string(to_string(s.integrator.method));
  em << YAML::Key << "tol" << YAML::Value << s.integrator.tol;
  em << YAML::Key << "max_steps" << YAML::Value << s.integrator.max_steps;
  em << YAML::Key << "initial_step" << YAML::Value << s.integrator.initial_step;
  em << YAML::EndMap;

  if (s.initial_state) {
    em << YAML::Key << "initial_state" << YAML::Value << YAML::BeginSeq;
    for (int i = 0; i < s.initial_state->size(); ++i)
      em << YAML::Flow << YAML::BeginSeq << (*s.initial_state)(i).real() << (*s.initial_state)(i).imag()
         << YAML::EndSeq;
    em << YAML::EndSeq;
  }
  em << YAML::EndMap;
  return std::string(em.c_str()) + "\n";
}

double scenario_difference(const Scenario& a, const Scenario& b, std::mt19937_64& rng, int points) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const auto& sa = a.system;
  const auto& sb = b.system;
  if (a.name != b.name || sa.n() != sb.n() || sa.d() != sb.d() || sa.convention() != sb.convention()) return kInf;
  if (a.constants != b.constants) return kInf;
  if (a.integrator.method != b.integrator.method || a.integrator.max_steps != b.integrator.max_steps) return kInf;
  double diff = std::max(std::abs(a.integrator.tol - b.integrator.tol),
                         std::abs(a.integrator.initial_step - b.integrator.initial_step));
  if (a.initial_state.has_value() != b.initial_state.has_value()) return kInf;
  if (a.initial_state) diff = std::max(diff, (*a.initial_state - *b.initial_state).norm());
  if (a.paths.size() != b.paths.size()) return kInf;

  // Evaluates both sides; a domain error must occur on both or neither.
  auto compare_fields = [&](const OperatorField& fa, const OperatorField& fb, double t, const std::vector<double>& s) {
    std::optional<CMatrix> ma, mb;
    try {
      ma = eval_field(fa, t, s);
    } catch (const Error&) {
    }
    try {
      mb = eval_field(fb, t, s);
    } catch (const Error&) {
    }
    if (ma.has_value() != mb.has_value()) return kInf;
    return ma ? frobenius(*ma - *mb) : 0.0;
  };

  std::uniform_real_distribution<double> ut(-1.0, 2.0), us(-2.0, 2.0), unit(0.0, 1.0);
  for (int i = 0; i < points; ++i) {
    const double t = ut(rng);
    std::vector<double> s(static_cast<std::size_t>(sa.d()));
    for (auto& x : s) x = us(rng);
    diff = std::max(diff, compare_fields(sa.hamiltonian(), sb.hamiltonian(), t, s));
    for (int m = 0; m < sa.d(); ++m) diff = std::max(diff, compare_fields(sa.connection()[m], sb.connection()[m], t, s));
  }
  for (std::size_t k = 0; k < a.paths.size(); ++k) {
    const auto& pa = a.paths[k];
    const auto& pb = b.paths[k];
    if (pa.name != pb.name || pa.path.closed() != pb.path.closed() ||
        pa.path.segments().size() != pb.path.segments().size())
      return kInf;
    diff = std::max({diff, std::abs(pa.t_slice - pb.t_slice),
                     std::abs(pa.path.derivative_step() - pb.path.derivative_step())});
    for (std::size_t j = 0; j < pa.path.segments().size(); ++j) {
      const auto& ga = pa.path.segments()[j];
      const auto& gb = pb.path.segments()[j];
      diff = std::max({diff, std::abs(ga.t_begin - gb.t_begin), std::abs(ga.t_end - gb.t_end)});
      for (int i = 0; i < points; ++i) {
        const double t = ga.t_begin + unit(rng) * (ga.t_end - ga.t_begin);
        const auto xa = pa.path.position(t, j);
        const auto xb = pb.path.position(t, j);
        for (std::size_t m = 0; m < xa.size(); ++m) {
          const double dm = std::abs(xa[m] - xb[m]);
          diff = std::max(diff, std::isnan(dm) ? (std::isnan(xa[m]) && std::isnan(xb[m]) ? 0.0 : kInf) : dm);
        }
      }
    }
  }
  return diff;
}

}  // namespace holomech
