#include "holomech/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "holomech/holonomy.hpp"
#include "holomech/json_out.hpp"
#include "holomech/scenario.hpp"

namespace holomech::cli {

namespace {

using json::Json;

struct Options {
  std::string command;
  std::string scenario;
  std::vector<std::string> sets;
  std::string path;
  std::optional<double> t0, t1, tol, t_slice;
  std::optional<std::string> method;
  std::optional<std::string> sign;
  std::string out;
  int jobs = 1;
  double gap_tol = kDefaultGapTol;
  double leak_tol = kDefaultLeakTol;
  std::string var, values, inner, csv;
};

const std::vector<std::string> kCommands = {"run",   "transport",   "factor-check", "blocks",
                                            "sweep", "convergence", "check"};

Overrides parse_sets(const std::vector<std::string>& sets) {
  Overrides out;
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0)
      throw Error(ErrorCode::InvalidArgument, "--set expects key=value, got '" + s + "'");
    out.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  return out;
}

std::vector<double> parse_values(const std::string& list) {
  std::vector<double> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.find_first_not_of(" \t") == std::string::npos) continue;
    const Expression e = parse_expression(item);
    if (!e.is_constant()) throw Error(ErrorCode::InvalidArgument, "--values entry '" + item + "' is not a number");
    out.push_back(e.eval(0.0, {}));
  }
  return out;
}

Scenario load(const Options& o) {
  if (o.scenario.empty()) throw Error(ErrorCode::InvalidArgument, "--scenario is required");
  return load_scenario(resolve_scenario(o.scenario), parse_sets(o.sets));
}

IntegratorConfig config(const Scenario& s, const Options& o) {
  IntegratorConfig cfg = s.integrator;
  if (o.tol) cfg.tol = *o.tol;
  if (o.method) cfg.method = parse_method(*o.method);
  cfg.validate();
  return cfg;
}

PullbackSystem system_of(const Scenario& s, const Options& o) {
  if (!o.sign) return s.system;
  if (*o.sign == "paper") return s.system.with_convention(SignConvention::Paper);
  if (*o.sign == "physics") return s.system.with_convention(SignConvention::Physics);
  throw Error(ErrorCode::InvalidArgument, "--sign-convention must be paper or physics");
}

Json header(const std::string& command, const Scenario& s, const NamedPath* p) {
  Json r;
  r["command"] = command;
  r["scenario"] = s.name;
  if (!s.constants.empty()) {
    Json c = Json::object();
    for (const auto& [k, v] : s.constants) c[k] = v;
    r["constants"] = c;
  }
  if (p) r["path"] = p->name;
  r["status"] = "ok";
  return r;
}

Json cmd_run(const Scenario& s, const Options& o) {
  const auto& np = s.select_path(o.path);
  const auto sys = system_of(s, o);
  const auto cfg = config(s, o);
  const double t0 = o.t0.value_or(np.path.t_begin());
  const double t1 = o.t1.value_or(np.path.t_end());
  const auto p = time_ordered_exp(sys, np.path, t0, t1, cfg);
  Json r = header("run", s, &np);
  r["method"] = std::string(to_string(cfg.method));
  r["tol"] = cfg.tol;
  r["t0"] = t0;
  r["t1"] = t1;
  r["steps"] = p.steps_taken;
  r["unitarity_defect"] = p.defect;
  r["U"] = json::matrix(p.U);
  if (s.initial_state) {
    const CVector psi = p.U * *s.initial_state;
    r["initial_state"] = json::vector(*s.initial_state);
    r["final_state"] = json::vector(psi);
    r["norm"] = psi.norm();
    r["fidelity"] = std::norm(s.initial_state->dot(psi));
  }
  return r;
}

Json cmd_transport(const Scenario& s, const Options& o) {
  const auto& np = s.select_path(o.path);
  const auto sys = system_of(s, o);
  const auto cfg = config(s, o);
  const ZLoop loop(np.path, o.t_slice.value_or(np.t_slice));
  const auto res = parallel_transport(sys, loop, cfg);
  Json r = header("transport", s, &np);
  r["method"] = std::string(to_string(cfg.method));
  r["tol"] = cfg.tol;
  r["t_slice"] = loop.t_slice();
  r["scalar"] = res.abelian.has_value();
  r["phase"] = res.abelian ? Json(*res.abelian) : Json(nullptr);
  r["loop_length"] = res.loop_length;
  r["steps"] = res.steps;
  r["unitarity_defect"] = res.defect;
  r["W"] = json::matrix(res.W);
  return r;
}

Json cmd_factor(const Scenario& s, const Options& o) {
  const auto& np = s.select_path(o.path);
  const auto sys = system_of(s, o);
  const auto cfg = config(s, o);
  if (o.t0 && *o.t0 != np.path.t_begin())
    throw Error(ErrorCode::InvalidArgument, "factor-check always starts at the path's first time");
  const double t1 = o.t1.value_or(np.path.t_end());
  const auto f = factorized_propagator(sys, np.path, t1, cfg);
  Json r = header("factor-check", s, &np);
  r["method"] = std::string(to_string(cfg.method));
  r["tol"] = cfg.tol;
  r["t0"] = np.path.t_begin();
  r["t1"] = t1;
  r["mismatch"] = f.mismatch;
  r["commutation_defect"] = commutation_defect(sys, np.path, 65);
  r["factorization_holds"] = f.mismatch <= 10.0 * cfg.tol;
  r["connection_time_dependent"] = f.connection_time_dependent;
  r["W_geo"] = json::matrix(f.W_geo);
  r["U_dyn"] = json::matrix(f.U_dyn);
  r["G"] = json::matrix(f.G);
  return r;
}

Json cmd_blocks(const Scenario& s, const Options& o) {
  const auto& np = s.select_path(o.path);
  const auto sys = system_of(s, o);
  const auto cfg = config(s, o);
  const double t1 = o.t1.value_or(np.path.t_end());
  const auto split = phase_split(sys, np.path, t1, o.gap_tol, o.leak_tol, cfg);
  const auto full = time_ordered_exp(sys, np.path, np.path.t_begin(), t1, cfg);
  Json r = header("blocks", s, &np);
  r["method"] = std::string(to_string(cfg.method));
  r["tol"] = cfg.tol;
  r["t0"] = np.path.t_begin();
  r["t1"] = t1;
  r["residual"] = split.system.residual;
  Json blocks = Json::array();
  std::size_t upper = 0;
  for (std::size_t k = 0; k < split.phases.size(); ++k) {
    const auto& p = split.phases[k];
    if (p.eigenvalue > split.phases[upper].eigenvalue) upper = k;
    Json b;
    b["eigenvalue"] = p.eigenvalue;
    b["dim"] = p.block_dim;
    b["eigenvalue_constant"] = p.eigenvalue_constant;
    b["dynamical_phase"] = p.dynamical_phase;
    b["geometric_phase"] = p.geometric_phase ? Json(*p.geometric_phase) : Json(nullptr);
    b["geometric"] = json::matrix(p.geometric);
    blocks.push_back(std::move(b));
  }
  const auto& top = split.phases[upper];
  r["upper_block_geometric_phase"] = top.geometric_phase ? Json(*top.geometric_phase) : Json(nullptr);
  r["reconstruction_mismatch"] = frobenius(split.reconstruction - full.U);
  r["blocks"] = std::move(blocks);
  return r;
}

Json cmd_convergence(const Scenario& s, const Options& o) {
  const auto& np = s.select_path(o.path);
  const auto sys = system_of(s, o);
  const double t0 = o.t0.value_or(np.path.t_begin());
  const double t1 = o.t1.value_or(np.path.t_end());
  std::vector<Method> methods = {Method::ExpMidpoint2, Method::MagnusCF4};
  if (o.method) methods = {parse_method(*o.method)};
  Json r = header("convergence", s, &np);
  r["t0"] = t0;
  r["t1"] = t1;
  Json studies = Json::array();
  for (Method m : methods) {
    const auto st = convergence_study(sys, np.path, t0, t1, m);
    Json j;
    j["method"] = std::string(to_string(m));
    j["order"] = st.order;
    j["steps"] = st.steps;
    j["errors"] = st.errors;
    studies.push_back(std::move(j));
    r[std::string("order_") + std::string(to_string(m))] = st.order;
  }
  r["studies"] = std::move(studies);
  return r;
}

Json execute_single(const std::string& command, const Options& o);

Json error_record(const std::string& command, const Error& e) {
  Json r;
  r["command"] = command;
  r["status"] = "error";
  r["error_code"] = std::string(to_string(e.code()));
  r["message"] = e.what();
  r["exit_code"] = exit_class(e.code());
  return r;
}

struct Outcome {
  Json record;
  int exit_code = 0;
};

Outcome guarded(const std::string& command, const Options& o) {
  try {
    return {execute_single(command, o), 0};
  } catch (const Error& e) {
    return {error_record(command, e), exit_class(e.code())};
  }
}

std::vector<Outcome> cmd_sweep(const Options& o) {
  if (o.var.empty()) throw Error(ErrorCode::InvalidArgument, "sweep needs --var");
  if (o.inner.empty()) throw Error(ErrorCode::InvalidArgument, "sweep needs --inner");
  if (o.inner == "sweep" || o.inner == "check" ||
      std::find(kCommands.begin(), kCommands.end(), o.inner) == kCommands.end())
    throw Error(ErrorCode::InvalidArgument, "--inner must be one of run, transport, factor-check, blocks, convergence");
  if (o.jobs < 1) throw Error(ErrorCode::InvalidArgument, "--jobs must be at least 1");
  const Scenario base = load(o);
  if (!base.has_constant(o.var))
    throw Error(ErrorCode::InvalidArgument, "--var " + o.var + " is not a declared constant of " + base.name);
  const auto values = parse_values(o.values);

  std::vector<Outcome> rows(values.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < values.size(); i = next++) {
      Options row = o;
      row.sets.erase(std::remove_if(row.sets.begin(), row.sets.end(),
                                    [&](const std::string& s) { return s.rfind(o.var + "=", 0) == 0; }),
                     row.sets.end());
      row.sets.push_back(o.var + "=" + format_double(values[i]));
      Outcome res = guarded(o.inner, row);
      Json rec;
      rec["command"] = "sweep";
      rec["index"] = i;
      rec["var"] = o.var;
      rec["value"] = values[i];
      rec["exit_code"] = res.exit_code;
      rec["result"] = std::move(res.record);
      rows[i] = {std::move(rec), res.exit_code};
    }
  };
  const auto threads = std::min<std::size_t>(static_cast<std::size_t>(o.jobs), std::max<std::size_t>(1, values.size()));
  std::vector<std::thread> pool;
  for (std::size_t k = 1; k < threads; ++k) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return rows;
}

std::string csv_cell(const Json& v) {
  if (v.is_null()) return "";
  if (v.is_string()) {
    std::string s = v.get<std::string>();
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  }
  return json::dump(v);
}

void write_csv(const std::vector<Outcome>& rows, const std::string& file) {
  std::vector<std::string> columns;
  for (const auto& row : rows)
    for (const auto& [k, v] : row.record["result"].items())
      if ((v.is_number() || v.is_boolean() || v.is_null()) && k != "exit_code" &&
          std::find(columns.begin(), columns.end(), k) == columns.end())
        columns.push_back(k);
  std::ofstream f(file);
  if (!f) throw Error(ErrorCode::InvalidArgument, "cannot write " + file);
  f << "index,value,exit_code,error_code";
  for (const auto& c : columns) f << ',' << c;
  f << '\n';
  for (const auto& row : rows) {
    const auto& rec = row.record;
    const auto& res = rec["result"];
    f << json::dump(rec["index"]) << ',' << json::dump(rec["value"]) << ',' << row.exit_code << ','
      << (res.contains("error_code") ? res["error_code"].get<std::string>() : std::string());
    for (const auto& c : columns) f << ',' << (res.contains(c) ? csv_cell(res[c]) : std::string());
    f << '\n';
  }
}

double hermitian_defect(const CMatrix& m) { return max_entry_norm(m - m.adjoint()); }

// Invariant suite over one scenario.
class Checker {
 public:
  Checker(const Scenario& s, const Options& o) : s_(s), o_(o) {}

  Json run(int& exit_code) {
    hermiticity();
    round_trip();
    determinism();
    unitarity_and_composition();
    exit_codes();
    bool all = true;
    for (const auto& c : checks_) all = all && c["passed"].get<bool>();
    Json r = header("check", s_, nullptr);
    r["passed"] = all;
    r["checks"] = checks_;
    exit_code = all ? 0 : 1;
    return r;
  }

 private:
  void record(const std::string& name, bool passed, Json detail = nullptr) {
    Json c;
    c["name"] = name;
    c["passed"] = passed;
    if (!detail.is_null()) c["detail"] = std::move(detail);
    checks_.push_back(std::move(c));
  }

  void hermiticity() {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> ut(-1.0, 2.0), us(-2.0, 2.0);
    double worst = 0.0;
    const auto& sys = s_.system;
    for (int i = 0; i < 20; ++i) {
      std::vector<double> sigma(static_cast<std::size_t>(sys.d()));
      for (auto& x : sigma) x = us(rng);
      const double t = ut(rng);
      try {
        worst = std::max(worst, hermitian_defect(eval_field(sys.hamiltonian(), t, sigma)));
        for (const auto& a : sys.connection()) worst = std::max(worst, hermitian_defect(eval_field(a, t, sigma)));
      } catch (const Error&) {
        // A coefficient singular at this sample point; skip it.
      }
    }
    record("hermiticity", worst <= 1e-10, worst);
  }

  void round_trip() {
    std::mt19937_64 rng(12);
    try {
      const Scenario back = parse_scenario(serialize(s_));
      const double diff = scenario_difference(s_, back, rng, 20);
      record("round_trip", diff <= 1e-12, diff);
    } catch (const Error& e) {
      record("round_trip", false, e.what());
    }
  }

  void determinism() {
    for (const std::string cmd : {"run", "transport"}) {
      if (cmd == "transport" && (s_.paths.empty() || !s_.select_path(o_.path).path.closed())) continue;
      const auto a = guarded(cmd, o_);
      const auto b = guarded(cmd, o_);
      record("determinism_" + cmd, json::dump(a.record) == json::dump(b.record) && a.exit_code == b.exit_code);
    }
  }

  void unitarity_and_composition() {
    if (s_.paths.empty()) return;
    try {
      const auto& np = s_.select_path(o_.path);
      const auto sys = system_of(s_, o_);
      const auto cfg = config(s_, o_);
      const double t0 = o_.t0.value_or(np.path.t_begin());
      const double t1 = o_.t1.value_or(np.path.t_end());
      const double mid = t0 + 0.4 * (t1 - t0);
      const auto whole = time_ordered_exp(sys, np.path, t0, t1, cfg);
      record("unitarity", whole.defect <= 1e-10, whole.defect);
      const auto split = compose(time_ordered_exp(sys, np.path, t0, mid, cfg), time_ordered_exp(sys, np.path, mid, t1, cfg));
      const double err = frobenius(split.U - whole.U);
      record("composition", err <= 5.0 * cfg.tol, err);
    } catch (const Error& e) {
      record("unitarity", false, e.what());
    }
  }

  int invoke(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    return cli::run(args, out, err);
  }

  void exit_codes() {
    namespace fs = std::filesystem;
    std::random_device rd;
    const fs::path dir = fs::temp_directory_path() / ("holomech-check-" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(dir);
    auto write = [&](const std::string& name, const std::string& text) {
      const fs::path p = dir / name;
      std::ofstream(p) << text;
      return p.string();
    };
    const std::string good = write("scenario.yaml", serialize(s_));
    Scenario limited = s_;
    limited.integrator.max_steps = 1;
    limited.integrator.initial_step = 0.0;
    const std::string limited_file = write("limited.yaml", serialize(limited));
    const std::string malformed = write("malformed.yaml", "system: [dimension: 2\n  hamiltonian: {{\n");
    const std::string mismatch = write("mismatch.yaml",
                                       "system:\n  dimension: 3\n  parameter_dim: 0\n  hamiltonian:\n"
                                       "    - {coeff: \"1\", basis: pauli_z}\n");

    Json detail = Json::object();
    bool ok = true;
    auto expect = [&](const std::string& name, const std::vector<std::string>& args, int want) {
      const int got = invoke(args);
      detail[name] = got;
      ok = ok && got == want;
    };
    expect("success", {"run", "--scenario", good}, s_.paths.empty() ? 2 : 0);
    expect("malformed_file", {"run", "--scenario", malformed}, 2);
    expect("unknown_command", {"frobnicate", "--scenario", good}, 2);
    expect("dimension_mismatch", {"run", "--scenario", mismatch}, 2);
    expect("missing_scenario", {"run", "--scenario", (dir / "absent.yaml").string()}, 2);
    if (!s_.paths.empty()) expect("step_limit", {"run", "--scenario", limited_file}, 1);
    std::error_code ec;
    fs::remove_all(dir, ec);
    record("exit_codes", ok, detail);
  }

  const Scenario& s_;
  const Options& o_;
  Json checks_ = Json::array();
};

std::vector<Outcome> cmd_check(const Options& o) {
  std::vector<std::string> targets;
  if (!o.scenario.empty()) {
    targets.push_back(o.scenario);
  } else {
    const auto dir = template_dir();
    if (std::filesystem::is_directory(dir))
      for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.path().extension() == ".yaml") targets.push_back(entry.path().string());
    std::sort(targets.begin(), targets.end());
    if (targets.empty()) throw Error(ErrorCode::InvalidArgument, "no --scenario given and no templates in " + dir.string());
  }
  std::vector<Outcome> out;
  for (const auto& t : targets) {
    Options local = o;
    local.scenario = t;
    try {
      const Scenario s = load(local);
      int code = 0;
      Checker checker(s, local);
      Json rec = checker.run(code);
      out.push_back({std::move(rec), code});
    } catch (const Error& e) {
      out.push_back({error_record("check", e), exit_class(e.code())});
    }
  }
  return out;
}

Json execute_single(const std::string& command, const Options& o) {
  const Scenario s = load(o);
  if (command == "run") return cmd_run(s, o);
  if (command == "transport") return cmd_transport(s, o);
  if (command == "factor-check") return cmd_factor(s, o);
  if (command == "blocks") return cmd_blocks(s, o);
  if (command == "convergence") return cmd_convergence(s, o);
  throw Error(ErrorCode::InvalidArgument, "unknown command '" + command + "'");
}

void add_options(CLI::App& sub, Options& o) {
  sub.add_option("--scenario", o.scenario, "Scenario file or template name");
  sub.add_option("--set", o.sets, "Override a constant: key=value");
  sub.add_option("--path,--loop", o.path, "Path to use (default: first declared)");
  sub.add_option("--t0", o.t0, "Start time");
  sub.add_option("--t1", o.t1, "End time");
  sub.add_option("--t-slice", o.t_slice, "Time slice for transport");
  sub.add_option("--tol", o.tol, "Integrator tolerance");
  sub.add_option("--method", o.method, "exp-midpoint-2 or magnus-cf-4");
  sub.add_option("--sign-convention", o.sign, "paper or physics");
  sub.add_option("--out", o.out, "Write records to this file");
  sub.add_option("--jobs", o.jobs, "Worker threads for sweep");
  sub.add_option("--gap-tol", o.gap_tol, "Eigenvalue clustering tolerance");
  sub.add_option("--leak-tol", o.leak_tol, "Allowed off-block connection norm");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app("Berry connections, holonomies and propagators of parameter-driven quantum systems", "holomech");
  app.require_subcommand(1, 1);
  std::vector<CLI::App*> subs;
  for (const auto& name : kCommands) {
    auto* sub = app.add_subcommand(name);
    add_options(*sub, o);
    subs.push_back(sub);
  }
  auto* sweep = subs[4];
  sweep->add_option("--var", o.var, "Constant to sweep");
  sweep->add_option("--values", o.values, "Comma-separated values");
  sweep->add_option("--inner", o.inner, "Command run for each value");
  sweep->add_option("--csv", o.csv, "Also write a CSV table");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "holomech: " << e.what() << '\n';
    Json r;
    r["command"] = args.empty() ? std::string() : args.front();
    r["status"] = "error";
    r["error_code"] = std::string(to_string(ErrorCode::InvalidArgument));
    r["message"] = e.what();
    r["exit_code"] = 2;
    out << json::dump(r) << '\n';
    return 2;
  }
  for (auto* sub : subs)
    if (sub->parsed()) o.command = sub->get_name();

  std::vector<Outcome> results;
  try {
    if (o.command == "sweep") results = cmd_sweep(o);
    else if (o.command == "check") results = cmd_check(o);
    else results.push_back({execute_single(o.command, o), 0});
    if (o.command == "sweep" && !o.csv.empty()) write_csv(results, o.csv);
  } catch (const Error& e) {
    results = {{error_record(o.command, e), exit_class(e.code())}};
  }

  int code = 0;
  std::ofstream file;
  if (!o.out.empty()) {
    file.open(o.out);
    if (!file) {
      err << "holomech: cannot write " << o.out << '\n';
      return 2;
    }
  }
  std::ostream& sink = o.out.empty() ? out : file;
  for (const auto& r : results) {
    sink << json::dump(r.record) << '\n';
    code = std::max(code, r.exit_code);
    if (r.record.contains("message") && r.record["status"] == "error")
      err << "holomech: " << r.record["message"].get<std::string>() << '\n';
  }
  return code;
}

}  // namespace holomech::cli
