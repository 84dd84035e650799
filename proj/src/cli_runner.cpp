#include "carnotflow/cli_runner.hpp"

#include "carnotflow/graph_geometry.hpp"
#include "carnotflow/oracles.hpp"
#include "carnotflow/viscosity_toolkit.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <set>

namespace carnotflow {

namespace {

using nlohmann::json;

const std::set<std::string> kTopLevelKeys = {
    "command", "group",      "grid",   "initial", "boundary", "variant",     "T_end",        "dt_safety",
    "snapshot_every", "snapshot_interval", "tolerances", "output_dir", "seed", "checks", "check_params",
    "description", "a", "b"};

const std::set<std::string> kChecks = {"htype_identities", "cylinder", "barrier", "grim_reaper"};

double number(const json& doc, const std::string& key, double fallback) {
  if (!doc.contains(key)) return fallback;
  if (!doc.at(key).is_number()) throw ConfigError(key, "expected a number");
  const double x = doc.at(key).get<double>();
  if (!std::isfinite(x)) throw ConfigError(key, "must be finite");
  return x;
}

int integer(const json& doc, const std::string& key, int fallback) {
  if (!doc.contains(key)) return fallback;
  if (!doc.at(key).is_number_integer()) throw ConfigError(key, "expected an integer");
  return doc.at(key).get<int>();
}

std::vector<double> number_list(const json& doc, const std::string& key) {
  if (!doc.contains(key) || !doc.at(key).is_array()) throw ConfigError(key, "expected an array of numbers");
  std::vector<double> out;
  for (const auto& x : doc.at(key)) {
    if (!x.is_number()) throw ConfigError(key, "expected an array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<document>", "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("<document>", std::string("malformed JSON: ") + e.what());
  }
}

double eval_polynomial(const std::vector<Monomial>& poly, const Vec& x) {
  double sum = 0.0;
  for (const auto& m : poly) {
    double term = m.coeff;
    for (std::size_t a = 0; a < m.powers.size(); ++a)
      for (int p = 0; p < m.powers[a]; ++p) term *= x[static_cast<Eigen::Index>(a)];
    sum += term;
  }
  return sum;
}

// Initial data as a closure on flattened coordinates.
std::function<double(const Vec&)> initial_closure(const ExperimentConfig& cfg) {
  if (cfg.initial_preset == "grim_reaper") {
    const ExactSolution gr = grim_reaper();
    return [gr](const Vec& x) { return gr.value(x, 0.0); };
  }
  if (cfg.initial_preset == "paraboloid") {
    const int m1 = cfg.spec.m1();
    return [m1](const Vec& x) { return x.head(m1).squaredNorm(); };
  }
  if (cfg.initial_preset == "htype_barrier") {
    const SmoothFunction h0 = htype_barrier(cfg.spec);
    const GroupSpec spec = cfg.spec;
    return [h0, spec](const Vec& x) { return h0(from_coordinates(spec, x)); };
  }
  const auto poly = cfg.polynomial;
  return [poly](const Vec& x) { return eval_polynomial(poly, x); };
}

void write_json(const std::filesystem::path& path, const json& doc) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  out << doc.dump(2) << "\n";
}

json check_htype_identities(const ExperimentConfig& cfg, bool& pass) {
  if (!cfg.spec.is_htype()) throw ConfigError("group", "htype_identities needs an H-type group");
  const int n = cfg.check_params.value("samples", 1000);
  const double radius = cfg.check_params.value("radius", 1.0);
  const IdentityReport rep = htype_identities_check(cfg.spec, random_points(cfg.spec, n, radius, cfg.seed));
  pass = rep.max_dev() <= cfg.tol_identity;
  return to_json(rep);
}

json check_cylinder(const ExperimentConfig& cfg, bool& pass) {
  const double R0 = cfg.check_params.value("R0", 1.0);
  const double t = cfg.check_params.value("t", 0.25);
  if (!(R0 > 0.0)) throw ConfigError("check_params", "R0 must be positive");
  if (!(t >= 0.0 && t < cylinder_extinction_time(cfg.spec.m1(), R0)))
    throw ConfigError("check_params", "t must lie in [0, extinction time)");
  const ExactSolution cyl = shrinking_cylinder(cfg.spec, R0);
  std::mt19937_64 rng(cfg.seed);
  OracleReport res{cyl.name, 0.0, 0};
  for (int i = 0; i < 100; ++i) {
    const Vec x = cyl.sample_point(rng, t);
    res.max_residual = std::max(res.max_residual, std::abs(cyl.residual(x, t)));
    ++res.samples;
  }
  const SelfSimilarityReport ss = self_similarity_check(cfg.spec, R0, t, cylinder_points(cfg.spec, R0, 100, cfg.seed));
  pass = res.max_residual <= cfg.tol_residual && ss.passes;
  json j = to_json(res);
  j["self_similarity"] = to_json(ss);
  return j;
}

json check_barrier(const ExperimentConfig& cfg, bool& pass) {
  if (!cfg.spec.is_htype()) throw ConfigError("group", "barrier check needs an H-type group");
  BarrierSpec b;
  b.h0 = htype_barrier(cfg.spec);
  b.eps0 = cfg.check_params.value("eps0", 1.0);
  b.C = cfg.check_params.value("C", 0.0);
  if (!(b.eps0 > 0.0)) throw ConfigError("check_params", "eps0 must be positive");
  const double radius = cfg.check_params.value("radius", 10.0);
  const int n = cfg.check_params.value("barrier_samples", 2000);
  const BarrierReport rep = barrier_validate(cfg.spec, b, radius, n, cfg.seed);
  pass = rep.feasible();
  return to_json(rep);
}

json check_grim_reaper(const ExperimentConfig& cfg, bool& pass) {
  const OracleReport rep = residual_report(grim_reaper(), 1000, 0.0, 10.0, cfg.seed);
  pass = rep.max_residual <= cfg.tol_residual;
  return to_json(rep);
}

}  // namespace

GroupSpec group_from_preset(const std::string& name, const std::filesystem::path& base_dir) {
  const auto colon = name.find(':');
  const std::string kind = name.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : name.substr(colon + 1);
  auto as_int = [&](int lo) {
    try {
      std::size_t used = 0;
      const int n = std::stoi(arg, &used);
      if (used != arg.size() || n < lo) throw std::invalid_argument(arg);
      return n;
    } catch (const std::exception&) {
      throw ConfigError("group", "bad preset argument in '" + name + "'");
    }
  };
  if (kind == "euclidean") return make_euclidean(as_int(1));
  if (kind == "heisenberg") return make_heisenberg(as_int(1));
  if (kind == "quaternionic" && arg.empty()) return make_quaternionic();
  if (kind == "htype" && !arg.empty()) {
    std::filesystem::path p(arg);
    if (p.is_relative()) p = base_dir / p;
    const json doc = read_json(p);
    try {
      return group_from_json(doc);
    } catch (const std::exception& e) {
      throw ConfigError("group", e.what());
    }
  }
  throw ConfigError("group", "unknown preset '" + name + "'");
}

ExperimentConfig parse_config(const json& doc, const std::filesystem::path& base_dir) {
  if (!doc.is_object()) throw ConfigError("<document>", "expected a JSON object");
  for (const auto& [key, _] : doc.items())
    if (!kTopLevelKeys.count(key)) throw ConfigError(key, "unknown key");
  ExperimentConfig cfg;
  cfg.raw = doc;
  if (doc.contains("command")) {
    if (!doc["command"].is_string()) throw ConfigError("command", "expected a string");
    cfg.command = doc["command"].get<std::string>();
  }

  if (!doc.contains("group")) throw ConfigError("group", "missing");
  const json& g = doc["group"];
  if (g.is_string()) {
    cfg.spec = group_from_preset(g.get<std::string>(), base_dir);
  } else if (g.is_object()) {
    try {
      cfg.spec = group_from_json(g);
    } catch (const std::exception& e) {
      throw ConfigError("group", e.what());
    }
  } else {
    throw ConfigError("group", "expected a preset string or an object");
  }

  if (doc.contains("grid")) {
    const json& gr = doc["grid"];
    if (!gr.is_object()) throw ConfigError("grid", "expected an object");
    const auto lower = number_list(gr, "lower");
    const auto upper = number_list(gr, "upper");
    if (!gr.contains("nodes") || !gr["nodes"].is_array()) throw ConfigError("nodes", "expected an array of integers");
    std::vector<int> nodes;
    for (const auto& x : gr["nodes"]) {
      if (!x.is_number_integer()) throw ConfigError("nodes", "expected an array of integers");
      nodes.push_back(x.get<int>());
    }
    const auto dim = static_cast<std::size_t>(cfg.spec.dim());
    if (lower.size() != dim || upper.size() != dim || nodes.size() != dim)
      throw ConfigError("grid", "needs one entry per group coordinate (" + std::to_string(dim) + ")");
    try {
      cfg.grid = Grid::for_group(cfg.spec, lower, upper, nodes);
    } catch (const std::exception& e) {
      throw ConfigError("grid", e.what());
    }
  }

  if (doc.contains("initial")) {
    const json& in = doc["initial"];
    std::string preset;
    if (in.is_string()) {
      preset = in.get<std::string>();
    } else if (in.is_object() && in.contains("preset")) {
      if (!in["preset"].is_string()) throw ConfigError("preset", "expected a string");
      preset = in["preset"].get<std::string>();
    } else if (in.is_object() && in.contains("polynomial")) {
      if (!in["polynomial"].is_array()) throw ConfigError("polynomial", "expected an array of monomials");
      for (const auto& m : in["polynomial"]) {
        if (!m.is_object() || !m.contains("coeff") || !m["coeff"].is_number())
          throw ConfigError("coeff", "each monomial needs a numeric coeff");
        Monomial mono{m["coeff"].get<double>(), {}};
        if (!m.contains("powers") || !m["powers"].is_array()) throw ConfigError("powers", "expected an array");
        for (const auto& p : m["powers"]) {
          if (!p.is_number_integer() || p.get<int>() < 0) throw ConfigError("powers", "expected nonnegative integers");
          mono.powers.push_back(p.get<int>());
        }
        if (mono.powers.size() != static_cast<std::size_t>(cfg.spec.dim()))
          throw ConfigError("powers", "needs one exponent per group coordinate");
        cfg.polynomial.push_back(std::move(mono));
      }
    } else {
      throw ConfigError("initial", "expected a preset name or an object with preset or polynomial");
    }
    if (!preset.empty()) {
      if (preset != "grim_reaper" && preset != "paraboloid" && preset != "htype_barrier")
        throw ConfigError("initial", "unknown preset '" + preset + "'");
      if (preset == "grim_reaper" && !(cfg.spec == make_euclidean(1)))
        throw ConfigError("initial", "grim_reaper needs group euclidean:1");
      if (preset == "htype_barrier" && !cfg.spec.is_htype())
        throw ConfigError("initial", "htype_barrier needs an H-type group");
      cfg.initial_preset = preset;
    }
  }

  if (doc.contains("boundary")) {
    const json& b = doc["boundary"];
    std::string mode;
    if (b.is_string()) {
      mode = b.get<std::string>();
    } else if (b.is_object() && b.contains("mode") && b["mode"].is_string()) {
      mode = b["mode"].get<std::string>();
      cfg.drift_rate = number(b, "rate", 1.0);
    } else {
      throw ConfigError("boundary", "expected frozen, exact, drift or {\"mode\":..., \"rate\":...}");
    }
    if (mode == "frozen") cfg.boundary = BoundaryMode::frozen;
    else if (mode == "exact") cfg.boundary = BoundaryMode::exact;
    else if (mode == "drift") cfg.boundary = BoundaryMode::drift;
    else throw ConfigError("boundary", "unknown mode '" + mode + "'");
    if (cfg.boundary == BoundaryMode::exact && cfg.initial_preset != "grim_reaper")
      throw ConfigError("boundary", "exact boundary data is only available for the grim_reaper preset");
  }

  if (doc.contains("variant")) {
    if (!doc["variant"].is_string()) throw ConfigError("variant", "expected det or det_plus");
    try {
      cfg.variant = flow_variant_from_string(doc["variant"].get<std::string>());
    } catch (const std::exception& e) {
      throw ConfigError("variant", e.what());
    }
  }
  cfg.t_end = number(doc, "T_end", 0.0);
  if (cfg.t_end < 0.0) throw ConfigError("T_end", "must be nonnegative");
  cfg.dt_safety = number(doc, "dt_safety", 0.4);
  if (!(cfg.dt_safety > 0.0 && cfg.dt_safety <= 1.0)) throw ConfigError("dt_safety", "must lie in (0, 1]");
  cfg.snapshot_every = integer(doc, "snapshot_every", 0);
  if (cfg.snapshot_every < 0) throw ConfigError("snapshot_every", "must be nonnegative");
  cfg.snapshot_interval = number(doc, "snapshot_interval", 0.0);
  if (cfg.snapshot_interval < 0.0) throw ConfigError("snapshot_interval", "must be nonnegative");

  if (doc.contains("tolerances")) {
    const json& t = doc["tolerances"];
    if (!t.is_object()) throw ConfigError("tolerances", "expected an object");
    const std::pair<const char*, double*> entries[] = {{"ordering", &cfg.tol_ordering},
                                                       {"residual", &cfg.tol_residual},
                                                       {"final_error", &cfg.tol_final_error},
                                                       {"identity", &cfg.tol_identity}};
    for (const auto& [key, target] : entries) {
      *target = number(t, key, *target);
      if (!(*target > 0.0)) throw ConfigError(key, "tolerances must be positive");
    }
    for (const auto& [key, _] : t.items()) {
      bool known = false;
      for (const auto& e : entries) known = known || key == e.first;
      if (!known) throw ConfigError(key, "unknown tolerance");
    }
  }
  if (doc.contains("output_dir")) {
    if (!doc["output_dir"].is_string()) throw ConfigError("output_dir", "expected a string");
    cfg.output_dir = doc["output_dir"].get<std::string>();
  }
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned()) throw ConfigError("seed", "expected a nonnegative integer");
    cfg.seed = doc["seed"].get<std::uint64_t>();
  }
  if (doc.contains("checks")) {
    if (!doc["checks"].is_array()) throw ConfigError("checks", "expected an array of names");
    for (const auto& c : doc["checks"]) {
      if (!c.is_string()) throw ConfigError("checks", "expected an array of names");
      if (!kChecks.count(c.get<std::string>())) throw ConfigError("checks", "unknown check '" + c.get<std::string>() + "'");
      cfg.checks.push_back(c.get<std::string>());
    }
  }
  if (doc.contains("check_params")) {
    if (!doc["check_params"].is_object()) throw ConfigError("check_params", "expected an object");
    cfg.check_params = doc["check_params"];
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_json(path), path.parent_path());
}

ScalarField initial_field(const ExperimentConfig& cfg) {
  if (!cfg.grid) throw ConfigError("grid", "missing");
  if (cfg.initial_preset.empty() && cfg.polynomial.empty()) throw ConfigError("initial", "missing");
  if (cfg.initial_preset == "grim_reaper") {
    for (int a = 0; a < cfg.grid->axes(); ++a)
      if (std::max(std::abs(cfg.grid->lower(a)), std::abs(cfg.grid->upper(a))) >= 1.5707963267948966)
        throw ConfigError("grid", "grim_reaper needs the grid inside |x| < pi/2");
  }
  return ScalarField::sample(*cfg.grid, initial_closure(cfg), 0.0);
}

FlowProblem make_problem(const ExperimentConfig& cfg) {
  ScalarField u0 = initial_field(cfg);
  FlowProblem p{cfg.spec, u0, {}, cfg.variant, cfg.t_end, cfg.dt_safety, cfg.snapshot_every, cfg.snapshot_interval};
  if (cfg.boundary == BoundaryMode::exact) {
    const ExactSolution gr = grim_reaper();
    p.boundary = [gr](const Vec& x, double t) { return gr.value(x, t); };
  } else if (cfg.boundary == BoundaryMode::drift) {
    const auto u = initial_closure(cfg);
    const double rate = cfg.drift_rate;
    p.boundary = [u, rate](const Vec& x, double t) { return u(x) + rate * t; };
  }
  return p;
}

int cmd_simulate(const ExperimentConfig& cfg, std::ostream& log) {
  const FlowProblem problem = make_problem(cfg);
  json summary{{"config", cfg.raw}, {"command", "simulate"}};
  FlowTrace trace;
  try {
    trace = run(problem);
  } catch (const SolverAbort& e) {
    summary["status"] = "solver_abort";
    summary["message"] = e.what();
    summary["node"] = e.node();
    write_json(cfg.output_dir / "summary.json", summary);
    log << "solver abort: " << e.what() << "\n";
    return exit_code::solver_abort;
  }
  write_trace(trace, cfg.output_dir);
  const ScalarField& last = trace.final_state();
  double min_eig = std::numeric_limits<double>::infinity();
  for (const auto& s : trace.series) min_eig = std::min(min_eig, s.min_eig);
  summary["status"] = "ok";
  summary["steps"] = trace.series.empty() ? 0 : trace.series.back().step;
  summary["snapshots"] = trace.snapshots.size();
  summary["final_time"] = last.time().value_or(0.0);
  summary["min_eig"] = trace.series.empty() ? json(nullptr) : json(min_eig);
  summary["final_convexity"] = to_json(classify_convexity(cfg.spec, last, 0.0));
  if (cfg.initial_preset == "grim_reaper") {
    const ExactSolution gr = grim_reaper();
    double err = 0.0;
    for (std::size_t n = 0; n < last.grid().size(); ++n)
      err = std::max(err, std::abs(last[n] - gr.value(last.grid().coords(n), last.time().value_or(0.0))));
    summary["final_error"] = err;
    summary["final_error_within_tol"] = err <= cfg.tol_final_error;
    log << "final_error " << err << "\n";
  }
  write_json(cfg.output_dir / "summary.json", summary);
  log << "simulate: " << summary["steps"] << " steps to t=" << summary["final_time"] << ", output in "
      << cfg.output_dir.string() << "\n";
  return exit_code::pass;
}

int cmd_verify(const ExperimentConfig& cfg, std::ostream& log) {
  if (cfg.checks.empty()) throw ConfigError("checks", "no checks selected");
  json report{{"config", cfg.raw}, {"command", "verify"}, {"checks", json::array()}};
  bool all = true;
  for (const auto& name : cfg.checks) {
    bool pass = false;
    json detail;
    if (name == "htype_identities") detail = check_htype_identities(cfg, pass);
    else if (name == "cylinder") detail = check_cylinder(cfg, pass);
    else if (name == "barrier") detail = check_barrier(cfg, pass);
    else detail = check_grim_reaper(cfg, pass);
    report["checks"].push_back({{"name", name}, {"pass", pass}, {"report", detail}});
    log << name << ": " << (pass ? "pass" : "FAIL") << "\n";
    all = all && pass;
  }
  report["pass"] = all;
  write_json(cfg.output_dir / "verify_report.json", report);
  return all ? exit_code::pass : exit_code::ordering_failure;
}

int cmd_compare(const ExperimentConfig& a, const ExperimentConfig& b, double tol,
                const std::filesystem::path& out_dir, std::ostream& log) {
  if (!(a.spec == b.spec)) {
    log << "compare: the two configs use different groups\n";
    return exit_code::incompatible;
  }
  if (!a.grid || !b.grid || !(*a.grid == *b.grid)) {
    log << "compare: the two configs use different grids\n";
    return exit_code::incompatible;
  }
  if (a.t_end != b.t_end) {
    log << "compare: the two configs use different T_end\n";
    return exit_code::incompatible;
  }
  FlowProblem pa = make_problem(a), pb = make_problem(b);
  // Both runs must snapshot at the same times whatever their step sizes.
  const double interval = a.snapshot_interval > 0.0 ? a.snapshot_interval
                          : b.snapshot_interval > 0.0 ? b.snapshot_interval
                                                      : a.t_end / 10.0;
  for (FlowProblem* p : {&pa, &pb}) {
    p->snapshot_interval = interval;
    p->snapshot_every = 0;
  }
  FlowTrace ta, tb;
  try {
    ta = run(pa);
    tb = run(pb);
  } catch (const SolverAbort& e) {
    log << "solver abort: " << e.what() << "\n";
    return exit_code::solver_abort;
  }
  OrderingReport rep;
  try {
    rep = compare_runs(ta, tb, tol);
  } catch (const std::invalid_argument& e) {
    log << "compare: " << e.what() << "\n";
    return exit_code::incompatible;
  }
  json doc{{"a", a.raw}, {"b", b.raw}, {"tol", tol}, {"snapshots", ta.snapshots.size()}, {"report", to_json(rep)}};
  write_json(out_dir / "compare_report.json", doc);
  if (!rep.ordered) {
    log << "ordering violated at snapshot " << rep.snapshot << " node " << rep.node << " t=" << rep.time
        << ": u_a=" << rep.value_a << " u_b=" << rep.value_b << "\n";
    return exit_code::ordering_failure;
  }
  log << "ordered over " << ta.snapshots.size() << " snapshots, max(u_a - u_b) = " << rep.max_violation << "\n";
  return exit_code::pass;
}

int run_command(const std::string& command, const std::vector<std::filesystem::path>& configs,
                const std::optional<std::filesystem::path>& out, const std::optional<double>& tol,
                std::ostream& log) {
  try {
    if (tol && !(*tol > 0.0)) throw ConfigError("--tol", "must be positive");
    if (command == "compare") {
      ExperimentConfig a, b;
      if (configs.size() == 2) {
        a = load_config(configs[0]);
        b = load_config(configs[1]);
      } else if (configs.size() == 1) {
        const json doc = read_json(configs[0]);
        if (!doc.is_object() || !doc.contains("a") || !doc.contains("b"))
          throw ConfigError("a", "a single compare config needs sections a and b");
        json base = doc;
        base.erase("a");
        base.erase("b");
        json da = base, db = base;
        da.merge_patch(doc["a"]);
        db.merge_patch(doc["b"]);
        a = parse_config(da, configs[0].parent_path());
        b = parse_config(db, configs[0].parent_path());
      } else {
        throw ConfigError("--config", "compare takes one or two configs");
      }
      const std::filesystem::path dir = out ? *out : a.output_dir;
      return cmd_compare(a, b, tol ? *tol : a.tol_ordering, dir, log);
    }
    if (configs.size() != 1) throw ConfigError("--config", command + " takes exactly one config");
    ExperimentConfig cfg = load_config(configs[0]);
    if (out) cfg.output_dir = *out;
    if (command == "simulate") {
      if (tol) cfg.tol_final_error = *tol;
      return cmd_simulate(cfg, log);
    }
    if (command == "verify") {
      if (tol) cfg.tol_identity = cfg.tol_residual = *tol;
      return cmd_verify(cfg, log);
    }
    throw ConfigError("command", "unknown command '" + command + "'");
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << "\n";
    return exit_code::config_error;
  } catch (const nlohmann::json::exception& e) {
    log << "config error: key 'check_params': " << e.what() << "\n";
    return exit_code::config_error;
  }
}

}  // namespace carnotflow
