#include "cli.hpp"

#include "CLI11.hpp"
#include "json.hpp"
#include "reluiqc/oracle_sim.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <stdexcept>

#ifndef RELUIQC_DATA_DIR
#define RELUIQC_DATA_DIR "data"
#endif

namespace reluiqc::cli {

using nlohmann::json;

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

json to_json(const Matrix& M) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    rows.push_back(row);
  }
  return rows;
}

json to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json to_json(const Method& m) {
  json j{{"label", m.label()}, {"kind", to_string(m.kind)}, {"N", m.N}};
  if (!is_dynamic(m.kind)) j["static_form"] = to_string(m.static_form);
  if (m.kind == MultiplierKind::ReluStatic) j["q3"] = to_string(m.q3);
  return j;
}

json to_json(const Certificate& c) {
  const auto& w = c.witness;
  return {{"method", to_json(c.method)},
          {"alpha", c.alpha},
          {"verdict", to_string(c.verdict)},
          {"well_posed", c.well_posed},
          {"feasible", w.feasible},
          {"strictness", w.strictness},
          {"t_min", w.t_min},
          {"solver_t", w.solver_t},
          {"sdp_status", to_string(w.status)},
          {"duality_gap", w.duality_gap},
          {"iterations", w.iterations},
          {"solves", c.rounds},
          {"theta", to_json(w.theta)},
          {"P", to_json(w.P)},
          {"state_scaling", to_json(c.system.state_scaling)},
          {"note", c.note}};
}

json to_json(const MarginResult& r) {
  json log = json::array();
  for (const auto& s : r.log) {
    log.push_back({{"alpha", s.alpha},
                   {"verdict", to_string(s.verdict)},
                   {"strictness", s.strictness},
                   {"sdp_status", to_string(s.status)}});
  }
  return {{"method", to_json(r.method)},
          {"margin", r.alpha_lo},
          {"alpha_lo", r.alpha_lo},
          {"alpha_hi", r.alpha_hi},
          {"iterations", r.iterations},
          {"cap_reached", r.cap_reached},
          {"numerical_trouble", r.numerical_trouble},
          {"note", r.note},
          {"log", log}};
}

void emit(const json& report, const std::string& path, std::ostream& out) {
  if (path.empty()) {
    out << report.dump(2) << "\n";
    return;
  }
  std::ofstream f(path);
  if (!f) throw std::invalid_argument("cannot write " + path);
  f << report.dump(2) << "\n";
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::invalid_argument("cannot write " + path);
  return f;
}

// Config file fields; relative plant paths resolve against the config file.
void apply_config(RunConfig& cfg, const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config " + path.string() + " is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  try {
    if (j.contains("plant")) {
      const auto& p = j.at("plant");
      cfg.plant_json = p.is_string() ? read_file(path.parent_path() / p.get<std::string>()) : p.dump();
    }
    if (j.contains("methods")) {
      cfg.methods = j.at("methods").get<std::vector<std::string>>();
      if (cfg.methods.empty()) throw std::invalid_argument("config: methods list is empty");
    }
    if (j.contains("N")) {
      cfg.Ns = j.at("N").is_array() ? j.at("N").get<std::vector<int>>() : std::vector<int>{j.at("N").get<int>()};
      if (cfg.Ns.empty()) throw std::invalid_argument("config: N list is empty");
    }
    if (j.contains("alpha")) cfg.alpha = j.at("alpha").get<double>();
    if (j.contains("bisection")) {
      const auto& b = j.at("bisection");
      cfg.alpha_hi = b.value("alpha_hi", cfg.alpha_hi);
      cfg.tol = b.value("tol", cfg.tol);
    }
    if (j.contains("solver")) {
      const auto& s = j.at("solver");
      cfg.normalization = s.value("normalization", cfg.normalization);
      cfg.require_psd = s.value("require_psd", cfg.require_psd);
      cfg.rescale_rounds = s.value("rescale_rounds", cfg.rescale_rounds);
    }
    cfg.static_form = j.value("static_form", cfg.static_form);
    if (j.contains("q3")) cfg.q3 = j.at("q3").get<std::string>();
    cfg.jobs = j.value("jobs", cfg.jobs);
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("T")) cfg.steps = j.at("T").get<std::size_t>();
    cfg.trials = j.value("trials", cfg.trials);
    cfg.instances = j.value("instances", cfg.instances);
    if (j.contains("x0")) cfg.x0 = j.at("x0").get<std::vector<double>>();
    cfg.phi = j.value("phi", cfg.phi);
    if (j.contains("output")) {
      const auto& o = j.at("output");
      cfg.report = o.value("report", cfg.report);
      cfg.csv = o.value("csv", cfg.csv);
    }
    cfg.reference = j.value("reference", cfg.reference);
  } catch (const json::exception& e) {
    throw std::invalid_argument("config " + path.string() + ": " + e.what());
  }
}

// Flag values as parsed; a field overrides the config only when given.
struct Flags {
  std::string config;
  std::string plant;
  RunConfig values;
  std::string q3;
  std::string method;
  int N = 1;
  bool no_psd = false;
};

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "JSON run configuration");
  sub->add_option("--plant", f.plant, "plant JSON file (default: the bundled example plant)");
  sub->add_option("--static-form", f.values.static_form, "static QC realization: lifted or sliding");
  sub->add_option("--q3", f.q3, "Q3 structure of the static ReLU class: metzler or diagonal");
  sub->add_option("--normalization", f.values.normalization, "LMI normalization: simplex or box");
  sub->add_flag("--no-psd", f.no_psd, "do not constrain P to be positive semidefinite");
  sub->add_option("--rescale-rounds", f.values.rescale_rounds, "extra solves in rescaled coordinates");
  sub->add_option("--report", f.values.report, "write the JSON report here instead of stdout");
}

RunConfig resolve(const CLI::App* sub, const Flags& f) {
  RunConfig cfg;
  if (!f.config.empty()) apply_config(cfg, f.config);
  if (sub->count("--plant")) cfg.plant_json = read_file(f.plant);
  if (cfg.plant_json.empty()) cfg.plant_json = read_file(std::filesystem::path(RELUIQC_DATA_DIR) / "example6.json");
  const auto& v = f.values;
  auto given = [&](const char* name) { return sub->get_option_no_throw(name) && sub->count(name) > 0; };
  if (given("--method")) cfg.methods = {f.method};
  if (given("--methods")) cfg.methods = v.methods;
  if (given("--N")) cfg.Ns = sub->get_name() == "table2" ? v.Ns : std::vector<int>{f.N};
  if (given("--alpha")) cfg.alpha = v.alpha;
  if (given("--alpha-hi")) cfg.alpha_hi = v.alpha_hi;
  if (given("--tol")) cfg.tol = v.tol;
  if (given("--static-form")) cfg.static_form = v.static_form;
  if (given("--q3")) cfg.q3 = f.q3;
  if (given("--normalization")) cfg.normalization = v.normalization;
  if (given("--no-psd")) cfg.require_psd = false;
  if (given("--rescale-rounds")) cfg.rescale_rounds = v.rescale_rounds;
  if (given("--jobs")) cfg.jobs = v.jobs;
  if (given("--seed")) cfg.seed = v.seed;
  if (given("--T")) cfg.steps = v.steps;
  if (given("--trials")) cfg.trials = v.trials;
  if (given("--instances")) cfg.instances = v.instances;
  if (given("--x0")) cfg.x0 = v.x0;
  if (given("--phi")) cfg.phi = v.phi;
  if (given("--report")) cfg.report = v.report;
  if (given("--csv")) cfg.csv = v.csv;
  if (given("--reference")) cfg.reference = v.reference;
  if (cfg.reference.empty()) cfg.reference = (std::filesystem::path(RELUIQC_DATA_DIR) / "table2_reference.csv").string();
  if (cfg.jobs < 1) throw std::invalid_argument("--jobs must be at least 1");
  return cfg;
}

StateSpace plant_of(const RunConfig& cfg) { return plant_from_json_text(cfg.plant_json); }

const std::string& single(const std::vector<std::string>& xs, const char* what) {
  if (xs.size() != 1) throw std::invalid_argument(std::string("exactly one ") + what + " required");
  return xs.front();
}

int single(const std::vector<int>& xs) {
  if (xs.empty()) return 1;
  if (xs.size() != 1) throw std::invalid_argument("exactly one N required");
  return xs.front();
}

MarginOptions margin_options(const RunConfig& cfg) {
  MarginOptions o;
  o.alpha_hi = cfg.alpha_hi;
  o.tol = cfg.tol;
  o.certify = certify_options(cfg);
  return o;
}

int cmd_certify(const RunConfig& cfg, std::ostream& out) {
  if (!cfg.alpha) throw std::invalid_argument("--alpha is required");
  const auto method = make_method(cfg, single(cfg.methods, "method"), single(cfg.Ns), Q3Structure::Metzler);
  const auto G = plant_of(cfg);
  const auto c = certify(G, method, *cfg.alpha, certify_options(cfg));
  emit(to_json(c), cfg.report, out);
  return c.verdict == Verdict::CertifiedStable ? kExitOk : kExitInconclusive;
}

int cmd_margin(const RunConfig& cfg, std::ostream& out) {
  const auto method = make_method(cfg, single(cfg.methods, "method"), single(cfg.Ns), Q3Structure::Metzler);
  const auto r = margin(plant_of(cfg), method, margin_options(cfg));
  if (!cfg.csv.empty()) {
    auto f = open_out(cfg.csv);
    write_table_csv({TableCell{method, r, {}}}, f);
  }
  emit(to_json(r), cfg.report, out);
  return kExitOk;
}

int cmd_table2(const RunConfig& cfg, std::ostream& out) {
  TableOptions o;
  o.Ns = cfg.Ns.empty() ? std::vector<int>{1, 2, 3, 4} : cfg.Ns;
  const std::vector<std::string> kinds =
      cfg.methods.empty() ? std::vector<std::string>{"relu-dynamic", "relu-static", "slope-dynamic", "slope-static"}
                          : cfg.methods;
  for (const auto& k : kinds) o.methods.push_back(make_method(cfg, k, 1, Q3Structure::Diagonal));
  o.margin = margin_options(cfg);
  o.jobs = cfg.jobs;
  const auto cells = table2(plant_of(cfg), o);

  std::map<std::pair<std::string, int>, double> ref;
  if (std::filesystem::exists(cfg.reference)) ref = load_reference(cfg.reference);

  json rows = json::array();
  std::ostringstream grid;
  grid << std::left << std::setw(16) << "method" << std::right << std::setw(3) << "N" << std::setw(12) << "margin"
       << std::setw(12) << "reference" << std::setw(11) << "deviation" << "  note\n";
  for (const auto& c : cells) {
    const auto key = std::make_pair(to_string(c.method.kind), c.method.N);
    json row = c.error.empty() ? to_json(c.result) : json{{"method", to_json(c.method)}, {"error", c.error}};
    row.erase("log");
    grid << std::left << std::setw(16) << key.first << std::right << std::setw(3) << c.method.N << std::fixed
         << std::setprecision(4);
    if (c.error.empty()) {
      grid << std::setw(12) << c.result.alpha_lo;
    } else {
      grid << std::setw(12) << "error";
    }
    if (auto it = ref.find(key); it != ref.end()) {
      row["reference"] = it->second;
      grid << std::setw(12) << it->second;
      if (c.error.empty()) {
        const double dev = deviation(c.result.alpha_lo, it->second);
        row["deviation"] = dev;
        grid << std::setw(11) << dev;
      } else {
        grid << std::setw(11) << "-";
      }
    } else {
      grid << std::setw(12) << "-" << std::setw(11) << "-";
    }
    grid << "  " << (c.error.empty() ? c.result.note : c.error) << "\n";
    grid.unsetf(std::ios::fixed);
    rows.push_back(row);
  }
  if (!cfg.csv.empty()) {
    auto f = open_out(cfg.csv);
    write_table_csv(cells, f);
  }
  if (cfg.report.empty()) {
    out << grid.str();
  } else {
    out << grid.str();
    emit(json{{"cells", rows}}, cfg.report, out);
  }
  bool any_error = false;
  for (const auto& c : cells) any_error = any_error || !c.error.empty();
  return any_error ? kExitInconclusive : kExitOk;
}

int cmd_simulate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  if (!cfg.alpha) throw std::invalid_argument("--alpha is required");
  const auto G = plant_of(cfg);
  std::mt19937_64 rng(cfg.seed);
  Vector x0;
  if (cfg.x0.empty()) {
    x0 = random_unit(rng, G.n_states());
  } else {
    if (static_cast<Eigen::Index>(cfg.x0.size()) != G.n_states()) {
      throw std::invalid_argument("--x0 needs " + std::to_string(G.n_states()) + " entries");
    }
    x0 = Eigen::Map<const Vector>(cfg.x0.data(), G.n_states());
  }
  Nonlinearity phi;
  if (cfg.phi == "relu") phi = relu;
  else if (cfg.phi == "identity") phi = [](double v) { return v; };
  else if (cfg.phi == "random-slope") phi = PiecewiseLinear::random(rng);
  else throw std::invalid_argument("unknown --phi '" + cfg.phi + "' (relu, identity or random-slope)");

  const std::size_t T = cfg.steps.value_or(100);
  auto trace = simulate_loop(G, *cfg.alpha, phi, x0, T);
  json summary{{"alpha", *cfg.alpha}, {"T", T}, {"x0", to_json(x0)}, {"phi", cfg.phi}};
  double peak = 0.0;
  for (Eigen::Index k = 0; k < trace.x.cols(); ++k) peak = std::max(peak, trace.x.col(k).norm());
  summary["max_state_norm"] = peak;
  summary["final_state_norm"] = trace.x.col(trace.x.cols() - 1).norm();
  if (!cfg.methods.empty()) {
    const auto method = make_method(cfg, single(cfg.methods, "method"), single(cfg.Ns), Q3Structure::Metzler);
    const auto c = certify(G, method, *cfg.alpha, certify_options(cfg));
    summary["verdict"] = to_string(c.verdict);
    if (c.verdict == Verdict::CertifiedStable) {
      attach_storage(trace, c.system, c.witness.P);
      const Matrix M = method_spec(method).M(c.witness.theta);
      summary["dissipation_violation"] = check_dissipation(c.system, c.witness.P, M, trace, c.witness.strictness);
    }
  }
  if (cfg.csv.empty()) {
    write_trace_csv(trace, out);
    err << summary.dump() << "\n";
  } else {
    auto f = open_out(cfg.csv);
    write_trace_csv(trace, f);
    emit(summary, cfg.report, out);
  }
  return kExitOk;
}

int cmd_validate(const RunConfig& cfg, std::ostream& out) {
  SuiteOptions o;
  o.seed = cfg.seed;
  o.instances = cfg.instances;
  o.dissipation_trials = cfg.trials;
  o.dissipation_T = cfg.steps.value_or(o.dissipation_T);
  const auto checks = run_property_suite(plant_of(cfg), o);
  bool ok = true;
  json rows = json::array();
  for (const auto& c : checks) {
    out << (c.passed ? "PASS " : "FAIL ") << c.name << "  " << c.detail << "\n";
    rows.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
    ok = ok && c.passed;
  }
  if (!cfg.report.empty()) emit(json{{"seed", cfg.seed}, {"checks", rows}}, cfg.report, out);
  return ok ? kExitOk : kExitInconclusive;
}

}  // namespace

std::map<std::pair<std::string, int>, double> load_reference(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::map<std::pair<std::string, int>, double> out;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      header = false;
      continue;
    }
    std::istringstream row(line);
    std::string kind, n, value;
    if (!std::getline(row, kind, ',') || !std::getline(row, n, ',') || !std::getline(row, value, ',')) {
      throw std::invalid_argument("malformed reference row: " + line);
    }
    out[{kind, std::stoi(n)}] = std::stod(value);
  }
  return out;
}

double deviation(double ours, double reference) { return std::abs(ours - reference) / (1.0 + reference); }

Method make_method(const RunConfig& cfg, const std::string& kind, int N, Q3Structure default_q3) {
  Method m;
  m.kind = parse_multiplier_kind(kind);
  m.N = N;
  m.static_form = parse_static_form(cfg.static_form);
  m.q3 = cfg.q3 ? parse_q3_structure(*cfg.q3) : default_q3;
  validate(m);
  return m;
}

CertifyOptions certify_options(const RunConfig& cfg) {
  CertifyOptions o;
  o.lmi.require_P_psd = cfg.require_psd;
  o.lmi.normalization = parse_normalization(cfg.normalization);
  if (cfg.rescale_rounds < 0) throw std::invalid_argument("rescale rounds must be >= 0");
  o.rescale_rounds = cfg.rescale_rounds;
  return o;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stability certificates for ReLU and slope-restricted feedback loops"};
  app.require_subcommand(1);

  Flags f;
  auto* c = app.add_subcommand("certify", "certify stability at one gain alpha");
  add_common(c, f);
  c->add_option("--method", f.method, "relu-dynamic, relu-static, slope-dynamic or slope-static");
  c->add_option("--N", f.N, "lift size (>= 1)");
  c->add_option("--alpha", f.values.alpha, "loop gain");

  auto* m = app.add_subcommand("margin", "largest certified gain by bisection");
  add_common(m, f);
  m->add_option("--method", f.method, "multiplier class");
  m->add_option("--N", f.N, "lift size (>= 1)");
  m->add_option("--alpha-hi", f.values.alpha_hi, "upper end of the bracket (cap)");
  m->add_option("--tol", f.values.tol, "relative bracket tolerance");
  m->add_option("--csv", f.values.csv, "CSV output path");

  auto* t = app.add_subcommand("table2", "margins for every method and lift size, with reference values");
  add_common(t, f);
  t->add_option("--methods", f.values.methods, "multiplier classes (default: all four)");
  t->add_option("--N", f.values.Ns, "lift sizes (default 1 2 3 4)");
  t->add_option("--alpha-hi", f.values.alpha_hi, "upper end of the bracket (cap)");
  t->add_option("--tol", f.values.tol, "relative bracket tolerance");
  t->add_option("--jobs", f.values.jobs, "worker threads");
  t->add_option("--csv", f.values.csv, "CSV output path");
  t->add_option("--reference", f.values.reference, "reference margins CSV");

  auto* s = app.add_subcommand("simulate", "closed-loop trajectory as CSV");
  add_common(s, f);
  s->add_option("--alpha", f.values.alpha, "loop gain");
  s->add_option("--T", f.values.steps, "number of steps");
  s->add_option("--x0", f.values.x0, "initial state, comma separated (default: random unit vector)")->delimiter(',');
  s->add_option("--seed", f.values.seed, "seed for x0 and random-slope");
  s->add_option("--phi", f.values.phi, "relu, identity or random-slope");
  s->add_option("--method", f.method, "also certify and attach the storage function");
  s->add_option("--N", f.N, "lift size for --method");
  s->add_option("--csv", f.values.csv, "CSV output path (default stdout)");

  auto* v = app.add_subcommand("validate", "oracle and property suites");
  add_common(v, f);
  v->add_option("--seed", f.values.seed, "random seed");
  v->add_option("--instances", f.values.instances, "random instances per multiplier class");
  v->add_option("--trials", f.values.trials, "trajectories per dissipation check");
  v->add_option("--T", f.values.steps, "trajectory length for dissipation checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    for (auto* sub : {c, m, t, s, v}) {
      if (!sub->parsed()) continue;
      auto cfg = resolve(sub, f);
      if (sub == c) return cmd_certify(cfg, out);
      if (sub == m) return cmd_margin(cfg, out);
      if (sub == t) return cmd_table2(cfg, out);
      if (sub == s) return cmd_simulate(cfg, out, err);
      return cmd_validate(cfg, out);
    }
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace reluiqc::cli
