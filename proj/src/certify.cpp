#include "reluiqc/certify.hpp"

#include <atomic>
#include <cmath>
#include <future>
#include <ostream>
#include <stdexcept>
#include <thread>

namespace reluiqc {

std::string to_string(StaticForm f) { return f == StaticForm::Lifted ? "lifted" : "sliding"; }

StaticForm parse_static_form(const std::string& name) {
  if (name == "lifted") return StaticForm::Lifted;
  if (name == "sliding") return StaticForm::Sliding;
  throw std::invalid_argument("unknown static form '" + name + "' (expected lifted or sliding)");
}

std::string to_string(Q3Structure q) { return q == Q3Structure::Metzler ? "metzler" : "diagonal"; }

Q3Structure parse_q3_structure(const std::string& name) {
  if (name == "metzler") return Q3Structure::Metzler;
  if (name == "diagonal") return Q3Structure::Diagonal;
  throw std::invalid_argument("unknown Q3 structure '" + name + "' (expected metzler or diagonal)");
}

std::string Method::label() const {
  std::string s = to_string(kind) + "/N=" + std::to_string(N);
  if (!is_dynamic(kind)) s += "/" + to_string(static_form);
  if (kind == MultiplierKind::ReluStatic) s += "/" + to_string(q3);
  return s;
}

void validate(const Method& m) {
  if (m.N < 1) throw std::invalid_argument("lift size N must be at least 1, got " + std::to_string(m.N));
}

std::vector<Method> table2_methods(int N) {
  return {
      {MultiplierKind::ReluDynamic, N, StaticForm::Lifted, Q3Structure::Metzler},
      {MultiplierKind::ReluStatic, N, StaticForm::Lifted, Q3Structure::Diagonal},
      {MultiplierKind::SlopeDynamic, N, StaticForm::Lifted, Q3Structure::Metzler},
      {MultiplierKind::SlopeStatic, N, StaticForm::Lifted, Q3Structure::Metzler},
  };
}

AugmentedSystem build_system(const StateSpace& G, const Method& method, double alpha) {
  validate(method);
  const StateSpace loop = loop_plant(G, alpha);
  const bool lifted = !is_dynamic(method.kind) && method.static_form == StaticForm::Lifted;
  return balance(lifted ? lift(loop, method.N) : augment(loop, method.horizon()));
}

MultiplierSpec method_spec(const Method& method) {
  validate(method);
  return make_spec(method.kind, method.horizon(), method.q3);
}

namespace {

// d_i ~ P_ii^(-1/2), as powers of two with geometric mean near 1, so that
// P in the new coordinates (D P D) has a roughly even diagonal.
Vector equalizing_scaling(const Matrix& P) {
  const auto n = P.rows();
  if (n == 0) return Vector();
  const double floor = 1e-30 * std::max(1.0, P.diagonal().maxCoeff());
  Vector e(n);
  for (Eigen::Index i = 0; i < n; ++i) e(i) = -0.5 * std::log2(std::max(P(i, i), floor));
  const double mean = e.mean();
  Vector d(n);
  for (Eigen::Index i = 0; i < n; ++i) d(i) = std::exp2(std::round(e(i) - mean));
  return d;
}

}  // namespace

std::string to_string(Verdict v) { return v == Verdict::CertifiedStable ? "certified-stable" : "inconclusive"; }

Certificate certify(const StateSpace& G, const Method& method, double alpha, const CertifyOptions& options) {
  if (!G.is_siso()) throw std::invalid_argument("certify: plant must be SISO");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("certify: alpha must be finite and >= 0");
  Certificate c;
  c.method = method;
  c.alpha = alpha;
  c.well_posed = check_well_posed(loop_plant(G, alpha));
  c.system = build_system(G, method, alpha);
  const auto spec = method_spec(method);
  c.witness = solve_lmi(c.system, spec, options.lmi, options.backend);
  for (int round = 0; round < options.rescale_rounds && !c.witness.feasible; ++round) {
    if (c.witness.status != SdpStatus::Optimal || !(c.witness.solver_t > 0.0)) break;
    const Vector d = equalizing_scaling(c.witness.P);
    if (d.size() == 0 || (d.array() == 1.0).all()) break;
    AugmentedSystem next = c.system;
    next.sys = diagonal_similarity(c.system.sys, d);
    next.state_scaling = c.system.state_scaling.cwiseProduct(d);
    auto witness = solve_lmi(next, spec, options.lmi, options.backend);
    ++c.rounds;
    c.system = std::move(next);
    c.witness = std::move(witness);
  }
  c.note = c.witness.note;
  if (!c.well_posed) c.note += "; well-posedness not shown";
  c.verdict = c.witness.feasible && c.well_posed ? Verdict::CertifiedStable : Verdict::Inconclusive;
  return c;
}

MarginResult margin(const StateSpace& G, const Method& method, const MarginOptions& options) {
  if (!(options.tol > 0.0)) throw std::invalid_argument("margin: tol must be positive");
  if (!(options.alpha_hi > 0.0)) throw std::invalid_argument("margin: alpha_hi must be positive");
  MarginResult r;
  r.method = method;

  auto probe = [&](double alpha) {
    const auto c = certify(G, method, alpha, options.certify);
    r.log.push_back({alpha, c.verdict, c.witness.strictness, c.witness.status});
    if (c.witness.status == SdpStatus::NumericalTrouble) ++r.numerical_trouble;
    return c.verdict == Verdict::CertifiedStable;
  };

  if (probe(options.alpha_hi)) {
    r.alpha_lo = r.alpha_hi = options.alpha_hi;
    r.cap_reached = true;
    r.note = "cap reached";
    return r;
  }
  if (!probe(0.0)) {
    r.alpha_lo = r.alpha_hi = 0.0;
    r.note = "not certified at alpha = 0";
    return r;
  }
  double lo = 0.0;
  double hi = options.alpha_hi;
  while (hi - lo > options.tol * (1.0 + hi)) {
    const double mid = 0.5 * (lo + hi);
    (probe(mid) ? lo : hi) = mid;
    ++r.iterations;
  }
  r.alpha_lo = lo;
  r.alpha_hi = hi;
  return r;
}

std::vector<TableCell> table2(const StateSpace& G, const TableOptions& options) {
  std::vector<TableCell> cells;
  const auto rows = options.methods.empty() ? table2_methods(1) : options.methods;
  for (const auto& m : rows) {
    for (int N : options.Ns) {
      TableCell c;
      c.method = m;
      c.method.N = N;
      cells.push_back(c);
    }
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      try {
        cells[i].result = margin(G, cells[i].method, options.margin);
      } catch (const std::exception& e) {
        cells[i].error = e.what();
      }
    }
  };
  const int jobs = std::max(1, std::min<int>(options.jobs, static_cast<int>(cells.size())));
  std::vector<std::future<void>> pool;
  for (int j = 1; j < jobs; ++j) pool.push_back(std::async(std::launch::async, worker));
  worker();
  for (auto& f : pool) f.get();
  return cells;
}

void write_table_csv(const std::vector<TableCell>& cells, std::ostream& os) {
  os << "method,N,margin,iterations,cap_reached\n";
  const auto old = os.precision(10);
  for (const auto& c : cells) {
    os << to_string(c.method.kind) << "," << c.method.N << ",";
    if (c.error.empty()) {
      os << c.result.alpha_lo << "," << c.result.iterations << "," << (c.result.cap_reached ? "true" : "false");
    } else {
      os << ",,";
    }
    os << "\n";
  }
  os.precision(old);
}

}  // namespace reluiqc
