#include "reluiqc/oracle_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace reluiqc {

double relu(double v) { return v > 0.0 ? v : 0.0; }

PiecewiseLinear::PiecewiseLinear(std::vector<double> breakpoints, std::vector<double> slopes)
    : breaks_(std::move(breakpoints)), slopes_(std::move(slopes)) {
  if (slopes_.size() != breaks_.size() + 1) throw std::invalid_argument("PiecewiseLinear: need one more slope than breakpoints");
  if (!std::is_sorted(breaks_.begin(), breaks_.end())) throw std::invalid_argument("PiecewiseLinear: breakpoints must be sorted");
  for (double s : slopes_) {
    if (!(s >= 0.0 && s <= 1.0)) throw std::invalid_argument("PiecewiseLinear: slopes must lie in [0, 1]");
  }
  // Piece containing 0, then integrate outwards so that phi(0) = 0.
  zero_piece_ = static_cast<std::size_t>(std::upper_bound(breaks_.begin(), breaks_.end(), 0.0) - breaks_.begin());
  values_.assign(breaks_.size(), 0.0);
  for (std::size_t i = zero_piece_; i < breaks_.size(); ++i) {
    const double from = i == zero_piece_ ? 0.0 : breaks_[i - 1];
    const double base = i == zero_piece_ ? 0.0 : values_[i - 1];
    values_[i] = base + slopes_[i] * (breaks_[i] - from);
  }
  for (std::size_t i = zero_piece_; i-- > 0;) {
    const double from = i + 1 == zero_piece_ ? 0.0 : breaks_[i + 1];
    const double base = i + 1 == zero_piece_ ? 0.0 : values_[i + 1];
    values_[i] = base - slopes_[i + 1] * (from - breaks_[i]);
  }
}

PiecewiseLinear PiecewiseLinear::random(std::mt19937_64& rng, int pieces, double spread) {
  std::uniform_real_distribution<double> pos(-spread, spread);
  std::uniform_real_distribution<double> slope(0.0, 1.0);
  std::vector<double> b(static_cast<std::size_t>(std::max(0, pieces - 1)));
  for (auto& x : b) x = pos(rng);
  std::sort(b.begin(), b.end());
  std::vector<double> s(b.size() + 1);
  for (auto& x : s) x = slope(rng);
  return PiecewiseLinear(std::move(b), std::move(s));
}

double PiecewiseLinear::operator()(double v) const {
  const auto piece = static_cast<std::size_t>(std::upper_bound(breaks_.begin(), breaks_.end(), v) - breaks_.begin());
  if (piece == zero_piece_) return slopes_[piece] * v;
  if (piece > zero_piece_) return values_[piece - 1] + slopes_[piece] * (v - breaks_[piece - 1]);
  return values_[piece] + slopes_[piece] * (v - breaks_[piece]);
}

SimulationTrace simulate_loop(const StateSpace& G, double alpha, const Nonlinearity& phi, const Vector& x0,
                              std::size_t T) {
  const StateSpace L = loop_plant(G, alpha);
  if (!L.is_siso()) throw std::invalid_argument("simulate_loop: plant must be SISO");
  if (x0.size() != L.n_states()) throw std::invalid_argument("simulate_loop: x0 has wrong dimension");
  const double d = L.D()(0, 0);
  if (d != 0.0 && !check_well_posed(L)) {
    throw std::invalid_argument("simulate_loop: algebraic loop is not a contraction (|alpha D| >= 1)");
  }
  SimulationTrace tr;
  tr.x.resize(L.n_states(), static_cast<Eigen::Index>(T) + 1);
  tr.x.col(0) = x0;
  tr.v.resize(T);
  tr.w.resize(T);
  for (std::size_t k = 0; k < T; ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    const double cx = (L.C() * tr.x.col(kk))(0, 0);
    double v = cx;
    if (d != 0.0) {
      bool converged = false;
      for (int it = 0; it < 10000; ++it) {
        const double next = cx + d * phi(v);
        const bool done = std::abs(next - v) <= 1e-12 * (1.0 + std::abs(next));
        v = next;
        if (done) {
          converged = true;
          break;
        }
      }
      if (!converged) throw std::runtime_error("simulate_loop: fixed-point iteration did not converge");
    }
    const double w = phi(v);
    tr.v[k] = v;
    tr.w[k] = w;
    tr.x.col(kk + 1) = L.A() * tr.x.col(kk) + L.B().col(0) * w;
  }
  return tr;
}

Matrix filter_outputs(const SimulationTrace& trace, int N) {
  const auto T = static_cast<Eigen::Index>(trace.steps());
  Matrix r = Matrix::Zero(2 * N + 2, T);
  for (Eigen::Index k = 0; k < T; ++k) {
    for (int i = 0; i <= N && i <= k; ++i) {
      r(i, k) = trace.v[static_cast<std::size_t>(k - i)];
      r(N + 1 + i, k) = trace.w[static_cast<std::size_t>(k - i)];
    }
  }
  return r;
}

ReluCheck relu_pointwise_checks(double v) {
  ReluCheck c;
  c.w = relu(v);
  c.residuals = {c.w * (c.w - v), std::min(c.w, 0.0), std::min(c.w - v, 0.0)};
  return c;
}

namespace {

// Augmented state at step k of a filtered system, in aug's coordinates.
Vector filtered_coords(const AugmentedSystem& aug, const SimulationTrace& tr, std::size_t k) {
  const Vector raw = filtered_state(tr.x.col(static_cast<Eigen::Index>(k)), tr.v, tr.w, aug.horizon, k);
  return raw.cwiseQuotient(aug.state_scaling);
}

}  // namespace

double check_dissipation(const AugmentedSystem& aug, const Matrix& P, const Matrix& M, const SimulationTrace& trace,
                         double eps) {
  const std::size_t T = trace.steps();
  double worst = -std::numeric_limits<double>::infinity();
  if (aug.form == Realization::Filtered) {
    const Matrix r = filter_outputs(trace, aug.horizon);
    for (std::size_t k = 0; k < T; ++k) {
      const Vector xh = filtered_coords(aug, trace, k);
      const Vector xn = filtered_coords(aug, trace, k + 1);
      const auto rk = r.col(static_cast<Eigen::Index>(k));
      const double lhs = xn.dot(P * xn) - xh.dot(P * xh) + eps * xh.squaredNorm() + rk.dot(M * rk);
      worst = std::max(worst, lhs);
    }
  } else {
    const auto L = static_cast<std::size_t>(aug.window());
    Vector r(2 * static_cast<Eigen::Index>(L));
    for (std::size_t j = 0; (j + 1) * L <= T; ++j) {
      const Vector xh = trace.x.col(static_cast<Eigen::Index>(j * L)).cwiseQuotient(aug.state_scaling);
      const Vector xn = trace.x.col(static_cast<Eigen::Index>((j + 1) * L)).cwiseQuotient(aug.state_scaling);
      for (std::size_t i = 0; i < L; ++i) {
        r(static_cast<Eigen::Index>(i)) = trace.v[j * L + i];
        r(static_cast<Eigen::Index>(L + i)) = trace.w[j * L + i];
      }
      const double lhs = xn.dot(P * xn) - xh.dot(P * xh) + eps * xh.squaredNorm() + r.dot(M * r);
      worst = std::max(worst, lhs);
    }
  }
  return T == 0 ? 0.0 : worst;
}

void attach_storage(SimulationTrace& trace, const AugmentedSystem& aug, const Matrix& P) {
  const std::size_t T = trace.steps();
  trace.V.assign(T + 1, std::numeric_limits<double>::quiet_NaN());
  const auto L = static_cast<std::size_t>(aug.window());
  for (std::size_t k = 0; k <= T; ++k) {
    if (aug.form == Realization::Filtered) {
      const Vector xh = filtered_coords(aug, trace, k);
      trace.V[k] = xh.dot(P * xh);
    } else if (k % L == 0) {
      const Vector xh = trace.x.col(static_cast<Eigen::Index>(k)).cwiseQuotient(aug.state_scaling);
      trace.V[k] = xh.dot(P * xh);
    }
  }
}

double iqc_sum(const SimulationTrace& trace, const Matrix& M, int N) {
  const Matrix r = filter_outputs(trace, N);
  double s = 0.0;
  for (Eigen::Index k = 0; k < r.cols(); ++k) s += r.col(k).dot(M * r.col(k));
  return s;
}

Vector random_unit(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> g;
  Vector x(n);
  do {
    for (Eigen::Index i = 0; i < n; ++i) x(i) = g(rng);
  } while (n > 0 && x.norm() == 0.0);
  return n > 0 ? Vector(x / x.norm()) : x;
}

FalsificationResult falsification_probe(const StateSpace& G, double alpha, int trials, std::size_t T,
                                        std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  FalsificationResult out;
  for (int t = 0; t < trials; ++t) {
    const Vector x0 = random_unit(rng, G.n_states());
    const auto tr = simulate_loop(G, alpha, relu, x0, T);
    double ratio = 0.0;
    for (Eigen::Index k = 0; k < tr.x.cols(); ++k) ratio = std::max(ratio, tr.x.col(k).norm());
    out.ratios.push_back(ratio);
    out.worst_ratio = std::max(out.worst_ratio, ratio);
  }
  return out;
}

void write_trace_csv(const SimulationTrace& trace, std::ostream& os) {
  const auto n = trace.x.rows();
  os << "k";
  for (Eigen::Index i = 0; i < n; ++i) os << ",x" << i;
  os << ",v,w,V\n";
  const auto old = os.precision(17);
  for (std::size_t k = 0; k < trace.steps(); ++k) {
    os << k;
    for (Eigen::Index i = 0; i < n; ++i) os << "," << trace.x(i, static_cast<Eigen::Index>(k));
    os << "," << trace.v[k] << "," << trace.w[k] << ",";
    if (k < trace.V.size() && !std::isnan(trace.V[k])) os << trace.V[k];
    os << "\n";
  }
  os.precision(old);
}

MultiplierParams random_params(std::mt19937_64& rng, MultiplierKind kind, int N, Q3Structure q3) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_real_distribution<double> s(-2.0, 2.0);
  // Some entries exactly zero so boundary cases are covered.
  auto pos = [&]() { return u(rng) < 0.2 ? 0.0 : u(rng); };
  const auto n = static_cast<Eigen::Index>(N) + 1;
  switch (kind) {
    case MultiplierKind::SlopeDynamic: {
      ZFParams p{N, std::vector<double>(static_cast<std::size_t>(2 * N + 1))};
      double sum = 0.0;
      for (int i = -N; i <= N; ++i) {
        if (i == 0) continue;
        p.m[static_cast<std::size_t>(i + N)] = -pos();
        sum += p.m[static_cast<std::size_t>(i + N)];
      }
      p.m[static_cast<std::size_t>(N)] = -sum + u(rng);
      return p;
    }
    case MultiplierKind::ReluDynamic: {
      ReluIqcParams p;
      p.N = N;
      for (int i = 0; i <= N; ++i) {
        p.m1.push_back(pos());
        p.m2.push_back(pos());
      }
      for (int i = -N; i <= N; ++i) p.m3.push_back(i == 0 ? s(rng) : pos());
      return p;
    }
    case MultiplierKind::SlopeStatic: {
      Matrix Q(n, n);
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) Q(i, j) = i == j ? 0.0 : -pos();
      }
      for (Eigen::Index i = 0; i < n; ++i) {
        Q(i, i) = std::max(-Q.row(i).sum(), -Q.col(i).sum()) + u(rng);
      }
      return StaticSlopeParams{Q};
    }
    case MultiplierKind::ReluStatic: {
      Matrix Q1(n, n), Q2(n, n), Q3 = Matrix::Zero(n, n);
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i; j < n; ++j) {
          Q1(i, j) = Q1(j, i) = pos();
          Q2(i, j) = Q2(j, i) = pos();
        }
      }
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
          if (i == j) Q3(i, j) = s(rng);
          else if (q3 == Q3Structure::Metzler) Q3(i, j) = pos();
        }
      }
      return StaticReluParams{Q1, Q2, Q3};
    }
  }
  throw std::logic_error("random_params: unknown kind");
}

double dissipation_over_trials(const StateSpace& G, const Certificate& cert, int trials, std::size_t T,
                               std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Matrix M = method_spec(cert.method).M(cert.witness.theta);
  double worst = -std::numeric_limits<double>::infinity();
  for (int t = 0; t < trials; ++t) {
    const Vector x0 = random_unit(rng, G.n_states());
    const auto tr = simulate_loop(G, cert.alpha, relu, x0, T);
    worst = std::max(worst, check_dissipation(cert.system, cert.witness.P, M, tr, cert.witness.strictness));
  }
  return worst;
}

namespace {

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(3);
  os << x;
  return os.str();
}

}  // namespace

std::vector<PropertyCheck> run_property_suite(const StateSpace& G, const SuiteOptions& o) {
  std::vector<PropertyCheck> out;
  std::mt19937_64 rng(o.seed);
  std::normal_distribution<double> gauss(0.0, 2.0);
  std::uniform_int_distribution<int> pickN(0, o.max_N);
  std::uniform_int_distribution<int> pickT(0, o.max_T0);

  {
    PropertyCheck c{"relu-pointwise", true, ""};
    for (double v : {-3.0, 7.0, 0.0, -0.0, 1e-300, -1e300, 2.5}) {
      const auto r = relu_pointwise_checks(v);
      if (r.residuals[0] != 0.0 || r.residuals[1] != 0.0 || r.residuals[2] != 0.0 || r.w != std::max(v, 0.0)) {
        c.passed = false;
        c.detail = "v = " + fmt(v);
      }
    }
    out.push_back(c);
  }

  for (auto kind : {MultiplierKind::SlopeDynamic, MultiplierKind::ReluDynamic, MultiplierKind::SlopeStatic,
                    MultiplierKind::ReluStatic}) {
    PropertyCheck ident{"toeplitz-identity/" + to_string(kind), true, ""};
    PropertyCheck nonneg{"iqc-nonnegative/" + to_string(kind), true, ""};
    double worst_ident = 0.0;
    double worst_sum = std::numeric_limits<double>::infinity();
    for (int i = 0; i < o.instances; ++i) {
      const int N = pickN(rng);
      const int T0 = pickT(rng);
      const auto params = random_params(rng, kind, N);
      std::vector<double> v(static_cast<std::size_t>(T0) + 1);
      for (auto& x : v) x = gauss(rng);
      std::vector<Nonlinearity> phis{relu};
      if (!is_relu(kind)) phis.push_back(PiecewiseLinear::random(rng));
      for (const auto& phi : phis) {
        std::vector<double> w(v.size());
        std::transform(v.begin(), v.end(), w.begin(), phi);
        const auto s = toeplitz_sum_oracle(params, v, w, T0);
        const double err = std::abs(s.lhs - s.rhs) / (1.0 + std::abs(s.lhs));
        worst_ident = std::max(worst_ident, err);
        if (err > 1e-9) ident.passed = false;
        worst_sum = std::min(worst_sum, s.lhs);
        if (s.lhs < -1e-9 * (1.0 + std::abs(s.lhs))) nonneg.passed = false;
      }
    }
    ident.detail = "max relative mismatch " + fmt(worst_ident);
    nonneg.detail = "min sum " + fmt(worst_sum);
    out.push_back(ident);
    out.push_back(nonneg);
  }

  {
    PropertyCheck c{"zf-embedding", true, ""};
    for (int i = 0; i < o.instances; ++i) {
      const auto p = std::get<ZFParams>(random_params(rng, MultiplierKind::SlopeDynamic, pickN(rng)));
      const auto e = zf_embed(p);
      if (!is_admissible(e) || build_M(p) != build_M(e)) c.passed = false;
    }
    out.push_back(c);
  }

  if (G.n_states() > 0) {
    PropertyCheck c{"simulate-linear", true, ""};
    const double alpha = 0.3;
    const StateSpace L = loop_plant(G, alpha);
    if (L.D()(0, 0) == 0.0) {
      const StateSpace closed(L.A() + L.B() * L.C(), Matrix::Zero(L.n_states(), 1), L.C(), Matrix::Zero(1, 1));
      const Vector x0 = random_unit(rng, G.n_states());
      const auto tr = simulate_loop(G, alpha, [](double v) { return v; }, x0, 100);
      const auto lin = simulate(closed, Matrix::Zero(1, 100), x0);
      const double err = (tr.x - lin.states).cwiseAbs().maxCoeff();
      c.passed = err <= 1e-12;
      c.detail = "max deviation " + fmt(err);
    } else {
      c.detail = "skipped (D != 0)";
    }
    out.push_back(c);
  }

  {
    PropertyCheck c{"hard-iqc-on-loop", true, ""};
    double worst = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 50; ++i) {
      const int N = pickN(rng);
      const auto kind = i % 2 == 0 ? MultiplierKind::ReluDynamic : MultiplierKind::SlopeDynamic;
      const Matrix M = build_M(random_params(rng, kind, N));
      const auto tr = simulate_loop(G, 0.5, relu, random_unit(rng, G.n_states()), 60);
      const double s = iqc_sum(tr, M, N);
      worst = std::min(worst, s);
      if (s < -1e-9) c.passed = false;
    }
    c.detail = "min sum " + fmt(worst);
    out.push_back(c);
  }

  const std::vector<std::pair<Method, double>> cases{
      {{MultiplierKind::ReluDynamic, 2}, 1.0},
      {{MultiplierKind::SlopeDynamic, 1}, 0.5},
      {{MultiplierKind::ReluStatic, 2, StaticForm::Lifted, Q3Structure::Diagonal}, 0.6},
      {{MultiplierKind::SlopeStatic, 4}, 0.8},
  };
  for (const auto& [method, alpha] : cases) {
    PropertyCheck c{"dissipation/" + method.label() + "@" + fmt(alpha), false, ""};
    const auto cert = certify(G, method, alpha);
    if (cert.verdict != Verdict::CertifiedStable) {
      c.detail = "not certified, skipped";
      c.passed = true;
    } else {
      const double worst = dissipation_over_trials(G, cert, o.dissipation_trials, o.dissipation_T, o.seed);
      const double tol = 1e-7 * (1.0 + cert.witness.P.norm());
      c.passed = worst <= tol;
      c.detail = "max violation " + fmt(worst) + " (tol " + fmt(tol) + ")";
    }
    out.push_back(c);
  }
  return out;
}

}  // namespace reluiqc
