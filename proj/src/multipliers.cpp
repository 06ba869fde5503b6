#include "reluiqc/multipliers.hpp"

#include "reluiqc/augmentation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace reluiqc {

namespace {

template <class>
inline constexpr bool always_false = false;

Matrix block_slope(const Matrix& Z0) {
  const auto n = Z0.rows();
  Matrix M = Matrix::Zero(2 * n, 2 * n);
  M.topRightCorner(n, n) = Z0.transpose();
  M.bottomLeftCorner(n, n) = Z0;
  M.bottomRightCorner(n, n) = -(Z0 + Z0.transpose());
  return M;
}

Matrix block_relu(const Matrix& Z1, const Matrix& Z2, const Matrix& Z3) {
  const auto n = Z1.rows();
  Matrix M(2 * n, 2 * n);
  M.topLeftCorner(n, n) = Z1;
  M.topRightCorner(n, n) = -Z3.transpose() - Z1;
  M.bottomLeftCorner(n, n) = -Z3 - Z1;
  M.bottomRightCorner(n, n) = (Z1 + Z2) + (Z3 + Z3.transpose());
  return M;
}

bool all_nonnegative(const std::vector<double>& x) {
  return std::all_of(x.begin(), x.end(), [](double a) { return a >= 0.0; });
}

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

std::vector<double> reversed_window(const std::vector<double>& x, int T0) {
  std::vector<double> out(static_cast<std::size_t>(T0) + 1);
  for (int a = 0; a <= T0; ++a) out[static_cast<std::size_t>(a)] = x[static_cast<std::size_t>(T0 - a)];
  return out;
}

int horizon_of(const MultiplierParams& p) {
  return std::visit(
      [](const auto& q) -> int {
        using T = std::decay_t<decltype(q)>;
        if constexpr (std::is_same_v<T, StaticSlopeParams>) {
          return static_cast<int>(q.Q0.rows()) - 1;
        } else if constexpr (std::is_same_v<T, StaticReluParams>) {
          return static_cast<int>(q.Q1.rows()) - 1;
        } else {
          return q.N;
        }
      },
      p);
}

}  // namespace

std::string to_string(MultiplierKind kind) {
  switch (kind) {
    case MultiplierKind::SlopeStatic: return "slope-static";
    case MultiplierKind::SlopeDynamic: return "slope-dynamic";
    case MultiplierKind::ReluStatic: return "relu-static";
    case MultiplierKind::ReluDynamic: return "relu-dynamic";
  }
  return "unknown";
}

MultiplierKind parse_multiplier_kind(const std::string& name) {
  for (auto k : {MultiplierKind::SlopeStatic, MultiplierKind::SlopeDynamic, MultiplierKind::ReluStatic,
                 MultiplierKind::ReluDynamic}) {
    if (to_string(k) == name) return k;
  }
  throw std::invalid_argument("unknown multiplier class '" + name +
                              "' (expected slope-static, slope-dynamic, relu-static or relu-dynamic)");
}

bool is_dynamic(MultiplierKind kind) {
  return kind == MultiplierKind::SlopeDynamic || kind == MultiplierKind::ReluDynamic;
}

bool is_relu(MultiplierKind kind) {
  return kind == MultiplierKind::ReluStatic || kind == MultiplierKind::ReluDynamic;
}

bool is_doubly_hyperdominant(const Matrix& Q) {
  if (Q.rows() != Q.cols()) throw std::invalid_argument("is_doubly_hyperdominant: matrix must be square");
  for (Eigen::Index i = 0; i < Q.rows(); ++i) {
    for (Eigen::Index j = 0; j < Q.cols(); ++j) {
      if (i != j && Q(i, j) > 0.0) return false;
    }
  }
  return (Q.rowwise().sum().array() >= 0.0).all() && (Q.colwise().sum().array() >= 0.0).all();
}

bool is_metzler(const Matrix& Q) {
  if (Q.rows() != Q.cols()) throw std::invalid_argument("is_metzler: matrix must be square");
  for (Eigen::Index i = 0; i < Q.rows(); ++i) {
    for (Eigen::Index j = 0; j < Q.cols(); ++j) {
      if (i != j && Q(i, j) < 0.0) return false;
    }
  }
  return true;
}

bool is_admissible(const ZFParams& p) {
  if (p.N < 0 || p.m.size() != static_cast<std::size_t>(2 * p.N + 1)) return false;
  double sum = 0.0;
  for (int i = -p.N; i <= p.N; ++i) {
    if (i != 0 && p.at(i) > 0.0) return false;
    sum += p.at(i);
  }
  return sum >= 0.0;
}

bool is_admissible(const ReluIqcParams& p) {
  const auto n = static_cast<std::size_t>(p.N + 1);
  if (p.N < 0 || p.m1.size() != n || p.m2.size() != n || p.m3.size() != 2 * n - 1) return false;
  if (!all_nonnegative(p.m1) || !all_nonnegative(p.m2)) return false;
  for (int i = -p.N; i <= p.N; ++i) {
    if (i != 0 && p.m3_at(i) < 0.0) return false;
  }
  return true;
}

bool is_admissible(const StaticSlopeParams& p) {
  return p.Q0.rows() > 0 && is_doubly_hyperdominant(p.Q0);
}

bool is_admissible(const StaticReluParams& p, Q3Structure q3) {
  const auto n = p.Q1.rows();
  if (n == 0 || p.Q1.cols() != n || p.Q2.rows() != n || p.Q2.cols() != n || p.Q3.rows() != n ||
      p.Q3.cols() != n) {
    return false;
  }
  if (p.Q1 != p.Q1.transpose() || p.Q2 != p.Q2.transpose()) return false;
  if ((p.Q1.array() < 0.0).any() || (p.Q2.array() < 0.0).any()) return false;
  if (q3 == Q3Structure::Diagonal) {
    const Matrix off = p.Q3 - Matrix(p.Q3.diagonal().asDiagonal());
    return off.isZero(0.0);
  }
  return is_metzler(p.Q3);
}

Matrix arrowhead(const std::vector<double>& row, const std::vector<double>& column) {
  const auto n = static_cast<Eigen::Index>(row.size());
  Matrix A = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) A(0, j) = row[static_cast<std::size_t>(j)];
  for (Eigen::Index i = 1; i < n; ++i) A(i, 0) = column[static_cast<std::size_t>(i)];
  return A;
}

namespace {

// Rows/columns of the arrowheads: row taps m_0..m_N, column taps m_0, m_{-1}..m_{-N}.
std::pair<std::vector<double>, std::vector<double>> two_sided(const std::vector<double>& m, int N) {
  std::vector<double> row(static_cast<std::size_t>(N) + 1);
  std::vector<double> col(static_cast<std::size_t>(N) + 1);
  for (int i = 0; i <= N; ++i) {
    row[static_cast<std::size_t>(i)] = m[static_cast<std::size_t>(N + i)];
    col[static_cast<std::size_t>(i)] = m[static_cast<std::size_t>(N - i)];
  }
  return {row, col};
}

}  // namespace

Matrix build_M_slope_dynamic(const ZFParams& p) {
  require(is_admissible(p), "build_M_slope_dynamic: taps violate m_i <= 0 (i != 0) or sum >= 0");
  const auto [row, col] = two_sided(p.m, p.N);
  return block_slope(arrowhead(row, col));
}

Matrix build_M_relu_dynamic(const ReluIqcParams& p) {
  require(is_admissible(p), "build_M_relu_dynamic: taps violate m1, m2 >= 0 or m3_i >= 0 (i != 0)");
  const auto [row3, col3] = two_sided(p.m3, p.N);
  return block_relu(arrowhead(p.m1, p.m1), arrowhead(p.m2, p.m2), arrowhead(row3, col3));
}

Matrix build_M_slope_static(const StaticSlopeParams& p) {
  require(is_admissible(p), "build_M_slope_static: Q0 is not doubly hyperdominant");
  return block_slope(p.Q0);
}

Matrix build_M_relu_static(const StaticReluParams& p) {
  require(is_admissible(p), "build_M_relu_static: need Q1, Q2 symmetric nonnegative and Q3 Metzler");
  return block_relu(p.Q1, p.Q2, p.Q3);
}

Matrix build_M(const MultiplierParams& p) {
  return std::visit(
      [](const auto& q) -> Matrix {
        using T = std::decay_t<decltype(q)>;
        if constexpr (std::is_same_v<T, StaticSlopeParams>) {
          return build_M_slope_static(q);
        } else if constexpr (std::is_same_v<T, ZFParams>) {
          return build_M_slope_dynamic(q);
        } else if constexpr (std::is_same_v<T, StaticReluParams>) {
          return build_M_relu_static(q);
        } else if constexpr (std::is_same_v<T, ReluIqcParams>) {
          return build_M_relu_dynamic(q);
        } else {
          static_assert(always_false<T>);
        }
      },
      p);
}

ReluIqcParams zf_embed(const ZFParams& p) {
  ReluIqcParams out;
  out.N = p.N;
  out.m1.assign(static_cast<std::size_t>(p.N) + 1, 0.0);
  out.m2.assign(static_cast<std::size_t>(p.N) + 1, 0.0);
  out.m3.resize(p.m.size());
  std::transform(p.m.begin(), p.m.end(), out.m3.begin(), [](double a) { return -a; });
  return out;
}

Matrix toeplitz_from_taps(const ZFParams& p, Eigen::Index n) {
  Matrix Q = Matrix::Zero(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = 0; b < n; ++b) {
      const auto i = b - a;
      if (std::abs(i) <= p.N) Q(a, b) = p.at(static_cast<int>(i));
    }
  }
  return Q;
}

Matrix symmetric_toeplitz(const std::vector<double>& taps, Eigen::Index n) {
  Matrix Q = Matrix::Zero(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = 0; b < n; ++b) {
      const auto i = static_cast<std::size_t>(std::abs(b - a));
      if (i < taps.size()) Q(a, b) = taps[i];
    }
  }
  return Q;
}

Matrix MultiplierSpec::M(const Vector& theta) const {
  if (theta.size() != n_params()) throw std::invalid_argument("MultiplierSpec::M: wrong parameter count");
  Matrix out = Matrix::Zero(size(), size());
  for (Eigen::Index j = 0; j < theta.size(); ++j) out += theta(j) * basis[static_cast<std::size_t>(j)];
  return out;
}

bool MultiplierSpec::admissible(const Vector& theta, double tol) const {
  return constraint_margin(theta) >= -tol;
}

double MultiplierSpec::constraint_margin(const Vector& theta) const {
  double margin = std::numeric_limits<double>::infinity();
  for (const auto& c : constraints) margin = std::min(margin, c.coeffs.dot(theta));
  return margin;
}

namespace {

struct SpecBuilder {
  MultiplierSpec spec;

  Eigen::Index add(Matrix basis, std::string name) {
    spec.basis.push_back(std::move(basis));
    spec.names.push_back(std::move(name));
    return static_cast<Eigen::Index>(spec.basis.size()) - 1;
  }

  // Deferred until the parameter count is known.
  std::vector<std::vector<std::pair<Eigen::Index, double>>> rows;

  void constrain(std::vector<std::pair<Eigen::Index, double>> terms) { rows.push_back(std::move(terms)); }

  MultiplierSpec finish() {
    const auto p = spec.n_params();
    for (const auto& terms : rows) {
      Vector c = Vector::Zero(p);
      for (const auto& [j, a] : terms) c(j) += a;
      const bool duplicate = std::any_of(spec.constraints.begin(), spec.constraints.end(),
                                         [&](const LinearInequality& e) { return e.coeffs == c; });
      if (!duplicate) spec.constraints.push_back({c});
    }
    return std::move(spec);
  }
};

Matrix unit(Eigen::Index n, Eigen::Index i, Eigen::Index j) {
  Matrix E = Matrix::Zero(n, n);
  E(i, j) = 1.0;
  return E;
}

Matrix unit_sym(Eigen::Index n, Eigen::Index i, Eigen::Index j) {
  Matrix E = unit(n, i, j);
  E(j, i) = 1.0;
  return E;
}

}  // namespace

MultiplierSpec make_spec(MultiplierKind kind, int N, Q3Structure q3) {
  if (N < 0) throw std::invalid_argument("make_spec: N must be nonnegative");
  SpecBuilder b;
  b.spec.kind = kind;
  b.spec.N = N;
  b.spec.q3 = q3;
  const Eigen::Index n = N + 1;
  const auto Z = Matrix::Zero(n, n);

  switch (kind) {
    case MultiplierKind::SlopeDynamic: {
      std::vector<std::pair<Eigen::Index, double>> sum;
      for (int i = -N; i <= N; ++i) {
        ZFParams p{N, std::vector<double>(static_cast<std::size_t>(2 * N + 1), 0.0)};
        p.m[static_cast<std::size_t>(i + N)] = 1.0;
        const auto [row, col] = two_sided(p.m, N);
        const auto j = b.add(block_slope(arrowhead(row, col)), "m[" + std::to_string(i) + "]");
        if (i != 0) b.constrain({{j, -1.0}});
        sum.emplace_back(j, 1.0);
      }
      b.constrain(sum);
      break;
    }
    case MultiplierKind::ReluDynamic: {
      for (int which = 1; which <= 2; ++which) {
        for (int i = 0; i <= N; ++i) {
          std::vector<double> taps(static_cast<std::size_t>(n), 0.0);
          taps[static_cast<std::size_t>(i)] = 1.0;
          const Matrix A = arrowhead(taps, taps);
          const Matrix basis = which == 1 ? block_relu(A, Z, Z) : block_relu(Z, A, Z);
          const auto j = b.add(basis, "m" + std::to_string(which) + "[" + std::to_string(i) + "]");
          b.constrain({{j, 1.0}});
        }
      }
      for (int i = -N; i <= N; ++i) {
        std::vector<double> m(static_cast<std::size_t>(2 * N + 1), 0.0);
        m[static_cast<std::size_t>(i + N)] = 1.0;
        const auto [row, col] = two_sided(m, N);
        const auto j = b.add(block_relu(Z, Z, arrowhead(row, col)), "m3[" + std::to_string(i) + "]");
        if (i != 0) b.constrain({{j, 1.0}});
      }
      break;
    }
    case MultiplierKind::SlopeStatic: {
      std::vector<std::vector<std::pair<Eigen::Index, double>>> rows(static_cast<std::size_t>(n));
      std::vector<std::vector<std::pair<Eigen::Index, double>>> cols(static_cast<std::size_t>(n));
      for (Eigen::Index r = 0; r < n; ++r) {
        for (Eigen::Index c = 0; c < n; ++c) {
          const auto j = b.add(block_slope(unit(n, r, c)),
                               "Q0[" + std::to_string(r) + "," + std::to_string(c) + "]");
          if (r != c) b.constrain({{j, -1.0}});
          rows[static_cast<std::size_t>(r)].emplace_back(j, 1.0);
          cols[static_cast<std::size_t>(c)].emplace_back(j, 1.0);
        }
      }
      for (auto& r : rows) b.constrain(r);
      for (auto& c : cols) b.constrain(c);
      break;
    }
    case MultiplierKind::ReluStatic: {
      for (int which = 1; which <= 2; ++which) {
        for (Eigen::Index r = 0; r < n; ++r) {
          for (Eigen::Index c = r; c < n; ++c) {
            const Matrix E = unit_sym(n, r, c);
            const Matrix basis = which == 1 ? block_relu(E, Z, Z) : block_relu(Z, E, Z);
            const auto j = b.add(basis, "Q" + std::to_string(which) + "[" + std::to_string(r) + "," +
                                            std::to_string(c) + "]");
            b.constrain({{j, 1.0}});
          }
        }
      }
      for (Eigen::Index r = 0; r < n; ++r) {
        for (Eigen::Index c = 0; c < n; ++c) {
          if (q3 == Q3Structure::Diagonal && r != c) continue;
          const auto j = b.add(block_relu(Z, Z, unit(n, r, c)),
                               "Q3[" + std::to_string(r) + "," + std::to_string(c) + "]");
          if (r != c) b.constrain({{j, 1.0}});
        }
      }
      break;
    }
  }

  auto spec = b.finish();

  // Strictly admissible reference point.
  Vector interior = Vector::Zero(spec.n_params());
  switch (kind) {
    case MultiplierKind::SlopeDynamic:
      for (int i = -N; i <= N; ++i) interior(i + N) = i == 0 ? 2.0 * N + 1.0 : -1.0;
      break;
    case MultiplierKind::ReluDynamic:
      interior.setOnes();
      break;
    case MultiplierKind::SlopeStatic:
      for (Eigen::Index r = 0; r < n; ++r) {
        for (Eigen::Index c = 0; c < n; ++c) interior(r * n + c) = r == c ? static_cast<double>(n) : -1.0;
      }
      break;
    case MultiplierKind::ReluStatic:
      interior.setOnes();
      break;
  }
  spec.interior = interior;
  return spec;
}

MultiplierParams params_from_theta(const MultiplierSpec& spec, const Vector& theta) {
  if (theta.size() != spec.n_params()) throw std::invalid_argument("params_from_theta: wrong parameter count");
  const int N = spec.N;
  const Eigen::Index n = N + 1;
  const auto at = [&](Eigen::Index j) { return theta(j); };
  switch (spec.kind) {
    case MultiplierKind::SlopeDynamic: {
      ZFParams p{N, std::vector<double>(theta.data(), theta.data() + theta.size())};
      return p;
    }
    case MultiplierKind::ReluDynamic: {
      ReluIqcParams p;
      p.N = N;
      p.m1.assign(theta.data(), theta.data() + n);
      p.m2.assign(theta.data() + n, theta.data() + 2 * n);
      p.m3.assign(theta.data() + 2 * n, theta.data() + theta.size());
      return p;
    }
    case MultiplierKind::SlopeStatic: {
      StaticSlopeParams p{Matrix(n, n)};
      for (Eigen::Index r = 0; r < n; ++r) {
        for (Eigen::Index c = 0; c < n; ++c) p.Q0(r, c) = at(r * n + c);
      }
      return p;
    }
    case MultiplierKind::ReluStatic: {
      StaticReluParams p{Matrix::Zero(n, n), Matrix::Zero(n, n), Matrix::Zero(n, n)};
      Eigen::Index j = 0;
      for (Matrix* Q : {&p.Q1, &p.Q2}) {
        for (Eigen::Index r = 0; r < n; ++r) {
          for (Eigen::Index c = r; c < n; ++c) {
            (*Q)(r, c) = at(j);
            (*Q)(c, r) = at(j);
            ++j;
          }
        }
      }
      for (Eigen::Index r = 0; r < n; ++r) {
        for (Eigen::Index c = 0; c < n; ++c) {
          if (spec.q3 == Q3Structure::Diagonal && r != c) continue;
          p.Q3(r, c) = at(j++);
        }
      }
      return p;
    }
  }
  throw std::logic_error("params_from_theta: unknown kind");
}

Vector theta_from_params(const MultiplierSpec& spec, const MultiplierParams& params) {
  Vector theta(spec.n_params());
  const Eigen::Index n = spec.N + 1;
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, ZFParams>) {
          require(spec.kind == MultiplierKind::SlopeDynamic && p.N == spec.N, "theta_from_params: class mismatch");
          for (std::size_t i = 0; i < p.m.size(); ++i) theta(static_cast<Eigen::Index>(i)) = p.m[i];
        } else if constexpr (std::is_same_v<T, ReluIqcParams>) {
          require(spec.kind == MultiplierKind::ReluDynamic && p.N == spec.N, "theta_from_params: class mismatch");
          Eigen::Index j = 0;
          for (double a : p.m1) theta(j++) = a;
          for (double a : p.m2) theta(j++) = a;
          for (double a : p.m3) theta(j++) = a;
        } else if constexpr (std::is_same_v<T, StaticSlopeParams>) {
          require(spec.kind == MultiplierKind::SlopeStatic && p.Q0.rows() == n, "theta_from_params: class mismatch");
          for (Eigen::Index r = 0; r < n; ++r) {
            for (Eigen::Index c = 0; c < n; ++c) theta(r * n + c) = p.Q0(r, c);
          }
        } else {
          require(spec.kind == MultiplierKind::ReluStatic && p.Q1.rows() == n, "theta_from_params: class mismatch");
          Eigen::Index j = 0;
          for (const Matrix* Q : {&p.Q1, &p.Q2}) {
            for (Eigen::Index r = 0; r < n; ++r) {
              for (Eigen::Index c = r; c < n; ++c) theta(j++) = (*Q)(r, c);
            }
          }
          for (Eigen::Index r = 0; r < n; ++r) {
            for (Eigen::Index c = 0; c < n; ++c) {
              if (spec.q3 == Q3Structure::Diagonal && r != c) continue;
              theta(j++) = p.Q3(r, c);
            }
          }
        }
      },
      params);
  return theta;
}

SumIdentity toeplitz_sum_oracle(const MultiplierParams& params, const std::vector<double>& v,
                                const std::vector<double>& w, int T0) {
  if (T0 < 0) throw std::invalid_argument("toeplitz_sum_oracle: T0 must be nonnegative");
  const auto len = static_cast<std::size_t>(T0) + 1;
  if (v.size() < len || w.size() < len) throw std::invalid_argument("toeplitz_sum_oracle: signals too short");

  const int N = horizon_of(params);
  const Matrix M = build_M(params);

  // Route 1: filter (v, w) through Psi_N from rest and accumulate r' M r.
  Matrix U(2, static_cast<Eigen::Index>(len));
  for (std::size_t k = 0; k < len; ++k) {
    U(0, static_cast<Eigen::Index>(k)) = v[k];
    U(1, static_cast<Eigen::Index>(k)) = w[k];
  }
  const StateSpace psi = build_psi(N);
  const auto traj = simulate(psi, U, Vector::Zero(psi.n_states()));
  SumIdentity out;
  for (Eigen::Index k = 0; k < traj.outputs.cols(); ++k) {
    out.lhs += traj.outputs.col(k).dot(M * traj.outputs.col(k));
  }

  // Route 2: one quadratic form in vbar = [v(T0) ... v(0)], wbar likewise.
  const auto vb = reversed_window(v, T0);
  const auto wb = reversed_window(w, T0);
  Vector z(2 * static_cast<Eigen::Index>(len));
  for (std::size_t a = 0; a < len; ++a) {
    z(static_cast<Eigen::Index>(a)) = vb[a];
    z(static_cast<Eigen::Index>(len + a)) = wb[a];
  }
  const auto n = static_cast<Eigen::Index>(len);

  const Matrix Q = std::visit(
      [&](const auto& p) -> Matrix {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, ZFParams>) {
          return block_slope(toeplitz_from_taps(p, n));
        } else if constexpr (std::is_same_v<T, ReluIqcParams>) {
          const Matrix Q3 = toeplitz_from_taps(ZFParams{p.N, p.m3}, n);
          return block_relu(symmetric_toeplitz(p.m1, n), symmetric_toeplitz(p.m2, n), Q3);
        } else {
          // Static: r(k) picks entries of z; accumulate shifted copies of M.
          const Eigen::Index win = N + 1;
          Matrix acc = Matrix::Zero(2 * n, 2 * n);
          for (Eigen::Index k = 0; k < n; ++k) {
            std::vector<Eigen::Index> pos(static_cast<std::size_t>(2 * win), -1);
            for (Eigen::Index i = 0; i < win; ++i) {
              if (k - i < 0) continue;
              const Eigen::Index a = T0 - (k - i);  // position of time k-i in the reversed stack
              pos[static_cast<std::size_t>(i)] = a;
              pos[static_cast<std::size_t>(win + i)] = n + a;
            }
            for (Eigen::Index i = 0; i < 2 * win; ++i) {
              const auto pi = pos[static_cast<std::size_t>(i)];
              if (pi < 0) continue;
              for (Eigen::Index j = 0; j < 2 * win; ++j) {
                const auto pj = pos[static_cast<std::size_t>(j)];
                if (pj >= 0) acc(pi, pj) += M(i, j);
              }
            }
          }
          return acc;
        }
      },
      params);
  out.rhs = z.dot(Q * z);
  return out;
}

}  // namespace reluiqc
