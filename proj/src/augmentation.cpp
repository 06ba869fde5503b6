#include "reluiqc/augmentation.hpp"

#include <cmath>
#include <stdexcept>

namespace reluiqc {

StateSpace build_psi(int N) {
  if (N < 0) throw std::invalid_argument("build_psi: N must be nonnegative");
  const Eigen::Index n = N;
  const Eigen::Index p = 2 * n + 2;
  Matrix A = Matrix::Zero(2 * n, 2 * n);
  Matrix B = Matrix::Zero(2 * n, 2);
  Matrix C = Matrix::Zero(p, 2 * n);
  Matrix D = Matrix::Zero(p, 2);
  for (Eigen::Index i = 1; i < n; ++i) {
    A(i, i - 1) = 1.0;
    A(n + i, n + i - 1) = 1.0;
  }
  if (n > 0) {
    B(0, 0) = 1.0;
    B(n, 1) = 1.0;
  }
  D(0, 0) = 1.0;
  D(n + 1, 1) = 1.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    C(1 + i, i) = 1.0;
    C(n + 2 + i, n + i) = 1.0;
  }
  return StateSpace(A, B, C, D);
}

AugmentedSystem augment(const StateSpace& G, int N) {
  if (!G.is_siso()) throw std::invalid_argument("augment: plant must be SISO");
  const auto with_input = stack_outputs(G, StateSpace::static_gain(Matrix::Identity(1, 1)));
  AugmentedSystem aug;
  aug.sys = series(with_input, build_psi(N));
  aug.horizon = N;
  aug.plant_states = G.n_states();
  aug.form = Realization::Filtered;
  aug.state_scaling = Vector::Ones(aug.sys.n_states());
  return aug;
}

AugmentedSystem lift(const StateSpace& G, int L) {
  if (!G.is_siso()) throw std::invalid_argument("lift: plant must be SISO");
  if (L < 1) throw std::invalid_argument("lift: block length must be at least 1");
  const auto n = G.n_states();
  const Eigen::Index l = L;

  std::vector<Matrix> powers(static_cast<std::size_t>(L) + 1);
  powers[0] = Matrix::Identity(n, n);
  for (int i = 1; i <= L; ++i) powers[static_cast<std::size_t>(i)] = G.A() * powers[static_cast<std::size_t>(i - 1)];

  Matrix B(n, l);
  for (Eigen::Index j = 0; j < l; ++j) B.col(j) = powers[static_cast<std::size_t>(l - 1 - j)] * G.B();

  Matrix C = Matrix::Zero(2 * l, n);
  Matrix D = Matrix::Zero(2 * l, l);
  for (Eigen::Index i = 0; i < l; ++i) {
    C.row(i) = G.C() * powers[static_cast<std::size_t>(i)];
    D(i, i) = G.D()(0, 0);
    for (Eigen::Index j = 0; j < i; ++j) {
      D(i, j) = (G.C() * powers[static_cast<std::size_t>(i - j - 1)] * G.B())(0, 0);
    }
    D(l + i, i) = 1.0;
  }

  AugmentedSystem aug;
  aug.sys = StateSpace(powers[static_cast<std::size_t>(L)], B, C, D);
  aug.horizon = L - 1;
  aug.plant_states = n;
  aug.form = Realization::Lifted;
  aug.state_scaling = Vector::Ones(n);
  return aug;
}

StateSpace loop_plant(const StateSpace& G, double alpha) { return scale(G, -alpha); }

bool check_well_posed(const StateSpace& G) {
  if (!G.is_siso()) return false;
  const double d = G.D()(0, 0);
  return d == 0.0 || std::abs(d) < 1.0;
}

Vector balancing_scaling(const StateSpace& sys, int max_sweeps) {
  const auto n = sys.n_states();
  Vector d = Vector::Ones(n);
  if (n == 0) return d;
  const Matrix& A = sys.A();
  const Matrix& B = sys.B();
  const Matrix& C = sys.C();

  // Scaled blocks are D^-1 A D, D^-1 B, C D. For state i, the column norm
  // collects A(:,i) and C(:,i); the row norm collects A(i,:) and B(i,:).
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      double col = 0.0;
      double row = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        col += std::pow(A(j, i) * d(i) / d(j), 2);
        row += std::pow(A(i, j) * d(j) / d(i), 2);
      }
      col += (C.col(i) * d(i)).squaredNorm();
      row += (B.row(i) / d(i)).squaredNorm();
      if (col == 0.0 || row == 0.0) continue;
      // Power-of-two step keeps the transform exact in floating point.
      const double f = std::exp2(std::round(0.25 * std::log2(row / col)));
      if (f != 1.0) {
        d(i) *= f;
        changed = true;
      }
    }
    if (!changed) break;
  }
  return d;
}

AugmentedSystem balance(const AugmentedSystem& aug) {
  const Vector d = balancing_scaling(aug.sys);
  AugmentedSystem out = aug;
  out.sys = diagonal_similarity(aug.sys, d);
  out.state_scaling = aug.state_scaling.cwiseProduct(d);
  return out;
}

Vector filtered_state(const Vector& x, const std::vector<double>& v, const std::vector<double>& w,
                      int N, std::size_t k) {
  Vector s(x.size() + 2 * N);
  s.head(x.size()) = x;
  for (int i = 1; i <= N; ++i) {
    const bool past = k >= static_cast<std::size_t>(i);
    s(x.size() + i - 1) = past ? v[k - static_cast<std::size_t>(i)] : 0.0;
    s(x.size() + N + i - 1) = past ? w[k - static_cast<std::size_t>(i)] : 0.0;
  }
  return s;
}

}  // namespace reluiqc
