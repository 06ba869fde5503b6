#include "doctest.h"

#include "reluiqc/multipliers.hpp"
#include "reluiqc/oracle_sim.hpp"

#include <algorithm>
#include <cmath>
#include <random>

using namespace reluiqc;

namespace {

Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix M(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& r : rows) {
    Eigen::Index j = 0;
    for (double x : r) M(i, j++) = x;
    ++i;
  }
  return M;
}

// Definitions written out entry by entry.
bool dhd_reference(const Matrix& Q) {
  for (Eigen::Index i = 0; i < Q.rows(); ++i) {
    double row = 0.0, col = 0.0;
    for (Eigen::Index j = 0; j < Q.cols(); ++j) {
      if (i != j && Q(i, j) > 0) return false;
      row += Q(i, j);
      col += Q(j, i);
    }
    if (row < 0 || col < 0) return false;
  }
  return true;
}

bool metzler_reference(const Matrix& Q) {
  for (Eigen::Index i = 0; i < Q.rows(); ++i)
    for (Eigen::Index j = 0; j < Q.cols(); ++j)
      if (i != j && Q(i, j) < 0) return false;
  return true;
}

Vector stack(const Vector& v, const Vector& w) {
  Vector r(v.size() + w.size());
  r << v, w;
  return r;
}

Vector relu_of(const Vector& v) { return v.cwiseMax(0.0); }

const MultiplierKind kAll[] = {MultiplierKind::SlopeStatic, MultiplierKind::SlopeDynamic, MultiplierKind::ReluStatic,
                               MultiplierKind::ReluDynamic};

}  // namespace

TEST_CASE("predicates: spot values") {
  CHECK(is_doubly_hyperdominant(mat({{1, -1}, {-1, 1}})));
  CHECK_FALSE(is_doubly_hyperdominant(mat({{1, -2}, {0, 1}})));
  for (int n = 1; n <= 5; ++n) CHECK(is_doubly_hyperdominant(Matrix::Identity(n, n)));
  CHECK(is_metzler(mat({{-5, 1}, {2, -7}})));
  CHECK_FALSE(is_metzler(mat({{0, -0.1}, {0, 0}})));
  CHECK(is_metzler(Vector::LinSpaced(4, -3, 3).asDiagonal().toDenseMatrix()));
  CHECK_THROWS_AS(is_metzler(Matrix::Zero(2, 3)), std::invalid_argument);
  CHECK_THROWS_AS(is_doubly_hyperdominant(Matrix::Zero(3, 2)), std::invalid_argument);
}

TEST_CASE("predicates: exhaustive 3x3 sign patterns") {
  int dhd = 0, metz = 0;
  for (int code = 0; code < 19683; ++code) {
    Matrix Q(3, 3);
    int c = code;
    for (int k = 0; k < 9; ++k) {
      Q(k / 3, k % 3) = c % 3 - 1;
      c /= 3;
    }
    const bool d = is_doubly_hyperdominant(Q);
    const bool m = is_metzler(Q);
    REQUIRE(d == dhd_reference(Q));
    REQUIRE(m == metzler_reference(Q));
    dhd += d;
    metz += m;
  }
  // Metzler: off-diagonals in {0, 1}: 3^3 * 2^6.
  CHECK(metz == 27 * 64);
  CHECK(dhd > 0);
}

TEST_CASE("slope dynamic M") {
  CHECK(build_M_slope_dynamic({0, {1}}) == mat({{0, 1}, {1, -2}}));
  const Matrix M = build_M_slope_dynamic({1, {0, 1, -1}});
  const Matrix M0 = M.block(2, 0, 2, 2);
  CHECK(M0 == mat({{1, -1}, {0, 0}}));
  CHECK(M.block(2, 2, 2, 2) == mat({{-2, 1}, {1, 0}}));
  CHECK(M.block(0, 0, 2, 2).isZero(0.0));
  CHECK_THROWS_AS(build_M_slope_dynamic({1, {0.1, 1, 0}}), std::invalid_argument);
  CHECK_THROWS_AS(build_M_slope_dynamic({1, {-1, 1, -1}}), std::invalid_argument);

  std::mt19937_64 rng(21);
  std::normal_distribution<double> g;
  for (int t = 0; t < 100; ++t) {
    const int N = t % 5;
    const auto p = std::get<ZFParams>(random_params(rng, MultiplierKind::SlopeDynamic, N));
    const Matrix Mp = build_M_slope_dynamic(p);
    CHECK(Mp == Mp.transpose());
    std::vector<double> row, col;
    for (int i = 0; i <= N; ++i) row.push_back(p.at(i));
    for (int i = 0; i <= N; ++i) col.push_back(p.at(-i));
    const Matrix A = arrowhead(row, col);
    Vector v(N + 1), w(N + 1);
    for (int i = 0; i <= N; ++i) v(i) = g(rng), w(i) = g(rng);
    const Vector r = stack(v, w);
    CHECK(r.dot(Mp * r) == doctest::Approx(2.0 * w.dot(A * (v - w))));
  }
}

TEST_CASE("relu dynamic M") {
  CHECK(build_M_relu_dynamic({0, {0}, {0}, {1}}) == mat({{0, -1}, {-1, 2}}));
  CHECK(build_M_relu_dynamic({0, {1}, {0}, {0}}) == mat({{1, -1}, {-1, 1}}));
  CHECK(build_M_relu_dynamic({0, {0}, {0}, {-4}}) == mat({{0, 4}, {4, -8}}));
  CHECK_THROWS_AS(build_M_relu_dynamic({0, {-1}, {0}, {0}}), std::invalid_argument);
  CHECK_THROWS_AS(build_M_relu_dynamic({1, {0, 0}, {0, 0}, {-1, 0, 0}}), std::invalid_argument);

  std::mt19937_64 rng(22);
  std::normal_distribution<double> g;
  for (int t = 0; t < 100; ++t) {
    const int N = t % 5;
    const auto p = std::get<ReluIqcParams>(random_params(rng, MultiplierKind::ReluDynamic, N));
    const Matrix M = build_M_relu_dynamic(p);
    CHECK(M == M.transpose());
    std::vector<double> row3, col3;
    for (int i = 0; i <= N; ++i) row3.push_back(p.m3_at(i));
    for (int i = 0; i <= N; ++i) col3.push_back(p.m3_at(-i));
    const Matrix M1 = arrowhead(p.m1, p.m1), M2 = arrowhead(p.m2, p.m2), M3 = arrowhead(row3, col3);
    Vector v(N + 1);
    for (int i = 0; i <= N; ++i) v(i) = g(rng);
    const Vector w = relu_of(v);
    const Vector r = stack(v, w);
    const double expanded = (w - v).dot(M1 * (w - v)) + w.dot(M2 * w) + 2.0 * w.dot(M3 * (w - v));
    CHECK(r.dot(M * r) == doctest::Approx(expanded));
    CHECK(expanded >= -1e-12);
  }
}

TEST_CASE("static M") {
  CHECK(build_M_slope_static({mat({{1}})}) == mat({{0, 1}, {1, -2}}));
  const Matrix I3 = Matrix::Identity(3, 3), Z3 = Matrix::Zero(3, 3);
  const Matrix Q = build_M_relu_static({Z3, Z3, I3});
  CHECK(Q.block(0, 3, 3, 3) == -I3);
  CHECK(Q.block(3, 3, 3, 3) == 2 * I3);
  CHECK(Q.block(0, 0, 3, 3) == Z3);
  std::mt19937_64 rng(23);
  std::normal_distribution<double> g;
  Vector v(3);
  for (int i = 0; i < 3; ++i) v(i) = g(rng);
  const Vector w = relu_of(v);
  CHECK(stack(v, w).dot(build_M_relu_static({I3, Z3, Z3}) * stack(v, w)) == doctest::Approx((w - v).squaredNorm()));
  CHECK(stack(v, w).dot(build_M_slope_static({I3}) * stack(v, w)) == doctest::Approx(2 * w.dot(v - w)));
  CHECK_THROWS_AS(build_M_slope_static({mat({{1, 1}, {0, 1}})}), std::invalid_argument);
  CHECK_THROWS_AS(build_M_relu_static({-I3, Z3, Z3}), std::invalid_argument);
  CHECK_THROWS_AS(build_M_relu_static({Z3, Z3, -Matrix::Ones(3, 3)}), std::invalid_argument);

  for (int t = 0; t < 200; ++t) {
    const int N = t % 5;
    const auto kind = t % 2 ? MultiplierKind::SlopeStatic : MultiplierKind::ReluStatic;
    const Matrix M = build_M(random_params(rng, kind, N));
    const auto phi = PiecewiseLinear::random(rng);
    Vector x(N + 1), y(N + 1);
    for (int i = 0; i <= N; ++i) x(i) = 2 * g(rng), y(i) = kind == MultiplierKind::ReluStatic ? relu(x(i)) : phi(x(i));
    CHECK(stack(x, y).dot(M * stack(x, y)) >= -1e-9);
    // ReLU is slope restricted, so it must pass the slope class too.
    CHECK(stack(x, relu_of(x)).dot(M * stack(x, relu_of(x))) >= -1e-9);
  }
}

TEST_CASE("make_spec parameter counts and constraints") {
  for (int N = 0; N <= 4; ++N) {
    const int n = N + 1;
    CHECK(make_spec(MultiplierKind::SlopeDynamic, N).n_params() == 2 * N + 1);
    CHECK(make_spec(MultiplierKind::ReluDynamic, N).n_params() == 4 * N + 3);
    CHECK(make_spec(MultiplierKind::SlopeStatic, N).n_params() == n * n);
    CHECK(make_spec(MultiplierKind::ReluStatic, N).n_params() == n * (n + 1) + n * n);
    CHECK(make_spec(MultiplierKind::ReluStatic, N, Q3Structure::Diagonal).n_params() == n * (n + 1) + n);
  }
  const auto zf = make_spec(MultiplierKind::SlopeDynamic, 1);
  CHECK(zf.constraints.size() == 3);
  CHECK(zf.admissible((Vector(3) << -1, 2, -1).finished()));
  CHECK_FALSE(zf.admissible((Vector(3) << 0.1, 2, 0).finished()));
  CHECK_FALSE(zf.admissible((Vector(3) << -1, 1, -1).finished()));

  const auto r0 = make_spec(MultiplierKind::ReluDynamic, 0);
  CHECK(r0.constraints.size() == 2);
  CHECK(r0.admissible((Vector(3) << 0, 0, -5).finished()));
  CHECK_FALSE(r0.admissible((Vector(3) << -1, 0, 0).finished()));

  const auto s0 = make_spec(MultiplierKind::SlopeStatic, 0);
  CHECK(s0.n_params() == 1);
  CHECK(s0.admissible(Vector::Constant(1, 0.0)));
  CHECK_FALSE(s0.admissible(Vector::Constant(1, -1e-3)));
  CHECK_THROWS_AS(make_spec(MultiplierKind::SlopeDynamic, -1), std::invalid_argument);
}

TEST_CASE("multiplier basis, interior and admissibility agree with the structured classes") {
  std::mt19937_64 rng(24);
  std::normal_distribution<double> g;
  for (auto kind : kAll) {
    for (int N = 0; N <= 3; ++N) {
      for (auto q3 : {Q3Structure::Metzler, Q3Structure::Diagonal}) {
        if (q3 == Q3Structure::Diagonal && kind != MultiplierKind::ReluStatic) continue;
        const auto spec = make_spec(kind, N, q3);
        CHECK(spec.size() == 2 * N + 2);
        for (const auto& B : spec.basis) CHECK(B == B.transpose());
        CHECK(spec.constraint_margin(spec.interior) > 0.0);
        for (int t = 0; t < 50; ++t) {
          Vector theta(spec.n_params());
          for (Eigen::Index j = 0; j < theta.size(); ++j) theta(j) = g(rng);
          if (t % 2 == 0) theta = theta.cwiseAbs();
          const auto p = params_from_theta(spec, theta);
          const bool structured = std::visit(
              [&](const auto& x) {
                if constexpr (std::is_same_v<std::decay_t<decltype(x)>, StaticReluParams>) return is_admissible(x, q3);
                else return is_admissible(x);
              },
              p);
          CHECK(spec.admissible(theta) == structured);
          CHECK((theta_from_params(spec, p) - theta).norm() == 0.0);
          if (structured && (kind != MultiplierKind::ReluStatic || q3 == Q3Structure::Metzler)) {
            CHECK((spec.M(theta) - build_M(p)).norm() <= 1e-12);
          }
        }
      }
    }
  }
}

TEST_CASE("ZF embedding") {
  const auto e = zf_embed({1, {0, 1, 0}});
  CHECK(e.m3 == std::vector<double>{-0.0, -1, -0.0});
  CHECK(build_M_relu_dynamic(e) == build_M_slope_dynamic({1, {0, 1, 0}}));
  const auto e2 = zf_embed({1, {-0.3, 1, -0.5}});
  CHECK(e2.m3 == std::vector<double>{0.3, -1, 0.5});
  CHECK(is_admissible(e2));
  std::mt19937_64 rng(25);
  for (int t = 0; t < 200; ++t) {
    const auto p = std::get<ZFParams>(random_params(rng, MultiplierKind::SlopeDynamic, t % 6));
    const auto q = zf_embed(p);
    CHECK(is_admissible(q));
    CHECK(build_M_relu_dynamic(q) == build_M_slope_dynamic(p));
  }
}

TEST_CASE("Toeplitz factors from admissible taps") {
  std::mt19937_64 rng(26);
  for (int t = 0; t < 100; ++t) {
    const int N = t % 5;
    const auto p = std::get<ZFParams>(random_params(rng, MultiplierKind::SlopeDynamic, N));
    for (Eigen::Index n : {1, 3, 8}) CHECK(is_doubly_hyperdominant(toeplitz_from_taps(p, n)));
    const auto r = std::get<ReluIqcParams>(random_params(rng, MultiplierKind::ReluDynamic, N));
    for (Eigen::Index n : {1, 3, 8}) CHECK(is_metzler(toeplitz_from_taps({N, r.m3}, n)));
    CHECK(symmetric_toeplitz(r.m1, 6).minCoeff() >= 0.0);
  }
}

TEST_CASE("summation identity") {
  const MultiplierParams zf = ZFParams{1, {0, 1, -1}};
  const std::vector<double> zero(5, 0.0);
  const auto s0 = toeplitz_sum_oracle(zf, zero, zero, 4);
  CHECK(s0.lhs == 0.0);
  CHECK(s0.rhs == 0.0);

  const std::vector<double> v{1, -1, 2};
  const std::vector<double> w{1, 0, 2};
  const auto s = toeplitz_sum_oracle(zf, v, w, 2);
  CHECK(s.lhs == doctest::Approx(s.rhs));
  // Hand value: r(0) = [1,0,1,0], r(1) = [-1,1,0,1], r(2) = [2,-1,2,0].
  const Matrix M = build_M(zf);
  double hand = 0.0;
  for (const Vector& r : {Vector((Vector(4) << 1, 0, 1, 0).finished()), Vector((Vector(4) << -1, 1, 0, 1).finished()),
                          Vector((Vector(4) << 2, -1, 2, 0).finished())})
    hand += r.dot(M * r);
  CHECK(s.lhs == doctest::Approx(hand));

  CHECK_THROWS_AS(toeplitz_sum_oracle(zf, v, w, 3), std::invalid_argument);

  // Truncation: horizon longer than the signal.
  std::mt19937_64 rng(27);
  std::normal_distribution<double> g;
  for (auto kind : kAll) {
    for (int T0 = 0; T0 < 4; ++T0) {
      const auto p = random_params(rng, kind, 5);
      std::vector<double> x(T0 + 1), y(T0 + 1);
      for (int k = 0; k <= T0; ++k) x[k] = g(rng), y[k] = relu(x[k]);
      const auto st = toeplitz_sum_oracle(p, x, y, T0);
      CHECK(std::abs(st.lhs - st.rhs) <= 1e-9 * (1 + std::abs(st.lhs)));
      CHECK(st.lhs >= -1e-9);
    }
  }
}

TEST_CASE("hard IQC nonnegativity for saturation and linear slopes") {
  std::mt19937_64 rng(28);
  std::normal_distribution<double> g(0.0, 2.0);
  const Nonlinearity sat = [](double x) { return std::clamp(x, -1.0, 1.0); };
  const Nonlinearity half = [](double x) { return 0.5 * x; };
  for (int t = 0; t < 200; ++t) {
    const int N = t % 6;
    const int T0 = t % 13;
    const auto kind = t % 2 ? MultiplierKind::SlopeDynamic : MultiplierKind::SlopeStatic;
    const auto p = random_params(rng, kind, N);
    std::vector<double> v(T0 + 1);
    for (auto& x : v) x = g(rng);
    for (const auto& phi : {sat, half}) {
      std::vector<double> w(v.size());
      std::transform(v.begin(), v.end(), w.begin(), phi);
      const auto s = toeplitz_sum_oracle(p, v, w, T0);
      CHECK(std::abs(s.lhs - s.rhs) <= 1e-9 * (1 + std::abs(s.lhs)));
      CHECK(s.lhs >= -1e-9);
    }
  }
}
