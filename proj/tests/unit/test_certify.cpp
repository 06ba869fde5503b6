#include "doctest.h"

#include "reluiqc/certify.hpp"

#include <sstream>

using namespace reluiqc;

namespace {

const StateSpace kG = tf_to_ss({{2, 0.92}, {1, -0.5, 0}});

}  // namespace

TEST_CASE("method basics") {
  const Method m{MultiplierKind::ReluStatic, 3, StaticForm::Lifted, Q3Structure::Diagonal};
  CHECK(m.horizon() == 2);
  CHECK(m.label() == "relu-static/N=3/lifted/diagonal");
  CHECK(Method{MultiplierKind::SlopeDynamic, 2}.label() == "slope-dynamic/N=2");
  CHECK_THROWS_AS(validate(Method{MultiplierKind::SlopeDynamic, 0}), std::invalid_argument);
  CHECK(parse_static_form("sliding") == StaticForm::Sliding);
  CHECK(parse_q3_structure("diagonal") == Q3Structure::Diagonal);
  CHECK_THROWS_AS(parse_static_form("overlapping"), std::invalid_argument);
  CHECK_THROWS_AS(parse_q3_structure("full"), std::invalid_argument);
  CHECK_THROWS_AS(parse_multiplier_kind("circle"), std::invalid_argument);
  const auto rows = table2_methods(2);
  REQUIRE(rows.size() == 4);
  CHECK(rows[1].q3 == Q3Structure::Diagonal);
}

TEST_CASE("system realizations per method") {
  const auto dyn = build_system(kG, {MultiplierKind::ReluDynamic, 3}, 1.0);
  CHECK(dyn.form == Realization::Filtered);
  CHECK(dyn.horizon == 2);
  CHECK(dyn.sys.n_states() == 6);
  const auto lifted = build_system(kG, {MultiplierKind::SlopeStatic, 3}, 1.0);
  CHECK(lifted.form == Realization::Lifted);
  CHECK(lifted.sys.n_states() == 2);
  CHECK(lifted.sys.n_outputs() == 6);
  const auto sliding = build_system(kG, {MultiplierKind::SlopeStatic, 3, StaticForm::Sliding}, 1.0);
  CHECK(sliding.form == Realization::Filtered);
  CHECK(sliding.sys.n_states() == 6);
}

TEST_CASE("certify examples") {
  const auto a = certify(kG, {MultiplierKind::ReluDynamic, 2}, 1.0);
  CHECK(a.verdict == Verdict::CertifiedStable);
  CHECK(a.well_posed);
  CHECK(a.witness.feasible);
  const auto b = certify(kG, {MultiplierKind::SlopeDynamic, 1}, 0.7);
  CHECK(b.verdict == Verdict::Inconclusive);
  for (auto kind : {MultiplierKind::SlopeStatic, MultiplierKind::SlopeDynamic, MultiplierKind::ReluStatic,
                    MultiplierKind::ReluDynamic}) {
    for (int N = 1; N <= 3; ++N) CHECK(certify(kG, {kind, N}, 0.0).verdict == Verdict::CertifiedStable);
  }
  CHECK_THROWS_AS(certify(kG, {MultiplierKind::ReluDynamic, 1}, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(certify(kG, {MultiplierKind::ReluDynamic, 1}, std::nan("")), std::invalid_argument);
  CHECK_THROWS_AS(certify(stack_outputs(kG, kG), {MultiplierKind::ReluDynamic, 1}, 1.0), std::invalid_argument);
}

TEST_CASE("unstable open loop is never certified") {
  const auto U = tf_to_ss({{1}, {1, -1.2}});
  for (auto kind : {MultiplierKind::SlopeDynamic, MultiplierKind::ReluDynamic, MultiplierKind::SlopeStatic}) {
    CHECK(certify(U, {kind, 2}, 0.0).verdict == Verdict::Inconclusive);
  }
}

TEST_CASE("ill-posed loop is inconclusive") {
  const auto S = StateSpace::static_gain(Matrix::Constant(1, 1, 1.0));
  const auto c = certify(S, {MultiplierKind::ReluDynamic, 1}, 2.0);
  CHECK_FALSE(c.well_posed);
  CHECK(c.verdict == Verdict::Inconclusive);
}

TEST_CASE("zero plant reaches the cap") {
  const auto Z = tf_to_ss({{0}, {1, -0.5}});
  const auto r = margin(Z, {MultiplierKind::ReluDynamic, 1});
  CHECK(r.cap_reached);
  CHECK(r.alpha_lo == 400.0);
}

TEST_CASE("margin bracket and log invariants") {
  const auto r = margin(kG, {MultiplierKind::SlopeDynamic, 1});
  CHECK_FALSE(r.cap_reached);
  CHECK(r.alpha_hi - r.alpha_lo <= 1e-3 * (1 + r.alpha_hi));
  CHECK(r.alpha_lo == doctest::Approx(0.65).epsilon(0.01));
  CHECK(r.iterations + 2 == static_cast<int>(r.log.size()));
  // Every certified probe lies below every rejected probe.
  double max_ok = 0.0, min_bad = 1e300;
  for (const auto& s : r.log) {
    if (s.verdict == Verdict::CertifiedStable) max_ok = std::max(max_ok, s.alpha);
    else min_bad = std::min(min_bad, s.alpha);
  }
  CHECK(max_ok == r.alpha_lo);
  CHECK(min_bad == r.alpha_hi);
  CHECK_THROWS_AS(margin(kG, {MultiplierKind::SlopeDynamic, 1}, {400.0, 0.0, {}}), std::invalid_argument);

  const auto again = margin(kG, {MultiplierKind::SlopeDynamic, 1});
  REQUIRE(again.log.size() == r.log.size());
  for (std::size_t i = 0; i < r.log.size(); ++i) {
    CHECK(again.log[i].alpha == r.log[i].alpha);
    CHECK(again.log[i].strictness == r.log[i].strictness);
  }
}

TEST_CASE("class dominance and monotonicity in N (coarse bisection)") {
  MarginOptions o;
  o.tol = 1e-2;
  o.alpha_hi = 20.0;
  double prev_slope = 0.0, prev_relu = 0.0;
  for (int N = 1; N <= 3; ++N) {
    const double s = margin(kG, {MultiplierKind::SlopeDynamic, N}, o).alpha_lo;
    const double r = margin(kG, {MultiplierKind::ReluDynamic, N}, o).alpha_lo;
    CHECK(r >= s - 2e-2 * (1 + s));
    CHECK(s >= prev_slope - 2e-2);
    CHECK(r >= prev_relu - 2e-2);
    prev_slope = s;
    prev_relu = r;
  }
}

TEST_CASE("table is independent of the number of jobs") {
  TableOptions o;
  o.Ns = {1, 2};
  o.methods = {{MultiplierKind::SlopeDynamic, 1}, {MultiplierKind::SlopeStatic, 1}};
  o.margin.tol = 1e-2;
  o.margin.alpha_hi = 10.0;
  const auto one = table2(kG, o);
  o.jobs = 3;
  const auto many = table2(kG, o);
  REQUIRE(one.size() == 4);
  REQUIRE(many.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(one[i].method.label() == many[i].method.label());
    CHECK(one[i].result.alpha_lo == many[i].result.alpha_lo);
  }
  CHECK(one[0].method.kind == MultiplierKind::SlopeDynamic);
  CHECK(one[1].method.N == 2);
  std::ostringstream os;
  write_table_csv(one, os);
  CHECK(os.str().rfind("method,N,margin,iterations,cap_reached\nslope-dynamic,1,", 0) == 0);
}
