#include "reluiqc/sdp.hpp"

#include "reluiqc/interior_point.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <ostream>
#include <stdexcept>

namespace reluiqc {

using ipm::Real;
using ipm::RMatrix;
using ipm::RVector;

namespace {

double lambda_max(const Matrix& S) {
  if (S.rows() == 0) return -std::numeric_limits<double>::infinity();
  return Eigen::SelfAdjointEigenSolver<Matrix>(S, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
}

double lambda_min(const Matrix& S) {
  if (S.rows() == 0) return std::numeric_limits<double>::infinity();
  return Eigen::SelfAdjointEigenSolver<Matrix>(S, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

double spectral_norm(const Matrix& S) {
  if (S.size() == 0) return 0.0;
  return Eigen::JacobiSVD<Matrix>(S).singularValues()(0);
}

bool symmetric(const Matrix& S) {
  return S.rows() == S.cols() && (S - S.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + S.cwiseAbs().maxCoeff());
}

RMatrix widen(const Matrix& m) { return m.cast<Real>(); }

// Block-diagonal standard form plus the bookkeeping to map y back to
// the problem's variables.
struct Flattened {
  ipm::StandardForm sf;
  Eigen::Index n_scalars = 0;
  std::vector<Eigen::Index> psd_offset;
  Eigen::Index n_y = 0;
  // Equalities E y = e, kept aside for elimination or dumping.
  RMatrix E;
  RVector e;
};

Eigen::Index entry_index(const Flattened& f, Eigen::Index var, Eigen::Index i, Eigen::Index j) {
  if (i > j) std::swap(i, j);
  return f.psd_offset[static_cast<std::size_t>(var)] + j * (j + 1) / 2 + i;
}

// Coefficient of the (i, j) entry variable inside F' P F.
RMatrix congruence_coeff(const RMatrix& F, Eigen::Index i, Eigen::Index j) {
  RMatrix out = F.row(i).transpose() * F.row(j);
  if (i != j) out += F.row(j).transpose() * F.row(i);
  return out;
}

void push_block(Flattened& f, RMatrix C, std::map<Eigen::Index, RMatrix> terms) {
  std::vector<std::pair<Eigen::Index, RMatrix>> list;
  for (auto& [i, A] : terms) {
    if (!A.isZero(0)) list.emplace_back(i, std::move(A));
  }
  f.sf.C.push_back(std::move(C));
  f.sf.A.push_back(std::move(list));
}

Flattened flatten(const SdpProblem& p) {
  p.validate();
  Flattened f;
  f.n_scalars = static_cast<Eigen::Index>(p.scalar_vars.size());
  Eigen::Index off = f.n_scalars;
  for (const auto& v : p.psd_vars) {
    f.psd_offset.push_back(off);
    off += v.size * (v.size + 1) / 2;
  }
  f.n_y = off;

  f.sf.b = RVector::Zero(f.n_y);
  if (p.objective) f.sf.b.head(f.n_scalars) = p.objective->cast<Real>();

  for (const auto& expr : p.lmi_constraints) {
    const auto n = expr.constant.rows();
    std::map<Eigen::Index, RMatrix> terms;
    auto acc = [&](Eigen::Index var, const RMatrix& m) {
      auto it = terms.find(var);
      if (it == terms.end()) terms.emplace(var, m);
      else it->second += m;
    };
    for (const auto& t : expr.scalar_terms) acc(t.var, widen(t.coeff));
    for (const auto& t : expr.psd_terms) {
      const RMatrix F = widen(t.F);
      const auto sz = p.psd_vars[static_cast<std::size_t>(t.var)].size;
      for (Eigen::Index j = 0; j < sz; ++j) {
        for (Eigen::Index i = 0; i <= j; ++i) {
          acc(entry_index(f, t.var, i, j), static_cast<Real>(t.sign) * congruence_coeff(F, i, j));
        }
      }
    }
    if (n > 0) push_block(f, -widen(expr.constant), std::move(terms));
  }

  for (std::size_t k = 0; k < p.psd_vars.size(); ++k) {
    const auto sz = p.psd_vars[k].size;
    if (sz == 0) continue;
    std::map<Eigen::Index, RMatrix> terms;
    for (Eigen::Index j = 0; j < sz; ++j) {
      for (Eigen::Index i = 0; i <= j; ++i) {
        RMatrix S = RMatrix::Zero(sz, sz);
        S(i, j) = -1;
        S(j, i) = -1;
        terms.emplace(entry_index(f, static_cast<Eigen::Index>(k), i, j), S);
      }
    }
    push_block(f, RMatrix::Zero(sz, sz), std::move(terms));
  }

  std::vector<std::pair<RVector, Real>> equalities;
  for (const auto& c : p.linear_constraints) {
    RVector a = RVector::Zero(f.n_y);
    for (const auto& [i, v] : c.scalar_terms) a(i) += v;
    for (const auto& [k, v] : c.trace_terms) {
      const auto sz = p.psd_vars[static_cast<std::size_t>(k)].size;
      for (Eigen::Index i = 0; i < sz; ++i) a(entry_index(f, k, i, i)) += v;
    }
    if (c.sense == LinearConstraint::Sense::Equal) {
      equalities.emplace_back(a, -static_cast<Real>(c.constant));
      continue;
    }
    std::map<Eigen::Index, RMatrix> terms;
    for (Eigen::Index i = 0; i < f.n_y; ++i) {
      if (a(i) != 0) terms.emplace(i, RMatrix::Constant(1, 1, -a(i)));
    }
    push_block(f, RMatrix::Constant(1, 1, c.constant), std::move(terms));
  }

  f.E = RMatrix::Zero(static_cast<Eigen::Index>(equalities.size()), f.n_y);
  f.e = RVector::Zero(static_cast<Eigen::Index>(equalities.size()));
  for (std::size_t r = 0; r < equalities.size(); ++r) {
    f.E.row(static_cast<Eigen::Index>(r)) = equalities[r].first.transpose();
    f.e(static_cast<Eigen::Index>(r)) = equalities[r].second;
  }
  return f;
}

SdpValues unflatten(const SdpProblem& p, const Flattened& f, const RVector& y) {
  SdpValues v;
  v.scalars = y.head(f.n_scalars).cast<double>();
  for (std::size_t k = 0; k < p.psd_vars.size(); ++k) {
    const auto sz = p.psd_vars[k].size;
    Matrix P(sz, sz);
    for (Eigen::Index j = 0; j < sz; ++j) {
      for (Eigen::Index i = 0; i <= j; ++i) {
        P(i, j) = P(j, i) = static_cast<double>(y(entry_index(f, static_cast<Eigen::Index>(k), i, j)));
      }
    }
    v.psd.push_back(std::move(P));
  }
  return v;
}

bool verbose_from_env() {
  const char* v = std::getenv("RELUIQC_SOLVER_VERBOSE");
  return v != nullptr && *v != '\0' && std::string(v) != "0";
}

}  // namespace

Eigen::Index SdpProblem::add_scalar(std::string name) {
  scalar_vars.push_back(std::move(name));
  return static_cast<Eigen::Index>(scalar_vars.size()) - 1;
}

Eigen::Index SdpProblem::add_psd(std::string name, Eigen::Index size) {
  if (size < 0) throw std::invalid_argument("add_psd: negative size");
  psd_vars.push_back({std::move(name), size});
  return static_cast<Eigen::Index>(psd_vars.size()) - 1;
}

void SdpProblem::validate() const {
  const auto ns = static_cast<Eigen::Index>(scalar_vars.size());
  const auto np = static_cast<Eigen::Index>(psd_vars.size());
  for (std::size_t e = 0; e < lmi_constraints.size(); ++e) {
    const auto& expr = lmi_constraints[e];
    const auto n = expr.constant.rows();
    const std::string where = "LMI constraint " + std::to_string(e);
    if (!symmetric(expr.constant)) throw std::invalid_argument(where + ": constant term not symmetric");
    for (const auto& t : expr.scalar_terms) {
      if (t.var < 0 || t.var >= ns) throw std::invalid_argument(where + ": unknown scalar variable");
      if (t.coeff.rows() != n || !symmetric(t.coeff)) {
        throw std::invalid_argument(where + ": coefficient of " + scalar_vars[static_cast<std::size_t>(t.var)] +
                                    " not symmetric or wrong size");
      }
    }
    for (const auto& t : expr.psd_terms) {
      if (t.var < 0 || t.var >= np) throw std::invalid_argument(where + ": unknown matrix variable");
      if (t.F.rows() != psd_vars[static_cast<std::size_t>(t.var)].size || t.F.cols() != n) {
        throw std::invalid_argument(where + ": congruence factor has wrong shape");
      }
    }
  }
  for (const auto& c : linear_constraints) {
    for (const auto& [i, a] : c.scalar_terms) {
      if (i < 0 || i >= ns) throw std::invalid_argument("linear constraint: unknown scalar variable");
    }
    for (const auto& [k, a] : c.trace_terms) {
      if (k < 0 || k >= np) throw std::invalid_argument("linear constraint: unknown matrix variable");
    }
  }
  if (objective && objective->size() != ns) throw std::invalid_argument("objective has wrong length");
}

Matrix evaluate(const AffineMatrix& expr, const SdpValues& values) {
  Matrix out = expr.constant;
  for (const auto& t : expr.scalar_terms) out += values.scalars(t.var) * t.coeff;
  for (const auto& t : expr.psd_terms) {
    out += t.sign * t.F.transpose() * values.psd[static_cast<std::size_t>(t.var)] * t.F;
  }
  return (out + out.transpose()) / 2;
}

double evaluate(const LinearConstraint& c, const SdpValues& values) {
  double s = c.constant;
  for (const auto& [i, a] : c.scalar_terms) s += a * values.scalars(i);
  for (const auto& [k, a] : c.trace_terms) s += a * values.psd[static_cast<std::size_t>(k)].trace();
  return s;
}

std::string to_string(SdpStatus s) {
  switch (s) {
    case SdpStatus::Optimal: return "optimal";
    case SdpStatus::Infeasible: return "infeasible";
    case SdpStatus::NumericalTrouble: return "numerical-trouble";
  }
  return "unknown";
}

SdpSolution InteriorPointBackend::solve_standard_form(const SdpProblem& problem) const {
  Flattened f = flatten(problem);
  SdpSolution sol;

  // Equalities: y = y0 + K z.
  RVector y0 = RVector::Zero(f.n_y);
  RMatrix K = RMatrix::Identity(f.n_y, f.n_y);
  if (f.E.rows() > 0) {
    Eigen::FullPivLU<RMatrix> lu(f.E);
    y0 = f.E.completeOrthogonalDecomposition().solve(f.e);
    if ((f.E * y0 - f.e).norm() > 1e-12L * (1 + f.e.norm())) {
      sol.status = SdpStatus::Infeasible;
      sol.message = "inconsistent equality constraints";
      return sol;
    }
    K = lu.rank() == f.n_y ? RMatrix(f.n_y, 0) : RMatrix(lu.kernel());
    ipm::StandardForm reduced;
    reduced.b = K.transpose() * f.sf.b;
    for (std::size_t blk = 0; blk < f.sf.C.size(); ++blk) {
      RMatrix C = f.sf.C[blk];
      std::map<Eigen::Index, RMatrix> terms;
      for (const auto& [i, Ai] : f.sf.A[blk]) {
        C -= y0(i) * Ai;
        for (Eigen::Index k = 0; k < K.cols(); ++k) {
          if (K(i, k) == 0) continue;
          auto it = terms.find(k);
          if (it == terms.end()) terms.emplace(k, K(i, k) * Ai);
          else it->second += K(i, k) * Ai;
        }
      }
      std::vector<std::pair<Eigen::Index, RMatrix>> list;
      for (auto& [k, A] : terms) {
        if (!A.isZero(0)) list.emplace_back(k, std::move(A));
      }
      reduced.C.push_back(std::move(C));
      reduced.A.push_back(std::move(list));
    }
    f.sf = std::move(reduced);
  }

  ipm::Options opt;
  opt.max_iterations = options_.max_iterations;
  opt.tolerance = options_.tolerance;
  opt.verbose = options_.verbose;
  const auto r = ipm::solve(f.sf, opt);

  const RVector y = y0 + K * r.y;
  sol.values = unflatten(problem, f, y);
  sol.objective_value = problem.objective ? problem.objective->dot(sol.values.scalars) : 0.0;
  sol.duality_gap = static_cast<double>(r.relative_gap);
  sol.iterations = r.iterations;
  sol.message = ipm::to_string(r.status) + ": " + r.message;
  switch (r.status) {
    case ipm::Status::Optimal: sol.status = SdpStatus::Optimal; break;
    case ipm::Status::Infeasible: sol.status = SdpStatus::Infeasible; break;
    case ipm::Status::MaxIterations:
    case ipm::Status::Stalled:
      // Accept an unfinished run only if it is already accurate enough to verify.
      sol.status = r.relative_gap <= kGapTrust && r.dual_infeasibility <= kResidualTrust ? SdpStatus::Optimal
                                                                                         : SdpStatus::NumericalTrouble;
      break;
    case ipm::Status::Unbounded:
    case ipm::Status::NumericalTrouble: sol.status = SdpStatus::NumericalTrouble; break;
  }
  return sol;
}

std::shared_ptr<const SolverBackend> default_backend() {
  InteriorPointOptions o;
  o.verbose = verbose_from_env();
  return std::make_shared<InteriorPointBackend>(o);
}

double max_violation(const SdpProblem& problem, const SdpValues& values) {
  double worst = 0.0;
  for (const auto& expr : problem.lmi_constraints) {
    const Matrix S = evaluate(expr, values);
    worst = std::max(worst, lambda_max(S) / (1.0 + spectral_norm(S)));
  }
  for (const auto& P : values.psd) worst = std::max(worst, -lambda_min(P) / (1.0 + spectral_norm(P)));
  for (const auto& c : problem.linear_constraints) {
    double scale = 1.0 + std::abs(c.constant);
    for (const auto& [i, a] : c.scalar_terms) scale += std::abs(a * values.scalars(i));
    const double v = evaluate(c, values);
    worst = std::max(worst, (c.sense == LinearConstraint::Sense::Equal ? std::abs(v) : -v) / scale);
  }
  return worst;
}

SdpSolution solve(const SdpProblem& problem, const SolverBackend& backend) {
  SdpSolution sol = backend.solve_standard_form(problem);
  const bool has_point = sol.values.psd.size() == problem.psd_vars.size() &&
                         sol.values.scalars.size() == static_cast<Eigen::Index>(problem.scalar_vars.size());
  if (has_point) sol.primal_residual = max_violation(problem, sol.values);
  if (sol.status != SdpStatus::Optimal) return sol;
  if (sol.primal_residual > kResidualFail) {
    sol.status = SdpStatus::NumericalTrouble;
    sol.message += "; primal residual above failure threshold";
  } else if (sol.primal_residual > kResidualTrust || sol.duality_gap > kGapTrust) {
    sol.status = SdpStatus::NumericalTrouble;
    sol.message += "; verification failed";
  }
  return sol;
}

SdpSolution solve(const SdpProblem& problem) { return solve(problem, *default_backend()); }

void write_sdpa(const SdpProblem& problem, std::ostream& os) {
  const Flattened f = flatten(problem);
  // Equalities become pairs of diagonal rows.
  std::vector<std::size_t> sdp_blocks;
  std::vector<std::size_t> lp_rows;
  for (std::size_t k = 0; k < f.sf.C.size(); ++k) (f.sf.C[k].rows() == 1 ? lp_rows : sdp_blocks).push_back(k);
  const auto n_lp = static_cast<Eigen::Index>(lp_rows.size()) + 2 * f.E.rows();

  os.precision(17);
  os << "\"reluiqc dump: maximize b'y s.t. C - sum y_i A_i >= 0, written as x = y, c = -b, F0 = -C, F_i = -A_i\"\n";
  os << f.n_y << "\n";
  os << sdp_blocks.size() + (n_lp > 0 ? 1 : 0) << "\n";
  for (auto k : sdp_blocks) os << f.sf.C[k].rows() << " ";
  if (n_lp > 0) os << -n_lp;
  os << "\n";
  for (Eigen::Index i = 0; i < f.n_y; ++i) os << static_cast<double>(-f.sf.b(i)) << (i + 1 < f.n_y ? " " : "");
  os << "\n";

  auto emit = [&](Eigen::Index mat, std::size_t blk, Eigen::Index i, Eigen::Index j, Real v) {
    if (v != 0) os << mat << " " << blk << " " << i + 1 << " " << j + 1 << " " << static_cast<double>(v) << "\n";
  };
  for (std::size_t s = 0; s < sdp_blocks.size(); ++s) {
    const auto k = sdp_blocks[s];
    const auto blk = s + 1;
    const auto& C = f.sf.C[k];
    for (Eigen::Index j = 0; j < C.cols(); ++j) {
      for (Eigen::Index i = 0; i <= j; ++i) emit(0, blk, i, j, -C(i, j));
    }
    for (const auto& [var, A] : f.sf.A[k]) {
      for (Eigen::Index j = 0; j < A.cols(); ++j) {
        for (Eigen::Index i = 0; i <= j; ++i) emit(var + 1, blk, i, j, -A(i, j));
      }
    }
  }
  if (n_lp > 0) {
    const auto blk = sdp_blocks.size() + 1;
    Eigen::Index row = 0;
    for (auto k : lp_rows) {
      emit(0, blk, row, row, -f.sf.C[k](0, 0));
      for (const auto& [var, A] : f.sf.A[k]) emit(var + 1, blk, row, row, -A(0, 0));
      ++row;
    }
    // E y = e  as  E y - e >= 0  and  e - E y >= 0.
    for (Eigen::Index r = 0; r < f.E.rows(); ++r) {
      for (int s = 1; s >= -1; s -= 2) {
        emit(0, blk, row, row, s * f.e(r));
        for (Eigen::Index var = 0; var < f.n_y; ++var) emit(var + 1, blk, row, row, s * f.E(r, var));
        ++row;
      }
    }
  }
}

// ---------------------------------------------------------------------------

namespace {

struct LmiFactors {
  Matrix F1;  // [A B]
  Matrix F0;  // [I 0]
  Matrix CD;  // [C D]
};

LmiFactors factors(const AugmentedSystem& aug) {
  const auto& s = aug.sys;
  const auto n = s.n_states();
  const auto m = s.n_inputs();
  LmiFactors f;
  f.F1.resize(n, n + m);
  f.F1 << s.A(), s.B();
  f.F0 = Matrix::Zero(n, n + m);
  f.F0.leftCols(n).setIdentity();
  f.CD.resize(s.n_outputs(), n + m);
  f.CD << s.C(), s.D();
  return f;
}

}  // namespace

std::string to_string(Normalization n) { return n == Normalization::Simplex ? "simplex" : "box"; }

Normalization parse_normalization(const std::string& name) {
  if (name == "simplex") return Normalization::Simplex;
  if (name == "box") return Normalization::Box;
  throw std::invalid_argument("unknown normalization '" + name + "' (expected simplex or box)");
}

LmiProblem assemble_lmi(const AugmentedSystem& aug, const MultiplierSpec& spec, const LmiOptions& options) {
  if (spec.N != aug.horizon) {
    throw std::invalid_argument("assemble_lmi: multiplier horizon " + std::to_string(spec.N) +
                                " does not match system horizon " + std::to_string(aug.horizon));
  }
  if (aug.sys.n_outputs() != spec.size()) {
    throw std::invalid_argument("assemble_lmi: system has " + std::to_string(aug.sys.n_outputs()) +
                                " outputs, multiplier expects " + std::to_string(spec.size()));
  }
  const auto fac = factors(aug);
  const auto n = aug.sys.n_states();
  const auto size = fac.F1.cols();

  LmiProblem out;
  auto& p = out.problem;
  out.t = p.add_scalar("t");
  for (Eigen::Index j = 0; j < spec.n_params(); ++j) out.theta.push_back(p.add_scalar(spec.names[static_cast<std::size_t>(j)]));
  if (options.require_P_psd) {
    out.P.push_back(p.add_psd("P", n));
  } else {
    out.P.push_back(p.add_psd("P+", n));
    out.P.push_back(p.add_psd("P-", n));
  }

  AffineMatrix lmi;
  lmi.constant = Matrix::Zero(size, size);
  lmi.scalar_terms.push_back({out.t, Matrix::Identity(size, size)});
  for (Eigen::Index j = 0; j < spec.n_params(); ++j) {
    Matrix Bj = fac.CD.transpose() * spec.basis[static_cast<std::size_t>(j)] * fac.CD;
    lmi.scalar_terms.push_back({out.theta[static_cast<std::size_t>(j)], (Bj + Bj.transpose()) / 2});
  }
  for (std::size_t k = 0; k < out.P.size(); ++k) {
    const double s = k == 0 ? 1.0 : -1.0;
    lmi.psd_terms.push_back({out.P[k], fac.F1, s});
    lmi.psd_terms.push_back({out.P[k], fac.F0, -s});
  }
  p.lmi_constraints.push_back(std::move(lmi));

  for (const auto& c : spec.constraints) {
    LinearConstraint lc;
    for (Eigen::Index j = 0; j < c.coeffs.size(); ++j) {
      if (c.coeffs(j) != 0.0) lc.scalar_terms.emplace_back(out.theta[static_cast<std::size_t>(j)], c.coeffs(j));
    }
    p.linear_constraints.push_back(std::move(lc));
  }

  LinearConstraint norm;
  norm.constant = options.scale;
  for (auto k : out.P) norm.trace_terms.emplace_back(k, -1.0);
  if (options.normalization == Normalization::Simplex) {
    norm.sense = LinearConstraint::Sense::Equal;
    for (std::size_t j = 0; j < out.theta.size(); ++j) {
      const auto u = p.add_scalar("|" + spec.names[j] + "|");
      for (double s : {1.0, -1.0}) {
        LinearConstraint lc;
        lc.scalar_terms = {{u, 1.0}, {out.theta[j], s}};
        p.linear_constraints.push_back(std::move(lc));
      }
      norm.scalar_terms.emplace_back(u, -1.0);
    }
  } else {
    if (n > 0) norm.sense = LinearConstraint::Sense::Equal;
    for (auto j : out.theta) {
      for (double s : {1.0, -1.0}) {
        LinearConstraint lc;
        lc.constant = options.scale;
        lc.scalar_terms.emplace_back(j, -s);
        p.linear_constraints.push_back(std::move(lc));
      }
    }
  }
  p.linear_constraints.push_back(std::move(norm));

  Vector obj = Vector::Zero(static_cast<Eigen::Index>(p.scalar_vars.size()));
  obj(out.t) = 1.0;
  p.objective = obj;
  return out;
}

Matrix lmi_matrix(const AugmentedSystem& aug, const Matrix& P, const Matrix& M) {
  const auto fac = factors(aug);
  Matrix L = fac.F1.transpose() * P * fac.F1 - fac.F0.transpose() * P * fac.F0 + fac.CD.transpose() * M * fac.CD;
  return (L + L.transpose()) / 2;
}

double lmi_strictness(const AugmentedSystem& aug, const Matrix& P, const Matrix& M) {
  const auto fac = factors(aug);
  const RMatrix F1 = widen(fac.F1);
  const RMatrix F0 = widen(fac.F0);
  const RMatrix CD = widen(fac.CD);
  const RMatrix Pw = widen(P);
  RMatrix L = F1.transpose() * Pw * F1 - F0.transpose() * Pw * F0 + CD.transpose() * widen(M) * CD;
  L = (L + L.transpose()) / 2;
  if (L.rows() == 0) return std::numeric_limits<double>::infinity();
  const Real lmax = Eigen::SelfAdjointEigenSolver<RMatrix>(L, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
  return static_cast<double>(-lmax);
}

double strictness_threshold(const AugmentedSystem& aug, const Matrix& M) {
  const Matrix& D = aug.sys.D();
  return 1e-9 * (1.0 + spectral_norm(D.transpose() * M * D));
}

FeasibilityResult solve_lmi(const AugmentedSystem& aug, const MultiplierSpec& spec, const LmiOptions& options,
                            const SolverBackend* backend) {
  const auto lmi = assemble_lmi(aug, spec, options);
  std::shared_ptr<const SolverBackend> fallback;
  if (backend == nullptr) {
    fallback = default_backend();
    backend = fallback.get();
  }
  const auto sol = solve(lmi.problem, *backend);

  FeasibilityResult res;
  res.status = sol.status;
  res.duality_gap = sol.duality_gap;
  res.iterations = sol.iterations;
  res.note = sol.message;
  const auto n = aug.sys.n_states();
  res.P = Matrix::Zero(n, n);
  res.theta = Vector::Zero(spec.n_params());
  if (sol.status != SdpStatus::Optimal) return res;

  res.P = sol.values.psd[0];
  if (lmi.P.size() > 1) res.P -= sol.values.psd[1];
  for (std::size_t j = 0; j < lmi.theta.size(); ++j) res.theta(static_cast<Eigen::Index>(j)) = sol.values.scalars(lmi.theta[j]);
  res.solver_t = sol.values.scalars(lmi.t);

  const auto fac = factors(aug);
  double strict = lmi_strictness(aug, res.P, spec.M(res.theta));

  // Nudge theta into the interior of its cone at a cost of at most 5% of
  // the strictness.
  if (strict > 0.0 && spec.n_params() > 0) {
    const Matrix dir = fac.CD.transpose() * spec.M(spec.interior) * fac.CD;
    const double sens = spectral_norm(dir);
    if (sens > 0.0) {
      const double delta = 0.05 * strict / sens;
      res.theta += delta * spec.interior;
    }
  }
  if (options.require_P_psd && n > 0) {
    const double lmin = lambda_min(res.P);
    if (lmin < 0.0) res.P += (-lmin) * Matrix::Identity(n, n);
  }

  const Matrix M = spec.M(res.theta);
  res.strictness = lmi_strictness(aug, res.P, M);
  res.t_min = strictness_threshold(aug, M);
  const bool p_ok = !options.require_P_psd || n == 0 || lambda_min(res.P) >= -1e-8;
  res.feasible = res.strictness >= res.t_min && p_ok && spec.admissible(res.theta);
  if (!res.feasible) {
    res.note += res.strictness < res.t_min ? "; strictness below threshold" : "; witness failed re-check";
  }
  return res;
}

}  // namespace reluiqc
