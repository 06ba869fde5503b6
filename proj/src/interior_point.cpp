#include "reluiqc/interior_point.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace reluiqc::ipm {

namespace {

using Blocks = std::vector<RMatrix>;

Real inner(const RMatrix& a, const RMatrix& b) { return a.cwiseProduct(b).sum(); }

Real inner(const Blocks& a, const Blocks& b) {
  Real s = 0;
  for (std::size_t k = 0; k < a.size(); ++k) s += inner(a[k], b[k]);
  return s;
}

Real norm(const Blocks& a) {
  Real s = 0;
  for (const auto& m : a) s += m.squaredNorm();
  return std::sqrt(s);
}

RMatrix sym(const RMatrix& m) { return (m + m.transpose()) / 2; }

// A(X)_i = <A_i, X>
RVector apply_A(const StandardForm& p, const Blocks& X) {
  RVector out = RVector::Zero(p.n_vars());
  for (std::size_t k = 0; k < p.A.size(); ++k) {
    for (const auto& [i, Ai] : p.A[k]) out(i) += inner(Ai, X[k]);
  }
  return out;
}

// A'y = sum_i y_i A_i
Blocks apply_At(const StandardForm& p, const RVector& y) {
  Blocks out;
  out.reserve(p.C.size());
  for (std::size_t k = 0; k < p.C.size(); ++k) {
    RMatrix acc = RMatrix::Zero(p.C[k].rows(), p.C[k].cols());
    for (const auto& [i, Ai] : p.A[k]) acc += y(i) * Ai;
    out.push_back(std::move(acc));
  }
  return out;
}

bool inverse_spd(const RMatrix& M, RMatrix& inv) {
  Eigen::LLT<RMatrix> llt(M);
  if (llt.info() != Eigen::Success) return false;
  inv = sym(llt.solve(RMatrix::Identity(M.rows(), M.cols())));
  return true;
}

struct Direction {
  RVector dy;
  Blocks dX;
  Blocks dZ;
};

}  // namespace

std::string to_string(Status s) {
  switch (s) {
    case Status::Optimal: return "optimal";
    case Status::Infeasible: return "infeasible";
    case Status::Unbounded: return "unbounded";
    case Status::MaxIterations: return "max-iterations";
    case Status::Stalled: return "stalled";
    case Status::NumericalTrouble: return "numerical-trouble";
  }
  return "unknown";
}

Real max_step(const RMatrix& X, const RMatrix& dX) {
  if (X.rows() == 1) {
    return dX(0, 0) < 0 ? -X(0, 0) / dX(0, 0) : std::numeric_limits<Real>::infinity();
  }
  Eigen::LLT<RMatrix> llt(X);
  if (llt.info() != Eigen::Success) return 0;
  const RMatrix L = llt.matrixL();
  const RMatrix Linv = L.template triangularView<Eigen::Lower>().solve(RMatrix::Identity(X.rows(), X.cols()));
  const RMatrix S = sym(Linv * dX * Linv.transpose());
  const Real lmin = Eigen::SelfAdjointEigenSolver<RMatrix>(S, Eigen::EigenvaluesOnly).eigenvalues()(0);
  return lmin < 0 ? -1 / lmin : std::numeric_limits<Real>::infinity();
}

Result solve(const StandardForm& p, const Options& opt) {
  Result res;
  const auto m = p.n_vars();
  const auto nb = p.C.size();
  Eigen::Index n_total = 0;
  for (const auto& c : p.C) n_total += c.rows();

  res.y = RVector::Zero(m);
  if (n_total == 0) {
    res.status = p.b.isZero(0) ? Status::Optimal : Status::Unbounded;
    res.message = "no conic constraints";
    return res;
  }

  // Starting point scaled to the data.
  const Real n_root = std::sqrt(static_cast<Real>(n_total));
  RVector normA = RVector::Zero(m);
  for (const auto& blk : p.A) {
    for (const auto& [i, Ai] : blk) normA(i) += Ai.squaredNorm();
  }
  normA = normA.cwiseSqrt();
  Real xi = std::max<Real>(10, n_root);
  Real eta = std::max<Real>(10, n_root);
  for (Eigen::Index i = 0; i < m; ++i) {
    xi = std::max(xi, (1 + std::abs(p.b(i))) / (1 + normA(i)));
    eta = std::max(eta, normA(i));
  }
  eta = std::max(eta, norm(p.C));

  Blocks X(nb), Z(nb);
  for (std::size_t k = 0; k < nb; ++k) {
    X[k] = xi * RMatrix::Identity(p.C[k].rows(), p.C[k].cols());
    Z[k] = eta * RMatrix::Identity(p.C[k].rows(), p.C[k].cols());
  }
  RVector y = RVector::Zero(m);

  const Real norm_b = p.b.norm();
  const Real norm_C = norm(p.C);

  auto finish = [&](Status s, std::string msg) {
    res.status = s;
    res.message = std::move(msg);
    res.y = y;
    res.X = X;
    res.Z = Z;
    return res;
  };

  // Best iterate so far, by the worst of gap and residuals.
  Result best;
  Real best_err = std::numeric_limits<Real>::infinity();
  auto breakdown = [&](std::string msg) {
    if (best_err <= opt.fallback_tolerance) {
      best.status = Status::Stalled;
      best.message = msg + "; returning best iterate";
      return best;
    }
    return finish(Status::NumericalTrouble, std::move(msg));
  };

  for (int iter = 0;; ++iter) {
    const RVector AX = apply_A(p, X);
    const RVector rp = p.b - AX;
    const Blocks Aty = apply_At(p, y);
    Blocks Rd(nb);
    for (std::size_t k = 0; k < nb; ++k) Rd[k] = p.C[k] - Z[k] - Aty[k];

    const Real pobj = inner(p.C, X);
    const Real dobj = p.b.dot(y);
    const Real xz = inner(X, Z);
    const Real mu = xz / static_cast<Real>(n_total);
    const Real scale = 1 + std::abs(pobj) + std::abs(dobj);
    res.primal_objective = pobj;
    res.dual_objective = dobj;
    res.relative_gap = std::max(std::abs(pobj - dobj), xz) / scale;
    res.primal_infeasibility = rp.norm() / (1 + norm_b);
    res.dual_infeasibility = norm(Rd) / (1 + norm_C);
    res.iterations = iter;

    if (opt.verbose) {
      std::fprintf(stderr, "ipm %3d  pobj % .12Le  dobj % .12Le  gap %.2Le  pinf %.2Le  dinf %.2Le\n", iter, pobj,
                   dobj, res.relative_gap, res.primal_infeasibility, res.dual_infeasibility);
    }

    const Real err = std::max({res.relative_gap, res.primal_infeasibility, res.dual_infeasibility});
    if (err < best_err) {
      best_err = err;
      best = res;
      best.y = y;
      best.X = X;
      best.Z = Z;
    }

    if (res.primal_infeasibility <= opt.tolerance && res.dual_infeasibility <= opt.tolerance &&
        res.relative_gap <= opt.tolerance) {
      return finish(Status::Optimal, "converged");
    }
    // X with A(X) ~ 0 and <C, X> < 0 proves the y-constraints infeasible.
    if (iter > 0 && pobj < 0 && AX.norm() / (-pobj) <= opt.infeasibility_tol * (1 + normA.maxCoeff())) {
      return finish(Status::Infeasible, "infeasibility certificate");
    }
    // A direction with b'y > 0 and -A'y >= 0 proves unboundedness.
    if (iter > 0 && dobj > 0) {
      Blocks dir(nb);
      for (std::size_t k = 0; k < nb; ++k) dir[k] = Aty[k] + Z[k] - p.C[k];
      if (norm(Aty) > 0 && (norm(dir) + norm_C) / dobj <= opt.infeasibility_tol) {
        return finish(Status::Unbounded, "unboundedness certificate");
      }
    }
    if (iter >= opt.max_iterations) {
      if (best_err < err) return breakdown("iteration limit reached");
      return finish(Status::MaxIterations, "iteration limit reached");
    }

    Blocks Zinv(nb);
    for (std::size_t k = 0; k < nb; ++k) {
      if (!inverse_spd(Z[k], Zinv[k])) return breakdown("slack lost definiteness");
    }

    // Schur complement H_ij = <A_i, X A_j Z^-1>.
    RMatrix H = RMatrix::Zero(m, m);
    for (std::size_t k = 0; k < nb; ++k) {
      for (const auto& [j, Aj] : p.A[k]) {
        const RMatrix G = X[k] * Aj * Zinv[k];
        for (const auto& [i, Ai] : p.A[k]) H(i, j) += inner(Ai, G);
      }
    }
    H = sym(H);
    Eigen::LDLT<RMatrix> ldlt(H);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
      // Degenerate optimum: retry with a tiny diagonal shift.
      const Real shift = std::numeric_limits<Real>::epsilon() * (1 + H.diagonal().cwiseAbs().maxCoeff());
      ldlt.compute(H + shift * RMatrix::Identity(m, m));
      if (ldlt.info() != Eigen::Success) return breakdown("Schur complement factorization failed");
    }

    // Terms shared by predictor and corrector.
    Blocks XRdZi(nb);
    for (std::size_t k = 0; k < nb; ++k) XRdZi[k] = X[k] * Rd[k] * Zinv[k];
    const RVector A_XRdZi = apply_A(p, XRdZi);
    const RVector A_Zinv = apply_A(p, Zinv);

    auto direction = [&](Real sigma_mu, const Blocks* corr) {
      Direction d;
      RVector rhs = p.b - sigma_mu * A_Zinv + A_XRdZi;
      if (corr) rhs += apply_A(p, *corr);
      d.dy = ldlt.solve(rhs);
      const Blocks Atdy = apply_At(p, d.dy);
      d.dZ.resize(nb);
      d.dX.resize(nb);
      for (std::size_t k = 0; k < nb; ++k) {
        d.dZ[k] = Rd[k] - Atdy[k];
        RMatrix dX = sigma_mu * Zinv[k] - X[k] - X[k] * d.dZ[k] * Zinv[k];
        if (corr) dX -= (*corr)[k];
        d.dX[k] = sym(dX);
      }
      return d;
    };

    auto steps = [&](const Direction& d, Real fraction) {
      Real sp = std::numeric_limits<Real>::infinity();
      Real sd = std::numeric_limits<Real>::infinity();
      for (std::size_t k = 0; k < nb; ++k) {
        sp = std::min(sp, max_step(X[k], d.dX[k]));
        sd = std::min(sd, max_step(Z[k], d.dZ[k]));
      }
      return std::pair<Real, Real>{std::min<Real>(1, fraction * sp), std::min<Real>(1, fraction * sd)};
    };

    const Direction pred = direction(0, nullptr);
    const auto [ap, ad] = steps(pred, 1);
    Real xz_aff = 0;
    for (std::size_t k = 0; k < nb; ++k) xz_aff += inner(X[k] + ap * pred.dX[k], Z[k] + ad * pred.dZ[k]);
    const Real mu_aff = xz_aff / static_cast<Real>(n_total);
    Real sigma = std::pow(std::clamp<Real>(mu_aff / mu, 0, 1), 3);

    Blocks corr(nb);
    for (std::size_t k = 0; k < nb; ++k) corr[k] = pred.dX[k] * pred.dZ[k] * Zinv[k];
    const Direction step = direction(sigma * mu, &corr);
    const auto [sp, sd] = steps(step, opt.step_fraction);
    if (!(sp > 0) || !(sd > 0) || !std::isfinite(static_cast<double>(sp)) ||
        !std::isfinite(static_cast<double>(sd))) {
      return breakdown("zero step length");
    }

    for (std::size_t k = 0; k < nb; ++k) {
      X[k] = sym(X[k] + sp * step.dX[k]);
      Z[k] = sym(Z[k] + sd * step.dZ[k]);
    }
    y += sd * step.dy;
  }
}

}  // namespace reluiqc::ipm
