#pragma once

// Semidefinite programs in a small modelling form, and the stability LMI
//
//   LMI(P, M) = [A B]' P [A B] - diag(P, 0) + [C D]' M [C D]
//
// posed as: maximize t subject to LMI(P, M(theta)) + t I <= 0, P >= 0,
// multiplier constraints on theta and a normalization of (P, theta).

#include "reluiqc/augmentation.hpp"
#include "reluiqc/multipliers.hpp"

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace reluiqc {

struct MatrixVariable {
  std::string name;
  Eigen::Index size = 0;
};

struct ScalarTerm {
  Eigen::Index var = 0;
  Matrix coeff;
};

/// sign * F' P F for the matrix variable P.
struct CongruenceTerm {
  Eigen::Index var = 0;
  Matrix F;
  double sign = 1.0;
};

/// constant + sum scalar_terms + sum psd_terms, required <= 0.
struct AffineMatrix {
  Matrix constant;
  std::vector<ScalarTerm> scalar_terms;
  std::vector<CongruenceTerm> psd_terms;
};

/// constant + sum a_i x_i + sum c_k trace(P_k)  (>= 0 or == 0).
struct LinearConstraint {
  enum class Sense { GreaterEqual, Equal };
  double constant = 0.0;
  std::vector<std::pair<Eigen::Index, double>> scalar_terms;
  std::vector<std::pair<Eigen::Index, double>> trace_terms;
  Sense sense = Sense::GreaterEqual;
};

struct SdpProblem {
  std::vector<MatrixVariable> psd_vars;   ///< symmetric, constrained >= 0
  std::vector<std::string> scalar_vars;
  std::vector<AffineMatrix> lmi_constraints;
  std::vector<LinearConstraint> linear_constraints;
  std::optional<Vector> objective;  ///< over scalar_vars, maximized

  Eigen::Index add_scalar(std::string name);
  Eigen::Index add_psd(std::string name, Eigen::Index size);
  /// Throws std::invalid_argument on asymmetric or inconsistent data.
  void validate() const;
};

struct SdpValues {
  Vector scalars;
  std::vector<Matrix> psd;
};

Matrix evaluate(const AffineMatrix& expr, const SdpValues& values);
double evaluate(const LinearConstraint& c, const SdpValues& values);

enum class SdpStatus { Optimal, Infeasible, NumericalTrouble };
std::string to_string(SdpStatus s);

struct SdpSolution {
  SdpStatus status = SdpStatus::NumericalTrouble;
  SdpValues values;
  double objective_value = 0.0;
  double duality_gap = 0.0;       ///< relative, as reported by the backend
  double primal_residual = 0.0;   ///< worst relative constraint violation at the returned point
  int iterations = 0;
  std::string message;
};

class SolverBackend {
 public:
  virtual ~SolverBackend() = default;
  virtual std::string name() const = 0;
  virtual SdpSolution solve_standard_form(const SdpProblem& problem) const = 0;
};

struct InteriorPointOptions {
  int max_iterations = 120;
  double tolerance = 1e-12;
  bool verbose = false;
};

/// Embedded primal-dual interior-point method (extended precision).
class InteriorPointBackend final : public SolverBackend {
 public:
  explicit InteriorPointBackend(InteriorPointOptions options = {}) : options_(options) {}
  std::string name() const override { return "interior-point"; }
  SdpSolution solve_standard_form(const SdpProblem& problem) const override;

 private:
  InteriorPointOptions options_;
};

/// Default backend; verbosity follows RELUIQC_SOLVER_VERBOSE.
std::shared_ptr<const SolverBackend> default_backend();

inline constexpr double kResidualTrust = 1e-7;
inline constexpr double kResidualFail = 1e-5;
inline constexpr double kGapTrust = 1e-7;

/// Runs the backend, then re-checks every constraint in double precision:
/// Optimal is kept only if each LMI has lambda_max <= 1e-7 (1 + ||expr||),
/// every matrix variable has lambda_min >= -1e-7 (1 + ||P||), and the
/// reported gap is <= 1e-7. A residual above 1e-5 is NumericalTrouble.
SdpSolution solve(const SdpProblem& problem, const SolverBackend& backend);
SdpSolution solve(const SdpProblem& problem);

/// Worst relative violation of all constraints at `values` (0 if satisfied).
double max_violation(const SdpProblem& problem, const SdpValues& values);

/// SDPA sparse format (.dat-s) of the standard form, see docs/sdpa-dump.md.
void write_sdpa(const SdpProblem& problem, std::ostream& os);

// ---------------------------------------------------------------------------
// Stability LMI

/// How the homogeneous LMI is normalized. Every certificate can be
/// rescaled to satisfy either choice except where noted.
enum class Normalization {
  Simplex,  ///< tr(P) + sum |theta_j| == scale
  Box       ///< tr(P) == scale, |theta_j| <= scale (can cut off certificates)
};

std::string to_string(Normalization n);
Normalization parse_normalization(const std::string& name);

struct LmiOptions {
  bool require_P_psd = true;  ///< false: P = P+ - P- with both parts >= 0
  Normalization normalization = Normalization::Simplex;
  double scale = 1.0;
};

struct LmiProblem {
  SdpProblem problem;
  Eigen::Index t = 0;
  std::vector<Eigen::Index> theta;
  std::vector<Eigen::Index> P;  ///< one or two matrix variables (P, or P+ and P-)
};

/// pre: spec.N == aug.horizon. Throws std::invalid_argument on mismatch.
LmiProblem assemble_lmi(const AugmentedSystem& aug, const MultiplierSpec& spec, const LmiOptions& options = {});

/// LMI(P, M) at the given point.
Matrix lmi_matrix(const AugmentedSystem& aug, const Matrix& P, const Matrix& M);
/// -lambda_max(LMI(P, M)), evaluated in extended precision.
double lmi_strictness(const AugmentedSystem& aug, const Matrix& P, const Matrix& M);

/// 1e-9 (1 + ||D' M D||_2)
double strictness_threshold(const AugmentedSystem& aug, const Matrix& M);

struct FeasibilityResult {
  bool feasible = false;
  Matrix P;
  Vector theta;
  double strictness = 0.0;   ///< -lambda_max(LMI(P, M(theta))) after post-processing
  double t_min = 0.0;
  double solver_t = 0.0;     ///< optimum reported by the SDP
  SdpStatus status = SdpStatus::NumericalTrouble;
  double duality_gap = 0.0;
  int iterations = 0;
  std::string note;
};

/// Solves the LMI problem and post-processes the optimum: theta is nudged
/// towards the class interior so every multiplier constraint holds with
/// margin, P is shifted to be positive semidefinite, and strictness is
/// recomputed from scratch. feasible iff strictness >= t_min, P >= -1e-8 I
/// and theta admissible.
FeasibilityResult solve_lmi(const AugmentedSystem& aug, const MultiplierSpec& spec,
                            const LmiOptions& options = {}, const SolverBackend* backend = nullptr);

}  // namespace reluiqc
