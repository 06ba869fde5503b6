#pragma once

// Quadratic constraints (static QCs and hard dynamic IQCs) for a scalar
// nonlinearity, written as matrices M acting on
//   r = [v(k), ..., v(k-N), w(k), ..., w(k-N)].
//
// Four classes:
//   SlopeStatic   [0,1] slope-restricted, doubly hyperdominant Q0
//   SlopeDynamic  [0,1] slope-restricted, Zames-Falb taps m_{-N..N}
//   ReluStatic    ReLU, nonnegative symmetric Q1, Q2 and Metzler Q3
//   ReluDynamic   ReLU, arrowhead taps m1_{0..N}, m2_{0..N}, m3_{-N..N}
//
// Every class is a convex cone in its parameters. MultiplierSpec exposes it
// as M(theta) = sum_j theta_j basis_j with homogeneous linear constraints
// c_k . theta >= 0.

#include "reluiqc/lti.hpp"

#include <string>
#include <variant>
#include <vector>

namespace reluiqc {

enum class MultiplierKind { SlopeStatic, SlopeDynamic, ReluStatic, ReluDynamic };

std::string to_string(MultiplierKind kind);
/// Accepts "slope-static", "slope-dynamic", "relu-static", "relu-dynamic".
MultiplierKind parse_multiplier_kind(const std::string& name);

bool is_dynamic(MultiplierKind kind);
bool is_relu(MultiplierKind kind);

/// Structure allowed for Q3 in the static ReLU class.
enum class Q3Structure { Metzler, Diagonal };

bool is_doubly_hyperdominant(const Matrix& Q);
bool is_metzler(const Matrix& Q);

/// Zames-Falb taps. m[i + N] holds m_i for i = -N..N.
struct ZFParams {
  int N = 0;
  std::vector<double> m;

  double at(int i) const { return m[static_cast<std::size_t>(i + N)]; }
};

/// m1[i], m2[i] for i = 0..N; m3[i + N] for i = -N..N.
struct ReluIqcParams {
  int N = 0;
  std::vector<double> m1;
  std::vector<double> m2;
  std::vector<double> m3;

  double m3_at(int i) const { return m3[static_cast<std::size_t>(i + N)]; }
};

struct StaticSlopeParams {
  Matrix Q0;
};

struct StaticReluParams {
  Matrix Q1;
  Matrix Q2;
  Matrix Q3;
};

using MultiplierParams = std::variant<StaticSlopeParams, ZFParams, StaticReluParams, ReluIqcParams>;

bool is_admissible(const ZFParams& p);
bool is_admissible(const ReluIqcParams& p);
bool is_admissible(const StaticSlopeParams& p);
bool is_admissible(const StaticReluParams& p, Q3Structure q3 = Q3Structure::Metzler);

/// Arrowhead matrix with first row (first[0..N]) and first column
/// (first[0], column[1..N]); zeros elsewhere.
Matrix arrowhead(const std::vector<double>& row, const std::vector<double>& column);

/// The following throw std::invalid_argument for inadmissible parameters.
Matrix build_M_slope_dynamic(const ZFParams& p);
Matrix build_M_relu_dynamic(const ReluIqcParams& p);
Matrix build_M_slope_static(const StaticSlopeParams& p);
Matrix build_M_relu_static(const StaticReluParams& p);

/// Dispatches on the variant. Admissibility of static ReLU is checked
/// against the Metzler class.
Matrix build_M(const MultiplierParams& p);

/// m1 = m2 = 0, m3 = -m. The image of every admissible ZF multiplier is an
/// admissible ReLU multiplier with the same M.
ReluIqcParams zf_embed(const ZFParams& p);

/// Banded Toeplitz matrices of the summation identity, size n x n:
/// entry (a, b) = taps at index b - a, zero beyond the band.
Matrix toeplitz_from_taps(const ZFParams& p, Eigen::Index n);
/// Symmetric version with entry (a, b) = taps[|a - b|].
Matrix symmetric_toeplitz(const std::vector<double>& taps, Eigen::Index n);

struct LinearInequality {
  Vector coeffs;  ///< c . theta >= 0
};

struct MultiplierSpec {
  MultiplierKind kind = MultiplierKind::SlopeDynamic;
  int N = 0;
  Q3Structure q3 = Q3Structure::Metzler;
  std::vector<Matrix> basis;
  std::vector<LinearInequality> constraints;
  /// A strictly admissible parameter vector (every constraint > 0).
  Vector interior;
  std::vector<std::string> names;

  Eigen::Index n_params() const { return static_cast<Eigen::Index>(basis.size()); }
  Eigen::Index size() const { return 2 * static_cast<Eigen::Index>(N) + 2; }
  Matrix M(const Vector& theta) const;
  bool admissible(const Vector& theta, double tol = 0.0) const;
  /// Smallest constraint value c_k . theta (+inf without constraints).
  double constraint_margin(const Vector& theta) const;
};

MultiplierSpec make_spec(MultiplierKind kind, int N, Q3Structure q3 = Q3Structure::Metzler);

/// Parameter vector <-> structured parameters, in the ordering of make_spec:
///   SlopeDynamic  m_{-N}, ..., m_N
///   ReluDynamic   m1_0..m1_N, m2_0..m2_N, m3_{-N}..m3_N
///   SlopeStatic   Q0 row-major
///   ReluStatic    Q1 upper triangle, Q2 upper triangle, Q3 (row-major or diagonal)
MultiplierParams params_from_theta(const MultiplierSpec& spec, const Vector& theta);
Vector theta_from_params(const MultiplierSpec& spec, const MultiplierParams& p);

struct SumIdentity {
  double lhs = 0.0;  ///< sum_{k=0}^{T0} r(k)' M r(k), r from Psi_N at rest
  double rhs = 0.0;  ///< stacked quadratic form [vbar; wbar]' Q [vbar; wbar]
};

/// Two independent evaluations of the accumulated quadratic form over
/// k = 0..T0: filtering with Psi_N, and a single quadratic form in the
/// time-reversed stacked signals. Dynamic classes use the banded Toeplitz
/// matrices; static classes accumulate shifted copies of Q index by index.
SumIdentity toeplitz_sum_oracle(const MultiplierParams& params, const std::vector<double>& v,
                                const std::vector<double>& w, int T0);

}  // namespace reluiqc
