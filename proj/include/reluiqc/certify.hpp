#pragma once

// Stability certificates for the loop  v = -alpha G w,  w = phi(v),  and
// stability margins by bisection over alpha.
//
// A Method names a multiplier class and a lift size N >= 1. Dynamic classes
// filter with Psi_{N-1} (window N). Static classes use non-overlapping
// blocks of N steps by default, or the sliding window Psi_{N-1}.

#include "reluiqc/augmentation.hpp"
#include "reluiqc/multipliers.hpp"
#include "reluiqc/sdp.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace reluiqc {

enum class StaticForm { Lifted, Sliding };

std::string to_string(StaticForm f);
StaticForm parse_static_form(const std::string& name);
std::string to_string(Q3Structure q);
Q3Structure parse_q3_structure(const std::string& name);

struct Method {
  MultiplierKind kind = MultiplierKind::ReluDynamic;
  int N = 1;
  StaticForm static_form = StaticForm::Lifted;
  Q3Structure q3 = Q3Structure::Metzler;

  /// Psi horizon of the multiplier (N - 1).
  int horizon() const { return N - 1; }
  std::string label() const;
};

/// Throws std::invalid_argument if N < 1.
void validate(const Method& m);

/// The four rows of the margin comparison table, each at lift size N.
/// Static ReLU uses diagonal Q3 there.
std::vector<Method> table2_methods(int N);

/// Balanced augmented (or lifted) loop plant for `method` at gain alpha.
AugmentedSystem build_system(const StateSpace& G, const Method& method, double alpha);
MultiplierSpec method_spec(const Method& method);

enum class Verdict { CertifiedStable, Inconclusive };
std::string to_string(Verdict v);

struct CertifyOptions {
  LmiOptions lmi;
  /// Extra solves in rescaled state coordinates when a solve ends below the
  /// strictness threshold. Each round applies the diagonal similarity that
  /// equalizes the diagonal of the previous P (powers of two).
  int rescale_rounds = 3;
  const SolverBackend* backend = nullptr;  ///< default_backend() when null
};

struct Certificate {
  Method method;
  double alpha = 0.0;
  Verdict verdict = Verdict::Inconclusive;
  FeasibilityResult witness;
  bool well_posed = false;
  AugmentedSystem system;  ///< coordinates of witness.P
  int rounds = 1;          ///< solves performed
  std::string note;
};

/// pre: G SISO, alpha >= 0 (std::invalid_argument otherwise).
Certificate certify(const StateSpace& G, const Method& method, double alpha, const CertifyOptions& options = {});

struct MarginStep {
  double alpha = 0.0;
  Verdict verdict = Verdict::Inconclusive;
  double strictness = 0.0;
  SdpStatus status = SdpStatus::NumericalTrouble;
};

struct MarginOptions {
  double alpha_hi = 400.0;
  double tol = 1e-3;
  CertifyOptions certify;
};

struct MarginResult {
  Method method;
  double alpha_lo = 0.0;  ///< largest certified alpha
  double alpha_hi = 0.0;  ///< smallest alpha probed without a certificate
  int iterations = 0;
  bool cap_reached = false;
  int numerical_trouble = 0;
  std::vector<MarginStep> log;
  std::string note;
};

/// Bisection on [0, alpha_hi] until alpha_hi - alpha_lo <= tol (1 + alpha_hi).
/// If alpha_hi itself is certified the result has cap_reached set.
MarginResult margin(const StateSpace& G, const Method& method, const MarginOptions& options = {});

struct TableCell {
  Method method;
  MarginResult result;
  std::string error;  ///< non-empty if the run threw
};

struct TableOptions {
  std::vector<int> Ns{1, 2, 3, 4};
  std::vector<Method> methods;  ///< N fields ignored; empty means table2_methods
  MarginOptions margin;
  int jobs = 1;
};

/// One margin run per (method, N); cells are independent and run on up to
/// `jobs` threads. Output order is method-major, independent of jobs.
std::vector<TableCell> table2(const StateSpace& G, const TableOptions& options = {});

/// Header: method,N,margin,iterations,cap_reached
void write_table_csv(const std::vector<TableCell>& cells, std::ostream& os);

}  // namespace reluiqc
