#pragma once

// Discrete-time LTI systems in state-space form:
//
//   x(k+1) = A x(k) + B u(k)
//   y(k)   = C x(k) + D u(k)
//
// Matrices are dense; every system handled by this project is small.

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <vector>

namespace reluiqc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

class StateSpace {
 public:
  StateSpace() = default;

  /// Throws std::invalid_argument when the block dimensions disagree.
  StateSpace(Matrix A, Matrix B, Matrix C, Matrix D);

  /// Memoryless system y = D u.
  static StateSpace static_gain(const Matrix& D);

  const Matrix& A() const { return A_; }
  const Matrix& B() const { return B_; }
  const Matrix& C() const { return C_; }
  const Matrix& D() const { return D_; }

  Eigen::Index n_states() const { return A_.rows(); }
  Eigen::Index n_inputs() const { return B_.cols(); }
  Eigen::Index n_outputs() const { return C_.rows(); }

  bool is_siso() const { return n_inputs() == 1 && n_outputs() == 1; }

 private:
  Matrix A_{0, 0};
  Matrix B_{0, 0};
  Matrix C_{0, 0};
  Matrix D_{0, 0};
};

/// Rational transfer function in z, coefficients in descending powers.
struct TransferFunction {
  std::vector<double> num;
  std::vector<double> den;
};

/// Controllable companion realization of a proper SISO transfer function.
/// Improper or malformed input throws std::invalid_argument.
StateSpace tf_to_ss(const TransferFunction& tf);

/// Output scaling: (A, B, alpha C, alpha D).
StateSpace scale(const StateSpace& sys, double alpha);

/// Cascade u -> first -> second.
StateSpace series(const StateSpace& first, const StateSpace& second);

/// Shared input, stacked outputs [top; bottom].
StateSpace stack_outputs(const StateSpace& top, const StateSpace& bottom);

/// Similarity transform x = diag(d) z.
StateSpace diagonal_similarity(const StateSpace& sys, const Vector& d);

struct Trajectory {
  Matrix states;   ///< n_x x (T+1), column k is x(k)
  Matrix outputs;  ///< n_y x T, column k is y(k)
};

/// Exact recursion over the columns of `inputs` (n_u x T).
Trajectory simulate(const StateSpace& sys, const Matrix& inputs, const Vector& x0);

/// SISO convenience overload starting from x0 = 0.
std::vector<double> simulate(const StateSpace& sys, const std::vector<double>& u);

/// First `samples` Markov parameters of a SISO system: D, CB, CAB, ...
std::vector<double> impulse_response(const StateSpace& sys, std::size_t samples);

double spectral_radius(const Matrix& A);

/// True iff rho(A) < 1 - 1e-12. A system without states is Schur.
bool is_schur(const StateSpace& sys);

/// Accepts {"tf": {"num": [...], "den": [...]}} or
/// {"ss": {"A": [[...]], "B": [[...]], "C": [[...]], "D": [[...]]}}.
StateSpace plant_from_json_text(const std::string& text);
StateSpace load_plant(const std::filesystem::path& path);

}  // namespace reluiqc
