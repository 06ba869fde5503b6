#include "reluiqc/lti.hpp"

#include "json.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace reluiqc {

namespace {

std::string dims(const Matrix& M) {
  std::ostringstream os;
  os << M.rows() << "x" << M.cols();
  return os.str();
}

Matrix matrix_from_json(const nlohmann::json& rows, const char* name) {
  if (!rows.is_array()) {
    throw std::invalid_argument(std::string("plant matrix ") + name + " must be an array of rows");
  }
  const auto r = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index c = r == 0 ? 0 : static_cast<Eigen::Index>(rows.at(0).size());
  Matrix M(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    const auto& row = rows.at(static_cast<std::size_t>(i));
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != c) {
      throw std::invalid_argument(std::string("plant matrix ") + name + " is ragged");
    }
    for (Eigen::Index j = 0; j < c; ++j) M(i, j) = row.at(static_cast<std::size_t>(j)).get<double>();
  }
  return M;
}

}  // namespace

StateSpace::StateSpace(Matrix A, Matrix B, Matrix C, Matrix D)
    : A_(std::move(A)), B_(std::move(B)), C_(std::move(C)), D_(std::move(D)) {
  const bool ok = A_.rows() == A_.cols() && B_.rows() == A_.rows() && C_.cols() == A_.cols() &&
                  D_.rows() == C_.rows() && D_.cols() == B_.cols();
  if (!ok) {
    throw std::invalid_argument("inconsistent state-space dimensions: A " + dims(A_) + ", B " +
                                dims(B_) + ", C " + dims(C_) + ", D " + dims(D_));
  }
}

StateSpace StateSpace::static_gain(const Matrix& D) {
  return StateSpace(Matrix(0, 0), Matrix(0, D.cols()), Matrix(D.rows(), 0), D);
}

StateSpace tf_to_ss(const TransferFunction& tf) {
  std::vector<double> den = tf.den;
  std::vector<double> num = tf.num;
  if (den.empty() || den.front() == 0.0) {
    throw std::invalid_argument("transfer function denominator must have a nonzero leading coefficient");
  }
  // Leading zeros in the numerator do not change the degree.
  std::size_t lead = 0;
  while (lead + 1 < num.size() && num[lead] == 0.0) ++lead;
  num.erase(num.begin(), num.begin() + static_cast<std::ptrdiff_t>(lead));
  if (num.empty()) num.push_back(0.0);
  if (num.size() > den.size()) {
    throw std::invalid_argument("improper transfer function: numerator degree " +
                                std::to_string(num.size() - 1) + " exceeds denominator degree " +
                                std::to_string(den.size() - 1));
  }

  const double a0 = den.front();
  const auto n = static_cast<Eigen::Index>(den.size() - 1);
  std::vector<double> b(den.size(), 0.0);
  std::copy(num.begin(), num.end(), b.begin() + static_cast<std::ptrdiff_t>(den.size() - num.size()));

  const double d = b[0] / a0;
  Matrix A = Matrix::Zero(n, n);
  Matrix B = Matrix::Zero(n, 1);
  Matrix C(1, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double ai = den[static_cast<std::size_t>(i + 1)] / a0;
    A(0, i) = -ai;
    C(0, i) = b[static_cast<std::size_t>(i + 1)] / a0 - d * ai;
  }
  for (Eigen::Index i = 1; i < n; ++i) A(i, i - 1) = 1.0;
  if (n > 0) B(0, 0) = 1.0;
  return StateSpace(A, B, C, Matrix::Constant(1, 1, d));
}

StateSpace scale(const StateSpace& sys, double alpha) {
  return StateSpace(sys.A(), sys.B(), alpha * sys.C(), alpha * sys.D());
}

StateSpace series(const StateSpace& first, const StateSpace& second) {
  if (first.n_outputs() != second.n_inputs()) {
    throw std::invalid_argument("series: first has " + std::to_string(first.n_outputs()) +
                                " outputs but second has " + std::to_string(second.n_inputs()) +
                                " inputs");
  }
  const auto n1 = first.n_states();
  const auto n2 = second.n_states();
  Matrix A = Matrix::Zero(n1 + n2, n1 + n2);
  A.topLeftCorner(n1, n1) = first.A();
  A.bottomLeftCorner(n2, n1) = second.B() * first.C();
  A.bottomRightCorner(n2, n2) = second.A();
  Matrix B(n1 + n2, first.n_inputs());
  B << first.B(), second.B() * first.D();
  Matrix C(second.n_outputs(), n1 + n2);
  C << second.D() * first.C(), second.C();
  return StateSpace(A, B, C, second.D() * first.D());
}

StateSpace stack_outputs(const StateSpace& top, const StateSpace& bottom) {
  if (top.n_inputs() != bottom.n_inputs()) {
    throw std::invalid_argument("stack_outputs: input widths differ");
  }
  const auto n1 = top.n_states();
  const auto n2 = bottom.n_states();
  const auto p1 = top.n_outputs();
  const auto p2 = bottom.n_outputs();
  Matrix A = Matrix::Zero(n1 + n2, n1 + n2);
  A.topLeftCorner(n1, n1) = top.A();
  A.bottomRightCorner(n2, n2) = bottom.A();
  Matrix B(n1 + n2, top.n_inputs());
  B << top.B(), bottom.B();
  Matrix C = Matrix::Zero(p1 + p2, n1 + n2);
  C.topLeftCorner(p1, n1) = top.C();
  C.bottomRightCorner(p2, n2) = bottom.C();
  Matrix D(p1 + p2, top.n_inputs());
  D << top.D(), bottom.D();
  return StateSpace(A, B, C, D);
}

StateSpace diagonal_similarity(const StateSpace& sys, const Vector& d) {
  if (d.size() != sys.n_states()) throw std::invalid_argument("diagonal_similarity: size mismatch");
  const Vector inv = d.cwiseInverse();
  return StateSpace(inv.asDiagonal() * sys.A() * d.asDiagonal(), inv.asDiagonal() * sys.B(),
                    sys.C() * d.asDiagonal(), sys.D());
}

Trajectory simulate(const StateSpace& sys, const Matrix& inputs, const Vector& x0) {
  if (inputs.rows() != sys.n_inputs() && inputs.cols() > 0) {
    throw std::invalid_argument("simulate: input rows must equal n_inputs");
  }
  if (x0.size() != sys.n_states()) throw std::invalid_argument("simulate: x0 has wrong dimension");
  const auto T = inputs.cols();
  Trajectory out{Matrix(sys.n_states(), T + 1), Matrix(sys.n_outputs(), T)};
  out.states.col(0) = x0;
  for (Eigen::Index k = 0; k < T; ++k) {
    const auto x = out.states.col(k);
    out.outputs.col(k) = sys.C() * x + sys.D() * inputs.col(k);
    out.states.col(k + 1) = sys.A() * x + sys.B() * inputs.col(k);
  }
  return out;
}

std::vector<double> simulate(const StateSpace& sys, const std::vector<double>& u) {
  if (!sys.is_siso()) throw std::invalid_argument("simulate: scalar overload needs a SISO system");
  const Matrix U = Eigen::Map<const Eigen::RowVectorXd>(u.data(), static_cast<Eigen::Index>(u.size()));
  const auto traj = simulate(sys, U, Vector::Zero(sys.n_states()));
  return {traj.outputs.data(), traj.outputs.data() + traj.outputs.size()};
}

std::vector<double> impulse_response(const StateSpace& sys, std::size_t samples) {
  std::vector<double> u(samples, 0.0);
  if (samples > 0) u[0] = 1.0;
  return simulate(sys, u);
}

double spectral_radius(const Matrix& A) {
  if (A.size() == 0) return 0.0;
  return Eigen::EigenSolver<Matrix>(A, false).eigenvalues().cwiseAbs().maxCoeff();
}

bool is_schur(const StateSpace& sys) { return spectral_radius(sys.A()) < 1.0 - 1e-12; }

StateSpace plant_from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("plant file is not valid JSON: ") + e.what());
  }
  try {
    if (j.contains("tf")) {
      const auto& tf = j.at("tf");
      return tf_to_ss({tf.at("num").get<std::vector<double>>(), tf.at("den").get<std::vector<double>>()});
    }
    if (j.contains("ss")) {
      const auto& ss = j.at("ss");
      Matrix A = matrix_from_json(ss.at("A"), "A");
      Matrix B = matrix_from_json(ss.at("B"), "B");
      Matrix C = matrix_from_json(ss.at("C"), "C");
      Matrix D = matrix_from_json(ss.at("D"), "D");
      // An empty A/B/C carries no column count; recover it from the other blocks.
      if (A.size() == 0) {
        A.resize(0, 0);
        B.resize(0, D.cols());
        C.resize(D.rows(), 0);
      }
      return StateSpace(A, B, C, D);
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed plant description: ") + e.what());
  }
  throw std::invalid_argument("plant description needs a \"tf\" or \"ss\" entry");
}

StateSpace load_plant(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open plant file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return plant_from_json_text(buf.str());
}

}  // namespace reluiqc
