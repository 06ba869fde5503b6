#pragma once

// Time-domain checks: closed-loop simulation of v = -alpha G w, w = phi(v),
// pointwise ReLU identities, the per-step dissipation inequality along
// trajectories, hard-IQC sums, and random falsification probes.

#include "reluiqc/augmentation.hpp"
#include "reluiqc/certify.hpp"
#include "reluiqc/multipliers.hpp"

#include <array>
#include <functional>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

namespace reluiqc {

using Nonlinearity = std::function<double(double)>;

double relu(double v);

/// Continuous piecewise-linear map through the origin with slopes in [0, 1].
class PiecewiseLinear {
 public:
  /// breakpoints sorted ascending; slopes.size() == breakpoints.size() + 1.
  PiecewiseLinear(std::vector<double> breakpoints, std::vector<double> slopes);
  static PiecewiseLinear random(std::mt19937_64& rng, int pieces = 4, double spread = 3.0);
  double operator()(double v) const;

 private:
  std::vector<double> breaks_;
  std::vector<double> slopes_;
  std::vector<double> values_;  ///< phi at each breakpoint
  std::size_t zero_piece_ = 0;
};

struct SimulationTrace {
  Matrix x;               ///< n x (T + 1)
  std::vector<double> v;  ///< length T
  std::vector<double> w;  ///< length T
  std::vector<double> V;  ///< storage values, empty unless attached

  std::size_t steps() const { return v.size(); }
};

/// x(k+1) = A x + B w, v = -alpha (C x + D w), w = phi(v). With D != 0 the
/// algebraic loop is solved by fixed-point iteration to 1e-12, which needs
/// check_well_posed(loop plant); throws std::invalid_argument otherwise.
SimulationTrace simulate_loop(const StateSpace& G, double alpha, const Nonlinearity& phi, const Vector& x0,
                              std::size_t T);

/// r(k) = [v(k..k-N), w(k..k-N)] with zeros before time 0; (2N+2) x T.
Matrix filter_outputs(const SimulationTrace& trace, int N);

struct ReluCheck {
  double w = 0.0;
  std::array<double, 3> residuals{};  ///< w (w - v), min(w, 0), min(w - v, 0)
};
ReluCheck relu_pointwise_checks(double v);

/// max over steps of V(xh+) - V(xh) + eps |xh|^2 + r' M r, in the
/// coordinates of `aug` (filtered steps or lifted blocks).
double check_dissipation(const AugmentedSystem& aug, const Matrix& P, const Matrix& M, const SimulationTrace& trace,
                         double eps);

/// Per-step storage values x^' P x^ (Filtered form), NaN where undefined.
void attach_storage(SimulationTrace& trace, const AugmentedSystem& aug, const Matrix& P);

/// sum_k r(k)' M r(k) for Psi_N-filtered (v, w) over the whole trace.
double iqc_sum(const SimulationTrace& trace, const Matrix& M, int N);

struct FalsificationResult {
  double worst_ratio = 0.0;  ///< max over trials and k of |x(k)| / |x0|
  std::vector<double> ratios;
};

/// x0 uniform on the unit sphere, phi = ReLU.
FalsificationResult falsification_probe(const StateSpace& G, double alpha, int trials, std::size_t T,
                                        std::uint64_t seed);

/// Header k,x0..x{n-1},v,w,V
void write_trace_csv(const SimulationTrace& trace, std::ostream& os);

/// Random unit vector.
Vector random_unit(std::mt19937_64& rng, Eigen::Index n);

/// A random point of the multiplier class with horizon N (dynamic: taps,
/// static: (N+1) x (N+1) matrices), every constraint strictly satisfied.
MultiplierParams random_params(std::mt19937_64& rng, MultiplierKind kind, int N, Q3Structure q3 = Q3Structure::Metzler);

struct PropertyCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct SuiteOptions {
  std::uint64_t seed = 1;
  int instances = 200;  ///< per multiplier class
  int max_N = 5;
  int max_T0 = 12;
  int dissipation_trials = 20;
  std::size_t dissipation_T = 300;
};

/// The oracle and property suites used by `reluiqc validate`.
std::vector<PropertyCheck> run_property_suite(const StateSpace& G, const SuiteOptions& options = {});

/// Dissipation along `trials` random trajectories of a certified instance:
/// max violation with eps = witness strictness.
double dissipation_over_trials(const StateSpace& G, const Certificate& cert, int trials, std::size_t T,
                               std::uint64_t seed);

}  // namespace reluiqc
