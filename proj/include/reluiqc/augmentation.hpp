#pragma once

// Filtered and lifted views of the loop plant used by the stability LMI.
//
// Filtered form: the FIR filter Psi_N maps (v, w) to
//   r(k) = [v(k), ..., v(k-N), w(k), ..., w(k-N)]
// and the augmented system is Psi_N [G; 1], driven by w alone.
//
// Lifted form: the plant is sampled in non-overlapping blocks of L steps,
// so one lifted step maps [w(jL), ..., w(jL+L-1)] to the matching block of v.
// Its output is arranged as r = [v-block; w-block] so the same quadratic
// forms apply with window length L = N + 1.

#include "reluiqc/lti.hpp"

namespace reluiqc {

enum class Realization { Filtered, Lifted };

struct AugmentedSystem {
  StateSpace sys;         ///< (A^, B^, C^, D^) in the coordinates the LMI is posed in
  int horizon = 0;        ///< N; outputs have 2N + 2 rows
  Eigen::Index plant_states = 0;
  Realization form = Realization::Filtered;
  /// x_here = x_raw ./ state_scaling, where x_raw is the natural state
  /// ([x; v(k-1..k-N); w(k-1..k-N)] or x(jL)). All ones unless balanced.
  Vector state_scaling;

  int window() const { return horizon + 1; }
};

/// Two shift registers (v-chain, then w-chain); inputs (v, w), outputs r(k).
StateSpace build_psi(int N);

/// Psi_N [G; 1] for a SISO plant G.
AugmentedSystem augment(const StateSpace& G, int N);

/// L-step lifting of a SISO plant, with outputs [v-block; w-block].
AugmentedSystem lift(const StateSpace& G, int L);

/// The plant seen by the nonlinearity in the loop of gain alpha:
/// v = -alpha G w (negative feedback).
StateSpace loop_plant(const StateSpace& G, double alpha);

/// Sufficient test: D = 0, or |D| < 1 so that v = Cx + D relu(v) is a
/// contraction. A false answer means "not shown", never "ill-posed".
bool check_well_posed(const StateSpace& G);

/// Osborne-style diagonal balancing of [A B; C 0]. Returns per-state
/// scale factors (powers of two).
Vector balancing_scaling(const StateSpace& sys, int max_sweeps = 64);

/// Applies balancing_scaling and records the factors in state_scaling.
AugmentedSystem balance(const AugmentedSystem& aug);

/// Natural (unbalanced) augmented state at step k of a filtered system.
Vector filtered_state(const Vector& x, const std::vector<double>& v, const std::vector<double>& w,
                      int N, std::size_t k);

}  // namespace reluiqc
