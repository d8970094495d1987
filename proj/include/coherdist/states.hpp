#pragma once

#include <cstdint>
#include <string>

#include "coherdist/linalg.hpp"

namespace coherdist {

/// One distillation problem: input state, target dimension, infidelity tolerance.
struct DistillationInstance {
  DistillationInstance(HermitianOperator rho_in, int m_in, double eps_in);

  HermitianOperator rho;
  int m;
  double eps;

  /// True when eps >= 1 - 1/m: the maximally mixed output already meets the
  /// fidelity requirement, so the success probability is trivially 1.
  bool trivial_regime() const { return eps >= 1.0 - 1.0 / m; }
};

/// Maximally coherent state of dimension m: all amplitudes m^{-1/2}.
PureState max_coherent(int m);

/// (1-eps) Psi_m + eps (1 - Psi_m) / (m - 1); the symmetrized optimal output
/// at infidelity eps.
HermitianOperator smoothed_target(int m, double eps);

enum class ExampleState { v1, v2, u1, u2, main_example, sudden_death_example };

ExampleState example_state_from_name(const std::string& name);

/// The fixed example states used throughout the result set.
PureState example_state(ExampleState name);

/// Seeded Ginibre-style density matrix of the requested rank; support
/// eigenvalues are bounded below by 1e-3.
HermitianOperator random_density(int dim, int rank, std::uint64_t seed);

/// Seeded Haar-like random pure state (complex Gaussian amplitudes, normalized).
PureState random_pure(int dim, std::uint64_t seed);

/// Seeded random pure state with real nonzero amplitudes.
PureState random_pure_real(int dim, std::uint64_t seed);

}  // namespace coherdist
