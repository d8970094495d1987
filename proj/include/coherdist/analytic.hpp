#pragma once

#include "coherdist/linalg.hpp"
#include "coherdist/states.hpp"

namespace coherdist::analytic {

/// Moduli of the nonzero coefficients of a pure state, sorted nonincreasing.
struct SortedAmplitudes {
  RealVector values;  // strictly positive, nonincreasing, squares sum to 1
  int n = 0;          // number of nonzero coefficients
};

/// Takes moduli, drops entries with squared modulus below zero_tol, sorts
/// nonincreasing and renormalizes. Throws if everything is below tolerance.
SortedAmplitudes normalize_amplitudes(const PureState& psi, double zero_tol = 1e-12);

/// Optimal zero-error SIO/IO success probability for pure-state distillation
/// of an m-level maximally coherent state: 0 when n < m, otherwise
/// min_{k in [1,m]} (m/k) sum_{i=m-k+1}^{n} a_i^2.
double p_sio_pure(const SortedAmplitudes& a, int m);

struct QubitTargetResult {
  double probability = 0.0;
  bool trivial_regime = false;  // eps >= 1/2: fidelity 1/2 is free
};

/// Optimal MIO (= DIO) probability of distilling the maximally coherent
/// qubit from a pure input with largest coefficient a_1: 1 once
/// eps >= eps0(a_1) = max(0, 1/2 - a_1 sqrt(1 - a_1^2)), otherwise
/// 2 (1 - a_1^2) (sqrt(1-eps) + sqrt(eps))^2 / (1 - 2 eps)^2.
QubitTargetResult p_qubit_target(const SortedAmplitudes& a, double eps);

struct MioPureBounds {
  double tight = 0.0;
  double weak = 0.0;  // weak <= tight; both lower-bound the zero-error MIO value
};

/// Lower bounds on the zero-error MIO probability for a pure input with
/// n >= 2 nonzero coefficients. With s = sum a_i^{-2} and the unit vector
/// t_i = a_i^{-1}/sqrt(s): weak = n^2/(m s) and
/// tight = (n^2/s) / || (n-m)/(n-1) T + n(m-1)/(n-1) Delta(T) || with
/// T = t t^*, ||.|| the operator norm.
MioPureBounds mio_pure_lower_bound(const SortedAmplitudes& a, int m);

enum class DioFeasibility { Positive, Zero, One };

/// Feasibility trichotomy for pure-state DIO distillation of Psi_m from an
/// input with n nonzero coefficients: Zero iff n < m and eps < 1 - n/m;
/// One when a maximally coherent input is flagged and eps >= 1 - n/m;
/// Positive otherwise.
DioFeasibility dio_threshold(int n, int m, double eps,
                             bool maximally_coherent = false);

std::string to_string(DioFeasibility f);

}  // namespace coherdist::analytic
