#pragma once

#include <complex>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace coherdist {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

/// Dense Hermitian matrix with its dimension. Construction rejects inputs
/// whose Hermiticity defect exceeds 1e-12 and symmetrizes smaller defects.
class HermitianOperator {
 public:
  static constexpr double kHermTol = 1e-12;

  explicit HermitianOperator(Matrix entries);

  int dim() const { return static_cast<int>(mat_.rows()); }
  const Matrix& mat() const { return mat_; }

  double trace() const { return mat_.trace().real(); }

  static HermitianOperator Identity(int dim);
  static HermitianOperator Zero(int dim);

 private:
  Matrix mat_;
};

/// Unit-norm complex amplitude vector.
class PureState {
 public:
  static constexpr double kNormTol = 1e-12;

  explicit PureState(Vector amplitudes);

  int dim() const { return static_cast<int>(amps_.size()); }
  const Vector& amplitudes() const { return amps_; }

  /// Outer product |psi><psi| as a density operator.
  HermitianOperator density() const;

 private:
  Vector amps_;
};

/// Diagonal part of H in the reference basis (completely dephasing map).
HermitianOperator dephase(const HermitianOperator& h);

/// Average of P H P over all permutation matrices P, computed in closed
/// form: every diagonal entry becomes the mean diagonal entry and every
/// off-diagonal entry becomes the mean off-diagonal entry.
HermitianOperator twirl(const HermitianOperator& h);

/// Uhlmann fidelity ||sqrt(A) sqrt(B)||_1^2 for density operators.
/// Eigenvalues in [-1e-10, 0) are clipped to zero before the square roots;
/// inputs that are not PSD beyond that tolerance are rejected.
double fidelity(const HermitianOperator& a, const HermitianOperator& b);

/// Kronecker product, index convention (i_A, i_B) -> i_A * dimB + i_B.
HermitianOperator tensor(const HermitianOperator& a, const HermitianOperator& b);

/// Reduced operator on the kept subsystem (keep = 0 or 1) of a bipartite
/// operator with subsystem dimensions dims = {d1, d2}, d1 * d2 = dim(H).
HermitianOperator partial_trace(const HermitianOperator& h,
                                std::pair<int, int> dims, int keep);

struct EighResult {
  RealVector eigenvalues;  // ascending
  Matrix eigenvectors;     // columns, unitary
};

/// Hermitian eigendecomposition H = U diag(lambda) U^dagger.
EighResult eigh(const HermitianOperator& h);

}  // namespace coherdist
