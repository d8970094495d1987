#include "coherdist/linalg.hpp"

#include <cmath>

namespace coherdist {

HermitianOperator::HermitianOperator(Matrix entries) : mat_(std::move(entries)) {
  if (mat_.rows() < 1 || mat_.rows() != mat_.cols()) {
    throw std::invalid_argument("HermitianOperator: matrix must be square, dim >= 1");
  }
  const double scale = std::max(1.0, mat_.norm());
  const double defect = (mat_ - mat_.adjoint()).norm();
  if (defect > kHermTol * scale) {
    throw std::invalid_argument("HermitianOperator: Hermiticity defect " +
                                std::to_string(defect) + " exceeds tolerance");
  }
  mat_ = 0.5 * (mat_ + mat_.adjoint().eval());
}

HermitianOperator HermitianOperator::Identity(int dim) {
  return HermitianOperator(Matrix::Identity(dim, dim));
}

HermitianOperator HermitianOperator::Zero(int dim) {
  return HermitianOperator(Matrix::Zero(dim, dim));
}

PureState::PureState(Vector amplitudes) : amps_(std::move(amplitudes)) {
  if (amps_.size() < 1) {
    throw std::invalid_argument("PureState: empty amplitude vector");
  }
  const double sqnorm = amps_.squaredNorm();
  if (std::abs(sqnorm - 1.0) > kNormTol) {
    throw std::invalid_argument("PureState: squared norm " + std::to_string(sqnorm) +
                                " is not 1 within tolerance");
  }
}

HermitianOperator PureState::density() const {
  return HermitianOperator(amps_ * amps_.adjoint());
}

HermitianOperator dephase(const HermitianOperator& h) {
  Matrix d = h.mat().diagonal().asDiagonal();
  return HermitianOperator(std::move(d));
}

HermitianOperator twirl(const HermitianOperator& h) {
  const int d = h.dim();
  const Complex diag_mean = h.mat().diagonal().sum() / double(d);
  Complex off_mean = 0.0;
  if (d > 1) {
    off_mean = (h.mat().sum() - h.mat().diagonal().sum()) / double(d * (d - 1));
  }
  Matrix out = Matrix::Constant(d, d, off_mean);
  out.diagonal().setConstant(diag_mean);
  return HermitianOperator(std::move(out));
}

namespace {

// PSD square root with tolerance clipping; rejects eigenvalues < -1e-10.
Matrix psd_sqrt(const HermitianOperator& a, const char* who) {
  EighResult e = eigh(a);
  RealVector lam = e.eigenvalues;
  for (int i = 0; i < lam.size(); ++i) {
    if (lam[i] < -1e-10) {
      throw std::domain_error(std::string(who) + ": input is not PSD (eigenvalue " +
                              std::to_string(lam[i]) + ")");
    }
    lam[i] = std::sqrt(std::max(lam[i], 0.0));
  }
  return e.eigenvectors * lam.asDiagonal() * e.eigenvectors.adjoint();
}

}  // namespace

double fidelity(const HermitianOperator& a, const HermitianOperator& b) {
  if (a.dim() != b.dim()) {
    throw std::invalid_argument("fidelity: dimension mismatch");
  }
  if (std::abs(a.trace() - 1.0) > 1e-9 || std::abs(b.trace() - 1.0) > 1e-9) {
    throw std::domain_error("fidelity: inputs must have unit trace");
  }
  const Matrix ra = psd_sqrt(a, "fidelity");
  const Matrix rb = psd_sqrt(b, "fidelity");
  // ||sqrt(A) sqrt(B)||_1 = sum of singular values of sqrt(A) sqrt(B).
  Eigen::JacobiSVD<Matrix> svd(ra * rb);
  const double tn = svd.singularValues().sum();
  return std::min(tn * tn, 1.0 + 1e-12);
}

HermitianOperator tensor(const HermitianOperator& a, const HermitianOperator& b) {
  const int da = a.dim(), db = b.dim();
  Matrix out(da * db, da * db);
  for (int i = 0; i < da; ++i) {
    for (int j = 0; j < da; ++j) {
      out.block(i * db, j * db, db, db) = a.mat()(i, j) * b.mat();
    }
  }
  return HermitianOperator(std::move(out));
}

HermitianOperator partial_trace(const HermitianOperator& h,
                                std::pair<int, int> dims, int keep) {
  const int d1 = dims.first, d2 = dims.second;
  if (d1 < 1 || d2 < 1 || d1 * d2 != h.dim()) {
    throw std::invalid_argument("partial_trace: dims do not factor the operator");
  }
  if (keep != 0 && keep != 1) {
    throw std::invalid_argument("partial_trace: keep must be 0 or 1");
  }
  const int dk = keep == 0 ? d1 : d2;
  const int dt = keep == 0 ? d2 : d1;
  Matrix out = Matrix::Zero(dk, dk);
  for (int i = 0; i < dk; ++i) {
    for (int j = 0; j < dk; ++j) {
      for (int t = 0; t < dt; ++t) {
        const int r = keep == 0 ? i * d2 + t : t * d2 + i;
        const int c = keep == 0 ? j * d2 + t : t * d2 + j;
        out(i, j) += h.mat()(r, c);
      }
    }
  }
  return HermitianOperator(std::move(out));
}

EighResult eigh(const HermitianOperator& h) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(h.mat());
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("eigh: eigensolver failed");
  }
  return {es.eigenvalues(), es.eigenvectors()};
}

}  // namespace coherdist
