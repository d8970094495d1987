#include "coherdist/analytic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace coherdist::analytic {

SortedAmplitudes normalize_amplitudes(const PureState& psi, double zero_tol) {
  std::vector<double> mods;
  for (int i = 0; i < psi.dim(); ++i) {
    const double a = std::abs(psi.amplitudes()[i]);
    if (a * a >= zero_tol) mods.push_back(a);
  }
  if (mods.empty()) {
    throw std::domain_error("normalize_amplitudes: all coefficients below tolerance");
  }
  std::sort(mods.begin(), mods.end(), std::greater<double>());
  double norm2 = 0.0;
  for (double a : mods) norm2 += a * a;
  SortedAmplitudes out;
  out.n = static_cast<int>(mods.size());
  out.values = RealVector(out.n);
  const double scale = 1.0 / std::sqrt(norm2);
  for (int i = 0; i < out.n; ++i) out.values[i] = mods[i] * scale;
  return out;
}

double p_sio_pure(const SortedAmplitudes& a, int m) {
  if (m < 2) throw std::invalid_argument("p_sio_pure: m must be >= 2");
  if (a.n < m) return 0.0;
  double best = 1.0;
  for (int k = 1; k <= m; ++k) {
    double tail = 0.0;
    for (int i = m - k; i < a.n; ++i) tail += a.values[i] * a.values[i];  // i is 0-based
    best = std::min(best, (double(m) / k) * tail);
  }
  return std::min(best, 1.0);
}

QubitTargetResult p_qubit_target(const SortedAmplitudes& a, double eps) {
  if (a.n < 1) throw std::domain_error("p_qubit_target: empty amplitudes");
  QubitTargetResult res;
  if (eps >= 0.5) {
    res.probability = 1.0;
    res.trivial_regime = true;
    return res;
  }
  const double a1 = a.values[0];
  const double eps0 =
      a1 <= 1.0 / std::sqrt(2.0) ? 0.0 : 0.5 - a1 * std::sqrt(1.0 - a1 * a1);
  if (eps >= eps0) {
    res.probability = 1.0;
    return res;
  }
  const double num = std::sqrt(1.0 - eps) + std::sqrt(eps);
  const double p = 2.0 * (1.0 - a1 * a1) * num * num / ((1.0 - 2.0 * eps) * (1.0 - 2.0 * eps));
  res.probability = std::min(p, 1.0);
  return res;
}

MioPureBounds mio_pure_lower_bound(const SortedAmplitudes& a, int m) {
  if (m < 2) throw std::invalid_argument("mio_pure_lower_bound: m must be >= 2");
  if (a.n < 2) throw std::domain_error("mio_pure_lower_bound: input is incoherent");
  const int n = a.n;
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += 1.0 / (a.values[i] * a.values[i]);
  RealVector t(n);
  for (int i = 0; i < n; ++i) t[i] = 1.0 / (a.values[i] * std::sqrt(s));

  Eigen::MatrixXd proj = t * t.transpose();
  Eigen::MatrixXd b = (double(n - m) / (n - 1)) * proj;
  b.diagonal() += (double(n) * (m - 1) / (n - 1)) * proj.diagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b, Eigen::EigenvaluesOnly);
  const double opnorm = es.eigenvalues().cwiseAbs().maxCoeff();

  MioPureBounds out;
  out.weak = double(n) * n / (m * s);
  out.tight = (double(n) * n / s) / opnorm;
  return out;
}

DioFeasibility dio_threshold(int n, int m, double eps, bool maximally_coherent) {
  if (n < 1 || m < 2) throw std::invalid_argument("dio_threshold: need n >= 1, m >= 2");
  // The boundary 1 - n/m is a rational point; comparisons carry a small
  // tolerance so values like 1/3 land on the boundary regardless of which
  // rounding of the threshold the caller supplies.
  const double threshold = 1.0 - double(n) / m;
  if (n < m && eps < threshold - 1e-12) return DioFeasibility::Zero;
  if (maximally_coherent && eps >= threshold - 1e-12) return DioFeasibility::One;
  return DioFeasibility::Positive;
}

std::string to_string(DioFeasibility f) {
  switch (f) {
    case DioFeasibility::Positive: return "Positive";
    case DioFeasibility::Zero: return "Zero";
    case DioFeasibility::One: return "One";
  }
  return "?";
}

}  // namespace coherdist::analytic
