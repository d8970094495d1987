#include "coherdist/states.hpp"

#include <cmath>

namespace coherdist {

namespace {

// Deterministic generator with a fixed, platform-independent stream
// (std::normal_distribution output is implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed + 0x9e3779b97f4a7c15ull) {}

  double uniform() {
    // splitmix64 step, mapped to (0, 1).
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    z = z ^ (z >> 31);
    return (double(z >> 11) + 0.5) * 0x1.0p-53;
  }

  double gauss() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u = uniform(), v = uniform();
    const double r = std::sqrt(-2.0 * std::log(u));
    spare_ = r * std::sin(2.0 * M_PI * v);
    have_spare_ = true;
    return r * std::cos(2.0 * M_PI * v);
  }

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace

DistillationInstance::DistillationInstance(HermitianOperator rho_in, int m_in,
                                           double eps_in)
    : rho(std::move(rho_in)), m(m_in), eps(eps_in) {
  if (m < 2) throw std::invalid_argument("DistillationInstance: m must be >= 2");
  if (eps < 0.0 || eps >= 1.0) {
    throw std::invalid_argument("DistillationInstance: eps must lie in [0, 1)");
  }
  if (std::abs(rho.trace() - 1.0) > 1e-9) {
    throw std::invalid_argument("DistillationInstance: rho must have unit trace");
  }
  EighResult e = eigh(rho);
  if (e.eigenvalues.minCoeff() < -1e-9) {
    throw std::invalid_argument("DistillationInstance: rho must be PSD");
  }
}

PureState max_coherent(int m) {
  if (m < 1) throw std::invalid_argument("max_coherent: m must be >= 1");
  Vector amps = Vector::Constant(m, Complex(1.0 / std::sqrt(double(m)), 0.0));
  return PureState(std::move(amps));
}

HermitianOperator smoothed_target(int m, double eps) {
  if (m < 2) throw std::invalid_argument("smoothed_target: m must be >= 2");
  const Matrix psi = max_coherent(m).density().mat();
  Matrix out = (1.0 - eps) * psi +
               (eps / double(m - 1)) * (Matrix::Identity(m, m) - psi);
  return HermitianOperator(std::move(out));
}

ExampleState example_state_from_name(const std::string& name) {
  if (name == "v1") return ExampleState::v1;
  if (name == "v2") return ExampleState::v2;
  if (name == "u1") return ExampleState::u1;
  if (name == "u2") return ExampleState::u2;
  if (name == "main_example") return ExampleState::main_example;
  if (name == "sudden_death_example") return ExampleState::sudden_death_example;
  throw std::invalid_argument("unknown example state: " + name);
}

PureState example_state(ExampleState name) {
  Vector a;
  switch (name) {
    case ExampleState::v1:
      a.resize(4);
      a << 0.5, -0.5, -0.5, 0.5;
      break;
    case ExampleState::v2: {
      const double c = 1.0 / (5.0 * std::sqrt(2.0));
      a.resize(4);
      a << 2.0 * c, 6.0 * c, -3.0 * c, 1.0 * c;
      break;
    }
    case ExampleState::u1:
      a.resize(4);
      a << 0.5, 0.5, 0.5, 0.5;
      break;
    case ExampleState::u2: {
      const double c = 1.0 / (3.0 * std::sqrt(2.0));
      a.resize(4);
      a << 3.0 * c, -2.0 * c, 1.0 * c, 2.0 * c;
      break;
    }
    case ExampleState::main_example: {
      const double c = 1.0 / std::sqrt(10.0);
      a.resize(2);
      a << 3.0 * c, 1.0 * c;
      break;
    }
    case ExampleState::sudden_death_example: {
      const double c = 1.0 / std::sqrt(10.0);
      a.resize(2);
      a << 1.0 * c, 3.0 * c;
      break;
    }
  }
  return PureState(std::move(a));
}

HermitianOperator random_density(int dim, int rank, std::uint64_t seed) {
  if (rank < 1 || rank > dim) {
    throw std::invalid_argument("random_density: rank out of range");
  }
  Rng rng(seed);
  Matrix g(dim, rank);
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j < rank; ++j) {
      g(i, j) = Complex(rng.gauss(), rng.gauss());
    }
  }
  Matrix rho = g * g.adjoint();
  rho /= rho.trace().real();
  // Truncate to the requested rank and floor the support eigenvalues.
  EighResult e = eigh(HermitianOperator(rho));
  RealVector lam = RealVector::Zero(dim);
  double total = 0.0;
  for (int i = 0; i < rank; ++i) {
    lam[dim - 1 - i] = std::max(e.eigenvalues[dim - 1 - i], 2e-3);
    total += lam[dim - 1 - i];
  }
  lam /= total;
  Matrix out = e.eigenvectors * lam.asDiagonal() * e.eigenvectors.adjoint();
  return HermitianOperator(std::move(out));
}

PureState random_pure(int dim, std::uint64_t seed) {
  Rng rng(seed);
  Vector a(dim);
  for (int i = 0; i < dim; ++i) a[i] = Complex(rng.gauss(), rng.gauss());
  a /= a.norm();
  return PureState(std::move(a));
}

PureState random_pure_real(int dim, std::uint64_t seed) {
  Rng rng(seed);
  Vector a(dim);
  for (int i = 0; i < dim; ++i) {
    double x = rng.gauss();
    if (std::abs(x) < 0.05) x = x < 0 ? x - 0.05 : x + 0.05;  // keep coefficients nonzero
    a[i] = Complex(x, 0.0);
  }
  a /= a.norm();
  return PureState(std::move(a));
}

}  // namespace coherdist
