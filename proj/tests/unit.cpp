#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "coherdist/analytic.hpp"
#include "coherdist/catalysis.hpp"
#include "coherdist/cli.hpp"
#include "coherdist/distill.hpp"
#include "coherdist/linalg.hpp"
#include "coherdist/sdp.hpp"
#include "coherdist/states.hpp"

using namespace coherdist;

namespace {

double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

// Brute-force permutation average over all dim! basis permutations.
HermitianOperator twirl_brute(const HermitianOperator& h) {
  const int d = h.dim();
  std::vector<int> perm(d);
  std::iota(perm.begin(), perm.end(), 0);
  Matrix acc = Matrix::Zero(d, d);
  int count = 0;
  do {
    Matrix p = Matrix::Zero(d, d);
    for (int i = 0; i < d; ++i) p(perm[i], i) = 1.0;
    acc += p * h.mat() * p.adjoint();
    ++count;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return HermitianOperator(acc / double(count));
}

}  // namespace

TEST_CASE("twirl matches the brute-force permutation average") {
  const HermitianOperator rho = random_density(4, 4, 7);
  CHECK(max_abs(twirl(rho).mat() - twirl_brute(rho).mat()) < 1e-12);
}

TEST_CASE("tensor matches the elementwise Kronecker definition") {
  const HermitianOperator a = random_density(2, 2, 11);
  const HermitianOperator b = random_density(3, 3, 13);
  const HermitianOperator t = tensor(a, b);
  REQUIRE(t.dim() == 6);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l)
          CHECK(std::abs(t.mat()(i * 3 + k, j * 3 + l) -
                         a.mat()(i, j) * b.mat()(k, l)) < 1e-14);
}

TEST_CASE("partial trace matches direct index summation") {
  const HermitianOperator a = random_density(2, 2, 17);
  const HermitianOperator b = random_density(3, 3, 19);
  const HermitianOperator ab = tensor(a, b);
  CHECK(max_abs(partial_trace(ab, {2, 3}, 0).mat() - a.mat()) < 1e-12);
  CHECK(max_abs(partial_trace(ab, {2, 3}, 1).mat() - b.mat()) < 1e-12);
  // Summation oracle on a non-product operator.
  const HermitianOperator h = random_density(6, 6, 23);
  Matrix keep0 = Matrix::Zero(2, 2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 3; ++k) keep0(i, j) += h.mat()(i * 3 + k, j * 3 + k);
  CHECK(max_abs(partial_trace(h, {2, 3}, 0).mat() - keep0) < 1e-12);
}

TEST_CASE("eigh reconstructs the input with a unitary basis") {
  const HermitianOperator h = random_density(5, 3, 29);
  const EighResult e = eigh(h);
  const Matrix recon = e.eigenvectors * e.eigenvalues.asDiagonal().toDenseMatrix().cast<Complex>() *
                       e.eigenvectors.adjoint();
  CHECK(max_abs(recon - h.mat()) < 1e-12);
  CHECK(max_abs(e.eigenvectors.adjoint() * e.eigenvectors -
                Matrix::Identity(5, 5)) < 1e-12);
  for (int i = 0; i + 1 < 5; ++i) CHECK(e.eigenvalues[i] <= e.eigenvalues[i + 1]);
}

TEST_CASE("fidelity: identity, pure-state overlap, symmetry") {
  const HermitianOperator rho = random_density(3, 3, 31);
  CHECK(fidelity(rho, rho) == doctest::Approx(1.0).epsilon(1e-9));
  const PureState a = random_pure(3, 37);
  const PureState b = random_pure(3, 41);
  const double overlap = std::norm(a.amplitudes().dot(b.amplitudes()));
  CHECK(fidelity(a.density(), b.density()) == doctest::Approx(overlap).epsilon(1e-9));
  CHECK(fidelity(rho, a.density()) ==
        doctest::Approx(fidelity(a.density(), rho)).epsilon(1e-9));
}

TEST_CASE("dephase keeps the diagonal and kills the rest") {
  const HermitianOperator rho = random_density(4, 4, 43);
  const HermitianOperator d = dephase(rho);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      if (i == j) {
        CHECK(std::abs(d.mat()(i, i) - rho.mat()(i, i)) < 1e-14);
      } else {
        CHECK(std::abs(d.mat()(i, j)) < 1e-14);
      }
    }
  }
}

TEST_CASE("states: maximally coherent and smoothed targets") {
  const PureState psi = max_coherent(4);
  for (int i = 0; i < 4; ++i) {
    CHECK(std::abs(psi.amplitudes()[i] - 0.5) < 1e-14);
  }
  const HermitianOperator t = smoothed_target(3, 0.2);
  CHECK(t.trace() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fidelity(t, max_coherent(3).density()) == doctest::Approx(0.8).epsilon(1e-6));
  CHECK(eigh(t).eigenvalues.minCoeff() >= -1e-12);
}

TEST_CASE("states: seeded generators are deterministic and valid") {
  const HermitianOperator a = random_density(4, 2, 99);
  const HermitianOperator b = random_density(4, 2, 99);
  CHECK(max_abs(a.mat() - b.mat()) == 0.0);
  CHECK(a.trace() == doctest::Approx(1.0).epsilon(1e-12));
  const EighResult e = eigh(a);
  CHECK(e.eigenvalues.minCoeff() >= -1e-12);
  int support = 0;
  for (int i = 0; i < 4; ++i) {
    if (e.eigenvalues[i] > 1e-6) ++support;
  }
  CHECK(support == 2);
  CHECK(max_abs(random_pure(5, 3).amplitudes().matrix() -
                random_pure(5, 3).amplitudes().matrix()) == 0.0);
}

TEST_CASE("instance validation rejects bad inputs") {
  const HermitianOperator rho = max_coherent(2).density();
  CHECK_THROWS_AS(DistillationInstance(rho, 1, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(DistillationInstance(rho, 2, -0.1), std::invalid_argument);
  CHECK_THROWS_AS(DistillationInstance(rho, 2, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(HermitianOperator(Matrix::Ones(2, 2) * Complex(0, 1)),
                  std::invalid_argument);
}

TEST_CASE("sdp: largest-eigenvalue program matches eigh") {
  for (const std::uint64_t seed : {51u, 52u}) {
    const HermitianOperator k = random_density(4, 4, seed);
    sdp::ConicProgram p;
    const int blk = p.add_psd_block(4);
    p.obj_herm(blk, k.mat(), 1.0);
    const int row = p.new_constraint(1.0);
    p.cons_herm(row, blk, Matrix::Identity(4, 4), 1.0);
    const sdp::ConicSolution sol = sdp::solve(p);
    REQUIRE(sol.status == sdp::SolveStatus::Optimal);
    const double lmax = eigh(k).eigenvalues.maxCoeff();
    CHECK(sol.primal_value == doctest::Approx(lmax).epsilon(1e-7));
    const sdp::CertificateReport rep = sdp::check_certificate(p, sol);
    CHECK(rep.primal_residual < 1e-7);
    CHECK(rep.dual_residual < 1e-7);
    CHECK(rep.gap < 1e-7);
  }
}

TEST_CASE("sdp: the certificate checker flags a perturbed solution") {
  sdp::ConicProgram p;
  const int blk = p.add_psd_block(3);
  const HermitianOperator k = random_density(3, 3, 61);
  p.obj_herm(blk, k.mat(), 1.0);
  const int row = p.new_constraint(1.0);
  p.cons_herm(row, blk, Matrix::Identity(3, 3), 1.0);
  sdp::ConicSolution sol = sdp::solve(p);
  REQUIRE(sol.status == sdp::SolveStatus::Optimal);
  sol.X[blk](0, 0) += 1e-3;
  const sdp::CertificateReport rep = sdp::check_certificate(p, sol);
  CHECK(rep.primal_residual >= 1e-4);
}

TEST_CASE("sdp: Hermitian embedding doubles each eigenvalue") {
  const HermitianOperator h = random_density(3, 3, 67);
  const Eigen::MatrixXd e = sdp::embed_matrix(h.mat());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(e);
  const RealVector lam = eigh(h).eigenvalues;
  for (int i = 0; i < 3; ++i) {
    CHECK(es.eigenvalues()[2 * i] == doctest::Approx(lam[i]).epsilon(1e-10));
    CHECK(es.eigenvalues()[2 * i + 1] == doctest::Approx(lam[i]).epsilon(1e-10));
  }
}

TEST_CASE("sdp: dump_json is valid JSON with the documented fields") {
  sdp::ConicProgram p;
  const int blk = p.add_psd_block(2);
  p.obj_entry(blk, 0, 1, Complex(0.5, 0.25));
  const int row = p.new_constraint(1.0);
  p.cons_re(row, blk, 0, 0, 1.0);
  const nlohmann::json j = nlohmann::json::parse(p.dump_json());
  REQUIRE(j.contains("blocks"));
  REQUIRE(j.contains("objective"));
  REQUIRE(j.contains("constraints"));
  REQUIRE(j.contains("b"));
  CHECK(j["constraints"].size() == 1);
  CHECK(j["b"][0].get<double>() == 1.0);
  // Row-major dense entries as [re, im] pairs.
  CHECK(j["objective"][0]["entries"][1][0].get<double>() == 0.5);
  CHECK(j["objective"][0]["entries"][1][1].get<double>() == 0.25);
}

TEST_CASE("distill: all routes agree on a mixed state") {
  const HermitianOperator rho = random_density(3, 2, 71);
  const DistillationInstance inst(rho, 2, 0.3);
  const double pm = distill::p_mio(inst).probability;
  const double pd = distill::p_dio(inst).probability;
  CHECK(distill::p_mio_dual(inst).probability == doctest::Approx(pm).epsilon(1e-6));
  CHECK(distill::p_dio_dual(inst).probability == doctest::Approx(pd).epsilon(1e-6));
  CHECK(distill::p_dio(inst, {}, true).probability == doctest::Approx(pd).epsilon(1e-6));
  const HermitianOperator target = smoothed_target(2, 0.3);
  CHECK(distill::p_exact_choi(rho, target, distill::FreeClass::MIO).probability ==
        doctest::Approx(pm).epsilon(1e-6));
  CHECK(distill::p_exact_choi(rho, target, distill::FreeClass::DIO).probability ==
        doctest::Approx(pd).epsilon(1e-6));
  CHECK(pm >= pd - 1e-7);  // MIO is the larger class
}

TEST_CASE("distill: probability is monotone in eps and clamped to [0, 1]") {
  const PureState psi = random_pure(3, 73);
  double prev = -1.0;
  for (const double eps : {0.0, 0.1, 0.2, 0.4, 0.6}) {
    const DistillationInstance inst(psi.density(), 3, eps);
    const double p = distill::p_dio(inst).probability;
    CHECK(p >= prev - 1e-7);
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
    prev = p;
  }
  const DistillationInstance trivial(psi.density(), 2, 0.5);
  CHECK(distill::p_mio(trivial).trivial_regime);
  CHECK(distill::p_mio(trivial).probability == 1.0);
}

TEST_CASE("distill: extracted protocol passes the independent checks") {
  const HermitianOperator rho = random_density(3, 2, 79);
  const DistillationInstance inst(rho, 2, 0.25);
  for (const bool mio : {true, false}) {
    const distill::DistillationResult r =
        mio ? distill::p_mio(inst) : distill::p_dio(inst);
    REQUIRE(r.G.has_value());
    REQUIRE(r.C.has_value());
    const distill::ChoiMatrix choi = distill::extract_protocol(
        inst, HermitianOperator(*r.G), HermitianOperator(*r.C));
    const distill::ProtocolReport rep = distill::verify_protocol(
        choi, r.cls, rho, r.probability, smoothed_target(2, 0.25));
    CHECK(rep.pass(1e-6));
  }
}

TEST_CASE("distill: apply_channel matches a hand-built Choi matrix") {
  // Identity channel on dimension 2: J[(i,a),(j,b)] = delta_{ia} delta_{jb}.
  Matrix j = Matrix::Zero(4, 4);
  for (int i = 0; i < 2; ++i)
    for (int k = 0; k < 2; ++k) j(i * 2 + i, k * 2 + k) = 1.0;
  const distill::ChoiMatrix choi{2, 2, HermitianOperator(j)};
  const HermitianOperator rho = random_density(2, 2, 83);
  CHECK(max_abs(distill::apply_channel(choi, rho).mat() - rho.mat()) < 1e-12);
}

TEST_CASE("analytic: pure-state formula on explicit amplitudes") {
  // Amplitudes (squared): 0.7, 0.2, 0.06, 0.04.
  Vector a(4);
  a << std::sqrt(0.7), std::sqrt(0.2), std::sqrt(0.06), std::sqrt(0.04);
  const analytic::SortedAmplitudes s =
      analytic::normalize_amplitudes(PureState(a));
  // m = 2: min over k in {1, 2} of (2/k) * sum_{i > m-k} a_i^2 (1-based,
  // nonincreasing): k=1 gives 2*(0.2+0.06+0.04) = 0.6, k=2 gives 1.
  CHECK(analytic::p_sio_pure(s, 2) == doctest::Approx(0.6).epsilon(1e-12));
  // m = 3: k=1 -> 3*0.1, k=2 -> 1.5*0.3, k=3 -> 1.
  CHECK(analytic::p_sio_pure(s, 3) == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(analytic::p_sio_pure(s, 5) == 0.0);  // more levels than the input has
}

TEST_CASE("analytic: qubit-target formula at the documented points") {
  const analytic::SortedAmplitudes s = analytic::normalize_amplitudes(
      example_state(ExampleState::main_example));
  CHECK(analytic::p_qubit_target(s, 0.1).probability ==
        doctest::Approx(0.5).epsilon(1e-12));
  CHECK(analytic::p_qubit_target(s, 0.2).probability ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(analytic::p_qubit_target(s, 0.6).trivial_regime);
}

TEST_CASE("analytic: feasibility trichotomy") {
  using analytic::DioFeasibility;
  CHECK(analytic::dio_threshold(2, 3, 0.2) == DioFeasibility::Zero);
  CHECK(analytic::dio_threshold(2, 3, 1.0 / 3.0) == DioFeasibility::Positive);
  CHECK(analytic::dio_threshold(2, 3, 1.0 / 3.0, true) == DioFeasibility::One);
  CHECK(analytic::dio_threshold(4, 3, 0.0) == DioFeasibility::Positive);
}

TEST_CASE("analytic: lower-bound closed form for uniform inputs") {
  for (int n = 2; n <= 5; ++n) {
    const analytic::SortedAmplitudes s =
        analytic::normalize_amplitudes(max_coherent(n));
    for (int m = n + 1; m <= 7; ++m) {
      const analytic::MioPureBounds b = analytic::mio_pure_lower_bound(s, m);
      CHECK(b.tight == doctest::Approx(double(n - 1) / (m - 1)).epsilon(1e-10));
      CHECK(b.weak <= b.tight + 1e-12);
      CHECK(b.weak > 0.0);
    }
  }
}

TEST_CASE("catalysis: assisted value dominates the baseline on a small case") {
  const HermitianOperator rho = example_state(ExampleState::main_example).density();
  const catalysis::CatalysisInstance inst{rho, max_coherent(2), 2, 0.1, 0.0};
  const catalysis::CatalysisResult r = catalysis::p_dio_catalytic_mc(inst);
  CHECK(r.unassisted == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(r.probability >= r.unassisted - 1e-6);
  const catalysis::ChannelReport rep = catalysis::verify_catalytic_channel(
      inst, *r.choi, r.probability, distill::FreeClass::DIO);
  CHECK(rep.ok(1e-7));
}

TEST_CASE("catalysis: input validation") {
  const HermitianOperator rho = example_state(ExampleState::main_example).density();
  Vector skew(2);
  skew << 0.8, 0.6;
  CHECK_THROWS_AS(catalysis::p_dio_catalytic_mc(
                      {rho, PureState(skew), 2, 0.1, 0.0}),
                  std::invalid_argument);
  CHECK_THROWS_AS((catalysis::CatalysisInstance{rho, max_coherent(2), 2, 0.1, -0.1}),
                  std::invalid_argument);
  CHECK_THROWS_AS(catalysis::p_dio_catalytic_mc(
                      {random_density(16, 16, 5), max_coherent(16), 16, 0.1, 0.0}),
                  std::length_error);
}

TEST_CASE("catalysis: sweep table format and range warnings") {
  const catalysis::SweepTable t =
      catalysis::catalysis_sweep(catalysis::Family::v_family, {0.05}, {0.0});
  REQUIRE(t.cells.size() == 1);
  CHECK(t.warnings.size() == 1);
  const std::string csv = t.to_csv();
  CHECK(csv.rfind("family,q,delta,eps,m,p_assisted,p_unassisted,ratio,gap,status\n",
                  0) == 0);
}

TEST_CASE("cli: numbers and fractions parse exactly") {
  CHECK(cli::parse_number("0.25") == 0.25);
  CHECK(cli::parse_number("1/3") == 1.0 / 3.0);
  CHECK(cli::parse_number(" 2/5 ") == 0.4);
  CHECK_THROWS_AS(cli::parse_number("abc"), std::invalid_argument);
  CHECK_THROWS_AS(cli::parse_number("1/0"), std::invalid_argument);
  CHECK_THROWS_AS(cli::parse_number("1.0x"), std::invalid_argument);
}

TEST_CASE("cli: grid parsing") {
  const std::vector<double> list = cli::parse_grid("0.1,1/3,0.5");
  REQUIRE(list.size() == 3);
  CHECK(list[1] == 1.0 / 3.0);
  const std::vector<double> range = cli::parse_grid("0.2..0.7:0.1");
  REQUIRE(range.size() == 6);
  CHECK(range.front() == 0.2);
  CHECK(range.back() == 0.7);
  CHECK_THROWS_AS(cli::parse_grid("0.5..0.1:0.1"), std::invalid_argument);
  CHECK_THROWS_AS(cli::parse_grid("0.1..0.5"), std::invalid_argument);
  CHECK_THROWS_AS(cli::parse_grid(""), std::invalid_argument);
}

TEST_CASE("cli: worker pool covers every index exactly once") {
  std::vector<int> hits(257, 0);
  cli::run_indexed(257, 4, [&](int i) { hits[i] += 1; });
  for (const int h : hits) CHECK(h == 1);
}

TEST_CASE("cli: thread count env override") {
  setenv("COHERDIST_THREADS", "3", 1);
  CHECK(cli::thread_count(8) == 3);
  unsetenv("COHERDIST_THREADS");
  CHECK(cli::thread_count(8) == 8);
}

TEST_CASE("cli: density JSON round-trip and validation") {
  const HermitianOperator rho = random_density(2, 2, 91);
  nlohmann::json j;
  j["dim"] = 2;
  nlohmann::json entries = nlohmann::json::array();
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 2; ++c) {
      entries.push_back({rho.mat()(r, c).real(), rho.mat()(r, c).imag()});
    }
  }
  j["entries"] = entries;
  const std::string path = "/tmp/coherdist_unit_density.json";
  { std::ofstream(path) << j.dump(); }
  const HermitianOperator loaded = cli::load_density_json(path);
  CHECK(max_abs(loaded.mat() - rho.mat()) < 1e-12);
  // Non-Hermitian, wrong trace and non-PSD inputs are rejected.
  j["entries"][1] = {5.0, 0.0};
  { std::ofstream(path) << j.dump(); }
  CHECK_THROWS_AS(cli::load_density_json(path), std::invalid_argument);
  j["entries"][1] = {0.0, 0.0};
  j["entries"][2] = {0.0, 0.0};
  j["entries"][0] = {2.0, 0.0};
  { std::ofstream(path) << j.dump(); }
  CHECK_THROWS_AS(cli::load_density_json(path), std::invalid_argument);
  std::remove(path.c_str());
  CHECK_THROWS_AS(cli::load_density_json(path), std::runtime_error);
}

TEST_CASE("cli: sweep CSV is byte-stable and hits the documented values") {
  const HermitianOperator rho = example_state(ExampleState::main_example).density();
  const cli::SweepResult a = cli::sweep(rho, distill::FreeClass::MIO, 2, {0.1, 0.2});
  const cli::SweepResult b = cli::sweep(rho, distill::FreeClass::MIO, 2, {0.1, 0.2});
  CHECK(a.to_csv() == b.to_csv());
  CHECK(a.to_csv().rfind("fidelity,eps,class,m,probability,gap,status\n", 0) == 0);
  REQUIRE(a.rows.size() == 2);
  CHECK(a.rows[0].probability == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(a.rows[1].probability == doctest::Approx(1.0).epsilon(1e-6));
  CHECK_FALSE(a.all_failed());
}
