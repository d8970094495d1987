#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <map>
#include <ostream>
#include <vector>

#include "coherdist/analytic.hpp"
#include "coherdist/catalysis.hpp"
#include "coherdist/cli.hpp"
#include "coherdist/distill.hpp"
#include "coherdist/states.hpp"

namespace coherdist::cli {

namespace {

using distill::DistillationResult;
using distill::FreeClass;

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

/// Accumulates solver-health and protocol-soundness evidence from every
/// instance the suite solves, for the two summary criteria.
struct Recorder {
  double worst_gap = 0.0;
  double worst_residual = 0.0;
  int solves = 0;
  double worst_protocol = 0.0;
  int protocols = 0;
  int protocol_failures = 0;

  void health(const DistillationResult& r) {
    if (!r.program || !r.certificate) return;  // closed-form short-circuit
    ++solves;
    worst_gap = std::max(worst_gap, r.gap);
    const sdp::CertificateReport rep =
        sdp::check_certificate(*r.program, *r.certificate);
    worst_gap = std::max(worst_gap, rep.gap);
    worst_residual = std::max({worst_residual, rep.primal_residual,
                               rep.dual_residual, rep.psd_defect});
  }

  void protocol(const DistillationInstance& inst, const DistillationResult& r) {
    if (!r.G || !r.C) return;
    ++protocols;
    try {
      const distill::ChoiMatrix choi = distill::extract_protocol(
          inst, HermitianOperator(*r.G), HermitianOperator(*r.C));
      const distill::ProtocolReport rep = distill::verify_protocol(
          choi, r.cls, inst.rho, r.probability,
          smoothed_target(inst.m, inst.eps));
      worst_protocol =
          std::max({worst_protocol, rep.psd_defect, rep.marginal_defect,
                    rep.class_defect, rep.action_defect});
      if (!rep.pass(1e-6)) ++protocol_failures;
    } catch (const std::exception&) {
      ++protocol_failures;
    }
  }
};

struct Suite {
  std::ostream& out;
  const VerifyConfig& cfg;
  Recorder rec;
  int failures = 0;
  std::map<int, std::string> lines;  // printed in criterion order at the end

  void report(int criterion, bool pass, const std::string& detail,
              double seconds) {
    char buf[512];
    std::snprintf(buf, sizeof(buf), "criterion %2d: %s  %s (%.2f s)\n",
                  criterion, pass ? "PASS" : "FAIL", detail.c_str(), seconds);
    lines[criterion] = buf;
    if (!pass) ++failures;
  }

  void skip(int criterion, const std::string& why) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "criterion %2d: SKIP  %s\n", criterion,
                  why.c_str());
    lines[criterion] = buf;
  }

  static std::string fmt(const char* f, ...) {
    char buf[448];
    va_list args;
    va_start(args, f);
    std::vsnprintf(buf, sizeof(buf), f, args);
    va_end(args);
    return buf;
  }
};

// The fixed pure-state pool shared by the random-state criteria.
std::vector<PureState> pure_pool(std::uint64_t seed) {
  std::vector<PureState> pool;
  for (int i = 0; i < 20; ++i) {
    const int dim = 2 + i % 5;  // dims 2..6
    pool.push_back(random_pure(dim, seed + 101 + i));
  }
  return pool;
}

void criterion_1_2(Suite& s) {
  double t0 = now_seconds();
  const HermitianOperator rho =
      example_state(ExampleState::main_example).density();
  const DistillationInstance inst(rho, 2, 0.1);
  const DistillationResult mio = distill::p_mio(inst);
  const DistillationResult dio = distill::p_dio(inst);
  const DistillationResult mio_d = distill::p_mio_dual(inst);
  const DistillationResult dio_d = distill::p_dio_dual(inst);
  const HermitianOperator target = smoothed_target(2, 0.1);
  const DistillationResult mio_c =
      distill::p_exact_choi(rho, target, FreeClass::MIO);
  const DistillationResult dio_c =
      distill::p_exact_choi(rho, target, FreeClass::DIO);
  for (const DistillationResult* r :
       {&mio, &dio, &mio_d, &dio_d, &mio_c, &dio_c}) {
    s.rec.health(*r);
  }
  s.rec.protocol(inst, mio);
  s.rec.protocol(inst, dio);
  const double worst = std::max(
      {std::abs(mio.probability - 0.5), std::abs(dio.probability - 0.5),
       std::abs(mio_d.probability - 0.5), std::abs(dio_d.probability - 0.5),
       std::abs(mio_c.probability - 0.5), std::abs(dio_c.probability - 0.5)});
  double secs = now_seconds() - t0;
  s.report(1, worst <= 1e-6 && secs < 1.0,
           Suite::fmt("six routes at eps=0.1, worst |p - 1/2| = %.2e", worst),
           secs);

  t0 = now_seconds();
  const DistillationInstance inst2(rho, 2, 0.2);
  const DistillationResult mio2 = distill::p_mio(inst2);
  s.rec.health(mio2);
  s.rec.protocol(inst2, mio2);
  const double dev1 = std::abs(mio2.probability - 1.0);
  const double dev2 = std::abs(mio.probability - 0.5);
  secs = now_seconds() - t0;
  s.report(2, dev1 <= 1e-6 && dev2 <= 1e-6,
           Suite::fmt("threshold 0.2: |p(0.2) - 1| = %.2e, |p(0.1) - 1/2| = %.2e",
                      dev1, dev2),
           secs);
}

void criterion_3(Suite& s) {
  const double t0 = now_seconds();
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const int dim = 2 + i % 4;  // dims 2..5
    const PureState psi = random_pure(dim, s.cfg.seed + 11 + i);
    const analytic::SortedAmplitudes amps = analytic::normalize_amplitudes(psi);
    for (int e = 0; e < 10; ++e) {
      const double eps = 0.05 * e;
      const double expected = analytic::p_qubit_target(amps, eps).probability;
      const DistillationInstance inst(psi.density(), 2, eps);
      const DistillationResult mio = distill::p_mio(inst);
      const DistillationResult dio = distill::p_dio(inst);
      s.rec.health(mio);
      s.rec.health(dio);
      s.rec.protocol(inst, mio);
      s.rec.protocol(inst, dio);
      worst = std::max({worst, std::abs(mio.probability - expected),
                        std::abs(dio.probability - expected)});
    }
  }
  const double secs = now_seconds() - t0;
  s.report(3, worst <= 1e-6 && secs < 30.0,
           Suite::fmt("qubit-target formula on 20 states x 10 eps, worst dev = %.2e",
                      worst),
           secs);
}

void criterion_4(Suite& s, const std::vector<PureState>& pool) {
  const double t0 = now_seconds();
  double worst = 0.0;
  for (const PureState& psi : pool) {
    const analytic::SortedAmplitudes amps = analytic::normalize_amplitudes(psi);
    for (int m = 2; m <= 6; ++m) {
      const double expected = analytic::p_sio_pure(amps, m);
      const DistillationInstance inst(psi.density(), m, 0.0);
      const DistillationResult dio = distill::p_dio(inst);
      s.rec.health(dio);
      s.rec.protocol(inst, dio);
      worst = std::max(worst, std::abs(dio.probability - expected));
    }
  }
  const double secs = now_seconds() - t0;
  s.report(4, worst <= 1e-6 && secs < 60.0,
           Suite::fmt("zero-error DIO equals the pure-state formula, worst dev = %.2e",
                      worst),
           secs);
}

void criterion_5(Suite& s) {
  const double t0 = now_seconds();
  double worst_primal = 0.0, worst_dual = 0.0;
  for (int i = 0; i < 10; ++i) {
    const int dim = 2 + i % 4;  // dims 2..5
    const HermitianOperator rho = random_density(dim, dim, s.cfg.seed + 301 + i);
    for (int m = 2; m <= 3; ++m) {
      const DistillationInstance inst(rho, m, 0.0);
      for (FreeClass cls : {FreeClass::MIO, FreeClass::DIO}) {
        const DistillationResult primal = cls == FreeClass::MIO
                                              ? distill::p_mio(inst)
                                              : distill::p_dio(inst);
        const DistillationResult dual = cls == FreeClass::MIO
                                            ? distill::p_mio_dual(inst)
                                            : distill::p_dio_dual(inst);
        s.rec.health(primal);
        s.rec.health(dual);
        worst_primal = std::max(worst_primal, primal.probability);
        worst_dual = std::max(worst_dual, dual.raw_value);
      }
    }
  }
  const double secs = now_seconds() - t0;
  s.report(5, worst_primal <= 1e-7 && worst_dual <= 1e-7 && secs < 30.0,
           Suite::fmt("full-rank inputs: worst primal = %.2e, worst dual bound = %.2e",
                      worst_primal, worst_dual),
           secs);
}

void criterion_6(Suite& s, const std::vector<PureState>& pool) {
  const double t0 = now_seconds();
  bool ok = true;
  double worst_margin = 1.0;
  for (const PureState& psi : pool) {
    const analytic::SortedAmplitudes amps = analytic::normalize_amplitudes(psi);
    for (int m = 2; m <= 8; ++m) {
      const analytic::MioPureBounds bounds = analytic::mio_pure_lower_bound(amps, m);
      const DistillationInstance inst(psi.density(), m, 0.0);
      const DistillationResult mio = distill::p_mio(inst);
      s.rec.health(mio);
      s.rec.protocol(inst, mio);
      if (!(mio.probability >= bounds.tight - 1e-6 &&
            bounds.tight >= bounds.weak - 1e-6 && bounds.weak > 0.0)) {
        ok = false;
      }
      worst_margin = std::min(worst_margin, mio.probability - bounds.tight);
    }
  }
  // Closed form for maximally coherent inputs below the target dimension.
  double worst_closed = 0.0;
  for (int n = 2; n <= 7; ++n) {
    for (int m = n + 1; m <= 8; ++m) {
      const analytic::SortedAmplitudes amps =
          analytic::normalize_amplitudes(max_coherent(n));
      const analytic::MioPureBounds bounds = analytic::mio_pure_lower_bound(amps, m);
      worst_closed = std::max(
          worst_closed, std::abs(bounds.tight - double(n - 1) / double(m - 1)));
    }
  }
  const DistillationInstance psi23(max_coherent(2).density(), 3, 0.0);
  const DistillationResult mio23 = distill::p_mio(psi23);
  s.rec.health(mio23);
  s.rec.protocol(psi23, mio23);
  const bool special = mio23.probability >= 0.5 - 1e-6;
  const double secs = now_seconds() - t0;
  s.report(6,
           ok && worst_closed <= 1e-9 && special,
           Suite::fmt("bounds hold, min(p - tight) = %.2e, closed-form dev = %.2e, "
                      "p(2->3) = %.6f",
                      worst_margin, worst_closed, mio23.probability),
           secs);
}

void criterion_7(Suite& s) {
  const double t0 = now_seconds();
  const HermitianOperator rho =
      example_state(ExampleState::sudden_death_example).density();
  double worst_zero = 0.0, worst_dual = 0.0;
  for (const double eps : {0.30, 0.32}) {
    const DistillationInstance inst(rho, 3, eps);
    const DistillationResult dio = distill::p_dio(inst);
    const DistillationResult dual = distill::p_dio_dual(inst);
    s.rec.health(dio);
    s.rec.health(dual);
    s.rec.protocol(inst, dio);
    worst_zero = std::max(worst_zero, dio.probability);
    worst_dual = std::max(worst_dual, dual.raw_value);
  }
  const double third = parse_number("1/3");
  const DistillationInstance inst3(rho, 3, third);
  const DistillationResult at_third = distill::p_dio(inst3);
  s.rec.health(at_third);
  s.rec.protocol(inst3, at_third);
  const SweepResult sw = sweep(
      rho, FreeClass::DIO, 3,
      {0.30, 0.31, 0.32, third, 0.35, 0.40, 0.45, 0.50, 0.55, 0.60});
  bool monotone = true;
  for (size_t i = 0; i + 1 < sw.rows.size(); ++i) {
    if (sw.rows[i].status != "Optimal" || sw.rows[i + 1].status != "Optimal" ||
        sw.rows[i + 1].probability < sw.rows[i].probability - 1e-6) {
      monotone = false;
    }
  }
  const double secs = now_seconds() - t0;
  s.report(7,
           worst_zero <= 1e-7 && worst_dual <= 1e-7 &&
               at_third.probability >= 0.01 && monotone && secs < 10.0,
           Suite::fmt("sudden death: p<=%.1e below 1/3, dual<=%.1e, p(1/3) = %.4f, "
                      "sweep monotone = %d",
                      worst_zero, worst_dual, at_third.probability, monotone),
           secs);
}

void criterion_8(Suite& s) {
  const double t0 = now_seconds();
  const HermitianOperator rho = max_coherent(2).density();
  const double third = parse_number("1/3");
  double worst_one = 0.0, worst_zero = 0.0;
  for (const double eps : {third, 0.4}) {
    const DistillationInstance inst(rho, 3, eps);
    const DistillationResult dio = distill::p_dio(inst);
    s.rec.health(dio);
    s.rec.protocol(inst, dio);
    worst_one = std::max(worst_one, std::abs(dio.probability - 1.0));
  }
  for (const double eps : {0.2, 0.3}) {
    const DistillationInstance inst(rho, 3, eps);
    const DistillationResult dio = distill::p_dio(inst);
    s.rec.health(dio);
    s.rec.protocol(inst, dio);
    worst_zero = std::max(worst_zero, dio.probability);
  }
  const double secs = now_seconds() - t0;
  s.report(8, worst_one <= 1e-6 && worst_zero <= 1e-7 && secs < 5.0,
           Suite::fmt("qubit to qutrit: |p - 1| = %.2e above 1/3, p = %.2e below",
                      worst_one, worst_zero),
           secs);
}

void criterion_9(Suite& s) {
  if (!s.cfg.full) {
    s.skip(9, "catalysis sweep runs with --full");
    return;
  }
  const double t0 = now_seconds();
  using catalysis::Family;
  const HermitianOperator rho = catalysis::family_state(Family::v_family, 0.5);
  const catalysis::CatalysisInstance headline{rho, max_coherent(2), 2, 0.01, 0.0};
  bool ok = true;
  double ratio = 0.0;
  try {
    const catalysis::CatalysisResult r = catalysis::p_dio_catalytic_mc(headline);
    ratio = r.enhancement_ratio;
    ok = ratio >= 0.115;
    const catalysis::ChannelReport rep = catalysis::verify_catalytic_channel(
        headline, *r.choi, r.probability, FreeClass::DIO);
    ok = ok && rep.ok(1e-7);
  } catch (const std::exception&) {
    ok = false;
  }
  const std::vector<double> deltas = {0.0, 0.005, 0.01};
  int cells = 0;
  bool invariants = true;
  for (const Family fam : {Family::v_family, Family::u_family}) {
    const std::vector<double> qs = fam == Family::v_family
                                       ? parse_grid("0.1..0.5:0.1")
                                       : parse_grid("0.2..0.7:0.1");
    const catalysis::SweepTable table = catalysis::catalysis_sweep(fam, qs, deltas);
    cells += static_cast<int>(table.cells.size());
    for (const auto& cell : table.cells) {
      if (cell.status != "Optimal" || cell.ratio < -1e-6) invariants = false;
    }
    // delta-monotonicity at fixed q (cells ordered q-major, delta-minor).
    for (size_t i = 0; i < table.cells.size(); ++i) {
      if (i % deltas.size() == 0) continue;
      if (table.cells[i].p_assisted <
          table.cells[i - 1].p_assisted - 1e-6) {
        invariants = false;
      }
    }
  }
  const double secs = now_seconds() - t0;
  s.report(9, ok && invariants && secs < 600.0,
           Suite::fmt("catalysis: headline ratio = %.4f, %d sweep cells, "
                      "invariants = %d",
                      ratio, cells, invariants),
           secs);
}

void criterion_10_11(Suite& s) {
  s.report(10,
           s.rec.protocols > 0 && s.rec.protocol_failures == 0 &&
               s.rec.worst_protocol <= 1e-6,
           Suite::fmt("%d protocols extracted and verified, worst defect = %.2e",
                      s.rec.protocols, s.rec.worst_protocol),
           0.0);
  s.report(11,
           s.rec.solves > 0 && s.rec.worst_gap <= 1e-7 &&
               s.rec.worst_residual <= 1e-7,
           Suite::fmt("%d solves, worst gap = %.2e, worst certificate residual = %.2e",
                      s.rec.solves, s.rec.worst_gap, s.rec.worst_residual),
           0.0);
}

void criterion_12(Suite& s) {
  const double t0 = now_seconds();
  double worst = 0.0;
  for (const double delta : {1e-1, 1e-2, 1e-3}) {
    const DistillationInstance inst(smoothed_target(2, delta), 2, 0.0);
    const DistillationResult mio = distill::p_mio(inst);
    s.rec.health(mio);
    worst = std::max(worst, mio.probability);
  }
  const DistillationInstance exact(max_coherent(2).density(), 2, 0.0);
  const DistillationResult mio1 = distill::p_mio(exact);
  s.rec.health(mio1);
  const double dev_one = std::abs(mio1.probability - 1.0);
  const double secs = now_seconds() - t0;
  s.report(12, worst <= 1e-7 && dev_one <= 1e-6,
           Suite::fmt("smoothed inputs give p = %.2e while the exact input gives "
                      "|p - 1| = %.2e",
                      worst, dev_one),
           secs);
}

}  // namespace

int run_verification(const VerifyConfig& cfg, std::ostream& out) {
  Suite s{out, cfg, {}, 0, {}};
  const std::vector<PureState> pool = pure_pool(cfg.seed);
  criterion_1_2(s);
  criterion_3(s);
  criterion_4(s, pool);
  criterion_5(s);
  criterion_6(s, pool);
  criterion_7(s);
  criterion_8(s);
  criterion_9(s);
  criterion_12(s);
  criterion_10_11(s);
  for (const auto& [num, line] : s.lines) out << line;
  out.flush();
  return s.failures;
}

}  // namespace coherdist::cli
