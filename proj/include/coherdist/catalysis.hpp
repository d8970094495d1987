#pragma once

#include <memory>
#include <string>
#include <vector>

#include "coherdist/distill.hpp"
#include "coherdist/sdp.hpp"
#include "coherdist/states.hpp"

namespace coherdist::catalysis {

/// Catalyst-assisted distillation problem: input state rho (dimension d),
/// pure catalyst (dimension k), target dimension m, output infidelity eps,
/// and catalyst-return infidelity delta.
struct CatalysisInstance {
  CatalysisInstance(HermitianOperator rho_in, PureState catalyst_in, int m_in,
                    double eps_in, double delta_in);

  HermitianOperator rho;
  PureState catalyst;
  int m;
  double eps;
  double delta;
};

struct CatalysisResult {
  double probability = 0.0;   // assisted success probability
  double unassisted = 0.0;    // baseline without the catalyst
  double enhancement_ratio = 0.0;  // (probability - unassisted) / unassisted
  double gap = 0.0;
  double wall_time_ms = 0.0;
  distill::FreeClass cls = distill::FreeClass::DIO;
  /// Choi matrix of the optimal channel, input side d*k, output side 2*m*k
  /// (flag qubit x target x catalyst). Empty for trivial short-circuits.
  std::shared_ptr<const Matrix> choi;
};

/// Assisted probability with a maximally coherent catalyst Psi_k whose
/// returned copy is fixed to the symmetrized state Psi_k^delta. Optimizes
/// over the Choi matrix of the full channel
///   Pi(rho x Psi_k) = p |0><0| x Psi_m^eps x Psi_k^delta
///                   + (1-p) |1><1| x (1/m) x Psi_k^delta.
/// Throws std::invalid_argument unless the catalyst is maximally coherent,
/// std::length_error when the Choi side d*k*2*m*k exceeds 4096, and
/// std::runtime_error on solver failure.
CatalysisResult p_dio_catalytic_mc(const CatalysisInstance& inst,
                                   distill::FreeClass cls = distill::FreeClass::DIO,
                                   const sdp::SolveOptions& opts = {});

/// Assisted probability with a general pure catalyst gamma: jointly
/// optimizes the channel Choi matrix and the unnormalized output catalysts
/// V = p gamma_0, W = (1-p) gamma_1 subject to
///   Pi(rho x gamma) = |0><0| x Psi_m^eps x V + |1><1| x (1/m) x W,
///   tr V + tr W = 1,  tr(gamma V) >= (1-delta) tr V,
///   tr(gamma W) >= (1-delta) tr W;  objective max tr V.
CatalysisResult p_dio_catalytic_pure(const CatalysisInstance& inst,
                                     distill::FreeClass cls = distill::FreeClass::DIO,
                                     const sdp::SolveOptions& opts = {});

enum class Family { v_family, u_family };

std::string to_string(Family f);

/// The two-state mixture rho(q) of the example family: q |x1><x1| +
/// (1-q) |x2><x2| with (x1, x2) = (v1, v2) or (u1, u2).
HermitianOperator family_state(Family f, double q);

struct SweepCell {
  Family family;
  double q = 0.0;
  double delta = 0.0;
  double eps = 0.0;
  int m = 2;
  double p_assisted = 0.0;
  double p_unassisted = 0.0;
  double ratio = 0.0;
  double gap = 0.0;
  std::string status;  // "Optimal" or the per-cell failure message
};

struct SweepTable {
  std::vector<SweepCell> cells;
  std::vector<std::string> warnings;

  /// CSV with header family,q,delta,eps,m,p_assisted,p_unassisted,ratio,gap,status.
  std::string to_csv() const;
};

/// Grid sweep of assisted vs unassisted probability over (q, delta) for one
/// example family with a maximally coherent qubit catalyst. Per-cell solver
/// failures are recorded in the status column and the sweep continues.
/// Warns (in SweepTable::warnings) when q leaves the family's stated range
/// (v: [0.1, 0.5], u: [0.2, 0.7]).
SweepTable catalysis_sweep(Family family, const std::vector<double>& q_grid,
                           const std::vector<double>& delta_grid, int m = 2,
                           double eps = 0.01,
                           distill::FreeClass cls = distill::FreeClass::DIO,
                           const sdp::SolveOptions& opts = {});

struct ChannelReport {
  double psd_defect = 0.0;     // worst negative eigenvalue of the Choi matrix
  double tp_defect = 0.0;      // max |tr_B J - 1_A|
  double class_defect = 0.0;   // worst violated membership row
  double action_defect = 0.0;  // max |Pi(rho x Psi_k) - expected output|

  bool ok(double tol = 1e-7) const {
    return psd_defect <= tol && tp_defect <= tol && class_defect <= tol &&
           action_defect <= tol;
  }
};

/// Independent verification of an assisted protocol from the mc route:
/// recomputes trace preservation, membership rows, and the action defect
/// against p |0><0| x Psi_m^eps x Psi_k^delta + (1-p)|1><1| x (1/m) x Psi_k^delta.
ChannelReport verify_catalytic_channel(const CatalysisInstance& inst,
                                       const Matrix& choi, double p,
                                       distill::FreeClass cls);

}  // namespace coherdist::catalysis
