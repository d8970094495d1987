#pragma once

#include <memory>
#include <optional>
#include <string>

#include "coherdist/linalg.hpp"
#include "coherdist/sdp.hpp"
#include "coherdist/states.hpp"

namespace coherdist::distill {

enum class FreeClass { MIO, DIO };
enum class Route { CompactPrimal, Dual, Choi };

std::string to_string(FreeClass c);
std::string to_string(Route r);

/// Optimal success probability with its certificate. `probability` is
/// clamped to [0, 1]; `raw_value` keeps the solver optimum.
struct DistillationResult {
  double probability = 0.0;
  double raw_value = 0.0;
  FreeClass cls = FreeClass::MIO;
  Route route = Route::CompactPrimal;
  double gap = 0.0;
  bool trivial_regime = false;
  double wall_time_ms = 0.0;
  std::shared_ptr<sdp::ConicProgram> program;
  std::shared_ptr<sdp::ConicSolution> certificate;
  // Optimal (G, C) of the compact primal, when that route was solved.
  std::optional<Matrix> G, C;

  std::string status() const;
  /// {class, route, d, m, eps, probability, gap, status, wall_time_ms}
  std::string to_json(int d, int m, double eps) const;
};

/// Compact primal for MIO: max tr G rho over Hermitian G, C with
/// Delta(G) = m Delta(C), 0 <= C <= G <= 1, tr C rho >= (1-eps) tr G rho.
DistillationResult p_mio(const DistillationInstance& inst,
                         const sdp::SolveOptions& opts = {});

/// DIO primal. The default eliminates G (variable C only, G = m Delta(C));
/// use_gc_form keeps the explicit diagonal G for cross-checking.
DistillationResult p_dio(const DistillationInstance& inst,
                         const sdp::SolveOptions& opts = {},
                         bool use_gc_form = false);

// Lagrange duals (minimization side); equal to the primal by strong duality.
DistillationResult p_mio_dual(const DistillationInstance& inst,
                              const sdp::SolveOptions& opts = {});
DistillationResult p_dio_dual(const DistillationInstance& inst,
                              const sdp::SolveOptions& opts = {});

/// Full Choi-level program: max p with E(rho) = p * target over subnormalized
/// operations E in the chosen class.
DistillationResult p_exact_choi(const HermitianOperator& rho,
                                const HermitianOperator& target, FreeClass cls,
                                const sdp::SolveOptions& opts = {});

/// Choi matrix with input/output dimensions; J[(i,a),(j,b)] indexing with
/// the input index major.
struct ChoiMatrix {
  int d_in;
  int d_out;
  HermitianOperator j;
};

/// tr_A J (rho^T x 1): the channel action on rho.
HermitianOperator apply_channel(const ChoiMatrix& choi, const HermitianOperator& rho);

/// Success-branch Choi matrix J = C^T x Psi_m + D^T x (1 - Psi_m) with
/// D = (G - C)/(m - 1). Throws if (G, C) is infeasible for the compact primal.
ChoiMatrix extract_protocol(const DistillationInstance& inst,
                            const HermitianOperator& g, const HermitianOperator& c,
                            double tol = 1e-6);

struct ProtocolReport {
  double psd_defect = 0.0;       // negative part of J
  double marginal_defect = 0.0;  // violation of tr_B J <= 1_A
  double class_defect = 0.0;     // worst violated MIO/DIO membership row
  double action_defect = 0.0;    // max |E(rho) - p * target| entrywise

  bool pass(double tol = 1e-6) const {
    return psd_defect <= tol && marginal_defect <= tol && class_defect <= tol &&
           action_defect <= tol;
  }
};

/// Independent checks of cone membership, the subnormalization marginal,
/// class-membership rows and the channel action.
ProtocolReport verify_protocol(const ChoiMatrix& choi, FreeClass cls,
                               const HermitianOperator& rho, double expected_p,
                               const HermitianOperator& expected_target);

}  // namespace coherdist::distill
